import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gainphase.matphase import (
    Verdict, batch_phases, check_mixed_lemma, min_hermitian_eig, phases,
    sectoriality, singular_values,
)
from oracles import random_sectorial, support_angles, wrap_diff


def test_gains_identity_and_diagonal():
    np.testing.assert_allclose(singular_values(np.eye(2)), [1, 1])
    np.testing.assert_allclose(singular_values(np.diag([3.0, 1.0])), [3, 1])
    np.testing.assert_allclose(singular_values(np.diag([1.0, 3.0])), [3, 1])


def test_gains_match_eig_of_gram(rng):
    A = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    ref = np.sqrt(np.sort(np.linalg.eigvalsh(A.conj().T @ A))[::-1])
    np.testing.assert_allclose(singular_values(A), ref, rtol=1e-10)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        singular_values(np.array([[np.nan, 0], [0, 1]]))
    with pytest.raises(ValueError):
        phases(np.array([[np.inf, 0], [0, 1]]))


def test_sectoriality_examples():
    assert abs(wrap_diff(sectoriality(np.eye(2)), 0.0)) < 1e-6
    assert sectoriality(np.diag([1.0, -1.0])) is None
    g = sectoriality(np.diag([1.0, 1j]))
    assert g is not None
    assert min_hermitian_eig(np.diag([1.0, 1j]), g) > 0
    # the pi/4 rotation named for this case is feasible as well
    assert min_hermitian_eig(np.diag([1.0, 1j]), np.pi / 4) > 0


def test_phase_examples():
    np.testing.assert_allclose(phases(np.eye(3)).phis, 0, atol=1e-12)
    d = np.diag([np.exp(1j * np.pi / 6), np.exp(-1j * np.pi / 6)])
    np.testing.assert_allclose(phases(d).phis, [np.pi / 6, -np.pi / 6], atol=1e-12)
    assert not phases(np.diag([1.0, -1.0])).sectorial


def test_scalar_case():
    ps = phases(np.array([[-2.0 + 1e-3j]]))
    assert ps.sectorial
    np.testing.assert_allclose(ps.phis, [np.angle(-2.0 + 1e-3j)])
    np.testing.assert_allclose(singular_values([[3 - 4j]]), [5])


def test_phases_match_support_angles(rng):
    for p in (2, 3, 4):
        for _ in range(10):
            A = random_sectorial(rng, p)
            ps = phases(A)
            lo, hi = support_angles(A)
            assert abs(wrap_diff(ps.phi_max, hi)) < 1e-6
            assert abs(wrap_diff(ps.phi_min, lo)) < 1e-6
            assert ps.phi_max - ps.phi_min < np.pi
            assert -np.pi < (ps.phi_max + ps.phi_min) / 2 <= np.pi


def test_rotation_shifts_phases_keeps_gains(rng):
    A = random_sectorial(rng, 3, spread=1.0)
    alpha = 0.7
    p0, p1 = phases(A), phases(np.exp(1j * alpha) * A)
    np.testing.assert_allclose(wrap_diff(p1.phis, p0.phis + alpha), 0, atol=1e-9)
    np.testing.assert_allclose(singular_values(np.exp(1j * alpha) * A),
                               singular_values(A), rtol=1e-12)


def test_congruence_preserves_sectoriality(rng):
    for _ in range(20):
        T = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        A = random_sectorial(rng, 3)
        assert sectoriality(T.conj().T @ A @ T) is not None
        N = np.diag([1.0, -1.0, 0.5 + 0.5j])
        assert sectoriality(T.conj().T @ N @ T) is None


def test_eigenvalues_within_phase_interval(rng):
    for _ in range(20):
        A = random_sectorial(rng, 4)
        ps = phases(A)
        mid = (ps.phi_max + ps.phi_min) / 2
        ang = mid + wrap_diff(np.angle(np.linalg.eigvals(A)), mid)
        assert np.all(ang <= ps.phi_max + 1e-9)
        assert np.all(ang >= ps.phi_min - 1e-9)


def test_inverse_antisymmetry(rng):
    for _ in range(20):
        A = random_sectorial(rng, 3)
        pa, pi_ = phases(A), phases(np.linalg.inv(A))
        np.testing.assert_allclose(pi_.phis, -pa.phis[::-1], atol=1e-8)


def test_commuting_rotation_structure():
    def rot_like(a, b):
        return np.array([[a, -b], [b, a]], dtype=complex)

    X = rot_like(1.0 + 0.3j, 0.4 - 0.2j)
    Y = rot_like(0.5 - 0.1j, -0.8 + 0.6j)
    np.testing.assert_allclose(X @ Y, Y @ X, atol=1e-14)
    px, py = phases(X @ Y), phases(Y @ X)
    assert px.sectorial == py.sectorial
    if px.sectorial:
        np.testing.assert_allclose(px.phis, py.phis, atol=1e-12)


def test_mixed_lemma_examples():
    assert check_mixed_lemma(0.5 * np.eye(2), np.eye(2)) is Verdict.GAIN_OK
    assert check_mixed_lemma(2 * np.eye(2), np.eye(2)) is Verdict.PHASE_OK
    G = np.diag([2 * np.exp(2j), 2 * np.exp(-2j)])
    # W(G) is the chord between 2e^{2j} and 2e^{-2j}: it misses the origin,
    # so G is sectorial with phases {2, 2*pi - 2}; the phase sum with H = I
    # then exceeds pi and neither branch applies.
    pg = phases(G)
    assert pg.sectorial
    np.testing.assert_allclose(pg.phis, [2 * np.pi - 2, 2], atol=1e-9)
    assert check_mixed_lemma(G, np.eye(2)) is Verdict.UNDECIDED
    with pytest.raises(ValueError):
        check_mixed_lemma(np.eye(2), np.eye(3))


def test_mixed_lemma_margin_is_strict():
    # gain product exactly one is not certified by the gain branch
    G = np.diag([1.0, -1.0])
    assert check_mixed_lemma(G, np.eye(2)) is Verdict.UNDECIDED


def test_mixed_lemma_implies_no_unit_feedback_singularity(rng):
    # det(I + tau G H) != 0 for tau in [0, 1] whenever a branch certifies
    for _ in range(200):
        G = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        H = random_sectorial(rng, 2)
        if check_mixed_lemma(G, H) is Verdict.UNDECIDED:
            continue
        ev = np.linalg.eigvals(G @ H)
        # -1/tau for tau in (0, 1] is the ray (-inf, -1]
        on_ray = (np.abs(ev.imag) < 1e-9) & (ev.real <= -1 + 1e-9)
        assert not on_ray.any()


def test_batch_matches_scalar(rng):
    As = np.stack([random_sectorial(rng, 3) for _ in range(6)]
                  + [np.diag([1.0, -1.0, 2.0]).astype(complex)])
    sect, phis, _ = batch_phases(As)
    for k, A in enumerate(As):
        ps = phases(A)
        assert sect[k] == ps.sectorial
        if ps.sectorial:
            np.testing.assert_allclose(phis[k], ps.phis, atol=1e-12)


complex_entry = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(complex_entry, min_size=4, max_size=4), st.floats(-3, 3))
def test_property_rotation_invariance_of_sectoriality(entries, alpha):
    A = np.array(entries).reshape(2, 2)
    if np.linalg.norm(A) < 1e-3:
        return
    s0 = phases(A)
    s1 = phases(np.exp(1j * alpha) * A)
    margin = np.max(min_hermitian_eig(A, np.linspace(0, 2 * np.pi, 720, endpoint=False)))
    if abs(margin) < 1e-6 * np.linalg.norm(A):
        return  # boundary case, verdict legitimately tolerance-dependent
    assert s0.sectorial == s1.sectorial
    if s0.sectorial:
        np.testing.assert_allclose(wrap_diff(s1.phis, s0.phis + alpha), 0, atol=1e-7)
