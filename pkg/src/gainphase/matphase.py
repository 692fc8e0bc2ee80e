"""Gains and phases of complex matrices and the mixed small gain/phase test.

Gains are singular values.  Phases are defined for *sectorial* matrices,
i.e. matrices whose numerical range ``W(A) = {x* A x : |x| = 1}`` excludes
the origin.  For such a matrix there is a rotation ``gamma`` making
``B = exp(-1j*gamma) A`` strictly accretive (positive definite Hermitian
part); the phases of ``B`` are half the arguments of the eigenvalues of
``B (B*)^-1`` and lie in ``(-pi/2, pi/2)``.

Every public function accepts a single ``(p, p)`` matrix.  The ``batch_*``
helpers accept a stack ``(..., p, p)`` and are what the frequency sweeps use.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "EPS_MARGIN", "EPS_SECTORIAL", "N_SCAN", "Verdict", "PhaseSpectrum",
    "ConditioningError", "singular_values", "sectoriality", "phases",
    "check_mixed_lemma", "batch_gains", "batch_sectoriality", "batch_phases",
    "min_hermitian_eig",
]

#: Slack required on every strict inequality of the feedback tests.
EPS_MARGIN = 1e-9
#: Relative threshold (times the largest singular value) for sectoriality.
EPS_SECTORIAL = 1e-9
#: Number of uniformly spaced rotations scanned before refinement.
N_SCAN = 720

_COND_LIMIT = 1e12
_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class ConditioningError(ArithmeticError):
    """Raised when a sectorial matrix is too ill-conditioned to invert."""


class Verdict(str, Enum):
    GAIN_OK = "GAIN_OK"
    PHASE_OK = "PHASE_OK"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class PhaseSpectrum:
    """Phases of one matrix.

    ``phis`` is sorted descending and empty when the matrix is not
    sectorial; consumers then treat the phase interval as unbounded.
    """

    sectorial: bool
    phis: np.ndarray
    rotation_gamma: float = float("nan")

    @property
    def phi_max(self):
        return float(self.phis[0]) if self.sectorial else np.inf

    @property
    def phi_min(self):
        return float(self.phis[-1]) if self.sectorial else -np.inf


def _as_square(A):
    A = np.asarray(A, dtype=complex)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def _as_stack(A):
    A = np.asarray(A, dtype=complex)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected a stack of square matrices, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix stack has non-finite entries")
    return A


def _hermitian_parts(A):
    # A = X + jY with X, Y Hermitian
    Ah = np.conj(np.swapaxes(A, -1, -2))
    return (A + Ah) / 2, (A - Ah) / 2j


def min_hermitian_eig(A, gamma):
    """Smallest eigenvalue of the Hermitian part of ``exp(-1j*gamma) A``.

    ``A`` may be a stack ``(..., p, p)``; ``gamma`` broadcasts against the
    stack dimensions.
    """
    X, Y = _hermitian_parts(np.asarray(A, dtype=complex))
    g = np.asarray(gamma, dtype=float)[..., None, None]
    H = np.cos(g) * X + np.sin(g) * Y
    return np.linalg.eigvalsh(H)[..., 0]


def batch_gains(A):
    """Singular values of a matrix stack, descending along the last axis."""
    return np.linalg.svd(_as_stack(A), compute_uv=False)


def singular_values(A):
    """Gains of ``A``: its singular values in descending order."""
    return np.linalg.svd(_as_square(A), compute_uv=False)


def _widest_arc_center(feasible):
    """Index of the midpoint of the longest circular run of True values."""
    n = feasible.size
    if feasible.all():
        return 0, n
    start = int(np.argmin(feasible))  # a False entry; runs cannot wrap past it
    rolled = np.roll(feasible, -start)
    best_len, best_mid, run = 0, 0, 0
    for k in range(n + 1):
        if k < n and rolled[k]:
            run += 1
            continue
        if run > best_len:
            best_len, best_mid = run, k - run + (run - 1) / 2.0
        run = 0
    return (best_mid + start) % n, best_len


def _min_eig(H):
    """Smallest eigenvalue of a Hermitian stack; closed form for 2x2."""
    if H.shape[-1] == 2:
        a, d = H[..., 0, 0].real, H[..., 1, 1].real
        return (a + d) / 2 - np.hypot((a - d) / 2, np.abs(H[..., 0, 1]))
    return np.linalg.eigvalsh(H)[..., 0]


def _candidate_rotations(flat, X, Y):
    """Best rotation among the arc midpoints suggested by ``eig(A (A*)^-1)``.

    For a sectorial ``A = T* D T`` these eigenvalues are ``exp(2j phi)``; the
    phase arc is one of the ``p`` arcs between consecutive doubled angles,
    up to a shift by ``pi``.  Returns ``(gamma, margin)`` per matrix.
    """
    n, p = flat.shape[0], flat.shape[-1]
    gamma = np.zeros(n)
    margin = np.full(n, -np.inf)
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(flat)
    ok = np.isfinite(cond) & (cond < _COND_LIMIT)
    if not ok.any():
        return gamma, margin
    A = flat[ok]
    Mt = np.linalg.solve(np.conj(A), np.swapaxes(A, -1, -2))
    alpha = np.sort(np.angle(np.linalg.eigvals(Mt)), axis=-1)
    nxt = np.concatenate([alpha[:, 1:], alpha[:, :1] + 2 * np.pi], axis=-1)
    # arc opposite the gap (alpha_k, alpha_k+1), halved back to phases
    mid = (nxt + alpha + 2 * np.pi) / 4
    cand = np.concatenate([mid, mid + np.pi], axis=-1)         # (m, 2p)
    g = cand[..., None, None]
    lam = _min_eig(np.cos(g) * X[ok][:, None] + np.sin(g) * Y[ok][:, None])
    k = np.argmax(lam, axis=-1)
    rows = np.arange(k.size)
    gamma[ok] = cand[rows, k]
    margin[ok] = lam[rows, k]
    return gamma, margin


def batch_sectoriality(A, n_scan=N_SCAN, tol=EPS_SECTORIAL):
    """Accretive rotations for a stack of matrices.

    Returns ``(gamma, margin)`` arrays over the stack dimensions.  ``gamma``
    lies in ``[0, 2*pi)`` and is NaN where the matrix is not sectorial;
    ``margin`` is the smallest eigenvalue of the Hermitian part of
    ``exp(-1j*gamma) A`` at the returned (or best found) rotation.

    Matrices whose phase-arc midpoint already gives a positive definite
    Hermitian part are settled directly; the rest go through a scan of
    ``n_scan`` rotations refined by golden-section search.
    """
    A = _as_stack(A)
    batch_shape = A.shape[:-2]
    flat = A.reshape((-1,) + A.shape[-2:])
    X, Y = _hermitian_parts(flat)
    smax = np.linalg.svd(flat, compute_uv=False)[:, 0] if flat.shape[0] else np.empty(0)
    thresh = tol * np.maximum(smax, np.finfo(float).tiny)
    gbest, fbest = _candidate_rotations(flat, X, Y)
    todo = ~(fbest > thresh)
    if todo.any():
        g2, f2 = _scan_rotations(X[todo], Y[todo], n_scan)
        gbest[todo], fbest[todo] = g2, f2
    ok = fbest > thresh
    gamma = np.where(ok, np.mod(gbest, 2 * np.pi), np.nan)
    return gamma.reshape(batch_shape), fbest.reshape(batch_shape)


def _scan_rotations(X, Y, n_scan):
    n = X.shape[0]
    grid = 2 * np.pi * np.arange(n_scan) / n_scan
    c = np.cos(grid)[None, :, None, None]
    s = np.sin(grid)[None, :, None, None]
    lam = _min_eig(c * X[:, None] + s * Y[:, None])  # (n, n_scan)

    step = 2 * np.pi / n_scan
    centers = np.empty(n)
    for k in range(n):
        feasible = lam[k] > 0
        if feasible.any():
            mid, _ = _widest_arc_center(feasible)
            centers[k] = mid * step
        else:
            centers[k] = grid[np.argmax(lam[k])]

    # golden-section maximisation of the smallest eigenvalue around each center
    a = centers - step
    b = centers + step
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)

    def f(g):
        gg = g[:, None, None]
        return _min_eig(np.cos(gg) * X + np.sin(gg) * Y)

    f1, f2 = f(x1), f(x2)
    for _ in range(40):
        left = f1 > f2
        b = np.where(left, x2, b)
        a = np.where(left, a, x1)
        xn = np.where(left, b - _GOLDEN * (b - a), a + _GOLDEN * (b - a))
        fn = f(xn)
        x1, x2 = np.where(left, xn, x2), np.where(left, x1, xn)
        f1, f2 = np.where(left, fn, f2), np.where(left, f1, fn)
    gbest = np.where(f1 > f2, x1, x2)
    fbest = np.maximum(f1, f2)

    # keep the scan value if refinement drifted onto a worse point
    scan_best = lam.max(axis=1)
    use_scan = scan_best > fbest
    gbest = np.where(use_scan, grid[np.argmax(lam, axis=1)], gbest)
    fbest = np.where(use_scan, scan_best, fbest)
    return gbest, fbest


def sectoriality(A, n_scan=N_SCAN, tol=EPS_SECTORIAL):
    """Rotation ``gamma`` making ``exp(-1j*gamma) A`` strictly accretive.

    Returns None when ``A`` is not sectorial (``0`` lies in its numerical
    range, up to the tolerance ``tol * sigma_max(A)``).
    """
    A = _as_square(A)
    gamma, _ = batch_sectoriality(A[None], n_scan=n_scan, tol=tol)
    return None if np.isnan(gamma[0]) else float(gamma[0])


def _recenter(phis):
    """Shift each row by a multiple of 2*pi so its midpoint is in (-pi, pi]."""
    mid = (phis[..., :1] + phis[..., -1:]) / 2
    shift = -2 * np.pi * np.ceil((mid - np.pi) / (2 * np.pi))
    return phis + shift


def batch_phases(A, gamma=None):
    """Phases of a stack of matrices.

    Returns ``(sectorial, phis, gamma)``; ``phis`` has shape ``(..., p)``,
    descending along the last axis, NaN-filled where not sectorial.
    """
    A = _as_stack(A)
    if gamma is None:
        gamma, _ = batch_sectoriality(A)
    gamma = np.asarray(gamma, dtype=float)
    sect = ~np.isnan(gamma)
    p = A.shape[-1]
    phis = np.full(A.shape[:-1], np.nan)
    if not sect.any():
        return sect, phis, gamma
    B = np.exp(-1j * gamma[sect])[:, None, None] * A[sect]
    if p == 1:
        ph = np.angle(B[:, 0, :])
    else:
        cond = np.linalg.cond(B)
        if np.any(cond > _COND_LIMIT):
            raise ConditioningError(
                f"sectorial matrix with condition number {cond.max():.3g}")
        # M = B (B*)^-1  <=>  conj(B) M^T = B^T
        Mt = np.linalg.solve(np.conj(B), np.swapaxes(B, -1, -2))
        ev = np.linalg.eigvals(Mt)
        ph = np.angle(ev) / 2
    ph = np.sort(ph, axis=-1)[..., ::-1] + gamma[sect][:, None]
    phis[sect] = _recenter(ph)
    return sect, phis, gamma


def phases(A):
    """Phases of ``A`` (see :class:`PhaseSpectrum`)."""
    A = _as_square(A)
    sect, phis, gamma = batch_phases(A[None])
    if not sect[0]:
        return PhaseSpectrum(False, np.empty(0))
    return PhaseSpectrum(True, phis[0], float(gamma[0]))


def check_mixed_lemma(G, H, eps=EPS_MARGIN):
    """Pointwise mixed small gain / small phase test for ``G # H``.

    GAIN_OK when ``sigma_max(G) sigma_max(H) < 1``; otherwise PHASE_OK when
    both are sectorial and the largest (smallest) phases sum to less than
    ``pi`` (more than ``-pi``); otherwise UNDECIDED.
    """
    G = _as_square(G)
    H = _as_square(H)
    if G.shape != H.shape:
        raise ValueError(f"dimension mismatch: {G.shape} vs {H.shape}")
    if 1.0 - singular_values(G)[0] * singular_values(H)[0] > eps:
        return Verdict.GAIN_OK
    pg, ph = phases(G), phases(H)
    if (pg.sectorial and ph.sectorial
            and np.pi - (pg.phi_max + ph.phi_max) > eps
            and (pg.phi_min + ph.phi_min) + np.pi > eps):
        return Verdict.PHASE_OK
    return Verdict.UNDECIDED
