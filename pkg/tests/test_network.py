import numpy as np
import pytest

from gainphase import matphase
from gainphase.network import (
    OMEGA0, RL, Branch, GridResponse, HeterogeneousNetworkError,
    IllPosedNetworkError, Load, NetworkError, NetworkModel, Shunt,
    block_diag_stack, branch_admittance, equivalent_network, f_eps,
    f_eps_inv, grid_response, grounded_laplacian, gscr, kron_reduce,
    reduced_b_matrix, rescaled_grid,
)

from oracles import random_net

J = np.array([[0.0, -1.0], [1.0, 0.0]])


def test_branch_laws():
    s0 = np.array(0j)
    np.testing.assert_allclose(branch_admittance(RL(3.0, 0.0), s0), 3 * np.array([[0, 1], [-1, 0]]))
    for w in (0.0, 10.0, 300.0):
        np.testing.assert_allclose(branch_admittance(Load(2.0), 1j * w), 0.5 * np.eye(2))
    C = 1e-3
    np.testing.assert_allclose(branch_admittance(Shunt(C), s0), [[0, -OMEGA0 * C], [OMEGA0 * C, 0]])
    s = 1j * 123.0
    Y = branch_admittance(RL(2.0, 0.1), s)
    np.testing.assert_allclose(Y @ ((s / OMEGA0 + 0.1) * np.eye(2) + J), 2 * np.eye(2), atol=1e-12)


def test_rl_singular_sample_flagged():
    Y = branch_admittance(RL(1.0, 0.0), 1j * OMEGA0)
    assert np.all(np.isnan(Y))


def test_invalid_branches():
    with pytest.raises(NetworkError):
        RL(-1.0)
    with pytest.raises(NetworkError):
        Load(0.0)
    with pytest.raises(NetworkError):
        NetworkModel(2, 1, [Branch(1, 3, RL(1.0))])  # node 2 floats
    with pytest.raises(NetworkError):
        NetworkModel(1, 1, [Branch(1, 1, RL(1.0))])


def test_single_node_laplacian():
    net = NetworkModel(1, 1, [Branch(1, 2, RL(5.0, 0.1))])
    s = 1j * np.array([1.0, 50.0])
    np.testing.assert_allclose(grounded_laplacian(net, s), branch_admittance(RL(5.0, 0.1), s))


def test_ungrounded_pair_is_singular():
    net = NetworkModel(2, 2, [Branch(1, 2, RL(4.0, 0.05))])
    s = 1j * 20.0
    Y = grounded_laplacian(net, s)
    y = branch_admittance(RL(4.0, 0.05), s)
    np.testing.assert_allclose(Y[:2, :2], y)
    np.testing.assert_allclose(Y[:2, 2:], -y)
    np.testing.assert_allclose(Y[:2, :2] + Y[:2, 2:], 0, atol=1e-14)
    assert np.linalg.matrix_rank(Y) == 2


def test_three_node_chain_matches_hand_assembly():
    laws = [RL(2.0, 0.1), RL(3.0, 0.2), Load(4.0)]
    net = NetworkModel(3, 1, [Branch(1, 2, laws[0]), Branch(2, 3, laws[1]), Branch(3, 4, laws[2])])
    s = 1j * 77.0
    y12, y23, y3g = (branch_admittance(l, s) for l in laws)
    Z = np.zeros((2, 2))
    ref = np.block([[y12, -y12, Z], [-y12, y12 + y23, -y23], [Z, -y23, y23 + y3g]])
    np.testing.assert_allclose(grounded_laplacian(net, s), ref)


def test_row_sums_vanish_without_ground(rng):
    net = random_net(rng, 5, 2, extras=False)
    net = net.with_branches(b for b in net.branches if b.to_node != net.ground)
    Y = grounded_laplacian(net, 1j * np.array([3.0, 80.0]))
    blocks = Y.reshape(2, 5, 2, 5, 2).sum(axis=3)
    np.testing.assert_allclose(blocks, 0, atol=1e-12)


def test_kron_no_interior_is_identity(rng):
    net = random_net(rng, 3, 3)
    s = 1j * np.array([5.0, 60.0])
    Y = grounded_laplacian(net, s)
    np.testing.assert_allclose(kron_reduce(Y, 3), Y)


def test_kron_star_series_combination():
    b1, b2 = 4.0, 6.0
    net = NetworkModel(3, 2, [Branch(1, 3, RL(b1)), Branch(2, 3, RL(b2)),
                              Branch(3, 4, Load(1e9))])
    Yr = grid_response(net, 0j).values[0]
    # at s = 0, eps = 0 every RL block is B * [[0, 1], [-1, 0]]
    b12 = b1 * b2 / (b1 + b2)
    np.testing.assert_allclose(-Yr[0:2, 2:4], b12 * np.array([[0, 1], [-1, 0]]), rtol=1e-6, atol=1e-8)


def test_kron_matches_interior_solve(rng):
    net = random_net(rng, 6, 3)
    s = 1j * 41.0
    Y = grounded_laplacian(net, s)
    Yr = kron_reduce(Y, 3)
    U = rng.normal(size=6) + 1j * rng.normal(size=6)
    # interior voltages with no injected interior current: Y3 U + Y4 V = 0
    V = np.linalg.solve(Y[6:, 6:], -Y[6:, :6] @ U)
    I = Y[:6, :6] @ U + Y[:6, 6:] @ V
    np.testing.assert_allclose(Yr @ U, I, rtol=1e-10)


def test_kron_elimination_order_invariance(rng):
    net = random_net(rng, 6, 2)
    Y = grounded_laplacian(net, 1j * 33.0)
    all_at_once = kron_reduce(Y, 2)
    step = Y
    for m in range(5, 1, -1):
        step = kron_reduce(step, m)
    np.testing.assert_allclose(step, all_at_once, rtol=1e-10)
    # eliminate interior nodes in reverse order by permuting them first
    perm = np.r_[0:4, 10:12, 8:10, 6:8, 4:6]
    Yp = Y[np.ix_(perm, perm)]
    np.testing.assert_allclose(kron_reduce(Yp, 2), all_at_once, rtol=1e-10)


def test_floating_interior_is_ill_posed():
    Y = np.zeros((4, 4), dtype=complex)
    Y[:2, :2] = np.eye(2)
    with pytest.raises(IllPosedNetworkError):
        kron_reduce(Y, 1)


def test_reduced_b_matrix_and_gscr():
    net = NetworkModel(1, 1, [Branch(1, 2, RL(5.0))])
    Br = reduced_b_matrix(net)
    np.testing.assert_allclose(Br, [[5.0]])
    assert gscr(Br, [1.0]) == pytest.approx(5.0)
    assert gscr(Br, [2.0]) == pytest.approx(2.5)


def test_identical_rx_factorization(rng):
    eps = 0.1
    net = random_net(rng, 6, 3, eps=eps, extras=False)
    Br = reduced_b_matrix(net)
    s = 1j * np.geomspace(1, 1e4, 9)
    Yg = grid_response(net, s).values
    ref = np.einsum("ij,kab->kiajb", Br, f_eps(s, eps)).reshape(len(s), 6, 6)
    np.testing.assert_allclose(Yg, ref, rtol=1e-10, atol=1e-10)


def test_gscr_dual_formula(rng):
    for _ in range(10):
        A = rng.normal(size=(4, 4))
        Br = A @ A.T + 0.5 * np.eye(4)
        S = rng.uniform(0.5, 2, 4)
        lam = np.min(np.linalg.eigvals(np.diag(1 / S) @ Br).real)
        w = 1 / np.sqrt(S)
        smin = np.linalg.svd(w[:, None] * Br * w[None, :], compute_uv=False)[-1]
        assert gscr(Br, S) == pytest.approx(lam, rel=1e-10)
        assert gscr(Br, S) == pytest.approx(smin, rel=1e-10)


def test_gscr_rejects_floating():
    with pytest.raises(NetworkError):
        gscr(np.array([[1.0, -1.0], [-1.0, 1.0]]))


def test_heterogeneous_rejected(rng):
    net = NetworkModel(2, 1, [Branch(1, 2, RL(3.0, 0.1)), Branch(2, 3, RL(2.0, 0.2))])
    with pytest.raises(HeterogeneousNetworkError):
        reduced_b_matrix(net)
    with pytest.raises(HeterogeneousNetworkError):
        reduced_b_matrix(random_net(rng, 3, 1, eps=0.1, extras=True))


def test_rescaled_identical_rx_is_constant(rng):
    eps = 0.05
    net = random_net(rng, 5, 3, eps=eps, extras=False)
    Br = reduced_b_matrix(net)
    S = np.array([1.0, 2.0, 0.5])
    g = gscr(Br, S)
    s = 1j * np.geomspace(0.5, 3e4, 40)
    Yt = rescaled_grid(grid_response(net, s), S, None, eps)
    w = 1 / np.sqrt(S)
    const = np.kron(w[:, None] * Br * w[None, :], np.eye(2))
    np.testing.assert_allclose(Yt.values, np.broadcast_to(const, Yt.values.shape), atol=1e-10 * g)
    smin = matphase.batch_gains(Yt.values)[:, -1]
    np.testing.assert_allclose(smin, g, rtol=1e-10)
    sect, phis, _ = matphase.batch_phases(Yt.values)
    assert sect.all()
    np.testing.assert_allclose(phis, 0, atol=1e-9)


def test_rescaled_heterogeneous_varies(rng):
    net = NetworkModel(2, 1, [Branch(1, 2, RL(5.0, 0.05)), Branch(2, 3, RL(8.0, 0.3))])
    s = 1j * np.geomspace(1, 1e4, 30)
    Yt = rescaled_grid(grid_response(net, s), None, None, 0.175)
    smin = matphase.batch_gains(Yt.values)[:, -1]
    assert np.ptp(smin) > 1e-3
    Yneg = rescaled_grid(grid_response(net, -s), None, None, 0.175)
    np.testing.assert_allclose(Yneg.values, np.conj(Yt.values), rtol=1e-12)


def test_realness_symmetry(rng):
    net = random_net(rng, 5, 2)
    s = 1j * np.array([3.0, 90.0, 700.0])
    np.testing.assert_allclose(grid_response(net, -s).values, np.conj(grid_response(net, s).values))


def test_passive_rl_network(rng):
    net = random_net(rng, 5, 3, eps=0.1, extras=False)
    s = 1j * np.geomspace(0.1, 1e4, 50)
    s = s[np.abs(s.imag - OMEGA0) > 1]
    Y = grid_response(net, s).values
    herm = (Y + np.conj(np.swapaxes(Y, -1, -2))) / 2
    assert np.linalg.eigvalsh(herm).min() > -1e-9


def test_equivalent_network_empty_is_identity(rng):
    net = random_net(rng, 4, 2)
    Yg = grid_response(net, 1j * np.array([1.0, 10.0]))
    np.testing.assert_allclose(equivalent_network(Yg, []).values, Yg.values)


def test_equivalent_network_determinant_identity(rng):
    """det(Yc2 + Yg4) det(Yc1 + YgridC) det(Ygrid^-1) == det(Yc Ygrid^-1 + I)."""
    worst = 0.0
    for _ in range(10):
        N = int(rng.integers(2, 5))
        k = int(rng.integers(1, N))
        net = random_net(rng, N + 2, N)
        s = rng.normal(size=20) * 50 + 1j * rng.normal(size=20) * 300
        Yg = grid_response(net, s)
        Yc = block_diag_stack([rng.normal(size=(20, 2, 2)) + 1j * rng.normal(size=(20, 2, 2))
                               for _ in range(N)])
        r = 2 * (N - k)
        Yeq = equivalent_network(Yg, Yc[:, r:, r:])
        lhs = (np.linalg.det(Yc[:, r:, r:] + Yg.values[:, r:, r:])
               * np.linalg.det(Yc[:, :r, :r] + Yeq.values)
               / np.linalg.det(Yg.values))
        rhs = np.linalg.det(Yc @ np.linalg.inv(Yg.values) + np.eye(2 * N))
        worst = max(worst, np.max(np.abs(lhs - rhs) / np.abs(rhs)))
    assert worst < 1e-8


def test_reorder_and_drop_devices():
    net = NetworkModel(4, 3, [Branch(1, 4, RL(1.0)), Branch(2, 4, RL(2.0)),
                              Branch(3, 4, RL(3.0)), Branch(4, 5, RL(4.0))])
    r = net.reorder_devices([3, 1, 2])
    assert [b.from_node for b in r.branches] == [2, 3, 1, 4]
    d = net.drop_devices([1])
    assert d.N == 2
    assert [b.from_node for b in d.branches] == [3, 1, 2, 4]
    Yd = grid_response(d, 1j * 5.0).values
    assert Yd.shape == (1, 4, 4)
