"""Network admittances: branch laws, grounded Laplacian, Kron reduction.

Nodes are numbered ``1..M``; device nodes come first (``1..N``), interior
nodes follow and the common ground is node ``M + 1``.  Every evaluator takes
the Laplace variable ``s`` (scalar or array); pass ``1j * omega`` for a
frequency response.  Matrix-valued results are stacked along leading axes
matching ``s``.

All quantities are per unit on the system base; ``omega0`` is the nominal
angular frequency of the rotating dq frame.
"""

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "OMEGA0", "RL", "Load", "Shunt", "Branch", "NetworkModel", "GridResponse",
    "NetworkError", "IllPosedNetworkError", "HeterogeneousNetworkError",
    "f_eps", "f_eps_inv", "rot2", "branch_admittance", "grounded_laplacian", "average_eps",
    "kron_reduce", "grid_response", "reduced_b_matrix", "gscr",
    "rescaled_grid", "equivalent_network", "unreliable_mask",
]

OMEGA0 = 2 * np.pi * 50.0
COND_LIMIT = 1e12


class NetworkError(ValueError):
    pass


class IllPosedNetworkError(NetworkError):
    """Interior block of the Laplacian is singular (floating subnetwork)."""


class HeterogeneousNetworkError(NetworkError):
    """Operation requires an identical R/X ratio on every branch."""


@dataclass(frozen=True)
class RL:
    """Series resistor-inductor line: susceptance ``B`` and R/X ratio ``eps``."""
    B: float
    eps: float = 0.0

    def __post_init__(self):
        if not self.B > 0:
            raise NetworkError(f"RL susceptance must be positive, got {self.B}")
        if self.eps < 0:
            raise NetworkError(f"R/X ratio must be non-negative, got {self.eps}")


@dataclass(frozen=True)
class Load:
    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise NetworkError(f"load resistance must be positive, got {self.R}")


@dataclass(frozen=True)
class Shunt:
    C: float

    def __post_init__(self):
        if self.C < 0:
            raise NetworkError(f"shunt capacitance must be non-negative, got {self.C}")


@dataclass(frozen=True)
class Branch:
    from_node: int
    to_node: int
    law: object


@dataclass
class NetworkModel:
    M: int
    N: int
    branches: list
    omega0: float = OMEGA0

    def __post_init__(self):
        self.validate()

    @property
    def ground(self):
        return self.M + 1

    def validate(self):
        if self.N < 0 or self.M < 1 or self.N > self.M:
            raise NetworkError(f"need 0 <= N <= M and M >= 1, got M={self.M}, N={self.N}")
        parent = list(range(self.M + 2))

        def find(k):
            while parent[k] != k:
                parent[k] = parent[parent[k]]
                k = parent[k]
            return k

        for k, br in enumerate(self.branches):
            i, j = br.from_node, br.to_node
            for node in (i, j):
                if not 1 <= node <= self.M + 1:
                    raise NetworkError(f"branches[{k}]: node {node} outside 1..{self.M + 1}")
            if i == j:
                raise NetworkError(f"branches[{k}]: self loop at node {i}")
            if isinstance(br.law, (Load, Shunt)) and self.ground not in (i, j):
                raise NetworkError(f"branches[{k}]: loads and shunts must connect to ground")
            if not isinstance(br.law, (RL, Load, Shunt)):
                raise NetworkError(f"branches[{k}]: unknown branch law {br.law!r}")
            parent[find(i)] = find(j)
        anchors = {find(self.ground)} | {find(d) for d in range(1, self.N + 1)}
        for node in range(self.N + 1, self.M + 1):
            if find(node) not in anchors:
                raise NetworkError(f"interior node {node} is not connected to "
                                   "ground or to a device node")

    def with_branches(self, branches):
        return replace(self, branches=list(branches))

    def reorder_devices(self, order):
        """Renumber device nodes so that old node ``order[k]`` becomes ``k + 1``."""
        order = list(order)
        if sorted(order) != list(range(1, self.N + 1)):
            raise NetworkError(f"order must be a permutation of 1..{self.N}")
        mapping = {old: new + 1 for new, old in enumerate(order)}
        remap = lambda n: mapping.get(n, n)
        return self.with_branches(
            Branch(remap(b.from_node), remap(b.to_node), b.law) for b in self.branches)

    def drop_devices(self, nodes):
        """Turn the given device nodes into interior nodes (nothing attached).

        Remaining device nodes keep their relative order; the dropped nodes
        are placed right after them.
        """
        nodes = set(nodes)
        keep = [k for k in range(1, self.N + 1) if k not in nodes]
        dropped = [k for k in range(1, self.N + 1) if k in nodes]
        net = self.reorder_devices(keep + dropped)
        return replace(net, N=len(keep))

    @property
    def eps_values(self):
        return sorted({b.law.eps for b in self.branches if isinstance(b.law, RL)})


@dataclass
class GridResponse:
    """Network admittance samples ``values[k]`` at Laplace points ``s[k]``."""
    s: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def omega(self):
        return self.s.imag

    @property
    def size(self):
        return self.values.shape[-1]

    def unreliable(self):
        return unreliable_mask(self.values)


def rot2(theta):
    """Rotation ``exp(J theta)`` with ``J = [[0, -1], [1, 0]]``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def f_eps_inv(s, eps, omega0=OMEGA0):
    """``[[s/w0 + eps, -1], [1, s/w0 + eps]]`` stacked over ``s``."""
    a = np.asarray(s, dtype=complex) / omega0 + eps
    out = np.zeros(a.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = a
    out[..., 1, 1] = a
    out[..., 0, 1] = -1
    out[..., 1, 0] = 1
    return out


def f_eps(s, eps, omega0=OMEGA0):
    """Per-unit RL line shape ``F_eps(s)``; NaN where it is singular."""
    a = np.asarray(s, dtype=complex) / omega0 + eps
    det = a * a + 1
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(det == 0, np.nan, 1 / np.where(det == 0, 1, det))
    out = np.zeros(a.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = a * inv
    out[..., 1, 1] = a * inv
    out[..., 0, 1] = inv
    out[..., 1, 0] = -inv
    return out


def branch_admittance(branch, s, omega0=OMEGA0):
    """2x2 admittance of one branch law at ``s``."""
    law = branch.law if isinstance(branch, Branch) else branch
    s = np.asarray(s, dtype=complex)
    if isinstance(law, RL):
        return law.B * f_eps(s, law.eps, omega0)
    if isinstance(law, Load):
        return np.broadcast_to(np.eye(2) / law.R, s.shape + (2, 2)).astype(complex)
    if isinstance(law, Shunt):
        out = np.zeros(s.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = s * law.C
        out[..., 1, 1] = s * law.C
        out[..., 0, 1] = -omega0 * law.C
        out[..., 1, 0] = omega0 * law.C
        return out
    raise NetworkError(f"unknown branch law {law!r}")


def grounded_laplacian(net, s):
    """``2M x 2M`` grounded Laplacian transfer matrix of ``net`` at ``s``."""
    s = np.asarray(s, dtype=complex)
    M = net.M
    Y = np.zeros(s.shape + (2 * M, 2 * M), dtype=complex)
    for br in net.branches:
        y = branch_admittance(br, s, net.omega0)
        i, j = br.from_node - 1, br.to_node - 1
        for a, b in ((i, j), (j, i)):
            if a == M:
                continue
            Y[..., 2 * a:2 * a + 2, 2 * a:2 * a + 2] += y
            if b != M:
                Y[..., 2 * a:2 * a + 2, 2 * b:2 * b + 2] -= y
    return Y


def _schur(Y1, Y2, Y3, Y4):
    if Y4.shape[-1] == 0:
        return Y1.copy()
    try:
        return Y1 - Y2 @ np.linalg.solve(Y4, Y3)
    except np.linalg.LinAlgError as exc:
        raise IllPosedNetworkError(
            "interior block is singular; a subnetwork is floating") from exc


def kron_reduce(Y, N):
    """Eliminate every node after the first ``N`` (2x2 blocks) by Schur complement."""
    Y = np.asarray(Y, dtype=complex)
    k = 2 * N
    return _schur(Y[..., :k, :k], Y[..., :k, k:], Y[..., k:, :k], Y[..., k:, k:])


def unreliable_mask(values):
    """True where a stacked matrix is non-finite or numerically singular."""
    values = np.asarray(values)
    finite = np.all(np.isfinite(values), axis=(-2, -1))
    bad = ~finite
    if finite.any():
        cond = np.full(finite.shape, np.inf)
        cond[finite] = np.linalg.cond(values[finite])
        bad |= cond > COND_LIMIT
    return bad


def grid_response(net, s):
    """Kron-reduced network admittance ``Y_grid(s)`` over the device nodes."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    Yred = kron_reduce(grounded_laplacian(net, s), net.N)
    return GridResponse(s, Yred, {"kind": "Y_grid", "N": net.N})


def susceptance_laplacian(net):
    """Real ``M x M`` grounded Laplacian of line susceptances."""
    Bm = np.zeros((net.M, net.M))
    for br in net.branches:
        if not isinstance(br.law, RL):
            raise HeterogeneousNetworkError(
                "identical-R/X path requires RL branches only "
                f"(found {type(br.law).__name__})")
        i, j = br.from_node - 1, br.to_node - 1
        for a, b in ((i, j), (j, i)):
            if a == net.M:
                continue
            Bm[a, a] += br.law.B
            if b != net.M:
                Bm[a, b] -= br.law.B
    return Bm


def reduced_b_matrix(net):
    """Kron-reduced susceptance Laplacian ``B_r`` of an identical-R/X network."""
    eps = net.eps_values
    Bm = susceptance_laplacian(net)
    if len(eps) > 1:
        raise HeterogeneousNetworkError(f"R/X ratios differ across lines: {eps}")
    N = net.N
    B4 = Bm[N:, N:]
    if B4.size == 0:
        return Bm
    try:
        return Bm[:N, :N] - Bm[:N, N:] @ np.linalg.solve(B4, Bm[N:, :N])
    except np.linalg.LinAlgError as exc:
        raise IllPosedNetworkError("interior susceptance block is singular") from exc


def average_eps(net):
    """Mean R/X ratio over the RL branches (0 without any)."""
    vals = [b.law.eps for b in net.branches if isinstance(b.law, RL)]
    return float(np.mean(vals)) if vals else 0.0


def common_eps(net):
    eps = net.eps_values
    if len(eps) != 1:
        raise HeterogeneousNetworkError(f"R/X ratios differ across lines: {eps}")
    return eps[0]


def gscr(B_r, S=None):
    """Generalized short-circuit ratio ``lambda_min(S^-1 B_r)``."""
    B_r = np.atleast_2d(np.asarray(B_r, dtype=float))
    n = B_r.shape[0]
    S = np.ones(n) if S is None else np.asarray(S, dtype=float)
    S = np.diag(S) if S.ndim == 2 else S
    if np.any(S <= 0):
        raise NetworkError("capacity ratios must be positive")
    w = 1 / np.sqrt(S)
    sym = w[:, None] * B_r * w[None, :]
    lam = np.linalg.eigvalsh((sym + sym.T) / 2)
    if lam[0] <= 0:
        raise NetworkError("B_r is not positive definite (floating network)")
    return float(lam[0])


def _diag_vec(x, n, name):
    x = np.ones(n) if x is None else np.asarray(x, dtype=float)
    x = np.diag(x) if x.ndim == 2 else np.broadcast_to(x, (n,))
    if np.any(x <= 0):
        raise NetworkError(f"{name} must be positive")
    return x


def rescaled_grid(Ygrid, S=None, D=None, eps_tilde=0.0, omega0=OMEGA0):
    """Rescaled network ``(S^-1/2 (x) I) Y (S^-1/2 D (x) Ft^-1)``."""
    n = Ygrid.size // 2
    S = _diag_vec(S, n, "S")
    D = _diag_vec(D, n, "D")
    left = np.repeat(1 / np.sqrt(S), 2)
    Finv = f_eps_inv(Ygrid.s, eps_tilde, omega0)
    right = np.zeros(Ygrid.s.shape + (2 * n, 2 * n), dtype=complex)
    for k in range(n):
        right[..., 2 * k:2 * k + 2, 2 * k:2 * k + 2] = D[k] / np.sqrt(S[k]) * Finv
    vals = left[:, None] * Ygrid.values @ right
    meta = dict(Ygrid.meta, S=S.tolist(), D=D.tolist(), eps_tilde=eps_tilde,
                kind="rescaled " + Ygrid.meta.get("kind", "Y_grid"))
    return GridResponse(Ygrid.s, vals, meta)


def block_diag_stack(blocks):
    """Block-diagonal stack from a list of ``(..., 2, 2)`` stacks."""
    if not blocks:
        raise ValueError("need at least one block")
    lead = blocks[0].shape[:-2]
    n = sum(b.shape[-1] for b in blocks)
    out = np.zeros(lead + (n, n), dtype=complex)
    k = 0
    for b in blocks:
        m = b.shape[-1]
        out[..., k:k + m, k:k + m] = b
        k += m
    return out


def equivalent_network(Ygrid, absorbed):
    """Absorb trailing device nodes into the network.

    ``absorbed`` is a list of devices (anything with ``global_response(s)``)
    or a ready ``(..., 2k, 2k)`` stack ``Y_C{2}(s)``; the absorbed devices
    occupy the last ``k`` device nodes of ``Ygrid``.  Returns
    ``Y_g1 - Y_g2 (Y_C{2} + Y_g4)^-1 Y_g3``.
    """
    if isinstance(absorbed, np.ndarray):
        Yc2 = absorbed
    elif len(absorbed) == 0:
        return GridResponse(Ygrid.s, Ygrid.values.copy(), dict(Ygrid.meta))
    else:
        Yc2 = block_diag_stack([d.global_response(Ygrid.s) for d in absorbed])
    k = Yc2.shape[-1]
    n = Ygrid.size
    if k > n:
        raise NetworkError("more absorbed devices than device nodes")
    r = n - k
    Y = Ygrid.values
    vals = _schur(Y[..., :r, :r], Y[..., :r, r:], Y[..., r:, :r], Y[..., r:, r:] + Yc2)
    meta = dict(Ygrid.meta, kind="Y_gridC", absorbed=k // 2)
    return GridResponse(Ygrid.s, vals, meta)
