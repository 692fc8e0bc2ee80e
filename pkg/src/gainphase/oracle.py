"""Ground truth for small-signal stability at desk scale.

The closed loop is assembled as a descriptor system ``E z' = A z`` whose
unknowns are the device states, the RL branch currents and the node
voltages.  Nodes without a shunt capacitor give algebraic rows (``E = 0``);
the finite generalized eigenvalues of ``(A, E)`` are the closed-loop modes.
A generalized Nyquist winding count of ``det(I + Y_C Y_grid^-1)`` is
provided as an independent check, and :func:`charpoly_identity` evaluates
the determinant factorization behind the two-stage analysis.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .network import (
    RL, Load, Shunt, block_diag_stack, equivalent_network, grid_response, rot2,
)

__all__ = [
    "ClosedLoopModel", "ClosedLoopResult", "OracleError", "AlgebraicLoopError",
    "assemble_closed_loop", "closed_loop_eigs", "nyquist_winding", "loop_gain",
    "loop_determinant", "charpoly_identity", "write_eigs_csv",
]

STRUCTURAL_TOL = 1e-7
LAMBDA_MAX = 1e7          # generalized eigenvalues beyond this are treated as infinite
J = np.array([[0.0, -1.0], [1.0, 0.0]])


class OracleError(RuntimeError):
    pass


class AlgebraicLoopError(OracleError):
    """The interconnection has no well-defined solution (singular pencil)."""


@dataclass
class ClosedLoopModel:
    A: np.ndarray
    E: np.ndarray
    index: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.A.shape[0]


@dataclass
class ClosedLoopResult:
    eigs: np.ndarray
    structural: np.ndarray
    model: ClosedLoopModel

    @property
    def stable(self):
        return bool(np.all(self.eigs.real < 0))

    @property
    def max_real(self):
        return float(self.eigs.real.max()) if self.eigs.size else -np.inf

    def dominant(self):
        """Eigenvalue with the largest real part (upper half-plane member)."""
        if not self.eigs.size:
            return None
        k = np.argmax(self.eigs.real + 1e-12 * np.sign(self.eigs.imag))
        return self.eigs[k]


def assemble_closed_loop(devices, net):
    """Descriptor realization of ``devices`` (node order ``1..N``) on ``net``."""
    if len(devices) != net.N:
        raise OracleError(f"expected {net.N} devices, got {len(devices)}")
    for d in devices:
        if d.ss is None:
            raise OracleError(f"device {d.device_id!r} has no state-space realization")
    w0 = net.omega0
    rl = [b for b in net.branches if isinstance(b.law, RL)]
    nx = [d.ss.n_states for d in devices]
    off_x = np.concatenate([[0], np.cumsum(nx)]).astype(int)
    off_i = off_x[-1]
    off_v = off_i + 2 * len(rl)
    n = off_v + 2 * net.M
    A = np.zeros((n, n))
    E = np.zeros((n, n))

    def vslice(node):
        k = off_v + 2 * (node - 1)
        return slice(k, k + 2)

    for k, d in enumerate(devices):
        R = rot2(d.theta)
        xs = slice(off_x[k], off_x[k + 1])
        vs = vslice(k + 1)
        E[xs, xs] = np.eye(nx[k])
        A[xs, xs] = d.ss.A
        A[xs, vs] = d.ss.B @ R.T
        # KCL: current drawn by the device leaves the node
        A[vs, xs] -= d.S * R @ d.ss.C
        A[vs, vs] -= d.S * R @ d.ss.D @ R.T

    for k, br in enumerate(rl):
        cs = slice(off_i + 2 * k, off_i + 2 * k + 2)
        B, eps = br.law.B, br.law.eps
        E[cs, cs] = np.eye(2)
        A[cs, cs] = -w0 * (eps * np.eye(2) + J)
        for node, sign in ((br.from_node, 1.0), (br.to_node, -1.0)):
            if node == net.ground:
                continue
            A[cs, vslice(node)] += sign * w0 * B * np.eye(2)
            A[vslice(node), cs] -= sign * np.eye(2)

    for br in net.branches:
        if isinstance(br.law, RL):
            continue
        node = br.from_node if br.to_node == net.ground else br.to_node
        vs = vslice(node)
        if isinstance(br.law, Load):
            A[vs, vs] -= np.eye(2) / br.law.R
        elif isinstance(br.law, Shunt):
            E[vs, vs] += br.law.C * np.eye(2)
            A[vs, vs] -= w0 * br.law.C * J

    index = {"devices": [(int(off_x[k]), int(off_x[k + 1])) for k in range(len(devices))],
             "branch_currents": (int(off_i), int(off_v)),
             "voltages": (int(off_v), int(n))}
    return ClosedLoopModel(A, E, index)


def _check_regular(model, rng=None):
    rng = np.random.default_rng(0) if rng is None else rng
    for lam in rng.normal(size=2) + 1j * rng.normal(size=2):
        P = model.A - lam * model.E
        sv = np.linalg.svd(P, compute_uv=False)
        if sv[-1] > 1e-10 * sv[0]:
            return
    raise AlgebraicLoopError("closed-loop pencil is singular: the interconnection "
                             "has an algebraic loop or a floating subnetwork")


def closed_loop_eigs(devices, net, structural_tol=STRUCTURAL_TOL):
    """Finite closed-loop eigenvalues of ``devices`` interconnected through ``net``.

    Eigenvalues with ``|lambda| < structural_tol`` (rotational invariance of
    grid-forming groups) are returned separately in ``structural``.
    """
    model = assemble_closed_loop(devices, net)
    _check_regular(model)
    if model.n == 0:
        return ClosedLoopResult(np.empty(0, complex), np.empty(0, complex), model)
    # balance the pencil so that per-unit rows with w0 factors do not dominate
    scale = np.maximum(np.abs(model.A).max(axis=1), np.abs(model.E).max(axis=1))
    scale[scale == 0] = 1.0
    alpha, beta = scipy.linalg.eig(model.A / scale[:, None], model.E / scale[:, None],
                                   right=False, homogeneous_eigvals=True)
    finite = np.abs(beta) * LAMBDA_MAX > np.abs(alpha)
    lam = alpha[finite] / beta[finite]
    struct = np.abs(lam) < structural_tol
    order = np.argsort(-lam[~struct].real)
    return ClosedLoopResult(lam[~struct][order], lam[struct], model)


def loop_gain(devices, net):
    """Callable ``s -> Y_C(s) Y_grid(s)^-1`` (global frame, S-scaled)."""
    def L(s):
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        Yg = grid_response(net, s).values
        Yc = block_diag_stack([d.global_response(s) for d in devices])
        return np.swapaxes(np.linalg.solve(np.swapaxes(Yg, -1, -2),
                                           np.swapaxes(Yc, -1, -2)), -1, -2)
    return L


def loop_determinant(devices, net, s):
    """``det(I + Y_C Y_grid^-1)`` at Laplace points ``s`` (global frame, S-scaled)."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    Yg = grid_response(net, s).values
    if devices:
        Yc = block_diag_stack([d.global_response(s) for d in devices])
    else:
        Yc = np.zeros_like(Yg)
    n = Yg.shape[-1]
    Lt = np.linalg.solve(np.swapaxes(Yg, -1, -2), np.swapaxes(Yc, -1, -2))
    return np.linalg.det(np.eye(n) + np.swapaxes(Lt, -1, -2))


def nyquist_winding(L, omega, max_refine=12):
    """Number of closed-loop right-half-plane zeros of ``det(I + L(jw))``.

    ``L`` is a callable returning stacked matrices (or scalars) at ``s``;
    ``omega`` an increasing grid starting at 0 whose last point stands in
    for infinity.  Uses conjugate symmetry, so the count is
    ``-(change of arg over [0, inf)) / pi``.  With open-loop stable ``L``
    this equals the number of unstable closed-loop modes.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1 or omega.size < 2 or np.any(np.diff(omega) <= 0):
        raise OracleError("omega must be an increasing 1-D grid")

    def det_at(w):
        val = np.asarray(L(1j * np.atleast_1d(w)))
        if val.ndim == 1:
            return 1.0 + val
        return np.linalg.det(np.eye(val.shape[-1]) + val)

    vals = det_at(omega)
    if np.any(np.abs(vals) == 0) or not np.all(np.isfinite(vals)):
        raise OracleError("det(I + L) vanishes or is undefined on the grid; perturb the grid")
    pts, dets = list(omega), list(vals)
    total = 0.0
    k = 0
    while k < len(pts) - 1:
        step = np.angle(dets[k + 1] / dets[k])
        depth = 0
        while abs(step) > np.pi / 4 and depth < max_refine:
            wm = 0.5 * (pts[k] + pts[k + 1])
            pts.insert(k + 1, wm)
            dets.insert(k + 1, det_at(wm)[0])
            step = np.angle(dets[k + 1] / dets[k])
            depth += 1
        if abs(step) > np.pi / 2:
            raise OracleError(f"argument of det(I + L) jumps by {step:.3g} rad near "
                              f"omega = {pts[k]:.6g} rad/s even after refinement")
        total += step
        k += 1
    count = -total / np.pi
    r = int(np.round(count))
    if abs(count - r) > 0.25:
        raise OracleError(f"non-integer winding {count:.3f}: grid does not reach "
                          "the high-frequency asymptote")
    return r


def charpoly_identity(devices, net, n_absorbed, s_samples):
    """Worst relative residual of the two-stage determinant factorization.

    The last ``n_absorbed`` devices form ``Y_C{2}``.  Checks, at each ``s``,
    ``det(Y_C{2} + Y_g4) det(Y_C{1} + Y_gridC) / det(Y_grid)
    = det(Y_C Y_grid^-1 + I)``.
    """
    s = np.atleast_1d(np.asarray(s_samples, dtype=complex))
    Yg = grid_response(net, s)
    n_keep = len(devices) - n_absorbed
    blocks = [d.global_response(s) for d in devices]
    Yc = block_diag_stack(blocks) if blocks else np.zeros_like(Yg.values)
    n = Yg.size
    rhs = np.linalg.det(Yc @ np.linalg.inv(Yg.values) + np.eye(n))
    if n_absorbed == 0:
        lhs = np.linalg.det(Yc + Yg.values) / np.linalg.det(Yg.values)
    else:
        r = 2 * n_keep
        Yc2 = block_diag_stack(blocks[n_keep:])
        eq = equivalent_network(Yg, Yc2)
        Yg4 = Yg.values[..., r:, r:]
        d2 = np.linalg.det(Yc2 + Yg4)
        if n_keep:
            d1 = np.linalg.det(block_diag_stack(blocks[:n_keep]) + eq.values)
        else:
            d1 = np.ones(s.shape, dtype=complex)
        lhs = d2 * d1 / np.linalg.det(Yg.values)
    return float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300)))


def write_eigs_csv(path, eigs):
    eigs = np.asarray(eigs, dtype=complex)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "damping_ratio", "freq_hz"])
        for lam in eigs:
            mag = abs(lam)
            zeta = -lam.real / mag if mag > 0 else 1.0
            w.writerow([repr(float(lam.real)), repr(float(lam.imag)),
                        repr(float(zeta)), repr(float(abs(lam.imag) / (2 * np.pi)))])
