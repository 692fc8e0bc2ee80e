"""Shared device-model machinery.

A parametric device is described by a small nonlinear model object exposing

* ``n_states``
* ``rhs(x, u)``      -- state derivative, ``u`` is the terminal dq voltage
* ``output(x, u)``   -- current *drawn* from the terminal, ``-[I_d, I_q]``
* ``initial_guess(op)`` -- equilibrium estimate from phasor calculations

all in the device's local per-unit dq frame.  :func:`linearize` turns it
into a :class:`StateSpace` whose transfer matrix is the admittance
``Y_C(s) = C (sI - A)^-1 B + D``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from ..network import OMEGA0, f_eps_inv, rot2

__all__ = [
    "OperatingPoint", "StateSpace", "DeviceAdmittance", "DeviceModelError",
    "EquilibriumError", "RangeError", "linearize", "solve_equilibrium",
    "rotate_to_global", "rescale_device", "load_tabulated", "read_tabulated_csv",
    "write_tabulated_csv", "TABULATED_COLUMNS",
]

TABULATED_COLUMNS = ["freq_hz", "re_dd", "im_dd", "re_dq", "im_dq",
                     "re_qd", "im_qd", "re_qq", "im_qq"]


class DeviceModelError(ValueError):
    pass


class EquilibriumError(DeviceModelError):
    pass


class RangeError(DeviceModelError):
    """Tabulated response queried outside its frequency range."""


@dataclass(frozen=True)
class OperatingPoint:
    """Steady state seen at the device terminal (local frame, per unit).

    ``P0``/``Q0`` are delivered to the terminal bus whose voltage magnitude
    is ``V0``; ``theta_i`` is the angle of the local dq frame with respect
    to the global one.
    """

    V0: float = 1.0
    P0: float = 1.0
    Q0: float = 0.0
    theta_i: float = 0.0
    omega0: float = OMEGA0

    def __post_init__(self):
        if not self.V0 > 0:
            raise DeviceModelError(f"V0 must be positive, got {self.V0}")
        if not self.omega0 > 0:
            raise DeviceModelError(f"omega0 must be positive, got {self.omega0}")

    @property
    def u0(self):
        return np.array([self.V0, 0.0])


@dataclass(frozen=True)
class StateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    @property
    def n_states(self):
        return self.A.shape[0]

    def poles(self):
        return np.linalg.eigvals(self.A) if self.n_states else np.empty(0, complex)

    def is_stable(self, tol=0.0):
        return bool(np.all(self.poles().real < -tol))

    def response(self, s):
        """Transfer matrix stacked over ``s``; NaN where ``sI - A`` is singular."""
        s = np.asarray(s, dtype=complex)
        flat = s.reshape(-1)
        n = self.n_states
        out = np.broadcast_to(self.D.astype(complex), flat.shape + self.D.shape).copy()
        if n:
            M = flat[:, None, None] * np.eye(n) - self.A
            try:
                X = np.linalg.solve(M, np.broadcast_to(self.B, (flat.size,) + self.B.shape))
                out += self.C @ X
            except np.linalg.LinAlgError:
                for k in range(flat.size):
                    try:
                        out[k] += self.C @ np.linalg.solve(M[k], self.B)
                    except np.linalg.LinAlgError:
                        out[k] = np.nan
        return out.reshape(s.shape + self.D.shape)


def _jacobian(fun, x0, h_rel=1e-6):
    x0 = np.asarray(x0, dtype=float)
    f0 = np.asarray(fun(x0))
    Jm = np.empty((f0.size, x0.size))
    for k in range(x0.size):
        h = h_rel * max(1.0, abs(x0[k]))
        xp, xm = x0.copy(), x0.copy()
        xp[k] += h
        xm[k] -= h
        Jm[:, k] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2 * h)
    return Jm


def solve_equilibrium(model, u0, x_init, max_iter=50, tol=1e-10):
    """Damped Newton iteration on ``model.rhs(x, u0) = 0``."""
    x = np.array(x_init, dtype=float)
    f = lambda z: model.rhs(z, u0)
    r = f(x)
    for _ in range(max_iter):
        nr = np.linalg.norm(r, np.inf)
        if nr < tol:
            return x
        Jm = _jacobian(f, x)
        try:
            dx = np.linalg.lstsq(Jm, -r, rcond=None)[0]
        except np.linalg.LinAlgError as exc:
            raise EquilibriumError("singular Jacobian in equilibrium solve") from exc
        t = 1.0
        while t > 1e-4:
            xn = x + t * dx
            rn = f(xn)
            if np.linalg.norm(rn, np.inf) < nr:
                break
            t /= 2
        x, r = xn, rn
    if np.linalg.norm(r, np.inf) < 1e-8:
        return x
    raise EquilibriumError(
        f"equilibrium not found after {max_iter} iterations "
        f"(residual {np.linalg.norm(r, np.inf):.3g})")


def linearize(model, op, x0=None, residual_tol=1e-8):
    """Central-difference linearization of ``model`` at operating point ``op``.

    When ``x0`` is omitted the equilibrium is found by damped Newton starting
    from ``model.initial_guess(op)``.  Returns ``(StateSpace, x0)``.
    """
    u0 = op.u0
    if x0 is None:
        x0 = solve_equilibrium(model, u0, model.initial_guess(op))
    x0 = np.asarray(x0, dtype=float)
    res = np.linalg.norm(model.rhs(x0, u0), np.inf)
    if res > residual_tol:
        raise EquilibriumError(f"operating point is not an equilibrium (residual {res:.3g})")
    A = _jacobian(lambda x: model.rhs(x, u0), x0)
    B = _jacobian(lambda u: model.rhs(x0, u), u0)
    C = _jacobian(lambda x: model.output(x, u0), x0)
    D = _jacobian(lambda u: model.output(x0, u), u0)
    return StateSpace(A, B, C, D), x0


@dataclass
class DeviceAdmittance:
    """Small-signal admittance of one device in its local per-unit frame.

    Exactly one of ``ss`` (a realization) or ``table`` (tabulated samples,
    see :func:`load_tabulated`) is set.  ``S`` is the capacity ratio and
    ``theta`` the local-frame angle; ``kind`` is one of ``GFL``, ``GFM``,
    ``SG``, ``tabulated`` or ``passive``.
    """

    device_id: str
    kind: str
    S: float = 1.0
    theta: float = 0.0
    ss: StateSpace = None
    table: tuple = None
    open_loop_stable: bool = None
    x0: np.ndarray = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.S > 0:
            raise DeviceModelError(f"capacity ratio must be positive, got {self.S}")
        if (self.ss is None) == (self.table is None):
            raise DeviceModelError("need exactly one of a realization or a table")
        if self.open_loop_stable is None and self.ss is not None:
            self.open_loop_stable = self.ss.is_stable()

    @property
    def is_grid_forming(self):
        return self.kind in ("GFM", "SG")

    def response(self, s):
        """Local admittance ``Y_C(s)``; tabulated data accept ``s = j*omega`` only."""
        s = np.asarray(s, dtype=complex)
        if self.ss is not None:
            return self.ss.response(s)
        return _interp_table(self.table, s)

    def global_response(self, s):
        """``S e^{J theta} Y_C(s) e^{-J theta}`` as seen by the network."""
        return rotate_to_global(self, s)

    def with_(self, **changes):
        from dataclasses import replace
        return replace(self, **changes)


def rotate_to_global(d, s):
    R = rot2(d.theta)
    return d.S * (R @ d.response(s) @ R.T)


def rescale_device(d, D_i=1.0, eps_tilde=0.0, s=None, omega0=OMEGA0):
    """Rescaled local admittance ``D_i Y_C(s) Ft_eps(s)^-1``."""
    if not D_i > 0:
        raise DeviceModelError(f"rescaling factor must be positive, got {D_i}")
    return D_i * d.response(s) @ f_eps_inv(s, eps_tilde, omega0)


def load_tabulated(samples, device_id="tab", S=1.0, theta=0.0, open_loop_stable=None):
    """Device from ``(freq_hz, 2x2 matrix)`` samples, log-frequency interpolated."""
    freqs = np.array([float(f) for f, _ in samples])
    mats = np.array([np.asarray(m, dtype=complex).reshape(2, 2) for _, m in samples])
    if freqs.size < 2:
        raise DeviceModelError("need at least two tabulated samples")
    if np.any(np.diff(freqs) <= 0):
        raise DeviceModelError("tabulated frequencies must be strictly increasing")
    if freqs[0] < 0 or (freqs[0] == 0 and freqs.size < 3):
        raise DeviceModelError("tabulated frequencies must be positive")
    if not np.all(np.isfinite(mats)):
        raise DeviceModelError("tabulated response has non-finite entries")
    return DeviceAdmittance(device_id, "tabulated", S=S, theta=theta,
                            table=(freqs, mats), open_loop_stable=open_loop_stable)


def _interp_table(table, s):
    freqs, mats = table
    if np.any(np.abs(s.real) > 0):
        raise DeviceModelError("tabulated responses are only defined on the imaginary axis")
    w = s.imag
    f = np.abs(w) / (2 * np.pi)
    lo, hi = freqs[0], freqs[-1]
    tol = 1e-12 * hi
    if np.any(f < lo - tol) or np.any(f > hi + tol):
        raise RangeError(f"query outside tabulated range [{lo:g}, {hi:g}] Hz")
    f = np.clip(f, lo, hi)
    if lo > 0:
        xs, xq = np.log(freqs), np.log(f)
    else:
        xs, xq = freqs, f
    flat = xq.reshape(-1)
    out = np.empty(flat.shape + (2, 2), dtype=complex)
    for a in range(2):
        for b in range(2):
            out[:, a, b] = (np.interp(flat, xs, mats[:, a, b].real)
                            + 1j * np.interp(flat, xs, mats[:, a, b].imag))
    out = out.reshape(w.shape + (2, 2))
    neg = w < 0
    if np.any(neg):
        out[neg] = np.conj(out[neg])
    return out


def read_tabulated_csv(path, **kwargs):
    """Read a tabulated admittance CSV (columns :data:`TABULATED_COLUMNS`)."""
    samples = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(TABULATED_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise DeviceModelError(f"{path}: missing columns {sorted(missing)}")
        for row in reader:
            v = {k: float(row[k]) for k in TABULATED_COLUMNS}
            m = [[v["re_dd"] + 1j * v["im_dd"], v["re_dq"] + 1j * v["im_dq"]],
                 [v["re_qd"] + 1j * v["im_qd"], v["re_qq"] + 1j * v["im_qq"]]]
            samples.append((v["freq_hz"], m))
    return load_tabulated(samples, **kwargs)


def write_tabulated_csv(path, freq_hz, mats):
    mats = np.asarray(mats)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TABULATED_COLUMNS)
        for f, m in zip(freq_hz, mats):
            w.writerow([repr(float(f))] + [repr(float(x)) for z in m.reshape(-1)
                                           for x in (z.real, z.imag)])
