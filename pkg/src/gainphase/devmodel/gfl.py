"""Grid-following converter: LCL filter, SRF-PLL, current and power loops.

State vector (local frame, per unit)::

    0:2   i_f    converter-side inductor current
    2:4   v_c    filter capacitor voltage (PLL measurement point)
    4:6   i_g    grid-side inductor current (transformer leakage included)
    6     theta  PLL angle
    7     x_pll  PLL integrator (frequency deviation, rad/s)
    8:10  xi_i   current-loop integrators
    10:12 v_ff   filtered voltage feed-forward (PLL frame)
    12:14 xi_pq  power-loop integrators

The current loop regulates ``i_f`` in the PLL frame; the power loop sets
its reference from ``P`` and ``Q`` measured at the capacitor.
"""

from dataclasses import dataclass, replace

import numpy as np

from ..network import OMEGA0
from .base import DeviceAdmittance, DeviceModelError, OperatingPoint, linearize

__all__ = ["GFLParams", "GFLModel", "gfl_admittance", "lcl_rhs", "lcl_phasors",
           "pll_natural_frequency"]

J = np.array([[0.0, -1.0], [1.0, 0.0]])
PLL_TUNINGS = ("natural", "closed_loop_3db")


def pll_natural_frequency(bw, zeta, tuning="natural"):
    """Natural frequency of the PLL loop for a nominal bandwidth ``bw``.

    ``natural`` uses ``bw`` directly; ``closed_loop_3db`` treats ``bw`` as the
    -3 dB bandwidth of the closed-loop angle tracking response
    ``(2 zeta wn s + wn^2) / (s^2 + 2 zeta wn s + wn^2)``.
    """
    if tuning == "natural":
        return bw
    a = 1 + 2 * zeta ** 2
    return bw / np.sqrt(a + np.sqrt(a * a + 1))


@dataclass(frozen=True)
class GFLParams:
    L_F: float = 0.05
    C_F: float = 0.06
    L_g: float = 0.15
    eps_g: float = 0.0      # R/X of the grid-side inductor
    R_F: float = 0.0
    kp_i: float = 0.3
    ki_i: float = 10.0
    T_vff: float = 0.02
    kp_pq: float = 0.5
    ki_pq: float = 40.0
    pll_bw: float = 40.0
    pll_zeta: float = 1 / np.sqrt(2)
    pll_variant: str = "basic"
    pll_tuning: str = "natural"   # how pll_bw maps to the loop natural frequency

    def __post_init__(self):
        for name in ("L_F", "C_F", "L_g", "pll_bw", "T_vff"):
            if not getattr(self, name) > 0:
                raise DeviceModelError(f"GFL parameter {name} must be positive")
        if self.pll_variant not in ("basic", "normalized_ff"):
            raise DeviceModelError(f"unknown PLL variant {self.pll_variant!r}")
        if self.pll_tuning not in PLL_TUNINGS:
            raise DeviceModelError(f"unknown PLL tuning {self.pll_tuning!r}")

    def with_(self, **changes):
        return replace(self, **changes)


def _to_frame(theta, x):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([c * x[0] + s * x[1], -s * x[0] + c * x[1]])


def _from_frame(theta, x):
    return _to_frame(-theta, x)


def lcl_rhs(p, w0, v_conv, i_f, v_c, i_g, u):
    """Derivatives of (i_f, v_c, i_g) for the LCL filter in a w0-rotating frame."""
    R_g = p.eps_g * p.L_g
    di_f = w0 / p.L_F * (v_conv - v_c - p.R_F * i_f - p.L_F * (J @ i_f))
    dv_c = w0 / p.C_F * (i_f - i_g - p.C_F * (J @ v_c))
    di_g = w0 / p.L_g * (v_c - u - R_g * i_g - p.L_g * (J @ i_g))
    return di_f, dv_c, di_g


def lcl_phasors(p, op):
    """Steady-state phasors (complex) of the LCL filter for power delivered at the bus."""
    U = complex(op.V0, 0.0)
    i_g = np.conj(complex(op.P0, op.Q0) / U)
    v_c = U + complex(p.eps_g * p.L_g, p.L_g) * i_g
    i_f = i_g + 1j * p.C_F * v_c
    v_conv = v_c + complex(p.R_F, p.L_F) * i_f
    return U, i_g, v_c, i_f, v_conv


def _c2v(z):
    return np.array([z.real, z.imag])


class GFLModel:
    n_states = 14

    def __init__(self, p, op):
        self.p = p
        self.op = op
        U, i_g, v_c, i_f, _ = lcl_phasors(p, op)
        S_c = v_c * np.conj(i_g)
        self.P_ref = S_c.real
        self.Q_ref = S_c.imag
        z = p.pll_zeta
        wn = pll_natural_frequency(p.pll_bw, z, p.pll_tuning)
        if p.pll_variant == "basic":
            self.kp_pll, self.ki_pll = 2 * z * wn / op.V0, wn ** 2 / op.V0
        else:
            self.kp_pll, self.ki_pll = 2 * z * wn, wn ** 2

    def _pll_error(self, vcp):
        if self.p.pll_variant == "basic":
            return vcp[1]
        # magnitude normalisation; rated-frequency feed-forward is the frame itself
        return vcp[1] / np.hypot(vcp[0], vcp[1])

    def rhs(self, x, u):
        p = self.p
        i_f, v_c, i_g = x[0:2], x[2:4], x[4:6]
        theta, x_pll = x[6], x[7]
        xi_i, v_ff, xi_pq = x[8:10], x[10:12], x[12:14]

        vcp = _to_frame(theta, v_c)
        ifp = _to_frame(theta, i_f)
        P = v_c @ i_g
        Q = v_c[1] * i_g[0] - v_c[0] * i_g[1]
        eP, eQ = self.P_ref - P, self.Q_ref - Q
        i_ref = np.array([p.kp_pq * eP + xi_pq[0], -(p.kp_pq * eQ + xi_pq[1])])
        e_i = i_ref - ifp
        v_ref = p.kp_i * e_i + xi_i + v_ff
        v_conv = _from_frame(theta, v_ref)

        err = self._pll_error(vcp)
        di_f, dv_c, di_g = lcl_rhs(p, self.op.omega0, v_conv, i_f, v_c, i_g, u)
        dx = np.empty(14)
        dx[0:2], dx[2:4], dx[4:6] = di_f, dv_c, di_g
        dx[6] = self.kp_pll * err + x_pll
        dx[7] = self.ki_pll * err
        dx[8:10] = p.ki_i * e_i
        dx[10:12] = (vcp - v_ff) / p.T_vff
        dx[12] = p.ki_pq * eP
        dx[13] = p.ki_pq * eQ
        return dx

    def output(self, x, u):
        return -x[4:6]

    def initial_guess(self, op):
        p = self.p
        U, i_g, v_c, i_f, v_conv = lcl_phasors(p, op)
        th = np.angle(v_c)
        rot = np.exp(-1j * th)
        ifp, vcp, vrefp = i_f * rot, v_c * rot, v_conv * rot
        x = np.zeros(14)
        x[0:2], x[2:4], x[4:6] = _c2v(i_f), _c2v(v_c), _c2v(i_g)
        x[6] = th
        x[8:10] = _c2v(vrefp - vcp)
        x[10:12] = _c2v(vcp)
        x[12] = ifp.real
        x[13] = -ifp.imag
        return x


def gfl_admittance(p=None, op=None, device_id="gfl", S=1.0, theta=None):
    """Linearized GFL admittance; ``theta`` defaults to ``op.theta_i``."""
    p = GFLParams() if p is None else p
    op = OperatingPoint() if op is None else op
    model = GFLModel(p, op)
    ss, x0 = linearize(model, op)
    return DeviceAdmittance(device_id, "GFL", S=S,
                            theta=op.theta_i if theta is None else theta,
                            ss=ss, x0=x0, info={"params": p, "op": op})
