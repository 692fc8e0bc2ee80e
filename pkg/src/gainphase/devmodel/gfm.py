"""Grid-forming converter with swing-equation synchronization.

Same LCL filter and inner current loop as the GFL model; the PLL is replaced
by a virtual rotor ``J dw = P_ref - P - D dw``, ``dtheta = w0 dw``, and the
current reference comes from a dq AC-voltage PI that regulates the capacitor
voltage to ``[V_ref, 0]`` in the rotor frame, plus the grid-side current as
feed-forward.

State vector::

    0:2   i_f      2:4  v_c      4:6  i_g
    6     theta    7    dw (pu)
    8:10  xi_v     voltage-loop integrators
    10:12 xi_i     current-loop integrators
    12:14 v_ff     filtered voltage feed-forward
"""

from dataclasses import dataclass, replace

import numpy as np

from .base import DeviceAdmittance, DeviceModelError, OperatingPoint, linearize
from .gfl import _c2v, _from_frame, _to_frame, lcl_phasors, lcl_rhs

__all__ = ["GFMParams", "GFMModel", "gfm_admittance"]

FEEDFORWARD = ("output_current", "none")


@dataclass(frozen=True)
class GFMParams:
    L_F: float = 0.05
    C_F: float = 0.06
    L_g: float = 0.15
    eps_g: float = 0.1      # R/X of the grid-side inductor; 0 leaves an undamped mode at w0
    R_F: float = 0.0
    kp_i: float = 0.3
    ki_i: float = 10.0
    T_vff: float = 0.02
    kp_v: float = 2.0
    ki_v: float = 10.0
    J_v: float = 2.0
    D_v: float = 50.0
    current_ff: str = "output_current"

    def __post_init__(self):
        for name in ("L_F", "C_F", "L_g", "T_vff", "J_v", "D_v"):
            if not getattr(self, name) > 0:
                raise DeviceModelError(f"GFM parameter {name} must be positive")
        if self.current_ff not in FEEDFORWARD:
            raise DeviceModelError(f"unknown current feed-forward {self.current_ff!r}")

    def with_(self, **changes):
        return replace(self, **changes)


class GFMModel:
    n_states = 14

    def __init__(self, p, op):
        self.p = p
        self.op = op
        _, i_g, v_c, _, _ = lcl_phasors(p, op)
        self.P_ref = (v_c * np.conj(i_g)).real
        self.V_ref = abs(v_c)

    def rhs(self, x, u):
        p = self.p
        i_f, v_c, i_g = x[0:2], x[2:4], x[4:6]
        theta, dw = x[6], x[7]
        xi_v, xi_i, v_ff = x[8:10], x[10:12], x[12:14]

        vcp = _to_frame(theta, v_c)
        ifp = _to_frame(theta, i_f)
        P = v_c @ i_g
        e_v = np.array([self.V_ref, 0.0]) - vcp
        i_ref = p.kp_v * e_v + xi_v
        if p.current_ff == "output_current":
            i_ref = i_ref + _to_frame(theta, i_g)
        e_i = i_ref - ifp
        v_conv = _from_frame(theta, p.kp_i * e_i + xi_i + v_ff)

        di_f, dv_c, di_g = lcl_rhs(p, self.op.omega0, v_conv, i_f, v_c, i_g, u)
        dx = np.empty(14)
        dx[0:2], dx[2:4], dx[4:6] = di_f, dv_c, di_g
        dx[6] = self.op.omega0 * dw
        dx[7] = (self.P_ref - P - p.D_v * dw) / p.J_v
        dx[8:10] = p.ki_v * e_v
        dx[10:12] = p.ki_i * e_i
        dx[12:14] = (vcp - v_ff) / p.T_vff
        return dx

    def output(self, x, u):
        return -x[4:6]

    def initial_guess(self, op):
        p = self.p
        _, i_g, v_c, i_f, v_conv = lcl_phasors(p, op)
        th = np.angle(v_c)
        rot = np.exp(-1j * th)
        ifp, igp, vcp, vcv = i_f * rot, i_g * rot, v_c * rot, v_conv * rot
        x = np.zeros(14)
        x[0:2], x[2:4], x[4:6] = _c2v(i_f), _c2v(v_c), _c2v(i_g)
        x[6] = th
        ff = igp if p.current_ff == "output_current" else 0.0
        x[8:10] = _c2v(ifp - ff)
        x[10:12] = _c2v(vcv - vcp)
        x[12:14] = _c2v(vcp)
        return x


def gfm_admittance(p=None, op=None, device_id="gfm", S=1.0, theta=None):
    p = GFMParams() if p is None else p
    op = OperatingPoint() if op is None else op
    ss, x0 = linearize(GFMModel(p, op), op)
    return DeviceAdmittance(device_id, "GFM", S=S,
                            theta=op.theta_i if theta is None else theta,
                            ss=ss, x0=x0, info={"params": p, "op": op})
