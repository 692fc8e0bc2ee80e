"""Synchronous generator: sixth-order machine with IEEEG1 governor and IEEET1 exciter.

Machine (subtransient, stator transients neglected, open-circuit time
constants in seconds, reactances on the machine base)::

    T'd  dE'q/dt  = Efd - E'q - (Xd - X'd) id
    T'q  dE'd/dt  = -E'd + (Xq - X'q) iq
    T''d dE''q/dt = E'q - E''q - (X'd - X''d) id
    T''q dE''d/dt = E'd - E''d + (X'q - X''q) iq
    vd = E''d + X''q iq,   vq = E''q - X''d id
    J d(dw)/dt = Pm - Pe - D dw,   d(delta)/dt = w0 dw

``delta`` is the angle of the rotor d-axis in the device's local frame;
``id, iq`` are injected (generator convention).

Governor: speed error through ``K_droop (1 + s T2)/(1 + s T1)``, a servo
with gain ``K`` and time constant ``T3``, then four turbine stages
``T4..T7`` weighted by ``K1, K3, K5, K7``.  Exciter: transducer ``T_r``,
amplifier ``K_a/(1 + s T_a)`` and rate feedback ``K_f s/(1 + s T_f)``; the
exciter machine is taken as ideal (``Efd = V_r``).

State vector::

    0 delta   1 dw   2 E'q   3 E'd   4 E''q   5 E''d
    6 x_ll    7 gv   8:12 turbine stages
    12 v_m    13 v_r   14 z (rate feedback)
"""

from dataclasses import dataclass, replace

import numpy as np

from .base import DeviceAdmittance, DeviceModelError, OperatingPoint, linearize
from .gfl import _c2v, _to_frame

__all__ = ["SGParams", "SGModel", "sg_admittance"]


@dataclass(frozen=True)
class SGParams:
    J_SG: float = 10.39
    D_SG: float = 0.0
    X_d: float = 1.81
    X_q: float = 1.76
    Xp_d: float = 0.3
    Xp_q: float = 0.65
    Xpp_d: float = 0.23
    Xpp_q: float = 0.25
    Tp_d: float = 8.0
    Tp_q: float = 1.0
    Tpp_d: float = 0.03
    Tpp_q: float = 0.07
    K_droop: float = 8.0
    T1: float = 0.5
    T2: float = 1.0
    T3: float = 0.6
    T4: float = 0.6
    T5: float = 0.5
    T6: float = 0.8
    T7: float = 1.0
    K: float = 5.0
    K1: float = 0.3
    K3: float = 0.25
    K5: float = 0.3
    K7: float = 0.15
    K_a: float = 15.0
    T_a: float = 0.05
    K_f: float = 0.0057
    T_f: float = 0.5
    T_r: float = 0.1
    governor: bool = True
    exciter: bool = True

    def __post_init__(self):
        for name in ("Tp_d", "Tp_q", "Tpp_d", "Tpp_q", "T1", "T3", "T4", "T5", "T6",
                     "T7", "T_a", "T_f", "T_r"):
            if not getattr(self, name) > 0:
                raise DeviceModelError(f"SG time constant {name} must be positive")
        if not self.J_SG > 0:
            raise DeviceModelError("J_SG must be positive")
        if not (self.X_d >= self.Xp_d >= self.Xpp_d > 0 and self.X_q >= self.Xp_q >= self.Xpp_q > 0):
            raise DeviceModelError("need X >= X' >= X'' > 0 on both axes")

    def with_(self, **changes):
        return replace(self, **changes)


class SGModel:
    n_states = 15

    def __init__(self, p, op):
        self.p = p
        self.op = op
        x = self._steady_state(op)
        self._x_init = x
        self.P_ref = self._pe(x, op.u0)
        self.Efd0 = x[13]
        self.V_ref = op.V0 + x[13] / p.K_a

    def _currents(self, x, u):
        p = self.p
        vd, vq = _to_frame(x[0], u)
        # vd = E''d + X''q iq, vq = E''q - X''d id
        i_d = (x[4] - vq) / p.Xpp_d
        i_q = (vd - x[5]) / p.Xpp_q
        return i_d, i_q

    def _pe(self, x, u):
        p = self.p
        i_d, i_q = self._currents(x, u)
        return x[5] * i_d + x[4] * i_q + (p.Xpp_q - p.Xpp_d) * i_d * i_q

    def rhs(self, x, u):
        p = self.p
        delta, dw, eqp, edp, eqpp, edpp = x[0:6]
        i_d, i_q = self._currents(x, u)
        dx = np.zeros(15)
        dx[0] = self.op.omega0 * dw
        Pm = p.K1 * x[8] + p.K3 * x[9] + p.K5 * x[10] + p.K7 * x[11]
        if not p.governor:
            Pm = self.P_ref
        dx[1] = (Pm - self._pe(x, u) - p.D_SG * dw) / p.J_SG
        efd = x[13] if p.exciter else self.Efd0
        dx[2] = (efd - eqp - (p.X_d - p.Xp_d) * i_d) / p.Tp_d
        dx[3] = (-edp + (p.X_q - p.Xp_q) * i_q) / p.Tp_q
        dx[4] = (eqp - eqpp - (p.Xp_d - p.Xpp_d) * i_d) / p.Tpp_d
        dx[5] = (edp - edpp + (p.Xp_q - p.Xpp_q) * i_q) / p.Tpp_q
        # IEEEG1
        sig = p.K_droop * dw
        dx[6] = (sig - x[6]) / p.T1
        ll = (p.T2 / p.T1) * sig + (1 - p.T2 / p.T1) * x[6]
        dx[7] = p.K * (self.P_ref - ll - x[7]) / p.T3
        dx[8] = (x[7] - x[8]) / p.T4
        dx[9] = (x[8] - x[9]) / p.T5
        dx[10] = (x[9] - x[10]) / p.T6
        dx[11] = (x[10] - x[11]) / p.T7
        # IEEET1 with ideal exciter machine
        vt = np.hypot(u[0], u[1])
        vf = p.K_f / p.T_f * (x[13] - x[14])
        dx[12] = (vt - x[12]) / p.T_r
        dx[13] = (p.K_a * (self.V_ref - x[12] - vf) - x[13]) / p.T_a
        dx[14] = (x[13] - x[14]) / p.T_f
        return dx

    def output(self, x, u):
        i_d, i_q = self._currents(x, u)
        c, s = np.cos(x[0]), np.sin(x[0])
        return -np.array([c * i_d - s * i_q, s * i_d + c * i_q])

    def _steady_state(self, op):
        p = self.p
        U = complex(op.V0, 0.0)
        I = np.conj(complex(op.P0, op.Q0) / U)
        EQ = U + 1j * p.X_q * I
        delta = np.angle(EQ) - np.pi / 2
        vd, vq = _to_frame(delta, _c2v(U))
        i_d, i_q = _to_frame(delta, _c2v(I))
        eqpp = vq + p.Xpp_d * i_d
        edpp = vd - p.Xpp_q * i_q
        eqp = eqpp + (p.Xp_d - p.Xpp_d) * i_d
        edp = (p.X_q - p.Xp_q) * i_q
        efd = eqp + (p.X_d - p.Xp_d) * i_d
        P = op.P0
        x = np.zeros(15)
        x[0:6] = delta, 0.0, eqp, edp, eqpp, edpp
        x[7:12] = P
        x[12] = op.V0
        x[13] = x[14] = efd
        return x

    def initial_guess(self, op):
        return self._x_init.copy()


def sg_admittance(p=None, op=None, device_id="sg", S=1.0, theta=None):
    p = SGParams() if p is None else p
    op = OperatingPoint() if op is None else op
    ss, x0 = linearize(SGModel(p, op), op)
    return DeviceAdmittance(device_id, "SG", S=S,
                            theta=op.theta_i if theta is None else theta,
                            ss=ss, x0=x0, info={"params": p, "op": op})
