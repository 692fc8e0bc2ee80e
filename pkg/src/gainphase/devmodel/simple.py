"""Small devices with closed-form admittances, used as linearization references."""

from dataclasses import dataclass

import numpy as np

from ..network import OMEGA0
from .base import DeviceAdmittance, DeviceModelError, OperatingPoint, linearize

__all__ = ["InductorModel", "PICurrentSourceModel", "inductor_admittance",
           "pi_source_admittance", "inductor_reference", "pi_source_reference"]

J = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class InductorModel:
    """Inductance ``L`` (R/X ``eps``) from the terminal to ground."""
    L: float
    eps: float = 0.0
    omega0: float = OMEGA0
    n_states = 2

    def __post_init__(self):
        if not self.L > 0:
            raise DeviceModelError("inductance must be positive")

    def rhs(self, x, u):
        return self.omega0 / self.L * (u - self.L * (self.eps * x + J @ x))

    def output(self, x, u):
        return x.copy()

    def initial_guess(self, op):
        return np.linalg.solve(self.L * (self.eps * np.eye(2) + J), op.u0)


@dataclass(frozen=True)
class PICurrentSourceModel:
    """L-filtered converter with a fixed-frame current PI and no synchronization.

    The injected current ``i`` tracks a constant reference; the terminal
    voltage is a disturbance.
    """
    L: float
    kp: float
    ki: float
    i_ref: tuple = (1.0, 0.0)
    omega0: float = OMEGA0
    n_states = 4

    def rhs(self, x, u):
        i, xi = x[0:2], x[2:4]
        e = np.asarray(self.i_ref) - i
        v = self.kp * e + xi
        di = self.omega0 / self.L * (v - u - self.L * (J @ i))
        return np.concatenate([di, self.ki * e])

    def output(self, x, u):
        return -x[0:2]

    def initial_guess(self, op):
        i = np.asarray(self.i_ref, dtype=float)
        return np.concatenate([i, op.u0 + self.L * (J @ i)])


def inductor_reference(s, L, eps=0.0, omega0=OMEGA0):
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    M = (s[:, None, None] / omega0 + eps) * np.eye(2) + J
    return np.linalg.inv(M) / L


def pi_source_reference(s, L, kp, ki, omega0=OMEGA0):
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    M = ((L * s / omega0 + kp + ki / s)[:, None, None] * np.eye(2)) + L * J
    return np.linalg.inv(M)


def inductor_admittance(L, eps=0.0, op=None, device_id="L", S=1.0):
    op = OperatingPoint() if op is None else op
    ss, x0 = linearize(InductorModel(L, eps, op.omega0), op)
    return DeviceAdmittance(device_id, "passive", S=S, theta=op.theta_i, ss=ss, x0=x0)


def pi_source_admittance(L, kp, ki, op=None, device_id="pi", S=1.0):
    op = OperatingPoint() if op is None else op
    ss, x0 = linearize(PICurrentSourceModel(L, kp, ki, omega0=op.omega0), op)
    return DeviceAdmittance(device_id, "passive", S=S, theta=op.theta_i, ss=ss, x0=x0)
