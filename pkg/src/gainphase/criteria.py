"""Decentralized gain/phase certification over frequency.

At each frequency the rescaled device admittances are compared with the
rescaled network: the gain test asks every device gain to stay below the
network's smallest gain, the phase test asks every device phase interval to
fit inside the network's phase area while the union of device intervals
stays narrower than pi.  A frequency where neither holds is UNDECIDED; the
certificate is sufficient only, so UNDECIDED never means unstable.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import matphase
from .matphase import Verdict
from .oracle import closed_loop_eigs
from .network import (
    OMEGA0, GridResponse, average_eps, NetworkModel, common_eps, equivalent_network, f_eps_inv,
    grid_response, gscr, reduced_b_matrix, rescaled_grid, unreliable_mask,
)

__all__ = [
    "EPS_MARGIN", "FrequencyGrid", "GainPhaseProfile", "StabilityReport",
    "TwoStageResult", "device_profiles", "network_profile", "check_conditions",
    "network_evaluator", "sweep", "corollary_check", "two_stage",
]

EPS_MARGIN = matphase.EPS_MARGIN
INF_FACTOR = 1e3
NUDGE_WINDOW = 1e-6
NUDGE_STEP = 1e-4
REL_EDGE = 1e-2
PROPER_TOL = 1e-9


@dataclass
class FrequencyGrid:
    """Analysis frequencies in rad/s, increasing.

    ``special`` marks the ``omega = 0`` point and the infinity surrogate,
    which are not refined and at which tabulated devices are clamped to the
    ends of their tables.
    """
    omega: np.ndarray
    special: np.ndarray = None
    refine_budget: int = 200

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        if self.omega.ndim != 1 or self.omega.size < 2:
            raise ValueError("a frequency grid needs at least two points")
        if np.any(np.diff(self.omega) <= 0) or self.omega[0] < 0:
            raise ValueError("grid frequencies must be non-negative and strictly increasing")
        if self.special is None:
            self.special = np.zeros(self.omega.size, dtype=bool)
        self.special = np.asarray(self.special, dtype=bool)

    @classmethod
    def default(cls, f_min_hz=None, f_max_hz=None, points=600, omega0=OMEGA0,
                include_zero=True, include_infinity=True, nudge=True, refine_budget=200):
        w_lo = 1e-2 * omega0 if f_min_hz is None else 2 * np.pi * f_min_hz
        w_hi = 1e3 * omega0 if f_max_hz is None else 2 * np.pi * f_max_hz
        if not 0 < w_lo < w_hi:
            raise ValueError("need 0 < f_min < f_max")
        w = np.geomspace(w_lo, w_hi, int(points))
        if nudge:
            w = nudge_omega0(w, omega0)
        special = np.zeros(w.size, dtype=bool)
        if include_zero:
            w = np.concatenate([[0.0], w])
            special = np.concatenate([[True], special])
        if include_infinity:
            w = np.concatenate([w, [INF_FACTOR * w[-1]]])
            special = np.concatenate([special, [True]])
        return cls(w, special, refine_budget)

    @property
    def hz(self):
        return self.omega / (2 * np.pi)


def nudge_omega0(omega, omega0=OMEGA0):
    """Move points within ``1e-6 w0`` of ``w0`` up by ``1e-4 w0``."""
    omega = np.array(omega, dtype=float)
    near = np.abs(omega - omega0) < NUDGE_WINDOW * omega0
    omega[near] = omega0 * (1 + NUDGE_STEP)
    return np.unique(omega)


@dataclass
class GainPhaseProfile:
    """Gains and phase intervals of one stacked response over ``omega``.

    ``phi_hi``/``phi_lo`` are ``+inf``/``-inf`` where the matrix is not
    sectorial.  For a network profile they hold the phase *area*
    ``[-pi - phi_min(Y^-1), pi - phi_max(Y^-1)]`` instead.
    """
    omega: np.ndarray
    sigma_max: np.ndarray
    sigma_min: np.ndarray
    sectorial: np.ndarray
    phi_hi: np.ndarray
    phi_lo: np.ndarray
    unreliable: np.ndarray
    label: str = ""

    def take(self, idx):
        return GainPhaseProfile(self.omega[idx], self.sigma_max[idx], self.sigma_min[idx],
                                self.sectorial[idx], self.phi_hi[idx], self.phi_lo[idx],
                                self.unreliable[idx], self.label)

    @staticmethod
    def concat(a, b):
        return GainPhaseProfile(*(np.concatenate([getattr(a, k), getattr(b, k)]) for k in
                                  ("omega", "sigma_max", "sigma_min", "sectorial",
                                   "phi_hi", "phi_lo", "unreliable")), label=a.label)


def _profile_from_values(omega, vals, label=""):
    K = vals.shape[0]
    if vals.shape[-1] == 0:
        # nothing attached: no gain to exceed, every phase condition vacuous
        return GainPhaseProfile(omega, np.zeros(K), np.full(K, np.inf), np.ones(K, dtype=bool),
                                np.full(K, np.pi), np.full(K, -np.pi), np.zeros(K, dtype=bool),
                                label)
    bad = unreliable_mask(vals)
    smax = np.full(K, np.nan)
    smin = np.full(K, np.nan)
    sect = np.zeros(K, dtype=bool)
    hi = np.full(K, np.inf)
    lo = np.full(K, -np.inf)
    ok = ~bad
    if ok.any():
        g = matphase.batch_gains(vals[ok])
        smax[ok], smin[ok] = g[:, 0], g[:, -1]
        s, ph, _ = matphase.batch_phases(vals[ok])
        idx = np.flatnonzero(ok)[s]
        sect[idx] = True
        hi[idx], lo[idx] = ph[s, 0], ph[s, -1]
    return GainPhaseProfile(omega, smax, smin, sect, hi, lo, bad, label)


def _special_response(d, s, special):
    """Device response with tabulated data clamped to the table at special points."""
    if d.table is None or not np.any(special):
        return d.response(s)
    freqs = d.table[0]
    w = np.abs(s.imag)
    w = np.where(special, np.clip(w, 2 * np.pi * freqs[0], 2 * np.pi * freqs[-1]), w)
    return d.response(1j * w)


def device_profiles(devices, grid, D=None, eps_tilde=0.0, omega0=OMEGA0):
    """Profiles of ``D_i Y_C,i(jw) Ft(jw)^-1`` for every device."""
    if hasattr(grid, "omega"):
        omega, special = np.asarray(grid.omega, dtype=float), grid.special
    else:
        omega = np.asarray(grid, dtype=float)
        special = np.zeros(omega.size, dtype=bool)
    s = 1j * omega
    D = np.ones(len(devices)) if D is None else np.asarray(D, dtype=float)
    Finv = f_eps_inv(s, eps_tilde, omega0)
    out = []
    for d, Di in zip(devices, D):
        if not Di > 0:
            raise ValueError("rescaling factors must be positive")
        vals = Di * _special_response(d, s, special) @ Finv
        out.append(_profile_from_values(omega, vals, d.device_id))
    return out


def network_profile(grid_resp, label="network"):
    """Smallest gain and phase area of a rescaled network response.

    The area is ``[-pi - phi_min(Y^-1), pi - phi_max(Y^-1)]`` from the
    phases of the inverse; a non-sectorial network has no area.
    """
    if isinstance(grid_resp, GridResponse):
        omega, vals = grid_resp.omega, grid_resp.values
    else:
        omega, vals = grid_resp
    base = _profile_from_values(np.asarray(omega), vals, label)
    if vals.shape[-1] == 0:
        return base
    ok = ~base.unreliable
    hi = np.full(omega.shape, -np.inf)
    lo = np.full(omega.shape, np.inf)
    sect = np.zeros(omega.shape, dtype=bool)
    if ok.any():
        inv = np.linalg.inv(vals[ok])
        s, ph, _ = matphase.batch_phases(inv)
        idx = np.flatnonzero(ok)[s]
        sect[idx] = True
        hi[idx] = np.pi - ph[s, 0]
        lo[idx] = -np.pi - ph[s, -1]
    return GainPhaseProfile(base.omega, base.sigma_max, base.sigma_min, sect, hi, lo,
                            base.unreliable, label)


def check_conditions(dev_profiles, net_profile, eps_margin=EPS_MARGIN):
    """Per-frequency verdicts and margins (arrays aligned with the profiles).

    Returns ``(verdicts, margins)`` where ``margins`` has keys ``gain``,
    ``phase_hi``, ``phase_lo`` and ``phase_width``; phase margins are
    ``-inf`` wherever a participant is not sectorial.
    """
    n = net_profile.omega.size
    if dev_profiles:
        gmax = np.max([p.sigma_max for p in dev_profiles], axis=0)
        all_sect = np.all([p.sectorial for p in dev_profiles], axis=0)
        dev_hi = np.max([p.phi_hi for p in dev_profiles], axis=0)
        dev_lo = np.min([p.phi_lo for p in dev_profiles], axis=0)
        dev_bad = np.any([p.unreliable for p in dev_profiles], axis=0)
    else:
        gmax = np.zeros(n)
        all_sect = np.ones(n, dtype=bool)
        dev_hi = np.full(n, -np.inf)
        dev_lo = np.full(n, np.inf)
        dev_bad = np.zeros(n, dtype=bool)
    gain_m = net_profile.sigma_min - gmax
    phase_ok_inputs = all_sect & net_profile.sectorial
    with np.errstate(invalid="ignore"):
        hi_m = np.where(phase_ok_inputs, net_profile.phi_hi - dev_hi, -np.inf)
        lo_m = np.where(phase_ok_inputs, dev_lo - net_profile.phi_lo, -np.inf)
        width = dev_hi - dev_lo if dev_profiles else np.zeros(n)
        wid_m = np.where(phase_ok_inputs, np.pi - width, -np.inf)
    bad = dev_bad | net_profile.unreliable
    gain_m = np.where(bad | np.isnan(gain_m), -np.inf, gain_m)
    hi_m = np.where(bad, -np.inf, hi_m)
    lo_m = np.where(bad, -np.inf, lo_m)
    wid_m = np.where(bad, -np.inf, wid_m)
    gain_ok = gain_m > eps_margin
    phase_ok = (hi_m > eps_margin) & (lo_m > eps_margin) & (wid_m > eps_margin)
    verdict = np.where(gain_ok, Verdict.GAIN_OK.value,
                       np.where(phase_ok, Verdict.PHASE_OK.value, Verdict.UNDECIDED.value))
    return verdict, {"gain": gain_m, "phase_hi": hi_m, "phase_lo": lo_m, "phase_width": wid_m}


def network_evaluator(net, S=None, D=None, eps_tilde=0.0, absorbed=None):
    """Callable ``omega -> rescaled network matrices`` for refinable sweeps.

    With ``absorbed`` devices (occupying the trailing device nodes) the
    equivalent network is rescaled instead of the raw one.
    """
    def evaluate(omega):
        s = 1j * np.asarray(omega, dtype=float)
        Yg = grid_response(net, s)
        if absorbed:
            Yg = equivalent_network(Yg, absorbed)
        return rescaled_grid(Yg, S, D, eps_tilde, net.omega0).values
    return evaluate


@dataclass
class StabilityReport:
    omega: np.ndarray
    verdicts: np.ndarray
    margins: dict
    devices: list
    network: GainPhaseProfile
    stage: str = "monolithic"
    special: np.ndarray = None
    preconditions: dict = field(default_factory=dict)
    eps_margin: float = EPS_MARGIN

    @property
    def hz(self):
        return self.omega / (2 * np.pi)

    @property
    def device_ids(self):
        return [p.label for p in self.devices]

    @property
    def undecided(self):
        return self.verdicts == Verdict.UNDECIDED.value

    @property
    def undecided_bands(self):
        """``[(w_lo, w_hi)]`` runs of consecutive UNDECIDED points, rad/s."""
        u = self.undecided
        bands = []
        k = 0
        while k < u.size:
            if u[k]:
                j = k
                while j + 1 < u.size and u[j + 1]:
                    j += 1
                bands.append((float(self.omega[k]), float(self.omega[j])))
                k = j + 1
            else:
                k += 1
        return bands

    @property
    def undecided_bands_hz(self):
        return [(a / (2 * np.pi), b / (2 * np.pi)) for a, b in self.undecided_bands]

    def sectorial_toggles(self, k):
        """Frequencies (rad/s) where device ``k`` changes sectoriality."""
        s = self.devices[k].sectorial
        idx = np.flatnonzero(s[1:] != s[:-1]) + 1
        return [float(self.omega[i]) for i in idx]

    def transition_frequency(self, k):
        """Lowest grid frequency above which device ``k`` stays sectorial.

        ``None`` if the device is not sectorial at the highest point.
        """
        s = self.devices[k].sectorial
        if not s[-1]:
            return None
        bad = np.flatnonzero(~s)
        return float(self.omega[0] if bad.size == 0 else self.omega[bad[-1] + 1])

    @property
    def transition_freqs(self):
        return {p.label: self.transition_frequency(k) for k, p in enumerate(self.devices)}

    def culprits(self):
        """Per undecided band, device ids ranked by gain then phase excess."""
        out = []
        for lo, hi in self.undecided_bands:
            m = (self.omega >= lo) & (self.omega <= hi)
            ranking = []
            for p in self.devices:
                g_ex = float(np.max(p.sigma_max[m] - self.network.sigma_min[m]))
                with np.errstate(invalid="ignore"):
                    ph = np.maximum(p.phi_hi[m] - self.network.phi_hi[m],
                                    self.network.phi_lo[m] - p.phi_lo[m])
                ph = np.where(p.sectorial[m] & self.network.sectorial[m], ph, np.inf)
                ranking.append((g_ex, float(np.max(ph)), p.label))
            ranking.sort(key=lambda t: (-t[0], -t[1]))
            out.append({"band_hz": [lo / (2 * np.pi), hi / (2 * np.pi)],
                        "ranking": [{"device": lbl, "gain_excess": g, "phase_excess": ph}
                                    for g, ph, lbl in ranking]})
        return out

    @property
    def preconditions_ok(self):
        return all(v for k, v in self.preconditions.items() if isinstance(v, bool))

    @property
    def certified(self):
        return not self.undecided.any() and self.preconditions_ok

    def summary(self):
        def hz(w):
            return None if w is None else w / (2 * np.pi)
        return {
            "stage": self.stage,
            "certified": bool(self.certified),
            "n_points": int(self.omega.size),
            "undecided_bands_hz": [list(b) for b in self.undecided_bands_hz],
            "transition_freqs_hz": {k: hz(v) for k, v in self.transition_freqs.items()},
            "sectorial_toggles_hz": {p.label: [hz(w) for w in self.sectorial_toggles(k)]
                                     for k, p in enumerate(self.devices)},
            "culprits": self.culprits(),
            "unreliable_hz": [float(w) for w in self.hz[self.network.unreliable]],
            "preconditions": self.preconditions,
            "verdict_counts": {v.value: int(np.sum(self.verdicts == v.value)) for v in Verdict},
        }

    def write_csv(self, path):
        cols = ["freq_hz", "verdict", "gain_margin", "phase_margin_hi", "phase_margin_lo",
                "phase_margin_width", "net_sigma_min", "net_phase_hi", "net_phase_lo"]
        for lbl in self.device_ids:
            cols += [f"{lbl}_sigma_max", f"{lbl}_phi_lo", f"{lbl}_phi_hi", f"{lbl}_sectorial"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for k in range(self.omega.size):
                row = [self.hz[k], self.verdicts[k], self.margins["gain"][k],
                       self.margins["phase_hi"][k], self.margins["phase_lo"][k],
                       self.margins["phase_width"][k], self.network.sigma_min[k],
                       self.network.phi_hi[k], self.network.phi_lo[k]]
                for p in self.devices:
                    row += [p.sigma_max[k], p.phi_lo[k], p.phi_hi[k], int(p.sectorial[k])]
                w.writerow([_fmt(x) for x in row])

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(self.summary()), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(x):
    if isinstance(x, (str, int)) and not isinstance(x, bool):
        return x
    return repr(float(x))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _as_grid(grid):
    if grid is None:
        return FrequencyGrid.default()
    if isinstance(grid, FrequencyGrid):
        return grid
    return FrequencyGrid(grid)


def _evaluate(devices, net_eval, omega, special, D, eps_tilde, omega0):
    devp = device_profiles(devices, FrequencyGrid(omega, special) if omega.size > 1
                           else _single(omega, special), D, eps_tilde, omega0)
    netp = network_profile((omega, net_eval(omega)))
    return devp, netp


class _single:
    """Stand-in for a one-point grid (FrequencyGrid needs two points)."""
    def __init__(self, omega, special):
        self.omega, self.special = omega, special


def _refine(devices, net_eval, omega, special, devp, netp, verdicts, margins,
            budget, D, eps_tilde, omega0, eps_margin):
    used = 0
    while used < budget:
        und = verdicts == Verdict.UNDECIDED.value
        flips = und[1:] != und[:-1]
        for p in devp:
            flips |= p.sectorial[1:] != p.sectorial[:-1]
        flips &= ~special[1:] & ~special[:-1]
        lo, hi = omega[:-1], omega[1:]
        flips &= (hi - lo) > REL_EDGE * hi
        idx = np.flatnonzero(flips)
        if idx.size == 0:
            break
        idx = idx[:budget - used]
        new_w = np.sqrt(lo[idx] * hi[idx])
        new_sp = np.zeros(new_w.size, dtype=bool)
        d2, n2 = _evaluate(devices, net_eval, new_w, new_sp, D, eps_tilde, omega0)
        v2, m2 = check_conditions(d2, n2, eps_margin)
        used += new_w.size
        omega = np.concatenate([omega, new_w])
        order = np.argsort(omega, kind="stable")
        omega = omega[order]
        special = np.concatenate([special, new_sp])[order]
        devp = [GainPhaseProfile.concat(a, b).take(order) for a, b in zip(devp, d2)]
        netp = GainPhaseProfile.concat(netp, n2).take(order)
        verdicts = np.concatenate([verdicts, v2])[order]
        margins = {k: np.concatenate([margins[k], m2[k]])[order] for k in margins}
    return omega, special, devp, netp, verdicts, margins


def _device_preconditions(devices):
    """Open-loop stability and, for realizations, strict properness.

    Rescaling multiplies each admittance by ``s/w0 + ...``; a device with
    direct feedthrough then has unbounded gain at high frequency and no
    finite grid can stand in for ``omega = inf``.
    """
    out = {}
    for d in devices:
        out[f"open_loop_stable:{d.device_id}"] = bool(d.open_loop_stable)
        if d.ss is not None:
            scale = max(1.0, float(np.abs(d.ss.C).max(initial=0.0)))
            out[f"strictly_proper:{d.device_id}"] = bool(
                np.abs(d.ss.D).max(initial=0.0) <= PROPER_TOL * scale)
    return out


def sweep(devices, grid_resp, grid=None, D=None, eps_tilde=0.0, omega0=OMEGA0,
          stage="monolithic", refine=True, eps_margin=EPS_MARGIN, preconditions=None):
    """Evaluate the decentralized conditions over ``grid``.

    ``grid_resp`` is either a callable ``omega -> rescaled network matrices``
    (see :func:`network_evaluator`; enables bisection refinement near verdict
    changes) or a precomputed rescaled :class:`GridResponse`, in which case
    its own sample points form the grid.
    """
    if isinstance(grid_resp, GridResponse):
        omega = grid_resp.omega.astype(float)
        g = FrequencyGrid(omega, None, 0) if grid is None else _as_grid(grid)
        if g.omega.shape != omega.shape or not np.allclose(g.omega, omega):
            raise ValueError("grid does not match the precomputed network samples")
        vals = grid_resp.values
        net_eval = None
        special = g.special
        devp = device_profiles(devices, g, D, eps_tilde, omega0)
        netp = network_profile((omega, vals))
        refine = False
    else:
        g = _as_grid(grid)
        omega, special = g.omega, g.special
        net_eval = grid_resp
        devp, netp = _evaluate(devices, net_eval, omega, special, D, eps_tilde, omega0)
    verdicts, margins = check_conditions(devp, netp, eps_margin)
    if refine and g.refine_budget > 0:
        omega, special, devp, netp, verdicts, margins = _refine(
            devices, net_eval, omega, special, devp, netp, verdicts, margins,
            g.refine_budget, D, eps_tilde, omega0, eps_margin)
    pre = _device_preconditions(devices)
    pre.update(preconditions or {})
    return StabilityReport(omega, verdicts, margins, devp, netp, stage, special, pre,
                           eps_margin)


def corollary_check(devices, B_r, S=None, grid=None, eps_tilde=None, omega0=OMEGA0,
                    refine=True, eps_margin=EPS_MARGIN):
    """Identical-R/X test: device gains against the constant gSCR.

    ``B_r`` may be a :class:`NetworkModel` (its reduced susceptance matrix
    and common R/X ratio are used; heterogeneous networks are refused) or
    the matrix itself, in which case ``eps_tilde`` defaults to 0.  The
    network phase area is ``(-pi, pi)`` at every frequency.
    """
    if isinstance(B_r, NetworkModel):
        net = B_r
        B_r = reduced_b_matrix(net)
        eps_net = common_eps(net)
        if eps_tilde is None:
            eps_tilde = eps_net
        elif abs(eps_tilde - eps_net) > 1e-12:
            raise ValueError("the rescaling ratio must equal the network R/X ratio")
        omega0 = net.omega0
    eps_tilde = 0.0 if eps_tilde is None else eps_tilde
    g_scr = gscr(B_r, S)

    def make_profile(omega):
        n = omega.size
        return GainPhaseProfile(omega, np.full(n, g_scr), np.full(n, g_scr),
                                np.ones(n, dtype=bool), np.full(n, np.pi),
                                np.full(n, -np.pi), np.zeros(n, dtype=bool), "network")

    g = _as_grid(grid)
    devp = device_profiles(devices, g, None, eps_tilde, omega0)
    netp = make_profile(g.omega)
    verdicts, margins = check_conditions(devp, netp, eps_margin)
    omega, special = g.omega, g.special
    if refine and g.refine_budget > 0:
        omega, special, devp, netp, verdicts, margins = _refine(
            devices, _ConstNet(g_scr), omega, special, devp, netp, verdicts, margins,
            g.refine_budget, None, eps_tilde, omega0, eps_margin)
        netp = make_profile(omega)
    pre = _device_preconditions(devices)
    pre["gscr"] = g_scr
    return StabilityReport(omega, verdicts, margins, devp, netp, "corollary", special, pre,
                           eps_margin)


class _ConstNet:
    """Scalar gSCR network used when refining corollary sweeps."""
    def __init__(self, g):
        self.g = g

    def __call__(self, omega):
        n = np.size(omega)
        out = np.zeros((n, 2, 2), dtype=complex)
        out[:, 0, 0] = out[:, 1, 1] = self.g
        return out


SUBSYSTEM1_MODES = ("sweep", "oracle", "assume")


@dataclass
class TwoStageResult:
    """Both stage reports plus how subsystem 1 stability was established.

    ``subsystem1_stable`` comes from the sweep (``mode="sweep"``), from the
    closed-loop eigenvalues of subsystem 1 (``"oracle"``) or is taken as
    given (``"assume"``).
    """
    report1: StabilityReport
    report2: StabilityReport
    order: list
    mode: str = "sweep"
    subsystem1_stable: bool = True
    subsystem1_eigs: np.ndarray = None

    @property
    def certified(self):
        return bool(self.subsystem1_stable) and (self.report2 is None or self.report2.certified)

    def summary(self):
        out = {"certified": bool(self.certified), "device_order": self.order,
               "subsystem1_mode": self.mode,
               "subsystem1_stable": bool(self.subsystem1_stable),
               "subsystem1": None if self.report1 is None else self.report1.summary(),
               "subsystem2": None if self.report2 is None else self.report2.summary()}
        if self.subsystem1_eigs is not None and self.subsystem1_eigs.size:
            out["subsystem1_max_real"] = float(self.subsystem1_eigs.real.max())
        return out


def two_stage(devices, net, grouping=None, grid=None, eps_tilde=None, D=None,
              refine=True, eps_margin=EPS_MARGIN, subsystem1="sweep"):
    """Sequential analysis with grid-forming devices absorbed into the network.

    ``devices`` follow the network's device-node order.  ``grouping`` gives a
    tag per device (``"GFL"`` stays in subsystem 2, anything else is
    absorbed); by default GFM and SG devices are absorbed.  Subsystem 1 tests
    the absorbed devices against the network with the remaining device
    nodes eliminated; subsystem 2 tests the remaining devices against the
    equivalent network.  Subsystem 2 relies on subsystem 1 for the stability
    of the inverse equivalent network.

    Grid-forming devices hold their power at DC and look like voltage
    sources, so subsystem 1 is often UNDECIDED near 0 Hz.  ``subsystem1``
    selects how its stability is settled: ``"sweep"`` (no UNDECIDED point),
    ``"oracle"`` (eigenvalues of the absorbed devices on the reduced
    network) or ``"assume"``.  The subsystem 1 sweep is reported either way.
    """
    if subsystem1 not in SUBSYSTEM1_MODES:
        raise ValueError(f"subsystem1 must be one of {SUBSYSTEM1_MODES}")
    if grouping is None:
        grouping = ["GFM" if d.is_grid_forming else "GFL" for d in devices]
    if len(grouping) != len(devices):
        raise ValueError("one grouping tag per device is required")
    keep = [k for k, t in enumerate(grouping) if t == "GFL"]
    absorb = [k for k, t in enumerate(grouping) if t != "GFL"]
    order = keep + absorb
    net_o = net.reorder_devices([k + 1 for k in order])
    if eps_tilde is None:
        eps_tilde = average_eps(net)
    D = np.ones(len(devices)) if D is None else np.asarray(D, dtype=float)
    g = _as_grid(grid)
    dev_keep = [devices[k] for k in keep]
    dev_abs = [devices[k] for k in absorb]

    report1 = None
    stable1 = True
    eigs1 = None
    if dev_abs:
        net1 = net_o.drop_devices(range(1, len(keep) + 1))
        S1 = [d.S for d in dev_abs]
        ev1 = network_evaluator(net1, S1, D[absorb], eps_tilde)
        report1 = sweep(dev_abs, ev1, g, D[absorb], eps_tilde, net.omega0, "subsystem1",
                        refine, eps_margin)
        if subsystem1 == "sweep":
            stable1 = report1.certified
        elif subsystem1 == "oracle":
            res = closed_loop_eigs(dev_abs, net1)
            eigs1 = res.eigs
            stable1 = res.stable
    report2 = None
    if dev_keep:
        S2 = [d.S for d in dev_keep]
        ev2 = network_evaluator(net_o, S2, D[keep], eps_tilde, absorbed=dev_abs)
        pre = {}
        if dev_abs:
            pre["inverse_equivalent_network_stable"] = bool(stable1)
        report2 = sweep(dev_keep, ev2, g, D[keep], eps_tilde, net.omega0, "subsystem2",
                        refine, eps_margin, pre)
    return TwoStageResult(report1, report2, [devices[k].device_id for k in order],
                          subsystem1, bool(stable1), eigs1)
