"""Built-in analysis configurations.

* ``example2``: one GFL converter behind a reactance ``X_net``.
* ``example3``: three GFL converters on a star network (PLL 70/40/150 rad/s).
* ``example4``: ``example3`` with converter 3 replaced by a GFM converter.
* ``bus68-partial``: the 68-bus line data with 4 GFM, 9 GFL and 2 SG units;
  loads, line charging, capacities and operating points must be supplied.

The three-converter network is a star: converters 1 and 2 reach the hub
through ``b12 = 10``, converter 3 through ``b3`` and the hub reaches the
infinite bus through ``bg = 100``, every line with R/X 0.06.  ``b3`` is
solved so that the generalized short-circuit ratio takes the requested
value (4.82 by default; 6 before the line change).
"""

import copy

from scipy.optimize import brentq

from .config import AnalysisConfig
from .network import RL, Branch, NetworkModel, gscr, reduced_b_matrix

__all__ = ["FIXTURES", "fixture", "example2", "example3", "example4", "bus68_partial",
           "star_b3"]

GFL_TUNING = {"pll_tuning": "closed_loop_3db"}
STAR_EPS = 0.06
STAR_B12 = 10.0
STAR_BG = 100.0
STAR_B3 = {4.82: 5.123414022656749, 6.0: 6.5625}

BUS68_LINES = [
    (1, 54, 0, 0.0905), (2, 58, 0, 0.1250), (3, 62, 0, 0.1), (4, 19, 0.0035, 0.071),
    (5, 20, 0.0045, 0.09), (6, 22, 0, 0.0715), (7, 23, 0.0025, 0.136), (8, 25, 0.003, 0.116),
    (9, 29, 0.004, 0.078), (10, 31, 0, 0.13), (11, 32, 0, 0.065), (12, 36, 0, 0.0375),
    (13, 17, 0, 0.2475), (14, 41, 0, 0.0075), (15, 42, 0, 0.0075), (16, 18, 0, 0.015),
    (17, 36, 0.0025, 0.0225), (17, 43, 0.0025, 0.138), (18, 42, 0.002, 0.03), (18, 49, 0.038, 0.5709),
    (18, 50, 0.006, 0.144), (19, 20, 0.0035, 0.069), (19, 68, 0.008, 0.0976), (21, 22, 0.004, 0.07),
    (21, 68, 0.004, 0.0675), (22, 23, 0.003, 0.048), (23, 24, 0.011, 0.175), (24, 68, 0.0015, 0.0295),
    (25, 26, 0.016, 0.1615), (25, 54, 0.035, 0.043), (26, 27, 0.007, 0.0735), (26, 28, 0.0215, 0.237),
    (26, 29, 0.0285, 0.3125), (27, 37, 0.0065, 0.0865), (27, 53, 0.16, 1.6), (28, 29, 0.007, 0.0755),
    (30, 31, 0.0065, 0.0935), (30, 32, 0.012, 0.144), (30, 53, 0.004, 0.037), (30, 61, 0.0047, 0.0458),
    (31, 38, 0.0055, 0.0735), (31, 53, 0.008, 0.0815), (32, 33, 0.004, 0.0495), (33, 34, 0.0055, 0.0785),
    (33, 38, 0.018, 0.222), (34, 35, 0.0005, 0.037), (34, 36, 0.0165, 0.0555), (35, 45, 0.0035, 0.0875),
    (36, 61, 0.0055, 0.049), (37, 52, 0.0035, 0.041), (37, 68, 0.0035, 0.0445), (38, 46, 0.011, 0.142),
    (39, 44, 0, 0.2055), (39, 45, 0, 0.4195), (40, 41, 0.03, 0.42), (40, 48, 0.01, 0.11),
    (41, 42, 0.02, 0.3), (43, 44, 0.0005, 0.0055), (44, 45, 0.0125, 0.365), (45, 51, 0.002, 0.0525),
    (46, 49, 0.009, 0.137), (47, 48, 0.0063, 0.067), (47, 53, 0.0065, 0.094), (50, 51, 0.0045, 0.1105),
    (52, 55, 0.0055, 0.0665), (53, 54, 0.0175, 0.2055), (54, 55, 0.0065, 0.0755), (55, 56, 0.0065, 0.1065),
    (56, 57, 0.004, 0.064), (56, 66, 0.004, 0.0645), (57, 58, 0.001, 0.013), (57, 60, 0.004, 0.056),
    (58, 59, 0.003, 0.046), (58, 63, 0.0035, 0.041), (59, 60, 0.002, 0.023), (60, 61, 0.0115, 0.1815),
    (62, 63, 0.002, 0.0215), (62, 65, 0.002, 0.0215), (63, 64, 0.008, 0.2175), (64, 65, 0.008, 0.2175),
    (65, 66, 0.0045, 0.0505), (66, 67, 0.009, 0.1085), (67, 68, 0.0045, 0.047),
]
BUS68_Z_UNIT = 1e-2        # listed impedances are in units of 1e-2 pu
BUS68_INFINITE = 16


def _star_net(b3):
    return NetworkModel(4, 3, [Branch(1, 4, RL(STAR_B12, STAR_EPS)),
                               Branch(2, 4, RL(STAR_B12, STAR_EPS)),
                               Branch(3, 4, RL(b3, STAR_EPS)),
                               Branch(4, 5, RL(STAR_BG, STAR_EPS))])


def star_b3(target_gscr):
    """Susceptance of converter 3's line giving the requested gSCR."""
    for g, b in STAR_B3.items():
        if abs(g - target_gscr) < 1e-12:
            return b
    f = lambda b: gscr(reduced_b_matrix(_star_net(b))) - target_gscr
    try:
        return brentq(f, 1e-3, 1e4, xtol=1e-14)
    except ValueError as exc:
        raise ValueError(f"gSCR {target_gscr} is not reachable by the star network") from exc


def _gfl(node, dev_id, **params):
    return {"id": dev_id, "class": "GFL", "node": node, "group": "GFL",
            "params": dict(GFL_TUNING, **params), "op": {"V0": 1.0, "P0": 1.0, "Q0": 0.0}}


def example2(X_net=0.2, pll_bw=40.0):
    doc = {
        "meta": {"fixture": "example2", "X_net": X_net},
        "network": {"nodes": 1, "device_nodes": 1,
                    "branches": [{"kind": "RL", "from": 1, "to": 2, "B": 1.0 / X_net, "eps": 0.0}]},
        "devices": [_gfl(1, "c1", pll_bw=pll_bw)],
        "sweep": {"mode": "corollary", "eps_tilde": 0.0},
    }
    return AnalysisConfig.from_dict(doc)


def _three(gscr_target, pll, third):
    b3 = star_b3(gscr_target)
    branches = [{"kind": "RL", "from": 1, "to": 4, "B": STAR_B12, "eps": STAR_EPS},
                {"kind": "RL", "from": 2, "to": 4, "B": STAR_B12, "eps": STAR_EPS},
                {"kind": "RL", "from": 3, "to": 4, "B": b3, "eps": STAR_EPS},
                {"kind": "RL", "from": 4, "to": 5, "B": STAR_BG, "eps": STAR_EPS}]
    devices = [_gfl(1, "c1", pll_bw=pll[0]), _gfl(2, "c2", pll_bw=pll[1]), third]
    return {"network": {"nodes": 4, "device_nodes": 3, "branches": branches},
            "devices": devices, "meta": {"gscr": gscr_target}}


def example3(gscr=4.82, pll=(70.0, 40.0, 150.0)):
    doc = _three(gscr, pll, _gfl(3, "c3", pll_bw=pll[2]))
    doc["meta"]["fixture"] = "example3"
    doc["sweep"] = {"mode": "corollary", "eps_tilde": STAR_EPS}
    doc["output"] = {"oracle": True}
    return AnalysisConfig.from_dict(doc)


def example4(gscr=4.82, pll=(70.0, 40.0), J_v=2.0, D_v=50.0):
    gfm = {"id": "g3", "class": "GFM", "node": 3, "group": "GFM",
           "params": {"J_v": J_v, "D_v": D_v}, "op": {"V0": 1.0, "P0": 1.0, "Q0": 0.0}}
    doc = _three(gscr, tuple(pll) + (None,), gfm)
    doc["meta"]["fixture"] = "example4"
    doc["sweep"] = {"mode": "two_stage", "eps_tilde": STAR_EPS, "subsystem1": "oracle"}
    doc["output"] = {"oracle": True}
    return AnalysisConfig.from_dict(doc)


def bus68_partial():
    """68-bus fixture: buses 1-15 carry devices, bus 16 is the infinite bus (ground).

    Bus ``b > 16`` becomes node ``b - 1``.  Load and line-charging entries
    are emitted per interior bus with ``null`` values and ``user_supplied``
    set; they are skipped until filled in.
    """
    M = 67
    ground = M + 1

    def node(bus):
        if bus == BUS68_INFINITE:
            return ground
        return bus if bus < BUS68_INFINITE else bus - 1

    branches = []
    for a, b, r, x in BUS68_LINES:
        branches.append({"kind": "RL", "from": node(a), "to": node(b),
                         "X": x * BUS68_Z_UNIT, "R": r * BUS68_Z_UNIT})
    for bus in range(17, 69):
        branches.append({"kind": "load", "from": node(bus), "to": ground, "R": None,
                         "user_supplied": True})
        branches.append({"kind": "shunt", "from": node(bus), "to": ground, "C": None,
                         "user_supplied": True})
    op = {"V0": 1.0, "P0": 1.0, "Q0": 0.0}
    devices = []
    for k in range(1, 5):
        params = {"L_g": 0.12 if k == 1 else 0.1, "J_v": 0.2 if k == 1 else 4.0, "D_v": 50.0,
                  "eps_g": 0.1}
        devices.append({"id": f"gfm{k}", "class": "GFM", "node": k, "group": "GFM",
                        "params": params, "op": dict(op)})
    for k in range(5, 14):
        params = dict(GFL_TUNING, L_g=0.26 if k >= 12 else 0.2, eps_g=0.1,
                      pll_variant="normalized_ff",
                      pll_bw={12: 60.0, 13: 70.0}.get(k, 40.0))
        devices.append({"id": f"gfl{k}", "class": "GFL", "node": k, "group": "GFL",
                        "params": params, "op": dict(op)})
    for k in (14, 15):
        devices.append({"id": f"sg{k}", "class": "SG", "node": k, "group": "SG",
                        "params": {}, "op": dict(op)})
    doc = {
        "meta": {"fixture": "bus68-partial",
                 "user_supplied": ["load resistances", "line charging capacitances",
                                   "device capacity ratios S", "operating points"],
                 "bus_to_node": "bus b < 16 -> node b; bus 16 -> ground; bus b > 16 -> node b - 1"},
        "network": {"nodes": M, "device_nodes": 15, "branches": branches},
        "devices": devices,
        "sweep": {"mode": "two_stage", "eps_tilde": 0.1, "subsystem1": "oracle"},
    }
    return AnalysisConfig.from_dict(doc)


FIXTURES = {"example2": example2, "example3": example3, "example4": example4,
            "bus68-partial": bus68_partial}


def fixture(name, **kwargs):
    """Fresh :class:`AnalysisConfig` for a built-in fixture."""
    try:
        make = FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
    return copy.deepcopy(make(**kwargs))
