"""JSON analysis configuration: validation and model building.

The document schema is described in ``docs/config_schema.md``.  Validation
errors carry a field path such as ``network.branches[2].B``.
"""

import copy
import json
import os
from dataclasses import dataclass, fields

import numpy as np

from .devmodel import (
    GFLParams, GFMParams, OperatingPoint, SGParams, gfl_admittance, gfm_admittance,
    read_tabulated_csv, sg_admittance,
)
from .network import RL, Branch, Load, NetworkModel, Shunt

__all__ = ["ConfigError", "AnalysisConfig", "load_config", "build_network",
           "build_devices", "MODES", "DEVICE_CLASSES"]

MODES = ("monolithic", "two_stage", "corollary")
DEVICE_CLASSES = ("GFL", "GFM", "SG", "tabulated")
PARAM_TYPES = {"GFL": GFLParams, "GFM": GFMParams, "SG": SGParams}
SUBSYSTEM1 = ("sweep", "oracle", "assume")

SWEEP_DEFAULTS = {"f_min_hz": None, "f_max_hz": None, "points": 600,
                  "eps_tilde": "average", "mode": "monolithic", "subsystem1": "sweep",
                  "refine_budget": 200}
OUTPUT_DEFAULTS = {"directory": "gainphase_out", "formats": ["csv", "json"], "oracle": False}


class ConfigError(ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


def _require(d, key, path):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    if key not in d or d[key] is None:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
    return d[key]


def _number(x, path, positive=False, nonneg=False):
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not np.isfinite(x):
        raise ConfigError(path, f"expected a finite number, got {x!r}")
    if positive and not x > 0:
        raise ConfigError(path, f"must be positive, got {x}")
    if nonneg and x < 0:
        raise ConfigError(path, f"must be non-negative, got {x}")
    return float(x)


def _integer(x, path, lo=None):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ConfigError(path, f"expected an integer, got {x!r}")
    if lo is not None and x < lo:
        raise ConfigError(path, f"must be >= {lo}, got {x}")
    return x


@dataclass
class AnalysisConfig:
    """Validated analysis description (plain JSON-compatible data)."""
    network: dict
    devices: list
    sweep: dict
    output: dict
    f0_hz: float = 50.0
    meta: dict = None
    base_dir: str = "."

    @property
    def omega0(self):
        return 2 * np.pi * self.f0_hz

    @classmethod
    def from_dict(cls, doc, base_dir="."):
        if not isinstance(doc, dict):
            raise ConfigError("", "configuration must be a JSON object")
        doc = copy.deepcopy(doc)
        known = {"network", "devices", "sweep", "output", "f0_hz", "meta"}
        for key in doc:
            if key not in known:
                raise ConfigError(key, "unknown top-level field")
        f0 = _number(doc.get("f0_hz", 50.0), "f0_hz", positive=True)
        net = _validate_network(_require(doc, "network", ""))
        devs = _validate_devices(_require(doc, "devices", ""), net)
        sweep = dict(SWEEP_DEFAULTS)
        sweep.update(doc.get("sweep") or {})
        _validate_sweep(sweep)
        out = dict(OUTPUT_DEFAULTS)
        out.update(doc.get("output") or {})
        _validate_output(out)
        return cls(net, devs, sweep, out, f0, doc.get("meta") or {}, base_dir)

    def to_dict(self):
        return {"f0_hz": self.f0_hz, "meta": self.meta, "network": self.network,
                "devices": self.devices, "sweep": self.sweep, "output": self.output}

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text

    def with_sweep(self, **changes):
        new = copy.deepcopy(self)
        new.sweep.update({k: v for k, v in changes.items() if v is not None})
        _validate_sweep(new.sweep)
        return new


def load_config(path):
    """Parse and validate a JSON configuration file."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return AnalysisConfig.from_dict(doc, os.path.dirname(os.path.abspath(path)))


def _validate_network(net):
    M = _integer(_require(net, "nodes", "network"), "network.nodes", 1)
    N = _integer(_require(net, "device_nodes", "network"), "network.device_nodes", 0)
    if N > M:
        raise ConfigError("network.device_nodes", f"must not exceed nodes ({M})")
    branches = _require(net, "branches", "network")
    if not isinstance(branches, list):
        raise ConfigError("network.branches", "expected a list")
    for k, br in enumerate(branches):
        p = f"network.branches[{k}]"
        kind = _require(br, "kind", p)
        for end in ("from", "to"):
            node = _integer(_require(br, end, p), f"{p}.{end}", 1)
            if node > M + 1:
                raise ConfigError(f"{p}.{end}", f"node {node} outside 1..{M + 1} (ground is {M + 1})")
        if br["from"] == br["to"]:
            raise ConfigError(p, "branch connects a node to itself")
        if kind == "RL":
            if "B" in br:
                _number(br["B"], f"{p}.B", positive=True)
            elif "X" in br:
                _number(br["X"], f"{p}.X", positive=True)
                _number(br.get("R", 0.0), f"{p}.R", nonneg=True)
            else:
                raise ConfigError(f"{p}.B", "missing required field (or give X and R)")
            _number(br.get("eps", 0.0), f"{p}.eps", nonneg=True)
        elif kind in ("load", "shunt"):
            key = "R" if kind == "load" else "C"
            if br.get("user_supplied") and br.get(key) is None:
                continue
            _number(_require(br, key, p), f"{p}.{key}", positive=(kind == "load"), nonneg=True)
            if M + 1 not in (br["from"], br["to"]):
                raise ConfigError(p, f"{kind} branches must connect to ground (node {M + 1})")
        else:
            raise ConfigError(f"{p}.kind", f"unknown branch kind {kind!r} (RL, load, shunt)")
    return net


def _validate_devices(devs, net):
    if not isinstance(devs, list):
        raise ConfigError("devices", "expected a list")
    N = net["device_nodes"]
    if len(devs) != N:
        raise ConfigError("devices", f"expected {N} devices (one per device node), got {len(devs)}")
    seen = set()
    ids = set()
    for k, d in enumerate(devs):
        p = f"devices[{k}]"
        cls = _require(d, "class", p)
        if cls not in DEVICE_CLASSES:
            raise ConfigError(f"{p}.class", f"unknown device class {cls!r}")
        node = _integer(_require(d, "node", p), f"{p}.node", 1)
        if node > N:
            raise ConfigError(f"{p}.node", f"device nodes are 1..{N}")
        if node in seen:
            raise ConfigError(f"{p}.node", f"node {node} already has a device")
        seen.add(node)
        did = d.setdefault("id", f"dev{node}")
        if did in ids:
            raise ConfigError(f"{p}.id", f"duplicate device id {did!r}")
        ids.add(did)
        _number(d.setdefault("S", 1.0), f"{p}.S", positive=True)
        _number(d.setdefault("D", 1.0), f"{p}.D", positive=True)
        _number(d.setdefault("theta", 0.0), f"{p}.theta")
        group = d.setdefault("group", "GFL" if cls in ("GFL", "tabulated") else "GFM")
        if group not in ("GFL", "GFM", "SG"):
            raise ConfigError(f"{p}.group", f"grouping tag must be GFL, GFM or SG, got {group!r}")
        if cls == "tabulated":
            _require(d, "file", p)
            if not isinstance(d.setdefault("open_loop_stable", None), (bool, type(None))):
                raise ConfigError(f"{p}.open_loop_stable", "expected true/false")
            continue
        params = d.setdefault("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"{p}.params", "expected an object")
        allowed = {f.name for f in fields(PARAM_TYPES[cls])}
        for key in params:
            if key not in allowed:
                raise ConfigError(f"{p}.params.{key}", f"unknown {cls} parameter")
        op = d.setdefault("op", {})
        for key in op:
            if key not in ("V0", "P0", "Q0"):
                raise ConfigError(f"{p}.op.{key}", "unknown operating point field")
            _number(op[key], f"{p}.op.{key}")
    if N and seen != set(range(1, N + 1)):
        raise ConfigError("devices", "every device node needs exactly one device")
    return sorted(devs, key=lambda d: d["node"])


def _validate_sweep(sw):
    for key in sw:
        if key not in SWEEP_DEFAULTS:
            raise ConfigError(f"sweep.{key}", "unknown sweep field")
    for key in ("f_min_hz", "f_max_hz"):
        if sw[key] is not None:
            _number(sw[key], f"sweep.{key}", positive=True)
    if sw["f_min_hz"] is not None and sw["f_max_hz"] is not None and sw["f_min_hz"] >= sw["f_max_hz"]:
        raise ConfigError("sweep.f_max_hz", "must exceed f_min_hz")
    _integer(sw["points"], "sweep.points", 2)
    _integer(sw["refine_budget"], "sweep.refine_budget", 0)
    if sw["mode"] not in MODES:
        raise ConfigError("sweep.mode", f"must be one of {MODES}")
    if sw["subsystem1"] not in SUBSYSTEM1:
        raise ConfigError("sweep.subsystem1", f"must be one of {SUBSYSTEM1}")
    eps = sw["eps_tilde"]
    if eps != "average":
        _number(eps, "sweep.eps_tilde", nonneg=True)


def _validate_output(out):
    for key in out:
        if key not in OUTPUT_DEFAULTS:
            raise ConfigError(f"output.{key}", "unknown output field")
    if not isinstance(out["directory"], str):
        raise ConfigError("output.directory", "expected a string")
    if not isinstance(out["formats"], list) or not set(out["formats"]) <= {"csv", "json"}:
        raise ConfigError("output.formats", "expected a list drawn from ['csv', 'json']")
    if not isinstance(out["oracle"], bool):
        raise ConfigError("output.oracle", "expected true/false")


def build_network(cfg):
    """:class:`NetworkModel` from a validated configuration.

    Load and shunt entries marked ``user_supplied`` without a value are
    skipped and listed in ``cfg.meta["skipped_branches"]``.
    """
    net = cfg.network
    branches = []
    skipped = []
    for k, br in enumerate(net["branches"]):
        kind = br["kind"]
        if kind == "RL":
            if "B" in br:
                law = RL(float(br["B"]), float(br.get("eps", 0.0)))
            else:
                X, R = float(br["X"]), float(br.get("R", 0.0))
                law = RL(1.0 / X, R / X)
        elif kind == "load":
            if br.get("R") is None:
                skipped.append(k)
                continue
            law = Load(float(br["R"]))
        else:
            if br.get("C") is None:
                skipped.append(k)
                continue
            law = Shunt(float(br["C"]))
        branches.append(Branch(br["from"], br["to"], law))
    cfg.meta = dict(cfg.meta or {}, skipped_branches=skipped)
    return NetworkModel(net["nodes"], net["device_nodes"], branches, cfg.omega0)


def build_devices(cfg):
    """Device admittances in node order."""
    out = []
    for k, d in enumerate(cfg.devices):
        p = f"devices[{k}]"
        cls = d["class"]
        if cls == "tabulated":
            path = d["file"]
            if not os.path.isabs(path):
                path = os.path.join(cfg.base_dir, path)
            dev = read_tabulated_csv(path, device_id=d["id"], S=d["S"], theta=d["theta"],
                                     open_loop_stable=d.get("open_loop_stable"))
            out.append(dev)
            continue
        try:
            params = PARAM_TYPES[cls](**d.get("params", {}))
            op = OperatingPoint(theta_i=d["theta"], omega0=cfg.omega0, **d.get("op", {}))
            build = {"GFL": gfl_admittance, "GFM": gfm_admittance, "SG": sg_admittance}[cls]
            out.append(build(params, op, device_id=d["id"], S=d["S"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(p, str(exc)) from exc
    return out
