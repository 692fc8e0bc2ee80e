"""Command-line interface and run orchestration.

Subcommands::

    gainphase analyze  --config FILE [--mode M] [--fmin-hz F] [--fmax-hz F] [--points N] [--out DIR]
    gainphase gscr     --config FILE
    gainphase oracle   --config FILE [--out DIR]
    gainphase fixtures --list | --name NAME [--emit FILE]

``analyze`` exits 0 when stability is certified, 2 when it is not (undecided
bands or a failed precondition) and 1 on errors.  ``oracle`` exits 0 for a
stable closed loop and 2 otherwise.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import criteria
from .config import ConfigError, build_devices, build_network, load_config
from .fixtures import FIXTURES, fixture
from .network import NetworkError, average_eps, gscr, reduced_b_matrix
from .oracle import OracleError, closed_loop_eigs, write_eigs_csv

__all__ = ["main", "analyze", "AnalysisResult", "resolve_eps", "write_profiles"]

EXIT_OK, EXIT_ERROR, EXIT_UNDECIDED = 0, 1, 2


@dataclass
class AnalysisResult:
    mode: str
    certified: bool
    reports: dict
    summary: dict
    eigs: object = None

    @property
    def exit_code(self):
        return EXIT_OK if self.certified else EXIT_UNDECIDED


def resolve_eps(cfg, net):
    """Rescaling R/X ratio: a number, or the average over RL branches."""
    eps = cfg.sweep["eps_tilde"]
    if eps == "average":
        return average_eps(net)
    return float(eps)


def _grid(cfg):
    sw = cfg.sweep
    return criteria.FrequencyGrid.default(sw["f_min_hz"], sw["f_max_hz"], sw["points"],
                                          cfg.omega0, refine_budget=sw["refine_budget"])


def analyze(cfg, out_dir=None):
    """Run the configured analysis; write outputs when ``out_dir`` is given."""
    net = build_network(cfg)
    devices = build_devices(cfg)
    S = [d["S"] for d in cfg.devices]
    D = [d["D"] for d in cfg.devices]
    eps = resolve_eps(cfg, net)
    grid = _grid(cfg)
    mode = cfg.sweep["mode"]
    if mode == "corollary":
        if any(x != 1.0 for x in D):
            raise ConfigError("devices", "corollary mode uses D = I; remove the D entries")
        rep = criteria.corollary_check(devices, net, S, grid, eps)
        reports = {"corollary": rep}
        certified = rep.certified
        summary = rep.summary()
    elif mode == "monolithic":
        ev = criteria.network_evaluator(net, S, D, eps)
        rep = criteria.sweep(devices, ev, grid, D, eps, net.omega0)
        reports = {"monolithic": rep}
        certified = rep.certified
        summary = rep.summary()
    else:
        groups = [d["group"] for d in cfg.devices]
        res = criteria.two_stage(devices, net, groups, grid, eps, D,
                                 subsystem1=cfg.sweep["subsystem1"])
        reports = {k: r for k, r in (("subsystem1", res.report1), ("subsystem2", res.report2))
                   if r is not None}
        certified = res.certified
        summary = res.summary()
    summary = {"mode": mode, "eps_tilde": eps, "certified": bool(certified),
               "meta": cfg.meta, "result": summary}
    eigs = None
    if cfg.output["oracle"]:
        ce = closed_loop_eigs(devices, net)
        eigs = ce.eigs
        dom = ce.dominant()
        summary["oracle"] = {"stable": ce.stable, "max_real": ce.max_real,
                             "dominant": None if dom is None else [dom.real, dom.imag],
                             "dominant_freq_hz": None if dom is None else abs(dom.imag) / (2 * np.pi),
                             "structural": len(ce.structural)}
    result = AnalysisResult(mode, bool(certified), reports, summary, eigs)
    if out_dir is not None:
        _write_outputs(result, cfg, out_dir)
    return result


def write_profiles(report, out_dir, prefix):
    path = os.path.join(out_dir, f"{prefix}_device_profiles.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["device", "freq_hz", "sigma_max", "sigma_min", "sectorial", "phi_lo", "phi_hi"])
        for p in report.devices:
            for k in range(p.omega.size):
                w.writerow([p.label, repr(float(p.omega[k] / (2 * np.pi))),
                            repr(float(p.sigma_max[k])), repr(float(p.sigma_min[k])),
                            int(p.sectorial[k]), repr(float(p.phi_lo[k])), repr(float(p.phi_hi[k]))])
    n = report.network
    path = os.path.join(out_dir, f"{prefix}_network_profile.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["freq_hz", "sigma_min", "sigma_max", "sectorial", "area_lo", "area_hi", "unreliable"])
        for k in range(n.omega.size):
            w.writerow([repr(float(n.omega[k] / (2 * np.pi))), repr(float(n.sigma_min[k])),
                        repr(float(n.sigma_max[k])), int(n.sectorial[k]), repr(float(n.phi_lo[k])),
                        repr(float(n.phi_hi[k])), int(n.unreliable[k])])


def _write_outputs(result, cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    fmts = cfg.output["formats"]
    for name, rep in result.reports.items():
        if "csv" in fmts:
            rep.write_csv(os.path.join(out_dir, f"{name}_report.csv"))
            write_profiles(rep, out_dir, name)
        if "json" in fmts:
            rep.write_json(os.path.join(out_dir, f"{name}_report.json"))
    if "json" in fmts:
        with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(criteria._jsonable(result.summary), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if result.eigs is not None:
        write_eigs_csv(os.path.join(out_dir, "eigenvalues.csv"), result.eigs)


def _load(args):
    if args.config in FIXTURES:
        return fixture(args.config)
    return load_config(args.config)


def _cmd_analyze(args):
    cfg = _load(args)
    cfg = cfg.with_sweep(mode=args.mode, f_min_hz=args.fmin_hz, f_max_hz=args.fmax_hz,
                         points=args.points)
    out = args.out or cfg.output["directory"]
    res = analyze(cfg, out)
    s = res.summary
    print(f"mode: {res.mode}  certified: {res.certified}")
    for name, rep in res.reports.items():
        bands = ", ".join(f"[{a:.3f}, {b:.3f}]" for a, b in rep.undecided_bands_hz) or "none"
        print(f"{name}: undecided bands (Hz): {bands}")
        bad = [k for k, v in rep.preconditions.items() if v is False]
        if bad:
            print(f"{name}: failed preconditions: {', '.join(bad)}")
    if "oracle" in s:
        print(f"oracle: stable={s['oracle']['stable']} max_real={s['oracle']['max_real']:.6g}")
    print(f"outputs written to {out}")
    return res.exit_code


def _cmd_gscr(args):
    cfg = _load(args)
    net = build_network(cfg)
    S = [d["S"] for d in cfg.devices]
    eps = sorted({round(b.law.eps, 12) for b in net.branches if hasattr(b.law, "eps")})
    val = gscr(reduced_b_matrix(net), S)
    print(json.dumps({"gscr": val, "identical_rx": len(eps) <= 1, "rx_ratios": eps}))
    return EXIT_OK


def _cmd_oracle(args):
    cfg = _load(args)
    net = build_network(cfg)
    devices = build_devices(cfg)
    res = closed_loop_eigs(devices, net)
    out = args.out or cfg.output["directory"]
    os.makedirs(out, exist_ok=True)
    write_eigs_csv(os.path.join(out, "eigenvalues.csv"), res.eigs)
    dom = res.dominant()
    info = {"stable": res.stable, "max_real": res.max_real, "n_eigs": int(res.eigs.size),
            "structural": int(res.structural.size),
            "dominant_freq_hz": None if dom is None else abs(dom.imag) / (2 * np.pi)}
    print(json.dumps(info))
    return EXIT_OK if res.stable else EXIT_UNDECIDED


def _cmd_fixtures(args):
    if args.list or not args.name:
        for name in FIXTURES:
            print(name)
        return EXIT_OK
    text = fixture(args.name).to_json()
    if args.emit and args.emit != "-":
        with open(args.emit, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="gainphase", description=(
        "Decentralized gain/phase stability certificates for converter-dominated grids."))
    sub = p.add_subparsers(dest="command", required=True)
    a = sub.add_parser("analyze", help="run the configured stability analysis")
    a.add_argument("--config", required=True, help="JSON config file or fixture name")
    a.add_argument("--mode", choices=["monolithic", "two_stage", "corollary"])
    a.add_argument("--fmin-hz", type=float)
    a.add_argument("--fmax-hz", type=float)
    a.add_argument("--points", type=int)
    a.add_argument("--out", help="output directory")
    a.set_defaults(func=_cmd_analyze)
    g = sub.add_parser("gscr", help="print the generalized short-circuit ratio")
    g.add_argument("--config", required=True)
    g.set_defaults(func=_cmd_gscr)
    o = sub.add_parser("oracle", help="closed-loop eigenvalues of the configured system")
    o.add_argument("--config", required=True)
    o.add_argument("--out")
    o.set_defaults(func=_cmd_oracle)
    f = sub.add_parser("fixtures", help="list or emit built-in configurations")
    f.add_argument("--list", action="store_true")
    f.add_argument("--name", choices=sorted(FIXTURES))
    f.add_argument("--emit", help="write the fixture JSON here ('-' for stdout)")
    f.set_defaults(func=_cmd_fixtures)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, NetworkError, OracleError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
