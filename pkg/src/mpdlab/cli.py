"""Command-line surface: ``mpdlab <command> --config path [--set key=value]... [--out dir] [--csv]``."""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .config import OUT_ENV, ResultEnvelope, apply_overrides, load_config, parse_config, tensor_terms
from .errors import MPDError

COMMANDS = ("spectrum", "mpd", "kappa", "entropy", "xray", "derivative-check", "hessian-check", "validate", "export")

DEFAULT_FAMILY = {"kind": "conformal", "bumps": [{"center": [0.2, 1.1], "radius": 0.8, "amplitude": 1.0}]}
DEFAULT_HESSIAN = {
    "tensors": [{"kind": "tracefree_hessian", "coef": 1e-3,
                 "bumps": [{"center": [0.2, 1.1], "radius": 2.4, "amplitude": 1.0}]}],
    "tt_tensors": [{"kind": "holomorphic", "coef": 0.05, "pole": [0.1, 1.2]}],
}
DEFAULT_XRAY = [{"kind": "hessian", "coef": 1.0, "bumps": [{"center": [0.2, 1.1], "radius": 0.8, "amplitude": 1.0}]}]


def _classes(cfg):
    from .fuchsian import ConjugacyClass, enumerate_classes
    if cfg.data["classes"] is not None:
        return [ConjugacyClass.from_word(w, cfg.group.letters) for w in cfg.data["classes"]]
    return enumerate_classes(cfg.group, cfg.data["depth"])


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# --- commands ----------------------------------------------------------------

def cmd_spectrum(cfg, out, want_csv):
    from .spectra import spectrum
    num = cfg.numerics
    sp = spectrum(cfg.metric(), cfg.group, cfg.data["depth"], step=num["ode_step"], burn_in=num["burn_in"],
                  classes=_classes(cfg))
    rows = sp.to_dicts()
    if want_csv:
        _write_csv(os.path.join(out, "spectrum.csv"), ["word", "length", "log_mpd", "lambda", "route_discrepancy"],
                   [[r["word"], r["length"], r["log_mpd"], r["lambda"], r["route_discrepancy"]] for r in rows])
    return {"entries": rows, "failures": sp.failures}


def cmd_mpd(cfg, out, want_csv):
    from .geodesics import find_closed_geodesic, monodromy
    from .spectra import mpd_routes
    num = cfg.numerics
    metric = cfg.metric()
    rows, failures = [], {}
    for cls in _classes(cfg):
        try:
            geo = find_closed_geodesic(metric, cfg.group, cls, step=num["ode_step"], tol=num["shooting_tol"],
                                       coarse_step=num["coarse_step"])
            a, b = mpd_routes(metric, geo, num["burn_in"])
            mono = monodromy(metric, geo)
            rows.append({"word": str(cls), "length": geo.period, "monodromy_route": a, "riccati_route": b,
                         "route_discrepancy": abs(a - b) / abs(a), "monodromy_det": mono.det,
                         "closure_residual": geo.closure_residual, "newton_iterations": geo.iterations})
            if want_csv:
                _write_csv(os.path.join(out, f"geodesic_{cls}.csv"), ["t", "x", "y", "theta"], geo.to_rows())
        except MPDError as exc:
            failures[str(cls)] = exc.to_payload()
    return {"classes": rows, "failures": failures}


def _rule(cfg, metric, key="quadrature"):
    from .fiber import sm_quadrature
    q = cfg.numerics[key]
    return sm_quadrature(metric, q["n_angle"], q["n_radius"], q["n_fiber"])


def cmd_kappa(cfg, out, want_csv):
    from .fiber import mean_root_curvature
    from .metric import check_negative_curvature
    metric = cfg.metric()
    margin = check_negative_curvature(metric)
    rule = _rule(cfg, metric)
    return {"kappa": mean_root_curvature(metric, rule), "negativity_margin": margin, "volume": rule.volume}


def cmd_entropy(cfg, out, want_csv):
    from .fiber import liouville_entropy, mean_root_curvature
    metric = cfg.metric()
    num = cfg.numerics
    rule = _rule(cfg, metric)
    est = liouville_entropy(metric, rule, num["burn_in"], num["entropy_step"], num["birkhoff_time"],
                            num["birkhoff_discard"])
    kappa = mean_root_curvature(metric, rule)
    return {"entropy": est.to_dict(), "kappa": kappa, "gap": est.space - kappa}


def cmd_xray(cfg, out, want_csv):
    from .geodesics import find_closed_geodesic
    from .spectra import xray
    from .tensors import term_tensor
    num = cfg.numerics
    spec = cfg.data["xray"] if cfg.data["xray"] is not None else DEFAULT_XRAY
    S = term_tensor(tensor_terms(spec, cfg.data["perturbation"]["truncation"], "xray"), cfg.group)
    metric = cfg.metric()
    rows, failures = [], {}
    for cls in _classes(cfg):
        try:
            geo = find_closed_geodesic(metric, cfg.group, cls, step=num["ode_step"], tol=num["shooting_tol"],
                                       coarse_step=num["coarse_step"])
            rows.append({"word": str(cls), "length": geo.period, "xray": xray(S, geo)})
        except MPDError as exc:
            failures[str(cls)] = exc.to_payload()
    if want_csv:
        _write_csv(os.path.join(out, "xray.csv"), ["word", "length", "xray"],
                   [[r["word"], r["length"], r["xray"]] for r in rows])
    return {"tensor": spec, "classes": rows, "failures": failures}


def _family(cfg):
    from .config import bump_field
    from .spectra import MetricFamily
    spec = cfg.family or DEFAULT_FAMILY
    trunc = cfg.data["perturbation"]["truncation"]
    base = cfg.base_metric()
    if spec["kind"] == "conformal":
        return spec, MetricFamily.conformal(base, bump_field(spec.get("bumps"), trunc, "family.bumps"))
    return spec, MetricFamily.linear(base, tensor_terms(spec.get("tensors"), trunc, "family.tensors"))


def cmd_derivative_check(cfg, out, want_csv):
    from .spectra import length_derivative_check, mpd_derivative_check
    num = cfg.numerics
    spec, fam = _family(cfg)
    steps = tuple(num["fd_steps"])
    rows, failures = [], {}
    for cls in _classes(cfg):
        try:
            ln = length_derivative_check(fam, cfg.group, cls, steps, num["ode_step"])
            md = mpd_derivative_check(fam, cfg.group, cls, steps, num["ode_step"], num["burn_in"],
                                      num["tensor_fd_h"], trace_hessian_coeff=num["trace_hessian_coeff"])
            rows.append({"word": str(cls), "length": ln.to_dict(), "mpd": md.to_dict()})
        except MPDError as exc:
            failures[str(cls)] = exc.to_payload()
    return {"family": spec, "classes": rows, "failures": failures}


def cmd_hessian_check(cfg, out, want_csv):
    from .fiber import kappa_hessian_check
    spec = cfg.data["hessian"] or DEFAULT_HESSIAN
    trunc = cfg.data["perturbation"]["truncation"]
    terms = tensor_terms(spec.get("tensors"), trunc, "hessian.tensors")
    tt = tensor_terms(spec["tt_tensors"], trunc, "hessian.tt_tensors") if spec.get("tt_tensors") else None
    q = cfg.numerics["hessian_quadrature"]
    rep = kappa_hessian_check(cfg.base_metric(), terms, q["n_angle"], q["n_radius"], q["n_fiber"],
                              tuple(cfg.numerics["hessian_steps"]), tt_terms=tt)
    return {"tensor": spec, "report": rep.to_dict()}


def cmd_validate(cfg, out, want_csv):
    from .validate import run_invariants
    results = run_invariants(cfg)
    failed = [r for r in results if not r["passed"]]
    return {"passed": len(results) - len(failed), "failed": len(failed), "results": results}


def cmd_export(cfg, out, want_csv):
    from .fuchsian import domain_grid
    q = cfg.numerics["quadrature"]
    grid = domain_grid(cfg.group, q["n_angle"], q["n_radius"])
    gens = {k: g.matrix.tolist() for k, g in cfg.group.generators.items()}
    if want_csv:
        _write_csv(os.path.join(out, "domain_grid.csv"), ["x", "y", "weight"],
                   np.column_stack([grid.xs, grid.ys, grid.weights]))
    return {"generators": gens, "relator": cfg.group.relator, "domain_area": grid.area,
            "circumradius": grid.circumradius, "inradius": grid.inradius, "n_nodes": len(grid.weights),
            "metric": cfg.metric().describe()}


HANDLERS = {
    "spectrum": cmd_spectrum, "mpd": cmd_mpd, "kappa": cmd_kappa, "entropy": cmd_entropy, "xray": cmd_xray,
    "derivative-check": cmd_derivative_check, "hessian-check": cmd_hessian_check, "validate": cmd_validate,
    "export": cmd_export,
}


def build_parser():
    p = argparse.ArgumentParser(prog="mpdlab", description="Marked Poincare determinant workbench.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field by dotted path, e.g. numerics.ode_step=5e-4")
    p.add_argument("--out", help=f"output directory (default: config output_dir, ${OUT_ENV}, or ./results)")
    p.add_argument("--csv", action="store_true", help="also write plot-ready CSV files")
    return p


def _emit_error(exc, out):
    payload = {"ok": False, "error": exc.to_payload() if isinstance(exc, MPDError)
               else {"kind": "internal", "message": str(exc)}}
    text = json.dumps(payload, sort_keys=True)
    print(text)
    if out:
        try:
            os.makedirs(out, exist_ok=True)
            with open(os.path.join(out, "error.json"), "w") as fh:
                fh.write(text + "\n")
        except OSError:
            pass


def run(command, cfg, out, want_csv=False):
    """Execute one command and write ``<out>/<command>.json``; returns the envelope."""
    os.makedirs(out, exist_ok=True)
    payload = HANDLERS[command](cfg, out, want_csv)
    ok = not (command == "validate" and payload["failed"])
    env = ResultEnvelope(command, cfg, payload, ok=ok)
    with open(os.path.join(out, f"{command}.json"), "w") as fh:
        fh.write(env.to_json() + "\n")
    return env


def main(argv=None):
    args = build_parser().parse_args(argv)
    out = args.out
    try:
        if args.config:
            cfg = parse_config(args.config, args.overrides)
        else:
            cfg = load_config(apply_overrides({}, args.overrides))
        out = out or cfg.output_dir()
        env = run(args.command, cfg, out, args.csv)
    except MPDError as exc:
        _emit_error(exc, out)
        return 1
    summary = {"ok": env.ok, "command": env.command, "config_hash": env.config_hash,
               "output": os.path.join(out, f"{env.command}.json")}
    print(json.dumps(summary, sort_keys=True))
    return 0 if env.ok else 3


if __name__ == "__main__":
    sys.exit(main())
