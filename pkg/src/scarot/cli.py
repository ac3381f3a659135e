"""Command-line interface.

Exit codes: 0 success, 2 bad input (arguments, malformed or non-SPD data),
3 unsupported stratum or dimension, 4 no convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
import warnings

import numpy as np

from . import __version__
from .config import RunConfig
from .distance import d_psr, d_sr
from .errors import (
    BadParameter,
    DatasetError,
    DimensionTooLarge,
    NoConvergenceWarning,
    ScarotError,
    UnsupportedDimension,
    UnsupportedStratum,
)
from .group import canonical_decomposition
from .inference import (
    ai_mean,
    le_coordinates,
    le_mean,
    psr_coordinates,
    sample_model_2d,
    spd_log,
    two_group_report,
    vecd,
)
from .io import format_dataset, read_dataset
from .manifold import EigenDecomp, log_map, vectorize
from .mean import certify_sr_vs_psr, certify_uniqueness, psr_mean

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STRATUM = 3
EXIT_NO_CONVERGENCE = 4

CASES = {
    1: {"sigma_theta": math.pi / 12, "mu1": 2.0, "mu2": 0.0, "sigma_d": 0.2},
    2: {"sigma_theta": math.pi / 3, "mu1": 1.0, "mu2": 0.0, "sigma_d": 0.2},
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _add_config(p: argparse.ArgumentParser):
    g = p.add_argument_group("configuration")
    g.add_argument("--k", type=float, default=1.0, help="rotation weight of the metric")
    g.add_argument("--eps", type=float, default=1e-12, help="objective-decrease stopping tolerance")
    g.add_argument("--tol-opt", type=float, default=1e-10, help="angle tolerance of 1-D searches")
    g.add_argument("--eps-strat", type=float, default=1e-8, help="log-gap below which eigenvalues are tied")
    g.add_argument("--max-iter", type=int, default=1000, help="iterations of the rotation mean")
    g.add_argument("--max-outer", type=int, default=100, help="outer iterations of the PSR mean")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--bootstrap", "-B", dest="B", type=int, default=200, help="bootstrap replicates")
    g.add_argument("--level", type=float, default=0.95, help="confidence level")


def _config(ns) -> RunConfig:
    return RunConfig(k=ns.k, eps=ns.eps, tol_opt=ns.tol_opt, eps_strat=ns.eps_strat, max_iter=ns.max_iter,
                     max_outer=ns.max_outer, seed=ns.seed, B=ns.B, level=ns.level)


def _decomp_json(m: EigenDecomp) -> dict:
    return {"U": m.U.tolist(), "D": m.eigenvalues.tolist()}


def _emit_json(obj, out):
    out.write(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _header(cmd: str, cfg: RunConfig) -> dict:
    return {"command": cmd, "version": __version__, "config": cfg.as_dict()}


def _mean(cfg: RunConfig, X, multi_start=False):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoConvergenceWarning)
        return psr_mean(X, k=cfg.k, eps=cfg.eps, max_outer=cfg.max_outer, multi_start=multi_start,
                        eps_strat=cfg.eps_strat, tol_opt=cfg.tol_opt, so_max_iter=cfg.max_iter)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_mean(ns, out) -> int:
    cfg = _config(ns)
    X = read_dataset(ns.input)
    t0 = time.perf_counter()
    res = _mean(cfg, X, ns.multi_start)
    report = _header("mean", cfg)
    report.update({
        "p": int(X.shape[-1]),
        "n": int(X.shape[0]),
        "mean": _decomp_json(res.mean),
        "mean_matrix": res.mean.compose().tolist(),
        "orbit": [_decomp_json(m) for m in res.orbit],
        "orbit_size": res.orbit_size,
        "objective": res.objective,
        "objective_trace": list(res.objective_trace),
        "iterations": res.iterations,
        "settled_after": res.settled_after,
        "converged": res.converged,
    })
    certs = {}
    try:
        certs["uniqueness"] = certify_uniqueness(X, cfg.k, cfg.eps_strat, cfg.tol_opt).as_dict()
    except UnsupportedStratum as exc:
        certs["uniqueness"] = {"kind": "uniqueness", "holds": False, "witnesses": {}, "note": f"skipped: {exc}"}
    try:
        certs["sr_vs_psr"] = certify_sr_vs_psr(X, res, cfg.k, cfg.eps_strat, cfg.tol_opt).as_dict()
    except (UnsupportedDimension, UnsupportedStratum) as exc:
        certs["sr_vs_psr"] = {"kind": "unavailable", "holds": False, "witnesses": {}, "note": f"skipped: {exc}"}
    report["certificates"] = certs
    if not ns.no_timing:
        report["runtime_s"] = time.perf_counter() - t0
    _emit_json(report, out)
    return EXIT_OK if res.converged else EXIT_NO_CONVERGENCE


def _load_point(path: str):
    """Dataset CSV, or a JSON file ``{"U": ..., "D": ...}`` for one decomposition."""
    if str(path).endswith(".json"):
        try:
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
            return [EigenDecomp.from_diag(np.array(obj["U"], dtype=float), np.array(obj["D"], dtype=float))], True
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise DatasetError(f"cannot read decomposition from {path}: {exc}") from None
    return list(read_dataset(path)), False


def cmd_dist(ns, out) -> int:
    cfg = _config(ns)
    X = read_dataset(ns.x)
    Y, is_decomp = _load_point(ns.y)
    if is_decomp and ns.mode == "sr":
        Y = [m.compose() for m in Y]
    nx, ny = len(X), len(Y)
    if nx != ny and 1 not in (nx, ny):
        raise DatasetError(f"record counts {nx} and {ny} are incompatible (need equal or one of them 1)")
    results = []
    for i in range(max(nx, ny)):
        Xi, Yi = X[min(i, nx - 1)], Y[min(i, ny - 1)]
        if ns.mode == "sr":
            mp = d_sr(Xi, Yi, cfg.k, cfg.eps_strat, cfg.tol_opt)
            results.append({"index": i, "distance": mp.dist, "m_x": _decomp_json(mp.m_x), "m_y": _decomp_json(mp.m_y)})
        else:
            m = Yi if is_decomp else canonical_decomposition(Yi)
            dist, e = d_psr(Xi, m, cfg.k, cfg.eps_strat, cfg.tol_opt)
            results.append({"index": i, "distance": dist, "m_x": _decomp_json(e), "m": _decomp_json(m)})
    report = _header("dist", cfg)
    report.update({"mode": ns.mode, "results": results})
    _emit_json(report, out)
    return EXIT_OK


def cmd_simulate(ns, out) -> int:
    cfg = _config(ns)
    if ns.case is not None:
        params = dict(CASES[ns.case])
    else:
        missing = [a for a in ("sigma_theta", "mu1", "mu2", "sigma_d") if getattr(ns, a) is None]
        if missing:
            raise BadParameter("without --case, give --sigma-theta, --mu1, --mu2 and --sigma-d")
        params = {a: getattr(ns, a) for a in ("sigma_theta", "mu1", "mu2", "sigma_d")}
    if ns.n < 1:
        raise BadParameter("--n must be at least 1")
    X = sample_model_2d(ns.n, params["sigma_theta"], params["mu1"], params["mu2"], params["sigma_d"], cfg.seed)
    with open(ns.output, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_dataset(X))
    report = _header("simulate", cfg)
    report.update({"case": ns.case, "params": params, "n": ns.n, "output": ns.output})
    if not ns.no_analysis:
        res = _mean(cfg, X)
        cert = certify_sr_vs_psr(X, res, cfg.k, cfg.eps_strat, cfg.tol_opt)
        report["analysis"] = {
            "psr_mean": _decomp_json(res.mean),
            "converged": res.converged,
            "certificate": cert.as_dict(),
            "f_sr_at_psr_mean": cert.witnesses["f_sr_psr_mean"],
            "f_sr_lower_min": cert.witnesses["f_sr_lower_min"],
        }
    _emit_json(report, out)
    return EXIT_OK


def cmd_compare(ns, out) -> int:
    cfg = _config(ns)
    X = read_dataset(ns.input)
    p = X.shape[-1]
    d = p * (p + 1) // 2
    res = _mean(cfg, X)
    ref = res.mean
    le = le_coordinates(X).coords
    psr = psr_coordinates(X, ref, cfg.k, cfg.eps_strat, cfg.tol_opt).coords
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["tag", "index"] + [f"le_{j + 1}" for j in range(d)] + [f"psr_{j + 1}" for j in range(d)])

    def fmt(v):
        return [format(float(x), ".17g") for x in v]

    for i in range(X.shape[0]):
        writer.writerow(["obs", i] + fmt(le[i]) + fmt(psr[i]))
    for tag, M in (("le_mean", le_mean(X)), ("ai_mean", ai_mean(X)), ("psr_mean", ref.compose())):
        row_le = vecd(spd_log(M))
        if tag == "psr_mean":
            row_psr = vectorize(log_map(ref, ref), cfg.k)
        else:
            row_psr = psr_coordinates([M], ref, cfg.k, cfg.eps_strat, cfg.tol_opt).coords[0]
        writer.writerow([tag, ""] + fmt(row_le) + fmt(row_psr))
    return EXIT_OK if res.converged else EXIT_NO_CONVERGENCE


def cmd_group_test(ns, out) -> int:
    cfg = _config(ns)
    X1, X2 = read_dataset(ns.input1), read_dataset(ns.input2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NoConvergenceWarning)
        rep = two_group_report(X1, X2, cfg.B, cfg.level, cfg.seed, cfg.k, cfg.eps, cfg.max_outer,
                               cfg.eps_strat, cfg.tol_opt)
    report = _header("group-test", cfg)
    report.update(rep.as_dict())
    report["n"] = [int(X1.shape[0]), int(X2.shape[0])]
    _emit_json(report, out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scarot", description="Scaling-rotation statistics for SPD matrices.")
    parser.add_argument("--version", action="version", version=f"scarot {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mean", help="sample PSR mean with certificates (JSON)")
    p.add_argument("input", help="dataset CSV")
    p.add_argument("--multi-start", action="store_true", help="start from every observation")
    p.add_argument("--no-timing", action="store_true", help="omit the runtime field")
    _add_config(p)
    p.set_defaults(func=cmd_mean)

    p = sub.add_parser("dist", help="SR or PSR distances between records (JSON)")
    p.add_argument("x", help="dataset CSV")
    p.add_argument("y", help="dataset CSV, or JSON {\"U\": ..., \"D\": ...} for one decomposition")
    p.add_argument("--mode", choices=("sr", "psr"), default="sr")
    _add_config(p)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("simulate", help="draw a 2x2 dataset from the rotation/log-normal model")
    p.add_argument("--case", type=int, choices=(1, 2), help="preset parameter set")
    p.add_argument("--sigma-theta", type=float)
    p.add_argument("--mu1", type=float)
    p.add_argument("--mu2", type=float)
    p.add_argument("--sigma-d", type=float)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--output", "-o", required=True, help="dataset CSV to write")
    p.add_argument("--no-analysis", action="store_true", help="skip the PSR mean and certificate")
    _add_config(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="LE and PSR coordinates plus LE/AI/PSR means (CSV)")
    p.add_argument("input", help="dataset CSV")
    _add_config(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("group-test", help="bootstrap comparison of two samples (JSON)")
    p.add_argument("input1")
    p.add_argument("input2")
    _add_config(p)
    p.set_defaults(func=cmd_group_test)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns, out)
    except (UnsupportedStratum, UnsupportedDimension, DimensionTooLarge) as exc:
        print(f"scarot: unsupported input: {exc}", file=sys.stderr)
        return EXIT_STRATUM
    except ScarotError as exc:
        print(f"scarot: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"scarot: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
