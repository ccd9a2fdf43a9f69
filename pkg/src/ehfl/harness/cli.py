"""Command-line entry point (``ehfl``).

Exit codes: 0 success, 1 configuration error, 2 runtime error,
3 bound check failed (only with ``--assert-bounds``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..bounds import BoundParams, check_trace_against_bound, theorem1_bound, theorem2_bound
from ..errors import ConfigError, EHFLError
from .config import load_config
from .experiment import compare_schedulers, emit_plot_data, run_experiment
from .presets import PRESETS
from .trace import read_trace

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_BOUND = 0, 1, 2, 3


def _config_args(p):
    p.add_argument("config", nargs="?", help="TOML config file or preset name")
    p.add_argument("--preset", help="start from a named preset")
    p.add_argument("-s", "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("-o", "--output-dir", help="output directory (else $EHFL_OUTPUT_DIR or run.output_dir)")


def _bound_args(p, with_counts=True):
    p.add_argument("--which", choices=["thm1", "thm2"], required=True)
    p.add_argument("--L", type=float, required=True)
    p.add_argument("--sigma-sq", type=float, required=True)
    p.add_argument("--f0-gap", type=float, required=True)
    p.add_argument("--K", type=int, default=1)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--form", choices=["printed", "derived"], default="printed")
    if with_counts:
        p.add_argument("--n-min", type=int, required=True)
        p.add_argument("--n-max", type=int, required=True)
        p.add_argument("--T", type=int, required=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ehfl", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every seed of a config")
    _config_args(run)
    run.add_argument("--assert-bounds", action="store_true", help="exit 3 when the bound check fails")

    cmp_ = sub.add_parser("compare", help="paired-seed scheduler comparison")
    _config_args(cmp_)
    cmp_.add_argument("--schedulers", help="comma-separated, e.g. myopic,greedy,round_robin")
    cmp_.add_argument("--metric", default="loss")
    cmp_.add_argument("--window", type=int, default=10)

    bounds = sub.add_parser("bounds", help="evaluate convergence bounds")
    bsub = bounds.add_subparsers(dest="bounds_command", required=True)
    ev = bsub.add_parser("eval", help="evaluate a bound for given constants")
    _bound_args(ev)
    ct = bsub.add_parser("check-trace", help="compare trace files against a bound")
    ct.add_argument("traces", nargs="+")
    _bound_args(ct, with_counts=False)
    ct.add_argument("--assert", dest="assert_", action="store_true", help="exit 3 when not satisfied")

    pd = sub.add_parser("plot-data", help="mean/std columns across trace files")
    pd.add_argument("traces", nargs="+")
    pd.add_argument("--metric", default="loss")
    pd.add_argument("--window", type=int, default=1)
    pd.add_argument("--out", help="write here instead of stdout")

    pr = sub.add_parser("presets", help="preset configurations")
    pr.add_argument("action", choices=["list", "show"])
    pr.add_argument("name", nargs="?")
    return ap


def _strip(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "results"}


def _cmd_run(a) -> int:
    cfg = load_config(a.config, a.preset, a.overrides, a.output_dir)
    summary = _strip(run_experiment(cfg))
    print(json.dumps({k: summary[k] for k in ("name", "scheduler", "mean_final_loss",
                                              "mean_avg_grad_norm_sq", "bound")}, indent=2))
    print(f"wrote {len(summary['traces'])} traces to {cfg.output_dir}", file=sys.stderr)
    bound = summary.get("bound")
    if a.assert_bounds and bound is not None and not bound.get("satisfied"):
        return EXIT_BOUND
    return EXIT_OK


def _cmd_compare(a) -> int:
    cfg = load_config(a.config, a.preset, a.overrides, a.output_dir)
    names = a.schedulers.split(",") if a.schedulers else None
    rep = _strip(compare_schedulers(cfg, names, metric=a.metric, window=a.window))
    for lab in rep["schedulers"]:
        e = rep["entries"][lab]
        print(f"{lab:>14}  mean final loss {e['mean_final_loss']:.6g} (std {e['std_final_loss']:.3g})")
    for p in rep["pairs"]:
        print(f"{p['a']} vs {p['b']}: {p['a_better']}-{p['b_better']} (ties {p['ties']}), sign-test p={p['p_value']:.3g}")
    return EXIT_OK


def _params(a, n_min=1, n_max=1, T=1) -> BoundParams:
    return BoundParams(L=a.L, sigma_sq=a.sigma_sq, f0_gap=a.f0_gap, n_min=getattr(a, "n_min", n_min),
                       n_max=getattr(a, "n_max", n_max), K=a.K, T=getattr(a, "T", T), eta=a.eta)


def _cmd_bounds(a) -> int:
    if a.bounds_command == "eval":
        fn = theorem1_bound if a.which == "thm1" else theorem2_bound
        print(fn(_params(a), a.form).to_json(indent=2))
        return EXIT_OK
    traces = [read_trace(p).records for p in a.traces]
    T = len(traces[0])
    rep = check_trace_against_bound(traces, _params(a, 1, 1, T), a.which, a.form)
    print(rep.to_json(indent=2))
    return EXIT_BOUND if a.assert_ and not rep.satisfied else EXIT_OK


def _cmd_plot(a) -> int:
    groups: dict = {}
    for p in a.traces:
        tr = read_trace(p)
        groups.setdefault(tr.label, []).append(tr)
    text = emit_plot_data(groups, a.metric, a.window, a.out)
    if a.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_presets(a) -> int:
    if a.action == "list":
        for name, p in PRESETS.items():
            print(f"{name:<22} {p.get('description', '')}")
        return EXIT_OK
    if a.name not in PRESETS:
        raise ConfigError({"preset": f"unknown preset {a.name!r}"})
    print(json.dumps(PRESETS[a.name], indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"run": _cmd_run, "compare": _cmd_compare, "bounds": _cmd_bounds, "plot-data": _cmd_plot,
               "presets": _cmd_presets}[a.command]
    try:
        return handler(a)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (EHFLError, ValueError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
