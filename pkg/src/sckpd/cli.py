"""Command-line front end.

Subcommands: ``simulate``, ``fit``, ``summarize``, ``check-hyper``.  Every
run is described by a YAML config file and/or flags (flags win).  Results
go to stdout as JSON; failures print an error JSON to stderr and exit
nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import PRESETS, RunConfig, check_hyper, fit, simulate_dynamic, \
    simulate_static, summarize_draws

PRESET_FAMILY = {
    "paper-static": "static",
    "paper-separable": "static",
    "paper-dynamic": "dynamic",
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--mode")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", dest="output_dir")
    p.add_argument("--input", dest="input_path")
    p.add_argument("--d1", type=int)
    p.add_argument("--d2", type=int)
    p.add_argument("--n-components", dest="n_components", type=int)
    p.add_argument("--n-obs", dest="n_obs", type=int)
    p.add_argument("--seasons", dest="n_seasons", type=int)
    p.add_argument("--cycles", dest="n_cycles", type=int)
    p.add_argument("--chains", dest="n_chains", type=int)
    p.add_argument("--warmup", dest="n_warmup", type=int)
    p.add_argument("--draws", dest="n_draws", type=int)
    p.add_argument("--leapfrog", dest="n_leapfrog", type=int)
    p.add_argument("--center", action="store_const", const=True)
    p.add_argument("--identity-transition", dest="transition",
                   action="store_const", const="identity")


def _build_config(args: argparse.Namespace, family_prefix: str) -> RunConfig:
    raw: dict = {}
    if args.config:
        import yaml
        with open(args.config) as fh:
            raw = yaml.safe_load(fh) or {}
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("command", "config", "func") and v is not None}
    raw.update(overrides)
    if raw.get("mode") is None:
        preset = raw.get("preset")
        family = PRESET_FAMILY.get(preset, "dynamic" if
                                   raw.get("n_seasons", 1) * raw.get("n_cycles", 1) > 1
                                   else "static")
        raw["mode"] = f"{family_prefix}-{family}"
    return RunConfig.from_dict(raw)


def _cmd_simulate(args) -> dict:
    config = _build_config(args, "simulate")
    if config.mode == "simulate-dynamic":
        _, truth = simulate_dynamic(config)
    else:
        _, truth = simulate_static(config)
    return {"written": config.output_dir, "truth": truth}


def _cmd_fit(args) -> dict:
    config = _build_config(args, "fit")
    return fit(config)


def _cmd_summarize(args) -> dict:
    return summarize_draws(args.draws_file, args.truth)


def _cmd_check_hyper(args) -> dict:
    config = _build_config(args, "fit")
    return check_hyper(config)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sckpd",
        description="Simulate and fit Kronecker-sum Cholesky precision models")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="draw a dataset and ground truth")
    _add_common(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_fit = sub.add_parser("fit", help="run inference on a dataset")
    _add_common(p_fit)
    p_fit.set_defaults(func=_cmd_fit)

    p_sum = sub.add_parser("summarize", help="summarize a draws table")
    p_sum.add_argument("draws_file")
    p_sum.add_argument("--truth", help="ground-truth JSON for a coverage report")
    p_sum.set_defaults(func=_cmd_summarize)

    p_hyp = sub.add_parser("check-hyper",
                           help="print solved hyperparameters and targets")
    _add_common(p_hyp)
    p_hyp.set_defaults(func=_cmd_check_hyper)

    args = parser.parse_args(argv)
    try:
        result = args.func(args)
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports all failures
        json.dump({"error": type(exc).__name__, "message": str(exc)},
                  sys.stderr, default=float)
        sys.stderr.write("\n")
        return 2
    json.dump(result, sys.stdout, indent=2, sort_keys=True, default=float)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
