"""Command-line entry point: ``pddid {fit,permtest,simulate,experiment}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from typing import Optional, Sequence

from pddid import io
from pddid.chart import render_power_chart
from pddid.errors import PdDidError
from pddid.experiments import METHODS, ScenarioGrid, full_table_grid, power_curve, power_grid, run_grid
from pddid.panel import FAMILIES, GRANULARITIES, ModelSpec, estimate_did
from pddid.permutation import PermutationConfig, pd_did
from pddid.simulate import DgpConfig, second_setting, simulate_panel

log = logging.getLogger("pddid")


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _method_list(text: str) -> list:
    methods = [v.strip() for v in text.split(",") if v.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise argparse.ArgumentTypeError(f"methods must be drawn from {','.join(METHODS)}")
    return methods


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="panel CSV (unit_id,group_id,arm,time,outcome[,z_*])")
    p.add_argument("--cutoff", type=float, required=True,
                   help="last pre-period day; records with time > cutoff are post")
    p.add_argument("--study-length", type=float, default=None,
                   help="study window in days (default: largest observed time)")
    p.add_argument("--method", choices=("original", "detrending"), default="detrending")
    p.add_argument("--family", choices=FAMILIES, default="gaussian")
    p.add_argument("--trend-granularity", choices=GRANULARITIES, default="per_group")
    p.add_argument("--trend-degree", type=int, default=1)
    p.add_argument("--covariates", action="store_true", help="adjust for the z_* columns")
    p.add_argument("-o", "--output", default=None, help="JSON output path (default: stdout)")


def _add_dgp_flags(p: argparse.ArgumentParser, *, scenario: bool) -> None:
    d = DgpConfig()
    if scenario:
        p.add_argument("--gamma", type=float, default=d.gamma)
        p.add_argument("--l", dest="trend_l", type=float, default=d.trend_l)
        p.add_argument("--rho", type=float, default=d.rho)
    p.add_argument("--second-setting", action="store_true",
                   help="alpha_arm=5 and sigma_u=sigma_v=sigma_w=1 unless overridden")
    p.add_argument("--alpha-arm", type=float, default=None)
    p.add_argument("--sigma-u", type=float, default=None)
    p.add_argument("--sigma-v", type=float, default=None)
    p.add_argument("--sigma-w", type=float, default=None)
    p.add_argument("--groups-per-arm", type=int, default=d.groups_per_arm)
    p.add_argument("--n-per-group", type=int, default=d.n_per_group)
    p.add_argument("--study-length", type=float, default=d.study_length)
    p.add_argument("--cutoff", type=float, default=d.cutoff)
    p.add_argument("--obs-min", type=int, default=d.obs_min)
    p.add_argument("--obs-max", type=int, default=d.obs_max)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pddid",
        allow_abbrev=False,
        description="Original, detrending and permutational detrending DID estimation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("fit", allow_abbrev=False, help="fit one DID regression to a panel CSV")
    _add_model_flags(p)

    p = sub.add_parser("permtest", allow_abbrev=False, help="permutational detrending DID on a panel CSV")
    _add_model_flags(p)
    p.add_argument("--m", type=int, default=1000, help="permutation replicates")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("simulate", allow_abbrev=False, help="draw one panel from the simulation design")
    _add_dgp_flags(p, scenario=True)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("-o", "--output", default=None, help="CSV output path (default: stdout)")

    p = sub.add_parser("experiment", allow_abbrev=False, help="run a size/bias/power scenario grid")
    p.add_argument("--preset", choices=("table", "power"), default="table",
                   help="table: null size/bias grid; power: effect-size sweep")
    p.add_argument("--full-grid", action="store_true",
                   help="full-scale grid (1000 replications, m=1000); slow")
    p.add_argument("--gammas", type=_float_list, default=None)
    p.add_argument("--ls", type=_float_list, default=None)
    p.add_argument("--rhos", type=_float_list, default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--methods", type=_method_list, default=None)
    p.add_argument("--m", type=int, default=None, help="permutation replicates for pd")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--master-seed", type=_seed, default=0)
    p.add_argument("--trend-granularity", choices=GRANULARITIES, default="per_group")
    p.add_argument("--trend-degree", type=int, default=1)
    _add_dgp_flags(p, scenario=False)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("-o", "--output", default=None, help="report CSV path (default: stdout)")
    p.add_argument("--json", default=None, help="also write the report as JSON")
    p.add_argument("--chart", default=None, help="write an SVG of the rejection-rate curves")
    return parser


def _model_spec(args) -> ModelSpec:
    return ModelSpec(
        method=args.method, family=args.family, trend_granularity=args.trend_granularity,
        trend_degree=args.trend_degree, include_covariates=args.covariates,
    )


def _dgp(args, **extra) -> DgpConfig:
    base = second_setting() if args.second_setting else DgpConfig()
    fields = dict(
        groups_per_arm=args.groups_per_arm, n_per_group=args.n_per_group,
        study_length=args.study_length, cutoff=args.cutoff,
        obs_min=args.obs_min, obs_max=args.obs_max,
    )
    for name in ("alpha_arm", "sigma_u", "sigma_v", "sigma_w"):
        if getattr(args, name) is not None:
            fields[name] = getattr(args, name)
    fields.update(extra)
    return replace(base, **fields).validate()


def _emit_text(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_fit(args) -> None:
    ds = io.load_panel_csv(args.input, cutoff=args.cutoff, study_length=args.study_length)
    est = estimate_did(ds, _model_spec(args))
    _emit_text(io.canonical_json(io.result_document(est)), args.output)


def _cmd_permtest(args) -> None:
    ds = io.load_panel_csv(args.input, cutoff=args.cutoff, study_length=args.study_length)
    cfg = PermutationConfig(m=args.m, seed=args.seed, alpha=args.alpha)
    res = pd_did(ds, _model_spec(args), cfg, workers=args.workers)
    if res.n_failed:
        log.warning("%d of %d permuted fits failed and were excluded", res.n_failed, res.m)
    _emit_text(io.canonical_json(io.result_document(res)), args.output)


def _cmd_simulate(args) -> None:
    cfg = _dgp(args, gamma=args.gamma, trend_l=args.trend_l, rho=args.rho, seed=args.seed)
    _emit_text(io.panel_csv_text(simulate_panel(cfg)), args.output)


def _experiment_grid(args) -> ScenarioGrid:
    if args.preset == "power":
        grid = power_grid(full=args.full_grid)
    elif args.full_grid:
        grid = full_table_grid()
    else:
        grid = ScenarioGrid()
    overrides = {}
    for name in ("gammas", "ls", "rhos", "replications", "methods"):
        if getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    m = args.m if args.m is not None else grid.perm.m
    overrides["perm"] = PermutationConfig(m=m, seed=0, alpha=args.alpha)
    overrides["alpha"] = args.alpha
    overrides["master_seed"] = args.master_seed
    overrides["dgp_base"] = _dgp(args)
    overrides["detrend_spec"] = ModelSpec(method="detrending",
                                          trend_granularity=args.trend_granularity,
                                          trend_degree=args.trend_degree)
    return replace(grid, **overrides)


def _cmd_experiment(args) -> None:
    grid = _experiment_grid(args)

    def progress(done, total):
        log.info("experiment: %d/%d chunks", done, total)

    report = run_grid(grid, workers=args.workers, progress=progress)
    _emit_text(io.report_csv_text(report), args.output)
    if args.json:
        io.write_results_json(report, args.json)
    if args.chart:
        curves = []
        for method in grid.methods:
            for rho in grid.rhos:
                for l in grid.ls:
                    pts = [(g, rate) for g, rate, _ in power_curve(report, method, l, rho)]
                    label = f"{method} l={l:g}" + (f" rho={rho:g}" if len(grid.rhos) > 1 else "")
                    curves.append((label, pts))
        render_power_chart(curves, args.chart)


COMMANDS = {
    "fit": _cmd_fit,
    "permtest": _cmd_permtest,
    "simulate": _cmd_simulate,
    "experiment": _cmd_experiment,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        COMMANDS[args.command](args)
    except (PdDidError, ValueError, OSError) as exc:
        print(f"pddid {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
