"""Command-line front door.

Subcommands: eoq, risk, simulate, sweep, compare, optimize, sensitivity.
Reports are CSV on stdout (or files under --out-dir) with the run manifest
embedded as leading comment lines; diagnostics go to stderr.  Exit codes:
0 ok, 2 configuration/validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import Catalog, load_catalog
from .eoq import build_eoq_report
from .errors import ConfigError, DomainError, NumericalError, ParseError, ValidationError
from .gpbo import BoConfig, ConditioningFn, bo_run
from .objectives import policy_profit_objective
from .riskmetrics import build_risk_report
from .sensitivity import (
    SensitivitySpec,
    BaselineOutputs,
    policy_safety_stock,
    sensitivity_linear,
    sensitivity_resim,
)
from .simengine import (
    ContinuousReview,
    PeriodicReview,
    SimConfig,
    compare_policies,
    replicate,
    replication_samples,
    simulate_once,
    sweep_oup,
)
from .stochastic import RNG_ALGORITHM, DemandModel, RngStream


@dataclass(frozen=True)
class RunManifest:
    """Provenance attached to every emitted report.

    The timestamp is diagnostic only (stderr); report bytes carry just the
    deterministic fields so identical runs produce identical reports.
    """

    subcommand: str
    catalog_path: str
    seed: int
    config: dict
    version: str = __version__
    rng_algorithm: str = RNG_ALGORITHM
    timestamp: str = ""

    def comment_lines(self) -> list[str]:
        lines = [
            f"# manifest subcommand={self.subcommand}",
            f"# manifest catalog={self.catalog_path}",
            f"# manifest seed={self.seed}",
            f"# manifest version={self.version}",
            f"# manifest rng={self.rng_algorithm}",
        ]
        for key in sorted(self.config):
            lines.append(f"# manifest {key}={self.config[key]}")
        return lines


def _manifest(args, **config) -> RunManifest:
    return RunManifest(
        subcommand=args.subcommand,
        catalog_path=args.catalog or "",
        seed=args.seed,
        config=config,
        timestamp=time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    )


def emit_histogram(samples, bins: int) -> str:
    """Equal-width histogram as CSV text: bin_lo,bin_hi,count."""
    data = np.asarray(list(samples), dtype=float)
    if data.size == 0:
        raise DomainError("emit_histogram requires non-empty samples")
    if bins < 1:
        raise DomainError(f"bins {bins} must be >= 1")
    lo, hi = float(data.min()), float(data.max())
    lines = ["bin_lo,bin_hi,count"]
    if lo == hi:
        lines.append(f"{lo:.6g},{hi:.6g},{data.size}")
        return "\n".join(lines) + "\n"
    counts, edges = np.histogram(data, bins=bins, range=(lo, hi))
    for i, count in enumerate(counts):
        lines.append(f"{edges[i]:.6g},{edges[i + 1]:.6g},{int(count)}")
    return "\n".join(lines) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"config: {message}", file=sys.stderr)
        raise SystemExit(2)


def _global_flags(parser, suppress: bool) -> None:
    # registered on the main parser and (with suppressed defaults) on every
    # subparser, so they are accepted on either side of the subcommand
    s = argparse.SUPPRESS
    parser.add_argument("--catalog", default=s if suppress else None,
                        help="product catalog CSV")
    parser.add_argument("--seed", type=int, default=s if suppress else 0,
                        help="base random seed")
    parser.add_argument("--threads", type=int,
                        default=s if suppress else (os.cpu_count() or 1),
                        help="worker threads for replications (output is thread-count invariant)")
    parser.add_argument("--out-dir", default=s if suppress else None,
                        help="write reports here instead of stdout")


def _build_parser() -> _Parser:
    parser = _Parser(prog="invopt", description=__doc__)
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def add_parser(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        _global_flags(p, suppress=True)
        return p

    p_eoq = add_parser("eoq", help="closed-form order-quantity analytics")
    p_eoq.add_argument("--service-level", type=float, default=0.95)
    p_eoq.add_argument("--review-time", type=float, default=0.0)
    p_eoq.add_argument("--legacy-z", action="store_true",
                       help="use the traditional 1.65 for the 95%% service level")

    p_risk = add_parser("risk", help="per-product risk metrics")
    p_risk.add_argument("--holding-cost-rate", type=float, default=1.0)
    p_risk.add_argument("--backorder-cost", type=float, default=1.0)

    p_sim = add_parser("simulate", help="replicate a policy per product")
    p_sim.add_argument("--policy", choices=("rq", "pq"), required=True)
    p_sim.add_argument("--params", required=True, help="JSON file of per-product params")
    p_sim.add_argument("--horizon", type=int, default=365)
    p_sim.add_argument("--replications", type=int, default=10_000)
    p_sim.add_argument("--emit-trajectory", metavar="PATH",
                       help="write replication 0's day records as CSV")
    p_sim.add_argument("--emit-histogram", metavar="PATH",
                       help="write profit and lost-order histograms as CSV")
    p_sim.add_argument("--bins", type=int, default=30)

    p_sweep = add_parser("sweep", help="profit across order-up-to levels")
    p_sweep.add_argument("--product", required=True)
    p_sweep.add_argument("--oup-range", required=True, metavar="LO:HI")
    p_sweep.add_argument("--step", type=int, default=50)
    p_sweep.add_argument("--review", type=int, default=30)
    p_sweep.add_argument("--horizon", type=int, default=365)
    p_sweep.add_argument("--replications", type=int, default=1000)

    p_cmp = add_parser("compare", help="periodic vs continuous review")
    p_cmp.add_argument("--pq-params", required=True)
    p_cmp.add_argument("--rq-params", required=True)
    p_cmp.add_argument("--horizon", type=int, default=365)
    p_cmp.add_argument("--replications", type=int, default=10_000)

    p_opt = add_parser("optimize", help="tune policy parameters with the GP optimizer")
    p_opt.add_argument("--objective", choices=("rq", "pq", "oup-per-product"), default="rq")
    p_opt.add_argument("--bounds", help="JSON file: [[lo, hi], ...] per product")
    p_opt.add_argument("--budget", type=int, default=60)
    p_opt.add_argument("--initial-design", type=int, default=12)
    p_opt.add_argument("--acquisition", choices=("ei", "pi"), default="ei")
    p_opt.add_argument("--conditioning", help="JSON file: alpha, centers, widths, weights")
    p_opt.add_argument("--horizon", type=int, default=365)
    p_opt.add_argument("--replications", type=int, default=100)

    p_sens = add_parser("sensitivity", help="one-at-a-time output sensitivity")
    p_sens.add_argument("--mode", choices=("linear", "resim"), default="linear")
    p_sens.add_argument("--deltas", default="0.10,-0.05")
    p_sens.add_argument("--policy", choices=("rq", "pq"), required=True)
    p_sens.add_argument("--params", required=True)
    p_sens.add_argument("--variables",
                        help="comma list; default oup (pq) or reorder_point,order_quantity (rq)")
    p_sens.add_argument("--horizon", type=int, default=365)
    p_sens.add_argument("--replications", type=int, default=1000)
    return parser


def _require_catalog(args) -> Catalog:
    if not args.catalog:
        raise ConfigError("--catalog is required for this subcommand")
    return load_catalog(args.catalog)


def _demand_model(product) -> DemandModel:
    return DemandModel.from_moments(
        product.order_probability, product.daily_order_size_mean, product.daily_order_size_std
    )


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from None


def _load_params(path: str, kind: str) -> dict:
    raw = _load_json(path)
    params = {}
    for name, fields in raw.items():
        try:
            if kind == "pq":
                params[name] = PeriodicReview(
                    int(fields.get("review_period", 30)), int(fields["order_up_to"])
                )
            else:
                params[name] = ContinuousReview(
                    int(fields["reorder_point"]), int(fields["order_quantity"])
                )
        except KeyError as exc:
            raise ConfigError(f"{path}: product {name!r}: missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: product {name!r}: {exc}") from None
    return params


def _write(args, manifest: RunManifest, filename: str, body: str) -> None:
    text = "\n".join(manifest.comment_lines()) + "\n" + body
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / filename).write_text(text, encoding="utf-8")
        print(f"wrote {out / filename}", file=sys.stderr)
    else:
        sys.stdout.write(text)


def _money(x: float) -> str:
    return f"{x:.2f}"


def _cmd_eoq(args) -> int:
    catalog = _require_catalog(args)
    reports = [
        build_eoq_report(p, args.service_level, args.review_time, args.legacy_z)
        for p in catalog
    ]
    names = ",".join(r.name for r in reports)
    rows = [
        ("annual_demand", [f"{p.annual_demand:g}" for p in catalog]),
        ("eoq", [f"{round(r.eoq)}" for r in reports]),
        ("total_annual_cost", [_money(r.total_annual_cost) for r in reports]),
        ("total_annual_profit", [_money(r.total_annual_profit) for r in reports]),
        ("expected_lost_order_proportion",
         [f"{r.expected_lost_order_proportion:.4f}" for r in reports]),
        ("safety_stock", [f"{r.safety_stock}" for r in reports]),
        ("reorder_point", [f"{round(r.reorder_point)}" for r in reports]),
        ("z_score", [f"{r.z_score:g}" for r in reports]),
        ("service_level", [f"{r.service_level:g}" for r in reports]),
    ]
    body = f"metric,{names}\n" + "\n".join(
        f"{label}," + ",".join(cells) for label, cells in rows
    ) + "\n"
    manifest = _manifest(args, service_level=args.service_level,
                         review_time=args.review_time, legacy_z=args.legacy_z)
    _write(args, manifest, "eoq.csv", body)
    return 0


def _cmd_risk(args) -> int:
    catalog = _require_catalog(args)
    reports = build_risk_report(catalog, args.holding_cost_rate, args.backorder_cost)
    lines = ["product,hcr,service_level,spr_rank,p_meet,ihc,expected_backorders,boc,efr"]
    for r in reports:
        lines.append(
            f"{r.name},{_money(r.hcr)},{r.service_level:.4f},{r.spr_rank},"
            f"{r.p_meet:g},{_money(r.ihc)},{r.expected_backorders:.2f},"
            f"{_money(r.boc)},{r.efr:.4f}"
        )
    manifest = _manifest(args, holding_cost_rate=args.holding_cost_rate,
                         backorder_cost=args.backorder_cost)
    _write(args, manifest, "risk.csv", "\n".join(lines) + "\n")
    return 0


def _sim_config(args) -> SimConfig:
    return SimConfig(horizon=args.horizon, replications=args.replications, seed=args.seed)


def _cmd_simulate(args) -> int:
    catalog = _require_catalog(args)
    cfg = _sim_config(args)
    params = _load_params(args.params, args.policy)
    lines = ["product,policy,mean_profit,profit_std,lost_order_fraction,"
             "fill_rate,mean_orders_placed,replications"]
    trajectory_lines = ["product,day,demand,sold,unmet,on_hand_end,on_order,"
                        "order_placed,receipt"]
    histogram_lines = ["metric,bin_lo,bin_hi,count"]
    for product in catalog:
        if product.name not in params:
            raise ConfigError(f"{args.params}: missing params for product {product.name!r}")
        policy = params[product.name]
        demand = _demand_model(product)
        stats = replicate(product, demand, policy, cfg, threads=args.threads)
        lines.append(
            f"{product.name},{args.policy},{_money(stats.mean_profit)},"
            f"{_money(stats.profit_std)},{stats.lost_order_fraction:.4f},"
            f"{stats.fill_rate:.4f},{stats.mean_orders_placed:.2f},{stats.n}"
        )
        if args.emit_trajectory:
            records, _ = simulate_once(product, demand, policy, cfg, RngStream(cfg.seed, 0))
            for rec in records:
                trajectory_lines.append(
                    f"{product.name},{rec.day},{rec.demand},{rec.sold},{rec.unmet},"
                    f"{rec.on_hand_end},{rec.on_order},{rec.order_placed},{rec.receipt}"
                )
        if args.emit_histogram:
            samples = replication_samples(product, demand, policy, cfg, threads=args.threads)
            for metric, values in (("profit", samples.profit),
                                   ("lost_orders", samples.lost_order_fraction)):
                hist = emit_histogram(values, args.bins).splitlines()[1:]
                histogram_lines.extend(f"{metric}:{product.name},{row}" for row in hist)
    manifest = _manifest(args, policy=args.policy, params=args.params,
                         horizon=args.horizon, replications=args.replications,
                         unmet_demand=cfg.unmet_demand)
    _write(args, manifest, "simulate.csv", "\n".join(lines) + "\n")
    if args.emit_trajectory:
        Path(args.emit_trajectory).write_text(
            "\n".join(manifest.comment_lines() + trajectory_lines) + "\n", encoding="utf-8")
    if args.emit_histogram:
        Path(args.emit_histogram).write_text(
            "\n".join(manifest.comment_lines() + histogram_lines) + "\n", encoding="utf-8")
    return 0


def _cmd_sweep(args) -> int:
    catalog = _require_catalog(args)
    try:
        product = catalog.get(args.product)
    except KeyError:
        raise ConfigError(f"product {args.product!r} not in catalog") from None
    try:
        lo, hi = (int(part) for part in args.oup_range.split(":"))
    except ValueError:
        raise ConfigError(f"--oup-range must be LO:HI, got {args.oup_range!r}") from None
    cfg = _sim_config(args)
    results = sweep_oup(product, _demand_model(product), cfg, (lo, hi),
                        step=args.step, review_period=args.review, threads=args.threads)
    lines = ["order_up_to,mean_profit,profit_std,lost_order_fraction,fill_rate,"
             "mean_orders_placed"]
    for oup, stats in results:
        lines.append(
            f"{oup},{_money(stats.mean_profit)},{_money(stats.profit_std)},"
            f"{stats.lost_order_fraction:.4f},{stats.fill_rate:.4f},"
            f"{stats.mean_orders_placed:.2f}"
        )
    manifest = _manifest(args, product=args.product, oup_range=args.oup_range,
                         step=args.step, review=args.review, horizon=args.horizon,
                         replications=args.replications)
    _write(args, manifest, "sweep.csv", "\n".join(lines) + "\n")
    return 0


def _cmd_compare(args) -> int:
    catalog = _require_catalog(args)
    cfg = _sim_config(args)
    comparison = compare_policies(
        catalog, cfg,
        _load_params(args.pq_params, "pq"),
        _load_params(args.rq_params, "rq"),
        threads=args.threads,
    )
    lines = ["product,policy,mean_profit,profit_std,lost_order_fraction,fill_rate"]
    for name, (pq_stats, rq_stats) in comparison.per_product.items():
        for label, stats in (("pq", pq_stats), ("rq", rq_stats)):
            lines.append(
                f"{name},{label},{_money(stats.mean_profit)},{_money(stats.profit_std)},"
                f"{stats.lost_order_fraction:.4f},{stats.fill_rate:.4f}"
            )
    lines.append(f"TOTAL,pq,{_money(comparison.total_periodic_profit)},,,")
    lines.append(f"TOTAL,rq,{_money(comparison.total_continuous_profit)},,,")
    lines.append(f"TOTAL,relative_difference,{comparison.relative_difference:.4f},,,")
    manifest = _manifest(args, horizon=args.horizon, replications=args.replications,
                         pq_params=args.pq_params, rq_params=args.rq_params)
    _write(args, manifest, "compare.csv", "\n".join(lines) + "\n")
    return 0


def _cmd_optimize(args) -> int:
    catalog = _require_catalog(args)
    mode = "oup" if args.objective == "oup-per-product" else args.objective
    sim_cfg = SimConfig(horizon=args.horizon, replications=args.replications, seed=args.seed)
    objective = policy_profit_objective(catalog, sim_cfg, mode, threads=args.threads)
    if args.bounds:
        bounds = tuple((float(lo), float(hi)) for lo, hi in _load_json(args.bounds))
    else:
        bounds = tuple((1.0, 5000.0) for _ in range(objective.dim))
    if len(bounds) != objective.dim:
        raise ConfigError(f"{len(bounds)} bounds given for {objective.dim} products")
    conditioning = None
    if args.conditioning:
        raw = _load_json(args.conditioning)
        conditioning = ConditioningFn(
            alpha=float(raw["alpha"]),
            centers=tuple(tuple(map(float, c)) for c in raw.get("centers", ())),
            widths=tuple(map(float, raw.get("widths", ()))),
            weights=tuple(map(float, raw.get("weights", ()))),
        )
    cfg = BoConfig(bounds=bounds, budget=args.budget, initial_design=args.initial_design,
                   acquisition=args.acquisition, seed=args.seed, objective_seed=args.seed)
    result = bo_run(objective, cfg, conditioning)
    coord_names = ",".join(f"x_{p.name}" for p in catalog)
    lines = [f"iteration,{coord_names},y,incumbent"]
    incumbent = -np.inf
    for i, (point, value) in enumerate(result.history):
        incumbent = max(incumbent, value)
        coords = ",".join(f"{v:.2f}" for v in point)
        lines.append(f"{i},{coords},{_money(value)},{_money(incumbent)}")
    manifest = _manifest(args, objective=args.objective, budget=args.budget,
                         initial_design=args.initial_design, acquisition=args.acquisition,
                         replications=args.replications, horizon=args.horizon,
                         best_x=[round(v) for v in result.best_x],
                         best_value=round(result.best_y, 2))
    _write(args, manifest, "optimize.csv", "\n".join(lines) + "\n")
    return 0


def _cmd_sensitivity(args) -> int:
    catalog = _require_catalog(args)
    cfg = _sim_config(args)
    params = _load_params(args.params, args.policy)
    if args.variables:
        variables = [v.strip() for v in args.variables.split(",") if v.strip()]
    else:
        variables = ["oup"] if args.policy == "pq" else ["reorder_point", "order_quantity"]
    try:
        deltas = tuple(float(d) for d in args.deltas.split(","))
    except ValueError:
        raise ConfigError(f"--deltas must be comma-separated numbers, got {args.deltas!r}") from None

    rows = []
    if args.mode == "resim":
        for variable in variables:
            spec = SensitivitySpec(variable, deltas, mode="resim")
            rows.extend(sensitivity_resim(catalog, params, cfg, spec, threads=args.threads))
    else:
        baseline = {}
        for product in catalog:
            if product.name not in params:
                raise ConfigError(f"{args.params}: missing params for {product.name!r}")
            stats = replicate(product, _demand_model(product), params[product.name],
                              cfg, threads=args.threads)
            baseline[product.name] = BaselineOutputs.from_stats(
                stats, policy_safety_stock(product, params[product.name]))
        for variable in variables:
            spec = SensitivitySpec(variable, deltas, mode="linear")
            rows.extend(sensitivity_linear(baseline, spec))

    lines = ["variable,delta,product,profit,profit_std,lost_orders,safety_stock,needs_resim"]
    for row in rows:
        lines.append(
            f"{row.variable},{row.delta:+g},{row.product},{_money(row.profit)},"
            f"{_money(row.profit_std)},{row.lost_orders:.4f},{row.safety_stock:.1f},"
            f"{'|'.join(row.needs_resim)}"
        )
    manifest = _manifest(args, mode=args.mode, policy=args.policy,
                         variables=",".join(variables),
                         deltas=args.deltas, horizon=args.horizon,
                         replications=args.replications)
    _write(args, manifest, "sensitivity.csv", "\n".join(lines) + "\n")
    return 0


_COMMANDS = {
    "eoq": _cmd_eoq,
    "risk": _cmd_risk,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "compare": _cmd_compare,
    "optimize": _cmd_optimize,
    "sensitivity": _cmd_sensitivity,
}


def run(argv) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    return _COMMANDS[args.subcommand](args)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return run(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"config: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, DomainError) as exc:
        print(f"validate: {exc}", file=sys.stderr)
        return 2
    except (ParseError, FileNotFoundError, OSError) as exc:
        print(f"io: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
