"""Command-line front end.

Every command writes CSV headed by a manifest block (tool version, config hash,
seed, shard count, options and the full effective config). ``tfqkd replay``
regenerates a file from that block.

Exit codes: 0 success (including "no crossover"), 2 configuration or
validation error, 3 numerical infeasibility, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from ._random import derive_seed
from .bounds import (
    EXPERIMENTAL_POINTS,
    GENERATORS,
    CurveSpec,
    MultipleCrossingsError,
    crossover_distance,
    ideal_curves,
)
from .config import ConfigError, RunConfig, load_config
from .core import intrinsic_qber, transmittance
from .manifest import manifest, read_manifest, render_csv, write_atomic
from .optimize import optimal_m, optimal_mu
from .phase import simulate_drift
from .protocol import MAX_TRIALS, arm_transmittances, estimate_from_tally, run_batch, twin_mismatch_qber
from .rates import channel_gain_qber, compose_qber, qkd_rate, tfqkd_rate

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4


class InfeasibleError(RuntimeError):
    pass


@dataclass
class Output:
    schema: str
    header: list
    rows: list
    messages: list = field(default_factory=list)
    extra_tables: dict = field(default_factory=dict)  # suffix -> (schema, header, rows)
    csv_required: bool = True


def _grid(cfg: RunConfig) -> list[float]:
    return cfg.grid.points()


def cmd_rates(cfg: RunConfig, opts: dict) -> Output:
    protocol = opts["protocol"]
    fn = tfqkd_rate if protocol == "tfqkd" else qkd_rate
    rows = []
    for L in _grid(cfg):
        eta = transmittance(cfg.channel.with_length(L))
        if opts["optimize_mu"]:
            res = optimal_mu(L, cfg.channel, cfg.detector, cfg.protocol, kind=protocol)
            mu, rate = res.params["mu"], res.objective
        else:
            mu = cfg.protocol.mu
            rate = fn(mu, L, cfg.channel, cfg.detector, cfg.protocol)
        curve_id = f"{protocol}:mu=opt" if opts["optimize_mu"] else f"{protocol}:mu={mu!r}"
        rows.append((L, cfg.channel.alpha * L, eta, mu, rate, curve_id))
    header = ["distance_km", "loss_db", "eta", "mu_used", "rate_bits_per_pulse", "curve_id"]
    return Output("rates/1", header, rows)


def cmd_bounds(cfg: RunConfig, opts: dict) -> Output:
    grid = _grid(cfg)
    curves = ideal_curves(grid, alpha=cfg.channel.alpha)
    names = ["skc", "single_repeater", "ideal_decoy_qkd", "ideal_single_photon_qkd"]
    rows = []
    for i, L in enumerate(grid):
        eta = transmittance(cfg.channel.with_length(L))
        rows.append([L, cfg.channel.alpha * L, eta] + [curves[n][i].rate for n in names])
    out = Output("bounds/1", ["distance_km", "loss_db", "eta"] + names, rows)
    if opts["with_experiments"]:
        keys = ["scheme", "distance_km", "rate", "unit", "fibre"]
        out.extra_tables["_experiments"] = ("experiments/1", keys, [[p[k] for k in keys] for p in EXPERIMENTAL_POINTS])
    return out


def _curve(cfg: RunConfig, generator: str) -> CurveSpec:
    return CurveSpec(generator, channel=cfg.channel, det=cfg.detector, proto=cfg.protocol)


def cmd_crossover(cfg: RunConfig, opts: dict) -> Output:
    lo, hi = opts["bracket"]
    if not 0 <= lo < hi:
        raise ValueError(f"bad bracket ({lo}, {hi}): need 0 <= start < stop")
    a, b = _curve(cfg, opts["curve_a"]), _curve(cfg, opts["curve_b"])
    km = crossover_distance(a, b, (lo, hi))
    text = f"crossover {a.curve_id} vs {b.curve_id} in ({lo:g}, {hi:g}) km: " + ("none" if km is None else f"{km:.1f} km")
    header = ["curve_a", "curve_b", "bracket_start_km", "bracket_stop_km", "crossover_km"]
    row = [a.curve_id, b.curve_id, float(lo), float(hi), "none" if km is None else km]
    return Output("crossover/1", header, [row], [text], csv_required=False)


def cmd_simulate(cfg: RunConfig, opts: dict) -> Output:
    n = opts["trials"]
    if not 1 <= n <= MAX_TRIALS:
        raise ValueError(f"--trials must lie in [1, {MAX_TRIALS}]")
    distances = opts["distances"] or _grid(cfg)
    proto, det = cfg.protocol, cfg.detector
    e_model = compose_qber(proto.e_opt, twin_mismatch_qber(proto.m_slices))
    rows = []
    for i, L in enumerate(distances):
        tally = run_batch(
            n,
            L,
            cfg.channel,
            det,
            proto,
            seed=derive_seed(cfg.seed, "simulate", i),
            shards=opts["shards"],
            postselect=opts["postselect"],
            workers=opts.get("workers", 1),
        )
        eta_arm, _ = arm_transmittances(L, cfg.channel)
        est = estimate_from_tally(tally, proto, eta_arm, det)
        model = channel_gain_qber(proto.mu, eta_arm, det, e_model)
        counts = list(tally.as_dict().values())
        rows.append([float(L), eta_arm, proto.mu] + counts + [est.gain, est.qber, est.rate, model.gain, model.qber])
    header = (
        ["distance_km", "eta_arm", "mu_total"]
        + list(tally.as_dict())
        + ["gain", "qber", "rate_bits_per_pulse", "model_gain", "model_qber"]
    )
    return Output("simulate/1", header, rows)


def cmd_drift(cfg: RunConfig, opts: dict) -> Output:
    duration, length = opts["duration"], opts["length"]
    if duration < 100 * cfg.drift.sample_dt:
        raise ValueError(f"--duration must cover at least 100 samples ({100 * cfg.drift.sample_dt:g} ms)")
    trace = simulate_drift(duration, length, cfg.drift, seed=derive_seed(cfg.seed, "drift", 0))
    summary = trace.summary()
    messages = [f"{k}: {v!r}" for k, v in summary.items()]
    return Output("drift/1", ["time_ms", "phase_rad", "rate_rad_per_ms"], list(trace.rows()), messages)


def cmd_optimize(cfg: RunConfig, opts: dict) -> Output:
    if opts["what"] == "m":
        res = optimal_m(_grid(cfg), cfg.channel, cfg.detector, cfg.protocol)
        best = res.params["m_slices"]
        rows = [(m, intrinsic_qber(m), area, m == best) for m, area in res.table]
        if not res.feasible:
            raise InfeasibleError("no slice count gives TF-QKD a rate above the capacity bound on this grid")
        return Output("optimize-m/1", ["m_slices", "intrinsic_qber", "area", "is_argmax"], rows, [f"argmax M = {best}"])

    rows = []
    any_feasible = False
    for L in _grid(cfg):
        res = optimal_mu(L, cfg.channel, cfg.detector, cfg.protocol, kind=opts["protocol"])
        any_feasible |= res.feasible
        rows.append(("result", L, res.params["mu"], res.objective, res.status))
        if opts["trace"]:
            rows.extend(("trace", L, mu, r, "") for mu, r in res.trace)
    if not any_feasible:
        raise InfeasibleError("key rate is zero at every grid distance")
    return Output("optimize-mu/1", ["row_type", "distance_km", "mu", "rate_bits_per_pulse", "status"], rows)


COMMANDS = {
    "rates": cmd_rates,
    "bounds": cmd_bounds,
    "crossover": cmd_crossover,
    "simulate": cmd_simulate,
    "drift": cmd_drift,
    "optimize": cmd_optimize,
}

# options that never change the output and so stay out of the manifest
VOLATILE_OPTIONS = ("workers",)


def execute(command: str, cfg: RunConfig, opts: dict, output: str | None) -> None:
    if "shards" in opts:
        cfg = replace(cfg, shards=opts["shards"])
    result = COMMANDS[command](cfg, opts)
    stable = {k: v for k, v in opts.items() if k not in VOLATILE_OPTIONS}
    meta = manifest(command, result.schema, stable, cfg)
    msg_stream = sys.stderr if output is None and result.csv_required else sys.stdout
    for line in result.messages:
        print(line, file=msg_stream)
    if output is None and not result.csv_required:
        return
    write_atomic(output, render_csv(meta, result.header, result.rows))
    for suffix, (schema, header, rows) in result.extra_tables.items():
        side = None if output is None else Path(output).with_name(Path(output).stem + suffix + ".csv")
        write_atomic(side, render_csv(dict(meta, schema=schema), header, rows))
    if command == "simulate" and output is not None:
        write_atomic(str(output) + ".manifest.json", json.dumps(meta, sort_keys=True, indent=2) + "\n")


def _bracket(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tfqkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tfqkd {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="INI-style config file")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one config value")
    common.add_argument("-o", "--output", help="output CSV path (default: stdout)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", parents=[common], help="key rate versus distance")
    p.add_argument("--protocol", choices=("qkd", "tfqkd"), default="tfqkd")
    p.add_argument("--optimize-mu", action="store_true", help="optimise the intensity at every distance")

    p = sub.add_parser("bounds", parents=[common], help="capacity bounds and ideal reference curves")
    p.add_argument("--with-experiments", action="store_true", help="also write the literature data table")

    p = sub.add_parser("crossover", parents=[common], help="distance where two curves cross")
    p.add_argument("--curve-a", choices=GENERATORS, default="tfqkd_realistic")
    p.add_argument("--curve-b", choices=GENERATORS, default="skc")
    p.add_argument("--bracket", nargs=2, type=_bracket, default=[100.0, 600.0], metavar=("START", "STOP"))

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo of the protocol")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--shards", type=int, default=None, help="shard count (default: run.shards)")
    p.add_argument("--workers", type=int, default=1, help="processes; results do not depend on it")
    p.add_argument("--postselect", action="store_true", help="draw only slice- and basis-matched trials")
    p.add_argument("--distance", type=float, action="append", help="Alice-Bob distance in km (repeatable; default: grid)")

    p = sub.add_parser("drift", parents=[common], help="simulate interferometer phase drift")
    p.add_argument("--duration", type=float, required=True, help="ms")
    p.add_argument("--length", type=float, required=True, help="total fibre length in km")

    p = sub.add_parser("optimize", parents=[common], help="optimise intensity or slice count")
    p.add_argument("--what", choices=("mu", "m"), required=True)
    p.add_argument("--protocol", choices=("qkd", "tfqkd"), default="tfqkd")
    p.add_argument("--trace", action="store_true", help="include every objective evaluation")

    p = sub.add_parser("replay", help="regenerate a CSV from its manifest")
    p.add_argument("source", help="CSV written by tfqkd")
    p.add_argument("-o", "--output", help="output path (default: stdout)")
    return parser


def _options(args: argparse.Namespace, cfg: RunConfig) -> dict:
    c = args.command
    if c == "rates":
        return {"protocol": args.protocol, "optimize_mu": args.optimize_mu}
    if c == "bounds":
        return {"with_experiments": args.with_experiments}
    if c == "crossover":
        return {"curve_a": args.curve_a, "curve_b": args.curve_b, "bracket": list(args.bracket)}
    if c == "simulate":
        shards = cfg.shards if args.shards is None else args.shards
        if shards < 1:
            raise ValueError("--shards must be >= 1")
        return {
            "trials": args.trials,
            "shards": shards,
            "postselect": args.postselect,
            "distances": args.distance,
            "workers": args.workers,
        }
    if c == "drift":
        return {"duration": args.duration, "length": args.length}
    return {"what": args.what, "protocol": args.protocol, "trace": args.trace}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            meta = read_manifest(args.source)
            if meta.get("tool_version") != __version__:
                print(f"warning: written by tfqkd {meta.get('tool_version')}, replaying with {__version__}", file=sys.stderr)
            cfg = RunConfig.from_dict(meta["config"])
            execute(meta["command"], cfg, meta["options"], args.output)
        else:
            cfg = load_config(args.config, overrides=args.set)
            execute(args.command, cfg, _options(args, cfg), args.output)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MultipleCrossingsError, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
