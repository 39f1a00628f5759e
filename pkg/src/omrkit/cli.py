"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 configuration/usage error,
3 runtime cap (e.g. the sketch set is too large to enumerate).
"""
from __future__ import annotations

import argparse
import inspect
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, io
from .agents import OMRSeller, SUMSeller, Shade, ThresholdDeceiver, Truthful
from .config import ConfigError, ExperimentConfig, emit, load
from .environment import (ContextRotation, FixedEnvironment, IIDEnvironment, LinearIIDEnvironment,
                          PriceTracker, sphere, uniform_values)
from .protocol import Estimate, OptOracleConfig, opt_hindsight, run_protocol
from .seeds import SeedStreams
from .sketch import (CapExceeded, GridSpec, OVERFLOW, SketchBank, SketchDictionary,
                     count_sketch_set, enumerate_sketch_set, online_sketch, reference_grid)

OUT_DIR_ENV = "OMRKIT_OUT_DIR"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3


class UsageError(Exception):
    pass


# -- building a run from a config -----------------------------------------------

def grid_of(cfg: ExperimentConfig):
    if cfg.grid_step is None:
        return None
    return GridSpec.coarse(cfg.grid_step, cfg.grid_max_multiplier, cfg.grid_max_support)


def build_experts(cfg: ExperimentConfig, streams: SeedStreams):
    if cfg.expert_mode == "exact":
        grid = grid_of(cfg)
        return SketchBank(enumerate_sketch_set(cfg.horizon, cfg.epsilon, cfg.expert_cap, grid),
                          grid or GridSpec.default(cfg.epsilon))
    if cfg.dimension <= 3:
        ref = reference_grid(cfg.dimension, cfg.reference_spacing)
    else:
        from .core import ball_points
        ref = ball_points(streams.rng("expert-pool"), 512, cfg.dimension)
    return SketchDictionary(ref, cfg.epsilon)


def build_environment(cfg: ExperimentConfig, streams: SeedStreams):
    rng = streams.rng("environment")
    d = cfg.dimension
    if cfg.environment == "fixed":
        env = FixedEnvironment.from_trace_csv(cfg.environment_file)
        if env.contexts.shape != (cfg.horizon, d):
            raise ConfigError(f"environment file holds {env.contexts.shape} contexts, "
                              f"config expects ({cfg.horizon}, {d})")
        return env
    if cfg.environment == "iid":
        return IIDEnvironment(sphere(d), uniform_values(), rng)
    if cfg.environment == "linear":
        return LinearIIDEnvironment(d, rng)
    if cfg.environment == "tracker":
        return PriceTracker(d, rng)
    if d < 2:
        raise ConfigError("the rotation environment needs dimension >= 2")
    return ContextRotation(d, rng)


def build_seller(cfg: ExperimentConfig, streams: SeedStreams, experts=None):
    experts = experts if experts is not None else build_experts(cfg, streams)
    experts.reset()
    if cfg.seller == "omr":
        return OMRSeller(experts, cfg.horizon, streams.rng("expert-sampling"))
    return SUMSeller(experts, cfg.horizon, cfg.epsilon, cfg.gamma_bar,
                     expert_rng=streams.rng("expert-sampling"), omega_rng=streams.rng("seller-omega"),
                     lambda_rng=streams.rng("seller-lambda"), xi_rng=streams.rng("seller-xi"),
                     rho=cfg.rho)


def build_buyers(cfg: ExperimentConfig) -> list:
    out = []
    for b in cfg.buyer_ids():
        if b == "truthful":
            out.append(Truthful())
        elif b == "shade":
            out.append(Shade(cfg.shade_margin))
        else:
            out.append(ThresholdDeceiver(cfg.deceive_rounds, cfg.lowball))
    return out


def simulate(cfg: ExperimentConfig, out_dir: Path) -> dict:
    partition, discount = cfg.make_partition(), cfg.make_discount()
    oracle = OptOracleConfig("grid", cfg.opt_resolution)
    truthful = all(b == "truthful" for b in cfg.buyer_ids())
    experts = None
    reps, revs, opts_t, opts_b, gaps = [], [], [], [], []
    out_dir.mkdir(parents=True, exist_ok=True)
    for r in range(cfg.replications):
        streams = SeedStreams(cfg.seed, r)
        if experts is None or cfg.expert_mode == "sampled":
            experts = build_experts(cfg, streams)
        seller = build_seller(cfg, streams, experts)
        res = run_protocol(seller, build_buyers(cfg), build_environment(cfg, streams), partition,
                           discount, metadata={"replication": r})
        rec = {"replication": r, "revenue": res.revenue, "utilities": res.utilities}
        try:
            ot = opt_hindsight(res.traces, "truth", oracle)
            ob = opt_hindsight(res.traces, "bids", oracle)
            rec.update(opt_truth=ot.to_dict(), opt_bids=ob.to_dict())
            opts_t.append(ot)
            opts_b.append(ob)
            gaps.append(ot.value - res.revenue)
        except ValueError as e:
            rec["opt_error"] = str(e)
        revs.append(res.revenue)
        reps.append(rec)
        name = "trace.csv" if r == 0 else f"trace_r{r:04d}.csv"
        io.write_trace(out_dir / name, res.traces)
    summary = {
        "config": json.loads(emit(cfg)),
        "config_digest": cfg.digest(),
        "seeds": SeedStreams(cfg.seed).describe(),
        "mode": {"expert_set": experts.mode, "grid_override": bool(getattr(experts, "grid_overridden", False)),
                 "theorem_bounds_apply": experts.mode == "exact" and not getattr(experts, "grid_overridden", False),
                 "opt_oracle": "grid-over-span", "opt_resolution": cfg.opt_resolution},
        "seller": seller.describe(),
        "revenue": Estimate.of(revs).to_dict(),
        "replications": reps,
    }
    if opts_t and len(opts_t) == len(revs):
        bound = max(o.error_bound for o in opts_t)
        summary["opt_truth"] = {**Estimate.of([o.value for o in opts_t]).to_dict(), "error_bound": bound}
        summary["opt_bids"] = {**Estimate.of([o.value for o in opts_b]).to_dict(),
                               "error_bound": max(o.error_bound for o in opts_b)}
        key = "regret" if truthful else "opt_minus_revenue"
        summary[key] = {**Estimate.of(gaps).to_dict(), "opt_error_bound": bound}
        if not truthful:
            summary[key]["note"] = ("buyer profile was not checked for equilibrium; "
                                    "this is not a strategic-regret estimate")
    io.write_json(out_dir / "summary.json", summary)
    return summary


# -- subcommands -------------------------------------------------------------------

def _out_dir(args) -> Path:
    return Path(args.out_dir or os.environ.get(OUT_DIR_ENV) or "omrkit-out")


def cmd_simulate(args) -> int:
    if not args.config:
        raise UsageError("simulate needs --config")
    cfg = load(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.mode is not None:
        overrides["expert_mode"] = args.mode
    if overrides:
        from .config import parse
        doc = json.loads(emit(cfg))
        doc.update(overrides)
        cfg = parse(doc)
    out = Path(args.out_dir) if args.out_dir else (Path(cfg.out_dir) if cfg.out_dir else _out_dir(args))
    summary = simulate(cfg, out)
    print(f"wrote {out / 'trace.csv'} and {out / 'summary.json'}; revenue {summary['revenue']['mean']:.6g}")
    return EXIT_OK


def _verify_kwargs(func, extra: list) -> dict:
    sig = inspect.signature(func)
    kwargs = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        name, _, val = tok[2:].partition("=")
        if not val:
            try:
                val = next(it)
            except StopIteration:
                raise UsageError(f"missing value for --{name}") from None
        key = name.replace("-", "_")
        if key not in sig.parameters:
            raise UsageError(f"unknown parameter --{name} for this verifier")
        default = sig.parameters[key].default
        try:
            if isinstance(default, bool):
                kwargs[key] = val.lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[key] = int(val)
            elif isinstance(default, float) or default is None:
                kwargs[key] = float(val)
            elif isinstance(default, (tuple, list)):
                kwargs[key] = tuple(v for v in val.split(","))
            else:
                kwargs[key] = type(default)(val)
        except ValueError:
            raise UsageError(f"bad value {val!r} for --{name}") from None
    return kwargs


def cmd_verify(args, extra) -> int:
    func = analysis.VERIFIERS.get(args.lemma)
    if func is None:
        raise UsageError(f"unknown lemma id {args.lemma!r}; choose from {', '.join(analysis.VERIFIERS)}")
    kwargs = _verify_kwargs(func, extra)
    if args.seed is not None and "seed" in inspect.signature(func).parameters:
        kwargs["seed"] = args.seed
    if args.replications is not None and "replications" in inspect.signature(func).parameters:
        kwargs["replications"] = args.replications
    report = func(**kwargs)
    doc = report.to_dict()
    text = io.dumps_json(doc)
    if args.out_dir or os.environ.get(OUT_DIR_ENV):
        out = _out_dir(args)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"verify_{args.lemma}.json").write_text(text)
    if args.lemma == "random-pricing":
        print(f"expected gap {doc['details'][0]['expected_gap']:.6g}")
    print(report.line())
    if not args.quiet:
        sys.stdout.write(io.dumps_json({k: v for k, v in doc.items() if k != "details"}))
    return EXIT_OK if report.passed else EXIT_FAIL


def _read_matrix(path) -> np.ndarray:
    text = Path(path).read_text().strip()
    if text.startswith("[") or text.startswith("{"):
        data = json.loads(text)
        if isinstance(data, dict):
            data = data.get("contexts", data.get("weights"))
        return np.atleast_2d(np.asarray(data, dtype=float))
    rows = [[float(v) for v in line.replace(";", ",").split(",")]
            for line in text.splitlines() if line.strip()]
    return np.atleast_2d(np.asarray(rows, dtype=float))


def cmd_sketch(args) -> int:
    if not (args.weights and args.contexts and args.epsilon):
        raise UsageError("sketch needs --weights, --contexts and --epsilon")
    try:
        w = _read_matrix(args.weights).ravel()
        X = _read_matrix(args.contexts)
    except (OSError, ValueError) as e:
        raise UsageError(f"cannot read inputs: {e}") from None
    if X.shape[1] != w.size:
        raise UsageError(f"weight has dimension {w.size}, contexts have dimension {X.shape[1]}")
    try:
        run = online_sketch(w, X, args.epsilon)
    except ValueError as e:
        raise UsageError(str(e)) from None
    doc = {"sketch": run.sketch.to_dict(), "updates": run.updates,
           "max_error": float(run.errors.max()) if run.errors.size else 0.0}
    text = io.dumps_json(doc)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_enumerate(args) -> int:
    if args.horizon is None:
        raise UsageError("enumerate-experts needs --horizon")
    grid = None
    if args.grid_step is not None:
        grid = GridSpec.coarse(args.grid_step, args.grid_max_multiplier, args.grid_max_support)
    elif args.epsilon is None:
        raise UsageError("enumerate-experts needs --epsilon or a grid override")
    n = count_sketch_set(args.horizon, args.epsilon, grid)
    doc = {"horizon": args.horizon, "epsilon": args.epsilon,
           "grid": (grid or GridSpec.default(args.epsilon)).to_dict(),
           "count": "overflow" if n is OVERFLOW else n}
    if args.out:
        Z = enumerate_sketch_set(args.horizon, args.epsilon, args.cap, grid)
        doc["sketches"] = [z.to_dict() for z in Z]
        Path(args.out).write_text(io.dumps_json(doc))
    elif n is OVERFLOW or n > args.cap:
        raise CapExceeded(n, args.cap)
    print(io.dumps_json({k: v for k, v in doc.items() if k != "sketches"}), end="")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="omrkit", description="Contextual posted-price simulation and checks.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config")
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir")
    common.add_argument("--replications", type=int)
    common.add_argument("--mode", choices=("exact", "sampled"))
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run the protocol from a config")
    v = sub.add_parser("verify", parents=[common], help="run one inequality verifier")
    v.add_argument("lemma")
    v.add_argument("--quiet", action="store_true")
    s = sub.add_parser("sketch", parents=[common], help="sketch one weight along a context file")
    s.add_argument("--weights")
    s.add_argument("--contexts")
    s.add_argument("--epsilon", type=float)
    s.add_argument("--out")
    e = sub.add_parser("enumerate-experts", parents=[common], help="count or list the sketch set")
    e.add_argument("--horizon", type=int)
    e.add_argument("--epsilon", type=float)
    e.add_argument("--grid-step", type=float)
    e.add_argument("--grid-max-multiplier", type=int, default=1)
    e.add_argument("--grid-max-support", type=int, default=1)
    e.add_argument("--cap", type=int, default=100_000)
    e.add_argument("--out")
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        if args.command == "verify":
            return cmd_verify(args, extra)
        if extra:
            raise UsageError(f"unrecognized arguments: {' '.join(extra)}")
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "sketch":
            return cmd_sketch(args)
        return cmd_enumerate(args)
    except (ConfigError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CapExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAP


if __name__ == "__main__":
    sys.exit(main())
