"""Command-line interface.

Subcommands:
  estimate       threshold selection on a weights file, JSON result
  synth          replicated synthetic-problem experiment, CSV outputs
  saw            dump sampled walk weights, one per line
  saw-exp        replicated walk-counting experiment, CSV outputs
  saw-enumerate  exact complete-walk count for small grids
  bias-oracle    per-level winsorization bias for a synthetic problem
  run            experiment from a JSON config document (flags override)

Worker processes are capped by the BALANCED_IS_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

from .balancing import (
    BalancingParams,
    GuaranteeInputs,
    PhiVariant,
    ScanMode,
    ThresholdLadder,
    guarantee_probability,
    select_threshold,
)
from .harness import ESTIMATOR_NAMES, ExperimentConfig, emit_outputs, run_experiment
from .problems import BiasMethod, Family, bias_oracle, make_problem
from .rng import stream
from .saw import TrapPolicy, enumerate_csaw, estimate_csaw
from .weights import load_weights

_PHI = {"avg": PhiVariant.AVERAGE, "max": PhiVariant.MAX}
_SCAN = {"full": ScanMode.FULL, "linear": ScanMode.LINEAR}


def _parse_ladder(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad ladder {text!r}: {exc}") from exc


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


def _parse_estimators(text: str) -> tuple[str, ...]:
    names = tuple(part.strip() for part in text.split(",") if part.strip())
    for name in names:
        if name not in ESTIMATOR_NAMES:
            raise argparse.ArgumentTypeError(f"unknown estimator {name!r}")
    return names


def _add_balancing_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--c", type=float, default=1.0 + math.sqrt(3.0),
                        help="comparison multiplier c > 2 (default 1+sqrt(3))")
    parser.add_argument("--t", type=float, default=2.0,
                        help="spread scale t, 0 < t < sqrt(n) (default 2)")
    parser.add_argument("--phi", choices=sorted(_PHI), default="avg",
                        help="spread combination: average or max of the pair")
    parser.add_argument("--scan", choices=sorted(_SCAN), default="full",
                        help="full pairwise scan or adjacent-pair linear scan")


def _cmd_estimate(args: argparse.Namespace) -> int:
    sample = load_weights(args.weights)
    ladder = ThresholdLadder(args.ladder)
    params = BalancingParams(
        c=args.c, t=args.t, phi_variant=_PHI[args.phi], scan=_SCAN[args.scan]
    )
    result = select_threshold(sample, ladder, params)
    payload = {
        "n": sample.n,
        "chosen_level": result.chosen_level,
        "estimate": result.estimate,
        "constant_c": result.constant_c,
        "params": {"c": args.c, "t": args.t, "phi": args.phi, "scan": args.scan},
        "levels": [dataclasses.asdict(s) for s in result.summaries],
        "comparisons": [dataclasses.asdict(c) for c in result.comparisons],
    }
    if args.guarantee_K is not None or args.guarantee_alpha is not None:
        inputs = GuaranteeInputs(
            n=sample.n,
            t=args.t,
            k=ladder.k,
            K=args.guarantee_K,
            alpha=args.guarantee_alpha,
        )
        payload["guarantee"] = {
            "K": inputs.resolved_k_bound(),
            "alpha": args.guarantee_alpha,
            "n": sample.n,
            "t": args.t,
            "k": ladder.k,
            "delta": guarantee_probability(inputs),
        }
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def _experiment_config_from_args(args: argparse.Namespace, kind: str) -> ExperimentConfig:
    estimators = list(args.estimators)
    if getattr(args, "baseline", None) == "cv" and "cv" not in estimators:
        estimators.append("cv")
    elif getattr(args, "baseline", None) == "none" and "cv" in estimators:
        estimators.remove("cv")
    common = dict(
        ladder=args.ladder,
        n=args.n,
        reps=args.reps,
        master_seed=args.seed,
        estimators=tuple(estimators),
        c=args.c,
        t=args.t,
        phi=args.phi,
        scan=args.scan,
        folds=args.folds,
    )
    if kind == "synth":
        return ExperimentConfig(
            kind="synth",
            family=args.family,
            params=args.params,
            scale_convention=args.scale_convention,
            **common,
        )
    return ExperimentConfig(kind="saw", m=args.m, policy=args.policy, **common)


def _run_and_emit(config: ExperimentConfig, out_dir: str) -> int:
    result = run_experiment(config)
    paths = emit_outputs(result, out_dir)
    for row in result.rows:
        print(
            f"{row.family} param={row.param:g} {row.estimator}: "
            f"mse={row.mse:.6g} mad={row.mad:.6g}"
        )
    print(f"wrote {paths['estimates']}, {paths['summary']}, {paths['meta']}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    return _run_and_emit(_experiment_config_from_args(args, "synth"), args.out)


def _cmd_saw_exp(args: argparse.Namespace) -> int:
    return _run_and_emit(_experiment_config_from_args(args, "saw"), args.out)


def _cmd_saw(args: argparse.Namespace) -> int:
    estimate, sample = estimate_csaw(
        args.m, TrapPolicy(args.policy), args.paths, stream(args.seed)
    )
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for w in sample.values:
            fh.write(format(w, ".17e") + "\n")
    print(
        f"m={args.m} policy={args.policy} paths={args.paths} "
        f"z_hat={estimate.z_hat:.6e} complete_fraction={estimate.complete_fraction:.4f}"
    )
    return 0


def _cmd_saw_enumerate(args: argparse.Namespace) -> int:
    print(enumerate_csaw(args.m))
    return 0


def _cmd_bias_oracle(args: argparse.Namespace) -> int:
    problem = make_problem(
        Family(args.family), args.param, scale_convention=args.scale_convention
    )
    curve = bias_oracle(
        problem,
        ThresholdLadder(args.ladder),
        method=BiasMethod(args.method),
        seed=args.seed,
        draws=args.draws,
    )
    payload = {
        "family": args.family,
        "param": args.param,
        "theta": problem.true_theta,
        "method": curve.method.value,
        "levels": list(curve.levels),
        "bias": list(curve.bias),
        "stderr": list(curve.stderr),
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    data = json.loads(Path(args.config).read_text(encoding="utf-8"))
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.n is not None:
        data["n"] = args.n
    if args.reps is not None:
        data["reps"] = args.reps
    config = ExperimentConfig.from_dict(data)
    return _run_and_emit(config, args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="balanced-is",
        description="Winsorized importance sampling with balanced threshold selection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="select a threshold for a weights file")
    p.add_argument("--weights", required=True, help="one weight per line")
    p.add_argument("--ladder", type=_parse_ladder, required=True,
                   help="comma-separated candidate levels, e.g. 10,100,550")
    _add_balancing_flags(p)
    p.add_argument("--guarantee-K", type=float, default=None,
                   help="third-moment ratio bound K for the delta report")
    p.add_argument("--guarantee-alpha", type=float, default=None,
                   help="variance lower-bound fraction alpha in (0,1); implies K")
    p.add_argument("--out", default=None, help="write JSON here instead of stdout")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("synth", help="replicated synthetic-problem experiment")
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--params", type=_parse_floats, required=True,
                   help="comma-separated parameter grid")
    p.add_argument("--ladder", type=_parse_ladder, required=True)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--estimators", type=_parse_estimators,
                   default=ESTIMATOR_NAMES, help="subset of plain,balanced,cv")
    p.add_argument("--baseline", choices=["cv", "none"], default=None,
                   help="force the cross-validated baseline on or off")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--scale-convention", choices=["variance", "sd"], default="variance")
    _add_balancing_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("saw", help="dump sampled walk weights to a file")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--policy", required=True, choices=[t.value for t in TrapPolicy])
    p.add_argument("--paths", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="weights file, one weight per line")
    p.set_defaults(func=_cmd_saw)

    p = sub.add_parser("saw-exp", help="replicated walk-counting experiment")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--policy", required=True, choices=[t.value for t in TrapPolicy])
    p.add_argument("--ladder", type=_parse_ladder, required=True)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--estimators", type=_parse_estimators, default=ESTIMATOR_NAMES)
    p.add_argument("--baseline", choices=["cv", "none"], default=None,
                   help="force the cross-validated baseline on or off")
    p.add_argument("--folds", type=int, default=10)
    _add_balancing_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_saw_exp)

    p = sub.add_parser("saw-enumerate", help="exact complete-walk count (m <= 5)")
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(func=_cmd_saw_enumerate)

    p = sub.add_parser("bias-oracle", help="winsorization bias per ladder level")
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--param", type=float, required=True)
    p.add_argument("--ladder", type=_parse_ladder, required=True)
    p.add_argument("--method", choices=[m.value for m in BiasMethod],
                   default="quadrature")
    p.add_argument("--draws", type=int, default=10_000_000,
                   help="sample size for the mega_mc method")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale-convention", choices=["variance", "sd"], default="variance")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_bias_oracle)

    p = sub.add_parser("run", help="experiment from a JSON config document")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override master_seed")
    p.add_argument("--n", type=int, default=None, help="override n")
    p.add_argument("--reps", type=int, default=None, help="override reps")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
