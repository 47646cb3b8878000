"""``mvpb`` command line: synth, train, eval, bounds, verify.

Exit status is 0 on success, 1 when a verification suite fails and 2 on
usage, configuration or IO errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bounds as B
from .dataio import SynthConfig, load_multiview, save_multiview, synth_population
from .errors import MvpbError
from .estimators import kl_budget, risk_profile
from .fusion import OPTIMIZERS, TrainConfig, evaluate, load_model, save_model, split_sample, train

MANIFEST = "manifest.json"
EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# report rendering


def render_text(data: dict, indent: int = 0) -> str:
    """Key-value text with one nested section per dict value."""
    pad = "  " * indent
    lines = []
    for key, value in data.items():
        if isinstance(value, dict):
            lines.append(f"{pad}[{key}]")
            lines.append(render_text(value, indent + 1))
        elif isinstance(value, (list, tuple)):
            lines.append(f"{pad}{key}: " + " ".join(_scalar(v) for v in value))
        else:
            lines.append(f"{pad}{key}: {_scalar(value)}")
    return "\n".join(line for line in lines if line)


def _scalar(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return "none"
    return str(v)


def emit(report: dict, as_json: bool, path: str | None = None) -> None:
    text = json.dumps(report, indent=2) if as_json else render_text(report)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# data plumbing


def write_dataset(S, out_dir: Path, config: dict | None = None) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    views = [f"view{v}.txt" for v in range(S.n_views)]
    save_multiview(S, [out_dir / f for f in views], out_dir / "labels.txt")
    manifest = {"format": "mvpb-data v1", "views": views, "labels": "labels.txt",
                "view_dims": list(S.view_dims), "m": S.m, "config": config}
    (out_dir / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


def load_data(args):
    positive = getattr(args, "positive_class", None)
    if args.data:
        root = Path(args.data)
        try:
            manifest = json.loads((root / MANIFEST).read_text())
        except FileNotFoundError as exc:
            raise UsageError(f"{root / MANIFEST}: no manifest found") from exc
        return load_multiview([root / f for f in manifest["views"]], root / manifest["labels"],
                              manifest.get("view_dims"), positive)
    if not args.views or not args.labels:
        raise UsageError("give either --data DIR or both --views and --labels")
    return load_multiview(args.views, args.labels, args.dims, positive)


def _add_data_args(p):
    p.add_argument("--data", help="directory holding manifest.json and the view/label files")
    p.add_argument("--views", nargs="+", help="one sparse feature file per view")
    p.add_argument("--labels", help="label file, one label per line")
    p.add_argument("--dims", nargs="+", type=int, help="feature dimension of each view")
    p.add_argument("--positive-class", help="one-vs-all: treat this label token as +1")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(","))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(","))


# ---------------------------------------------------------------------------
# commands

SYNTH_FLAGS = ("views", "dims", "separation", "noise", "redundancy", "flip_noise", "size", "seed")


def cmd_synth(args) -> int:
    base = {}
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        base = loaded.get("config", loaded) if isinstance(loaded, dict) else {}
    for name in SYNTH_FLAGS:
        value = getattr(args, name)
        if value is not None:
            base[name] = value
    if "views" in base and "dims" not in base:
        base["dims"] = 10
    if isinstance(base.get("dims"), list) and len(base["dims"]) == 1:
        base["dims"] = base["dims"][0]
    cfg = SynthConfig.from_dict(base)
    write_dataset(synth_population(cfg), Path(args.out), cfg.to_dict())
    print(f"wrote {cfg.size} examples in {cfg.views} views to {args.out}")
    return EXIT_OK


def train_config(args) -> TrainConfig:
    return TrainConfig(
        split_ratio=(args.split_ratio, 1.0 - args.split_ratio),
        stumps_per_feature=args.stumps_per_feature,
        max_features_per_view=args.max_features,
        optimizer=args.optimizer,
        learning_rate=args.learning_rate,
        max_iters=args.max_iters,
        tol=args.tol,
        seed=args.seed,
        delta=args.delta,
        polarity=args.polarity,
        catoni_grid=_floats(args.catoni_grid) if args.catoni_grid else B.DEFAULT_CATONI_GRID,
        prior_path=args.prior,
        min_margin=args.min_margin,
    )


def cmd_train(args) -> int:
    cfg = train_config(args)
    S = load_data(args)
    model = train(S, cfg)
    save_model(model, args.out)
    S1, S2 = split_sample(S, cfg.split_ratio, cfg.seed)
    if args.export_split:
        write_dataset(S1, Path(args.export_split) / "s1")
        write_dataset(S2, Path(args.export_split) / "s2")
    trace = model.objective_trace
    report = {
        "command": "train",
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "split": {"m": S.m, "s1": S1.m, "s2": S2.m},
        "pool": {"sizes": list(model.pool.sizes), "degenerate_views": list(model.pool.degenerate_views)},
        "optimizer": {"name": cfg.optimizer, "steps": max(len(trace) - 1, 0),
                      "objective_start": trace[0] if trace else None,
                      "objective_final": trace[-1] if trace else None,
                      "nonfinite_objective": model.nonfinite_objective},
        "risk_profile": model.train_profile.to_dict(),
        "kl_budget": kl_budget(model.posterior, model.prior).to_dict(),
        "bound_report": model.train_report.to_dict(),
    }
    emit(report, args.json, args.report)
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_model(args.model)
    T = load_data(args)
    metrics = evaluate(model, T)
    emit({"command": "eval", "model": str(args.model), "metrics": metrics.to_dict()}, args.json, args.report)
    return EXIT_OK


def _bound_inputs(args) -> B.BoundInputs:
    if args.model:
        model = load_model(args.model)
        S = load_data(args)
        return B.BoundInputs(risk_profile(model.posterior, model.pool, S),
                             kl_budget(model.posterior, model.prior), S.m, args.delta)
    if args.risk is None or args.m is None:
        raise UsageError("give --risk and --m (and optionally --disagreement, --kl), or --model with data")
    disagreement = args.disagreement if args.disagreement is not None else 0.0
    return B.BoundInputs.from_values(args.risk, args.m, args.delta, args.kl, disagreement)


def cmd_bounds(args) -> int:
    inputs = _bound_inputs(args)
    grid = _floats(args.catoni_grid) if args.catoni_grid else B.DEFAULT_CATONI_GRID
    if args.sweep_m:
        rows = ["m,mcallester,catoni,catoni_C,seeger,gibbs_upper,mv_factor2_upper,cbound_upper"]
        for m in _ints(args.sweep_m):
            inp = B.BoundInputs(inputs.profile, inputs.kl, m, inputs.delta)
            rep = B.full_report(inp, grid, args.xi_variant)
            it = rep.intermediates
            cb = "vacuous" if rep.cbound_upper is None else repr(rep.cbound_upper)
            rows.append(",".join([str(m), repr(it["mcallester"]), repr(it["catoni"]), repr(it["catoni_C"]),
                                  repr(it["seeger"]), repr(rep.gibbs_upper), repr(rep.mv_factor2_upper), cb]))
        text = "\n".join(rows)
        if args.report:
            Path(args.report).write_text(text + "\n")
        else:
            print(text)
        return EXIT_OK
    rep = B.full_report(inputs, grid, args.xi_variant)
    emit({"command": "bounds", "bound_report": rep.to_dict()}, args.json, args.report)
    return EXIT_OK


def cmd_verify(args) -> int:
    from . import oracle

    if args.trials < 30:
        raise UsageError(f"--trials must be at least 30, got {args.trials}")
    estimator = oracle.faulty_risk_profile if args.inject_fault else oracle.risk_profile
    summary = {"command": "verify", "seed": args.seed, "inject_fault": args.inject_fault}
    suite = oracle.run_oracle_suite(args.instances, args.seed, estimator)
    summary["oracle"] = suite.to_dict()
    ok = suite.passed
    if not args.skip_kl:
        kl = oracle.kl_machinery_check(args.xi_max_m, seed=args.seed)
        summary["kl_machinery"] = kl.to_dict()
        ok &= kl.passed
    if not args.skip_soundness:
        cfg = SynthConfig.from_dict({**oracle.DEFAULT_SOUNDNESS_SYNTH.to_dict(), "size": args.population_size})
        harness = oracle.SoundnessHarness(cfg)
        summary["soundness"] = {}
        for rule in args.rules.split(","):
            if rule not in OPTIMIZERS:
                raise UsageError(f"unknown posterior rule {rule!r}")
            rep = harness.run(args.m, args.delta, args.trials, rule, args.seed, args.threads)
            summary["soundness"][rule] = rep.to_dict()
            ok &= rep.passed
    summary["passed"] = bool(ok)
    emit(summary, True, args.report)
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvpb", description="Multiview PAC-Bayesian late fusion")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic multiview population")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON config, or a manifest written by a previous synth run")
    p.add_argument("--views", type=int)
    p.add_argument("--dims", type=int, nargs="+")
    p.add_argument("--separation", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--redundancy", type=float)
    p.add_argument("--flip-noise", type=float)
    p.add_argument("--size", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="split, build stumps, learn the hierarchical posterior")
    _add_data_args(p)
    d = TrainConfig()
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--report", help="report file (stdout if omitted)")
    p.add_argument("--json", action="store_true")
    p.add_argument("--export-split", help="write S1 and S2 under this directory")
    p.add_argument("--split-ratio", type=float, default=d.split_ratio[0])
    p.add_argument("--stumps-per-feature", type=int, default=d.stumps_per_feature)
    p.add_argument("--max-features", type=int, default=d.max_features_per_view)
    p.add_argument("--optimizer", choices=OPTIMIZERS, default=d.optimizer)
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--max-iters", type=int, default=d.max_iters)
    p.add_argument("--tol", type=float, default=d.tol)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--delta", type=float, default=d.delta)
    p.add_argument("--polarity", choices=("both", "oriented"), default=d.polarity)
    p.add_argument("--catoni-grid", help="comma-separated positive C values")
    p.add_argument("--prior", help="prior weight file (defaults to uniform)")
    p.add_argument("--min-margin", type=float, default=d.min_margin)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a test sample")
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--report")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bounds", help="evaluate every bound with its intermediates")
    _add_data_args(p)
    p.add_argument("--model")
    p.add_argument("--risk", type=float)
    p.add_argument("--disagreement", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--kl", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--catoni-grid")
    p.add_argument("--xi-variant", action="store_true", help="use ln(xi(m)/delta) in the Seeger bound")
    p.add_argument("--sweep-m", help="comma-separated sample sizes; prints a CSV table")
    p.add_argument("--report")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="run the oracle, kl and soundness suites")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--rules", default="uniform,cbound-minimize")
    p.add_argument("--population-size", type=int, default=50_000)
    p.add_argument("--xi-max-m", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--skip-soundness", action="store_true")
    p.add_argument("--skip-kl", action="store_true")
    p.add_argument("--inject-fault", action="store_true", help="test hook: flip a sign in the fast estimator")
    p.add_argument("--report")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, MvpbError, OSError) as exc:
        print(f"mvpb {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
