"""Command-line entry point.

Subcommands: validate, score, det, bootstrap, synth, backend-fit,
backend-score, serve. Exit codes: 0 ok, 2 validation failure, 3 parse
failure, 4 config/usage error, 5 internal error.

Machine output (--format machine) is line-delimited JSON; every record
carries a "schema" version field.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, bootstrapci, detplot, metrics, submission, synthgen, trialset
from .backend import (
    Preprocessor,
    fit_plda,
    load_backend,
    load_embeddings,
    save_backend,
    save_scores_from_backend,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PARSE = 3
EXIT_CONFIG = 4
EXIT_INTERNAL = 5

SCHEMA = "ctseval/1"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are config errors, exit 4
        self.print_usage(sys.stderr)
        raise ConfigError(message)


class ConfigError(Exception):
    pass


def _emit(record: dict, fmt: str, out) -> None:
    if fmt == "machine":
        print(json.dumps({"schema": SCHEMA, **record}, sort_keys=True), file=out)


def _params_from(args) -> metrics.CostParams:
    try:
        return metrics.CostParams(c_miss=args.c_miss, c_fa=args.c_fa, p_target=args.p_target)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _add_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c-miss", type=float, default=1.0)
    p.add_argument("--c-fa", type=float, default=1.0)
    p.add_argument("--p-target", type=float, default=0.05)


def _add_format(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("human", "machine"), default="human")


def _load_weights(path: str) -> dict[trialset.ConditionCell, float]:
    weights = {}
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        if header != ["source", "gender", "n_enroll", "weight"]:
            raise ConfigError(f"{path}: bad weights header {header}")
        for line in f:
            src, gen, nen, w = line.rstrip("\n").split("\t")
            weights[trialset.ConditionCell(src, gen, int(nen))] = float(w)
    return weights


# ---------------------------------------------------------------- subcommands


class ValidationFailure(Exception):
    pass


def cmd_validate(args) -> int:
    raw = submission.parse_scores(args.scores)
    with open(args.trials, encoding="utf-8") as f:
        n_cols = len(f.readline().rstrip("\n").split("\t"))
    if n_cols == len(trialset.KEY_COLUMNS):
        pairs = list(trialset.load_trials(args.trials).pairs())
    else:
        pairs = trialset.load_blind_trials(args.trials)
    outcome = submission.validate(raw, pairs)
    if isinstance(outcome, submission.ValidationReport):
        print(f"REJECTED: {outcome.summary()}", file=sys.stderr)
        for pair in outcome.missing:
            print(f"missing\t{pair[0]}\t{pair[1]}", file=sys.stderr)
        for pair in outcome.extra:
            print(f"extra\t{pair[0]}\t{pair[1]}", file=sys.stderr)
        return EXIT_VALIDATION
    print(f"accepted: {len(raw)} trials")
    return EXIT_OK


def _aligned_scores(args, manifest: trialset.TrialSetManifest) -> np.ndarray:
    raw = submission.parse_scores(args.scores)
    outcome = submission.validate(raw, manifest)
    if isinstance(outcome, submission.ValidationReport):
        raise ValidationFailure(f"scores do not cover the trial set: {outcome.summary()}")
    return outcome.align(manifest)


def cmd_score(args) -> int:
    params = _params_from(args)
    manifest = trialset.load_trials(args.trials)
    if args.subset != "all":
        manifest = manifest.filter(subset=args.subset)
    llr = _aligned_scores(args, manifest)
    weights = _load_weights(args.weights) if args.weights else None
    report = metrics.score_submission(llr, manifest, params, weights=weights, partial=args.partial)

    out = sys.stdout
    if args.format == "machine":
        _emit({"record": "params", "beta": params.beta, "theta": params.theta_actual,
               "c_miss": params.c_miss, "c_fa": params.c_fa, "p_target": params.p_target},
              args.format, out)
        for cell, r in report.actual.per_cell.items():
            _emit({"record": "cell", "source": cell.source, "gender": cell.gender,
                   "n_enroll": cell.n_enroll, "p_miss": r.p_miss, "p_fa": r.p_fa,
                   "c_norm": r.c_norm, "n_target": r.n_target,
                   "n_nontarget": r.n_nontarget}, args.format, out)
        for src, v in report.actual.per_source.items():
            m = report.minimum.per_source.get(src)
            _emit({"record": "source", "source": src, "actual": v,
                   "min": m.c_norm if m else None,
                   "min_theta": m.theta if m else None}, args.format, out)
        _emit({"record": "final", "actual": report.final_actual,
               "min": report.final_min,
               "skipped_cells": [str(c) for c in report.actual.skipped]},
              args.format, out)
    else:
        print(f"beta={params.beta:.6g} theta={params.theta_actual:.6f}")
        print("cell                         p_miss   p_fa     c_norm   #tgt     #non")
        for cell, r in report.actual.per_cell.items():
            print(f"{str(cell):27s}  {r.p_miss:.4f}   {r.p_fa:.4f}   {r.c_norm:.4f}"
                  f"   {r.n_target:<7d}  {r.n_nontarget}")
        for src, v in report.actual.per_source.items():
            m = report.minimum.per_source.get(src)
            extra = f"  min={m.c_norm:.4f} @ theta={m.theta:.4f}" if m else ""
            print(f"{src}: actual={v:.4f}{extra}")
        print(f"FINAL actual={report.final_actual:.4f} min={report.final_min:.4f}")
        if report.actual.skipped:
            print("skipped cells: " + ", ".join(str(c) for c in report.actual.skipped))
    return EXIT_OK


def cmd_det(args) -> int:
    params = _params_from(args)
    manifest = trialset.load_trials(args.trials)
    if args.subset != "all":
        manifest = manifest.filter(subset=args.subset)
    llr = _aligned_scores(args, manifest)
    os.makedirs(args.out, exist_ok=True)

    groups: list[tuple[str, np.ndarray]] = []
    if args.by == "all":
        groups.append(("all", np.ones(len(manifest), dtype=bool)))
    elif args.by == "source":
        for i, src in enumerate(trialset.SOURCES):
            mask = manifest.source_code == i
            if mask.any():
                groups.append((src, mask))
    else:  # cell
        for i, cell in enumerate(trialset.ALL_CELLS):
            mask = manifest.cell_code == i
            if mask.any():
                groups.append((f"{cell.source}_{cell.gender}_{cell.n_enroll}seg", mask))

    written = []
    for name, mask in groups:
        curve = detplot.det_points(llr[mask], manifest.is_target[mask], params)
        path = os.path.join(args.out, f"det_{name}.tsv")
        detplot.save_curve(curve, path)
        written.append(path)
        _emit({"record": "det", "group": name, "path": path,
               "markers": [vars(m) for m in curve.markers]}, args.format, sys.stdout)
        if args.format == "human":
            marks = "  ".join(
                f"{m.kind}: c={m.c_norm:.4f} (p_fa={m.p_fa:.4f}, p_miss={m.p_miss:.4f})"
                for m in curve.markers
            )
            print(f"{name}: {curve.p_fa.shape[0]} points -> {path}  [{marks}]")
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    params = _params_from(args)
    manifest = trialset.load_trials(args.trials)
    if args.subset != "all":
        manifest = manifest.filter(subset=args.subset)
    llr = _aligned_scores(args, manifest)
    config = bootstrapci.BootstrapConfig(
        n_resamples=args.n, level=args.level, seed=args.seed, two_level=args.two_level
    )
    ci = bootstrapci.bootstrap_cost(llr, manifest, params, config)
    record = {
        "record": "bootstrap", "point": ci.point, "lo": ci.lo, "hi": ci.hi,
        "level": args.level, "n_resamples": args.n, "seed": ci.seed,
        "generator": ci.generator, "quantile_rule": ci.quantile_rule,
        "n_redraws": ci.n_redraws,
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump({**record, "resample_costs": ci.resample_costs.tolist()}, f)
            f.write("\n")
    if args.format == "machine":
        _emit({**record, "resample_costs": ci.resample_costs.tolist()}, args.format, sys.stdout)
    else:
        print(f"seed={ci.seed} generator={ci.generator} quantiles={ci.quantile_rule}")
        print(f"point={ci.point:.4f}  {args.level:.0%} CI=[{ci.lo:.4f}, {ci.hi:.4f}]"
              f"  redraws={ci.n_redraws}")
    return EXIT_OK


def cmd_synth(args) -> int:
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    with open(args.spec, "rb") as f:
        doc = tomllib.load(f)
    try:
        spec = synthgen.PopulationSpec.scaled(
            fraction=doc.get("scale", 0.01),
            sources=tuple(doc.get("sources", ["CMN2", "MLS"])),
            subsets=tuple(doc.get("subsets", ["progress", "test"])),
            dim=doc.get("dim", 16),
            between=doc.get("between", 1.0),
            within=doc.get("within", 1.0),
            seed=doc["seed"],
        )
    except KeyError as e:
        raise ConfigError(f"{args.spec}: missing required key {e.args[0]!r}") from None
    result = synthgen.generate(spec)
    paths = synthgen.write_outputs(result, args.out)
    print(f"seed={spec.seed} trials={len(result.manifest)} "
          f"models={len(result.models)} embeddings={len(result.embeddings.segment_ids)}")
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    return EXIT_OK


def cmd_backend_fit(args) -> int:
    emb = load_embeddings(args.embeddings, args.meta)
    if emb.speaker_ids is None:
        raise ConfigError("embedding sidecar lacks speaker ids; cannot train")
    train = emb if args.include_degraded else emb.originals()
    pre = Preprocessor().fit(
        train.vectors,
        labels=train.speaker_ids,
        lda_dim=args.lda_dim if args.lda_dim > 0 else None,
        ridge=args.ridge,
    )
    processed = pre(train.vectors)
    model = fit_plda(processed, train.speaker_ids)
    save_backend(pre, model, args.out)
    print(f"trained on {train.vectors.shape[0]} vectors "
          f"({len(set(train.speaker_ids))} speakers), "
          f"{len(model.loglik_path)} EM iterations -> {args.out}")
    return EXIT_OK


def cmd_backend_score(args) -> int:
    pre, model = load_backend(args.model)
    emb = load_embeddings(args.embeddings, args.meta)
    models = trialset.load_models(args.models)
    pairs = trialset.load_blind_trials(args.trials)
    save_scores_from_backend(pre, model, emb, models, pairs, args.out)
    print(f"scored {len(pairs)} trials -> {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app_from_config, load_config

    config = load_config(args.config)
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    app = app_from_config(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return EXIT_OK


# --------------------------------------------------------------------- driver


def build_parser() -> _Parser:
    parser = _Parser(prog="ctseval", description=__doc__)
    parser.add_argument("--version", action="version", version=f"ctseval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a score file against the blind trial list")
    p.add_argument("--trials", required=True, help="trials.tsv (blind) or key.tsv")
    p.add_argument("--scores", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("score", help="actual and minimum detection costs")
    p.add_argument("--trials", required=True, help="key.tsv")
    p.add_argument("--scores", required=True)
    p.add_argument("--weights", help="per-cell weights TSV (source gender n_enroll weight)")
    p.add_argument("--partial", action="store_true", help="skip empty cells instead of failing")
    p.add_argument("--subset", choices=("progress", "test", "all"), default="all")
    _add_params(p)
    _add_format(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("det", help="DET curve data per group")
    p.add_argument("--trials", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--by", choices=("all", "source", "cell"), default="all")
    p.add_argument("--subset", choices=("progress", "test", "all"), default="all")
    p.add_argument("--out", required=True, help="output directory")
    _add_params(p)
    _add_format(p)
    p.set_defaults(func=cmd_det)

    p = sub.add_parser("bootstrap", help="bootstrap CI for the actual cost")
    p.add_argument("--trials", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--two-level", action="store_true",
                   help="also resample the test-segment space")
    p.add_argument("--subset", choices=("progress", "test", "all"), default="all")
    p.add_argument("--out", help="write full resample-cost vector as JSON")
    _add_params(p)
    _add_format(p)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("synth", help="generate a synthetic evaluation artifact")
    p.add_argument("--spec", required=True, help="TOML population spec")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("backend-fit", help="fit preprocessing chain + PLDA")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--lda-dim", type=int, default=250, help="0 disables LDA")
    p.add_argument("--ridge", type=float, default=0.0)
    p.add_argument("--include-degraded", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_backend_fit)

    p = sub.add_parser("backend-score", help="score trials with a fitted backend")
    p.add_argument("--model", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--models", required=True, help="models.tsv enrollment definitions")
    p.add_argument("--trials", required=True, help="blind trials.tsv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_backend_score)

    p = sub.add_parser("serve", help="run the leaderboard service")
    p.add_argument("--config", required=True, help="TOML service config")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (trialset.TrialFileError, submission.ScoreFileError) as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationFailure as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (metrics.EmptyCellError, metrics.EmptyClassError, synthgen.InfeasibleSpecError,
            ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # pragma: no cover - safety net
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
