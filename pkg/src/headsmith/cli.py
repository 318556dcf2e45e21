"""Command-line interface: ``headsmith <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.
"""

import argparse
import json
import logging
import os
import sys

from . import avt, imgprep, nas, nnet, pipeline
from .data import make_blobs, make_distinct_variance_features, read_feature_csv, write_feature_csv
from .errors import ConfigError, DataError, ShapeError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4

logger = logging.getLogger("headsmith")


def _write_json(path, obj):
    pipeline.atomic_write(path, json.dumps(obj, indent=1) + "\n")


def cmd_run(args):
    cfg = pipeline.ExperimentConfig.load(
        args.config,
        seed=args.seed,
        out_dir=args.out,
        max_trials=args.max_trials,
        max_epochs=args.max_epochs,
        parallel=args.parallel,
    )
    only = set(args.only.split(",")) if args.only else None
    results = pipeline.run_experiment(cfg, only=only)
    for r in results:
        if r.error:
            print(f"{r.condition.label}: FAILED ({r.error})")
        else:
            print(f"{r.condition.label}: dimensionality={r.report.dimensionality} accuracy={r.report.accuracy:.4f}")
    comparison = os.path.join(cfg.out_dir, "comparison.md")
    if os.path.exists(comparison):
        with open(comparison, encoding="utf-8") as fh:
            print(fh.read())
    return EXIT_RUNTIME if any(r.error for r in results) else EXIT_OK


def cmd_avt_fit(args):
    p = avt.PRESETS[args.preset] if args.preset else args.percentile
    if p is None:
        raise ConfigError("give --percentile or --preset")
    selector = avt.fit(read_feature_csv(args.features), p, ddof=args.variance_ddof, strict=args.strict)
    _write_json(args.out, selector.to_dict())
    print(f"threshold={selector.threshold!r} kept {selector.n_kept} of {selector.width} features")
    return EXIT_OK


def cmd_avt_apply(args):
    selector = avt.VarianceSelector.load(args.selector)
    write_feature_csv(avt.transform(selector, read_feature_csv(args.features)), args.out)
    return EXIT_OK


def cmd_nas(args):
    train, val = read_feature_csv(args.train), read_feature_csv(args.val)
    os.makedirs(args.out, exist_ok=True)
    result = nas.search(
        train, val,
        max_trials=args.max_trials, max_epochs=args.max_epochs, seed=args.seed,
        parallel=args.parallel, strategy=args.strategy,
        log_path=os.path.join(args.out, "trials.jsonl"),
    )
    _write_json(os.path.join(args.out, "result.json"), nas.result_to_dict(result))
    result.best_model.save(os.path.join(args.out, "model.json"))
    nnet.write_history(result.best_history, os.path.join(args.out, "history.csv"))
    table = nas.export_architecture(result)
    pipeline.atomic_write(os.path.join(args.out, "architecture.md"), table)
    print(f"best trial {result.best_trial_index}: val_accuracy={result.best.val_accuracy:.4f}")
    print(table)
    return EXIT_OK


def cmd_evaluate(args):
    model = nnet.TrainedModel.load(args.model)
    data = read_feature_csv(args.features)
    report = pipeline.evaluate(model, data, model.spec.num_classes, args.average)
    if args.out:
        _write_json(args.out, report.to_dict())
    print(pipeline.render_comparison({"test": report}))
    return EXIT_OK


def cmd_split(args):
    data = read_feature_csv(args.features)
    plan = pipeline.patient_split(data, tuple(args.fractions), args.seed)
    os.makedirs(args.out, exist_ok=True)
    for name, part in zip(pipeline.SPLITS, plan.apply(data)):
        write_feature_csv(part, os.path.join(args.out, f"{name}.csv"))
        print(f"{name}: {part.n_samples} samples")
    _write_json(os.path.join(args.out, "split.json"), plan.to_dict())
    return EXIT_OK


def cmd_prep(args):
    manifest = imgprep.process_directory(args.operation, args.in_dir, args.out_dir, margin=args.margin)
    print(f"{args.operation}: {len(manifest['files'])} images, {len(manifest['flagged'])} flagged")
    return EXIT_OK


def cmd_synth(args):
    if args.kind == "blobs":
        data = make_blobs(args.samples, args.features, args.classes, args.patients, seed=args.seed)
    else:
        data = make_distinct_variance_features(args.features, args.samples, args.classes, seed=args.seed)
    write_feature_csv(data, args.out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="headsmith", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--max-trials", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--parallel", type=int)
    p.add_argument("--only", help="comma-separated condition keys (baseline,low,mid,high)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("avt-fit", help="fit a variance threshold on a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--percentile", type=float)
    p.add_argument("--preset", choices=sorted(avt.PRESETS))
    p.add_argument("--variance-ddof", type=int, choices=(0, 1), default=0)
    p.add_argument("--strict", action="store_true", help="also drop zero-variance features")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_avt_fit)

    p = sub.add_parser("avt-apply", help="filter a feature CSV with a fitted selector")
    p.add_argument("--selector", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_avt_apply)

    p = sub.add_parser("nas", help="architecture search on train/val CSVs")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--max-trials", type=int, default=55)
    p.add_argument("--max-epochs", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--strategy", default="random", choices=sorted(nas.STRATEGIES))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_nas)

    p = sub.add_parser("evaluate", help="classification report for a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--average", choices=("macro", "weighted"), default="macro")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("split", help="patient-wise train/val/test split")
    p.add_argument("--features", required=True)
    p.add_argument("--fractions", type=float, nargs=3, default=list(pipeline.DEFAULT_FRACTIONS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("prep", help="radiograph preprocessing on a directory of PGM files")
    p.add_argument("operation", choices=imgprep.OPERATIONS)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--margin", type=float, default=1.15)
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("synth", help="write a synthetic feature CSV")
    p.add_argument("kind", choices=("blobs", "distinct"))
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--features", type=int, default=62)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--patients", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ShapeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        logger.debug("unhandled", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
