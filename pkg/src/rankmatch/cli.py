"""Command-line entry point: synth, train, eval, gradcheck, ablate.

Every command is a pure function of its flags and input files; reports are
JSON with sorted keys and the full resolved config embedded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import dataio
from .core import (
    METRIC_NAMES,
    Dataset,
    RankMatchError,
    ShapeMismatch,
    TrainConfig,
)
from .gradcheck import run_gradcheck
from .model import load_checkpoint, save_checkpoint
from .trainer import ABLATION_STAGES, ablate, evaluate_params, train

log = logging.getLogger("rankmatch")

REPORT_VERSION = 1
CHECKPOINT_NAME = "checkpoint.txt"
REPORT_NAME = "report.json"


class FlagError(RankMatchError):
    pass


def _dump(path: Path, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    path.write_text(text, encoding="utf-8", newline="\n")


def _positive_int(name):
    def parse(text):
        value = int(text)
        if value < 1:
            raise argparse.ArgumentTypeError(f"{name} must be >= 1")
        return value
    return parse


def cmd_synth(args) -> int:
    if args.labels < 2:
        raise FlagError("--labels must be >= 2")
    if args.dim < 1:
        raise FlagError("--dim must be >= 1")
    train_ds, test_ds, _ = dataio.synth_generate(
        args.n_labeled, args.m_unlabeled, args.n_test, args.dim, args.labels,
        args.noise_alpha, args.seed,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataio.write_labeled_csv(out / "labeled.csv", train_ds.labeled, args.dim, args.labels)
    dataio.write_unlabeled_csv(out / "unlabeled.csv", train_ds.unlabeled, args.dim)
    dataio.write_labeled_csv(out / "test.csv", test_ds.labeled, args.dim, args.labels)
    dataio.write_manifest(out / "manifest.json", {
        "generator": "rankmatch.synth_generate",
        "n_labeled": args.n_labeled,
        "m_unlabeled": args.m_unlabeled,
        "n_test": args.n_test,
        "dim": args.dim,
        "num_labels": args.labels,
        "noise_alpha": args.noise_alpha,
        "seed": args.seed,
        "files": ["labeled.csv", "unlabeled.csv", "test.csv"],
    })
    print(f"wrote {out}/labeled.csv, unlabeled.csv, test.csv, manifest.json")
    return 0


def _config_from_args(args) -> TrainConfig:
    return TrainConfig(
        lam=args.lam,
        threshold_t=args.threshold_t,
        k_weak=args.k_weak,
        epochs=args.epochs,
        batch_size=args.batch,
        max_lr=args.max_lr,
        ema_decay=args.ema_decay,
        weak_sigma=args.weak_sigma,
        strong_sigma=args.strong_sigma,
        strong_dropout=args.strong_dropout,
        seed=args.seed,
        weight_decay=args.weight_decay,
        hidden=args.hidden,
        pld_source=args.pld_source,
    )


def _load_test(path, train_ds: Dataset) -> Dataset | None:
    if not path:
        return None
    test = dataio.load_dataset(path)
    if test.num_labels != train_ds.num_labels or test.feature_dim != train_ds.feature_dim:
        raise ShapeMismatch("test set dimensions differ from the training set")
    return test


def cmd_train(args) -> int:
    config = _config_from_args(args)
    dataset = dataio.load_dataset(args.labeled, args.unlabeled or None)
    test = _load_test(args.test, dataset)
    params, ema, history = train(dataset, test, config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / CHECKPOINT_NAME, {"live": params, "ema": ema.shadow})
    epochs = []
    for i, loss in enumerate(history.epoch_losses):
        row = {"epoch": i + 1, **loss.to_dict()}
        if history.test_metrics:
            row["test_metrics"] = history.test_metrics[i].to_dict()
        epochs.append(row)
    report = {
        "command": "train",
        "version": REPORT_VERSION,
        "config": config.to_dict(),
        "inputs": {"labeled": args.labeled, "unlabeled": args.unlabeled or "", "test": args.test or ""},
        "data": {"n_labeled": dataset.n, "m_unlabeled": dataset.m,
                 "feature_dim": dataset.feature_dim, "num_labels": dataset.num_labels},
        "epochs": epochs,
        "final_metrics": history.test_metrics[-1].to_dict() if history.test_metrics else None,
        "final_train_metrics": evaluate_params(ema.shadow, dataset).to_dict(),
        "lr_trace": history.lr_trace,
        "checkpoint": CHECKPOINT_NAME,
    }
    _dump(out / REPORT_NAME, report)
    print(f"wrote {out / REPORT_NAME} and {out / CHECKPOINT_NAME}")
    return 0


def cmd_eval(args) -> int:
    sections = load_checkpoint(args.checkpoint)
    if args.which not in sections:
        raise ShapeMismatch(f"checkpoint has no {args.which!r} section")
    params = sections[args.which]
    test = dataio.load_dataset(args.test)
    if test.n == 0:
        raise RankMatchError("test set is empty")
    report = evaluate_params(params, test)
    _dump(Path(args.out), report.to_dict())
    print(" ".join(f"{k}={v:.6g}" for k, v in report.to_dict().items()))
    return 0


def cmd_gradcheck(args) -> int:
    if args.trials < 1:
        raise FlagError("--trials must be >= 1")
    trials = run_gradcheck(args.seed, args.trials, args.tolerance, corrupt=args.corrupt)
    for t in trials:
        hidden = "-" if t.hidden is None else t.hidden
        print(f"trial {t.index:3d} c={t.num_labels} dim={t.dim:2d} n={t.n} m={t.m} hidden={hidden} "
              f"lambda={t.lam:g} t={t.t:g} max_rel_error={t.max_rel_error:.3e} "
              f"checked={t.checked} skipped={t.skipped} {'PASS' if t.passed else 'FAIL'}")
    failed = sum(not t.passed for t in trials)
    worst = max(t.max_rel_error for t in trials)
    print(f"{len(trials) - failed}/{len(trials)} trials passed, worst max_rel_error={worst:.3e}, "
          f"tolerance={args.tolerance:g}")
    if args.out:
        _dump(Path(args.out), {
            "command": "gradcheck", "seed": args.seed, "tolerance": args.tolerance,
            "trials": [t.to_dict() for t in trials], "passed": failed == 0,
        })
    return 0 if failed == 0 else 1


def cmd_ablate(args) -> int:
    if not 0 < args.label_fraction <= 1:
        raise FlagError("--label-fraction must lie in (0, 1]")
    config = _config_from_args(args)
    pool = dataio.load_labeled_csv(args.labeled)
    labeled, stripped = dataio.split_labeled_fraction(pool, args.label_fraction, args.seed)
    extra = dataio.load_unlabeled_csv(args.unlabeled) if args.unlabeled else []
    dataset = Dataset(tuple(labeled), tuple(stripped) + tuple(extra))
    test = _load_test(args.test, dataset)
    runs = ablate(dataset, test, config)

    table = {}
    if test is not None:
        for name in METRIC_NAMES:
            table[name] = {run.tag: getattr(run.final_metrics, name) for run in runs}
    report = {
        "command": "ablate",
        "version": REPORT_VERSION,
        "config": config.to_dict(),
        "label_fraction": args.label_fraction,
        "inputs": {"labeled": args.labeled, "unlabeled": args.unlabeled or "", "test": args.test or ""},
        "data": {"n_labeled": dataset.n, "m_unlabeled": dataset.m,
                 "feature_dim": dataset.feature_dim, "num_labels": dataset.num_labels},
        "rows": [tag for tag, _ in ABLATION_STAGES],
        "table": table,
        "runs": [
            {"tag": run.tag, "config": run.config.to_dict(), "history": run.result.history.to_dict(),
             "final_metrics": run.final_metrics.to_dict() if run.final_metrics else None}
            for run in runs
        ],
    }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _dump(out, report)
    if table:
        print(f"{'':14s}" + "".join(f"{n:>14s}" for n in METRIC_NAMES))
        for run in runs:
            print(f"{run.tag:14s}" + "".join(f"{table[n][run.tag]:14.6f}" for n in METRIC_NAMES))
    print(f"wrote {out}")
    return 0


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    d = TrainConfig()
    p.add_argument("--labeled", required=True, help="labeled CSV (f0..,y0..)")
    p.add_argument("--unlabeled", default="", help="unlabeled CSV (f0..); empty for none")
    p.add_argument("--test", default="", help="labeled test CSV for per-epoch metrics")
    p.add_argument("--lambda", dest="lam", type=float, default=d.lam)
    p.add_argument("--threshold-t", type=float, default=d.threshold_t)
    p.add_argument("--k-weak", type=_positive_int("--k-weak"), default=d.k_weak)
    p.add_argument("--epochs", type=_positive_int("--epochs"), default=d.epochs)
    p.add_argument("--batch", type=_positive_int("--batch"), default=d.batch_size)
    p.add_argument("--max-lr", type=float, default=d.max_lr)
    p.add_argument("--ema-decay", type=float, default=d.ema_decay)
    p.add_argument("--weak-sigma", type=float, default=d.weak_sigma)
    p.add_argument("--strong-sigma", type=float, default=d.strong_sigma)
    p.add_argument("--strong-dropout", type=float, default=d.strong_dropout)
    p.add_argument("--weight-decay", type=float, default=d.weight_decay)
    p.add_argument("--hidden", type=_positive_int("--hidden"), default=None,
                   help="width of an optional ReLU hidden layer")
    p.add_argument("--pld-source", choices=("live", "ema"), default=d.pld_source)
    p.add_argument("--seed", type=int, default=d.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankmatch", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic teacher-labeled task")
    p.add_argument("--n-labeled", type=int, default=200)
    p.add_argument("--m-unlabeled", type=int, default=1800)
    p.add_argument("--n-test", type=int, default=2000)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--labels", type=int, default=6)
    p.add_argument("--noise-alpha", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train and write report.json + checkpoint.txt")
    _add_train_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a labeled CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True, help="metrics JSON file")
    p.add_argument("--which", choices=("ema", "live"), default="ema")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--out", default="", help="optional JSON summary file")
    p.add_argument("--corrupt", type=float, default=0.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate", help="pretrain / +prr / +consistency comparison")
    _add_train_flags(p)
    p.add_argument("--label-fraction", type=float, default=0.1)
    p.add_argument("--out", required=True, help="report JSON file")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FlagError as exc:
        print(f"rankmatch {args.command}: {exc}", file=sys.stderr)
        return 2
    except RankMatchError as exc:
        print(f"rankmatch {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"rankmatch {args.command}: IoError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
