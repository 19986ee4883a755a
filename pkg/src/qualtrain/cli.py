"""Command-line front end for the whole pipeline.

Subcommands: prep (verify dataset, materialize the ten test sets), train
(one strategy), eval (accuracy grid row + confidence records for one
checkpoint), report (strategies x test-sets grid), score (SSIM
passthrough), distort (generator passthrough).

Exit codes: 0 success, 1 usage/configuration error, 2 data error,
3 runtime or numeric error.  QUALTRAIN_DATA supplies the default dataset
path; flags override the config file, which overrides defaults.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, dataset, distort, iqa, reports, trainer
from .config import DATA_ENV_VAR, build_run_config, format_config
from .errors import ConfigurationError, DataError, QualtrainError
from .nn import load_checkpoint

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_png(path: str) -> np.ndarray:
    from PIL import Image

    if not os.path.isfile(path):
        raise DataError(f"missing image file: {path}")
    return np.asarray(Image.open(path).convert("RGB"))


def _save_png(path: str, img: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(img).save(path, "PNG")


def _test_sets_dir(out_dir: str) -> str:
    return os.path.join(out_dir, "test_sets")


def _run_dir(out_dir: str, strategy_id: int, seed: int) -> str:
    return os.path.join(out_dir, "runs", f"strategy_{strategy_id}", f"seed_{seed}")


def _reports_dir(out_dir: str) -> str:
    return os.path.join(out_dir, "reports")


def _eval_report_path(out_dir: str, strategy_id: int, seed: int) -> str:
    return os.path.join(_reports_dir(out_dir), f"eval_strategy_{strategy_id}_seed_{seed}.tsv")


def _resolve_config(args, **extra) -> "RunConfig":
    overrides = dict(extra)
    for key in ("data_dir", "out_dir", "strategy", "seed", "preset", "epochs",
                "batch_size", "learning_rate", "test_seed", "checkpoint_every",
                "probe_count"):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    if overrides.get("data_dir") is None:
        overrides["data_dir"] = os.environ.get(DATA_ENV_VAR)
    cfg = build_run_config(getattr(args, "config", None), **overrides)
    print(f"qualtrain {__version__} effective configuration:")
    print(format_config(cfg))
    return cfg


# ---------------------------------------------------------------------------
# prep


def cmd_prep(args) -> int:
    cfg = _resolve_config(args)
    if not cfg.data_dir:
        raise ConfigurationError(f"no dataset path: pass --data or set {DATA_ENV_VAR}")
    if args.digests:
        with open(args.digests, encoding="ascii") as fh:
            dataset.verify_digests(cfg.data_dir, json.load(fh))
        print("dataset digests verified")
    _, _, test_images, test_labels = dataset.load_cifar10_arrays(cfg.data_dir)

    ts_dir = _test_sets_dir(cfg.out_dir)
    os.makedirs(ts_dir, exist_ok=True)
    arrays = dataset.test_set_arrays(test_images, cfg.test_seed)
    summary = {"test_seed": cfg.test_seed, "sets": {}}
    for name, (images, quality) in arrays.items():
        np.savez(os.path.join(ts_dir, f"{name}.npz"),
                 images=images, labels=test_labels, quality=quality)
        kind_codes = np.full(len(images), -1, dtype=np.int8)
        levels = np.zeros(len(images), dtype=np.int8)
        if name != "pristine":
            kind, level = name.rsplit("-", 1)
            kind_codes[:] = distort.KINDS.index(kind)
            levels[:] = int(level)
        manifest_path = os.path.join(ts_dir, f"{name}.manifest.jsonl")
        dataset.write_manifest(manifest_path, dataset.manifest_records(
            images, test_labels, quality, kind_codes, levels))
        summary["sets"][name] = {
            "samples": int(len(images)),
            "images_sha256": dataset.content_digest(images),
        }
    with open(os.path.join(ts_dir, "prep_summary.json"), "w", encoding="ascii") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(arrays)} test sets to {ts_dir}")
    return EXIT_OK


def _load_test_sets(out_dir: str) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    ts_dir = _test_sets_dir(out_dir)
    sets = {}
    for name in dataset.TEST_SET_NAMES:
        path = os.path.join(ts_dir, f"{name}.npz")
        if not os.path.isfile(path):
            raise DataError(f"missing test set {name}: {path} (run prep first)")
        with np.load(path) as z:
            sets[name] = (z["images"], z["labels"])
    return sets


# ---------------------------------------------------------------------------
# train


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    if not cfg.data_dir:
        raise ConfigurationError(f"no dataset path: pass --data or set {DATA_ENV_VAR}")
    strat = trainer.strategy(cfg.strategy)
    train_images, train_labels, _, _ = dataset.load_cifar10_arrays(cfg.data_dir)
    if args.limit:
        train_images = train_images[:args.limit]
        train_labels = train_labels[:args.limit]
    run_dir = _run_dir(cfg.out_dir, strat.id, cfg.seed)
    tcfg = cfg.training_config()

    def progress(epoch, mean_loss, lr):
        print(f"epoch {epoch}: mean_loss={mean_loss:.6f} lr={lr:.8g}", flush=True)

    final = trainer.train(
        strat, tcfg, train_images, train_labels, run_dir,
        mixture_ratios=cfg.mixture_ratios, checkpoint_every=cfg.checkpoint_every,
        resume=args.resume, progress=progress)
    print(f"final checkpoint: {final}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval / report


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    strat = trainer.strategy(cfg.strategy)
    ckpt = args.checkpoint or trainer.latest_checkpoint(_run_dir(cfg.out_dir, strat.id, cfg.seed))
    if ckpt is None or not os.path.isfile(ckpt):
        raise DataError(f"no checkpoint found for strategy {strat.id} "
                        f"(seed {cfg.seed}) under {cfg.out_dir}")
    params, header, _ = load_checkpoint(ckpt)
    test_sets = _load_test_sets(cfg.out_dir)
    report = trainer.evaluate(params, test_sets, probe_count=cfg.probe_count)

    os.makedirs(_reports_dir(cfg.out_dir), exist_ok=True)
    provenance = {
        "strategy": strat.id, "seed": cfg.seed, "epoch": header["epoch"],
        "config_hash": header["config_hash"], "arch_hash": header["arch_hash"],
    }
    path = _eval_report_path(cfg.out_dir, strat.id, cfg.seed)
    reports.write_eval_report(path, report, provenance)
    conf_path = os.path.join(_reports_dir(cfg.out_dir),
                             f"confidence_strategy_{strat.id}_seed_{cfg.seed}.tsv")
    reports.write_confidence_records(conf_path, report, provenance)
    for name in dataset.TEST_SET_NAMES:
        print(f"{name}\t{report.accuracies[name]:.4f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _resolve_config(args)
    if args.strategies:
        ids = sorted({int(s) for s in args.strategies.split(",")})
    else:
        ids = [s.id for s in trainer.all_strategies()
               if os.path.isfile(_eval_report_path(cfg.out_dir, s.id, cfg.seed))]
        if not ids:
            raise DataError(f"no evaluation reports under {_reports_dir(cfg.out_dir)}; "
                            "run eval first")
    rows = []
    for sid in ids:
        strat = trainer.strategy(sid)
        path = _eval_report_path(cfg.out_dir, sid, cfg.seed)
        if not os.path.isfile(path):
            raise DataError(f"missing evaluation report for strategy {sid}: {path}")
        rows.append((strat, reports.read_eval_report(path)))

    os.makedirs(_reports_dir(cfg.out_dir), exist_ok=True)
    provenance = {"seed": cfg.seed, "strategies": ",".join(str(i) for i in ids)}
    written = []
    if "tsv" in cfg.report_formats:
        path = os.path.join(_reports_dir(cfg.out_dir), "grid.tsv")
        reports.write_grid_tsv(path, rows, provenance)
        written.append(path)
    if "markdown" in cfg.report_formats:
        path = os.path.join(_reports_dir(cfg.out_dir), "grid.md")
        reports.write_grid_markdown(path, rows, provenance)
        written.append(path)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# score / distort passthroughs


def cmd_score(args) -> int:
    ref = _load_png(args.ref)
    dist = _load_png(args.dist)
    score = iqa.ssim(ref, dist)
    print(f"raw={score.raw:.6f}")
    print(f"transformed={score.transformed:.6f}")
    return EXIT_OK


def cmd_distort(args) -> int:
    spec = distort.DistortionSpec(args.kind, args.level)
    img = _load_png(args.input)
    out = distort.apply(spec, img, args.seed)
    _save_png(args.output, out)
    print(f"wrote {args.output} ({spec.name})")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="qualtrain",
                     description="Distortion-robust training pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--config", help="INI config file ([qualtrain] section)")
        p.add_argument("--out", dest="out_dir", help="output directory")
        p.add_argument("--seed", type=int, help="run seed")
        if data:
            p.add_argument("--data", dest="data_dir",
                           help=f"CIFAR-10 binary directory (default ${DATA_ENV_VAR})")

    p = sub.add_parser("prep", help="verify dataset and materialize the ten test sets")
    common(p)
    p.add_argument("--digests", help="JSON file of expected per-file sha256 digests")
    p.add_argument("--test-seed", dest="test_seed", type=int,
                   help="seed for the distorted test sets")
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("train", help="train one strategy")
    common(p)
    p.add_argument("--strategy", type=int, help="strategy id (1-9)")
    p.add_argument("--preset", choices=("full", "desk"), help="schedule preset")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    p.add_argument("--resume", action="store_true", help="resume from the last checkpoint")
    p.add_argument("--limit", type=int, default=0,
                   help="use only the first N training samples (debug)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the ten test sets")
    common(p, data=False)
    p.add_argument("--strategy", type=int, help="strategy id (1-9)")
    p.add_argument("--checkpoint", help="explicit checkpoint path")
    p.add_argument("--probe-count", dest="probe_count", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="emit the strategies x test-sets grid")
    common(p, data=False)
    p.add_argument("--strategies", help="comma-separated strategy ids (default: all evaluated)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("score", help="SSIM between a reference and a distorted image")
    p.add_argument("--ref", required=True)
    p.add_argument("--dist", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("distort", help="apply one distortion to an image file")
    p.add_argument("--kind", required=True, choices=distort.KINDS)
    p.add_argument("--level", required=True, type=int, choices=(1, 2, 3))
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_distort)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse usage error, --help, --version
        return int(exc.code or 0)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (QualtrainError, ValueError, ArithmeticError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
