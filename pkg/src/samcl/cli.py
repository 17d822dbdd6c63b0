"""Command-line entry point.

Exit codes: 0 success, 2 config error, 3 IO/format error, 4 numeric failure,
5 data contract violation. Failures print one line to stderr of the form
``error: category=<name> code=<n>: <message>``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from .errors import ConfigError, FormatError, GradcheckFailure, SamclError


def _seed_rng(seed: int, tag: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tag)]))


def _load(cls, path):
    from .training.config import config_from_dict, load_config

    return load_config(path, cls) if path else config_from_dict({}, cls)


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise FormatError(f"cannot write file: {exc.strerror}", None, str(path)) from exc


# -- commands -------------------------------------------------------------------


def cmd_synth_data(args) -> int:
    from .data.synth import SynthDataConfig, write_dataset

    cfg = _load(SynthDataConfig, args.config)
    idx = write_dataset(args.out, args.count, cfg.subjects, cfg.face, args.seed)
    print(f"wrote {len(idx)} samples from {len(idx.subjects)} subjects to {args.out}")
    return 0


def histogram_csv(before01: np.ndarray, after01: np.ndarray, bins: int) -> str:
    edges = np.linspace(0.0, 1.0, bins + 1)
    pre, _ = np.histogram(before01, bins=edges)
    post, _ = np.histogram(after01, bins=edges)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_lo", "bin_hi", "count_pre", "count_post"])
    for lo, hi, a, b in zip(edges[:-1], edges[1:], pre, post):
        w.writerow([repr(float(lo)), repr(float(hi)), int(a), int(b)])
    return buf.getvalue()


def cmd_augment(args) -> int:
    from .data.formats import ensure_dir, load_mask, load_thermal, save_mask, save_preview16
    from .imaging import min_max_normalize
    from .tiaug import AugConfig, AugParams, apply_params, augment

    img = load_thermal(args.input)
    mask = load_mask(args.mask)
    if args.replay:
        try:
            with open(args.replay, encoding="utf-8") as fh:
                params = AugParams.from_json(fh.read())
        except OSError as exc:
            raise FormatError(f"cannot read params: {exc.strerror}", None, args.replay) from exc
        except (ValueError, KeyError, TypeError) as exc:
            raise FormatError(f"malformed params JSON: {exc}", None, args.replay) from exc
        sample = apply_params(img, mask, params)
    else:
        cfg = _load(AugConfig, args.config)
        seed = args.seed if args.seed is not None else cfg.rng_seed
        sample = augment(img, mask, cfg, _seed_rng(seed))
    ensure_dir(args.out)
    save_preview16(os.path.join(args.out, "augmented.pgm"), sample.image)
    save_mask(os.path.join(args.out, "mask.pgm"), sample.mask)
    _write_text(os.path.join(args.out, "params.json"), sample.applied_params.to_json() + "\n")
    _write_text(os.path.join(args.out, "histogram.csv"), histogram_csv(min_max_normalize(img), sample.image, args.bins))
    print(f"augmented {args.input} -> {args.out} ({len(sample.applied_params.occluders)} occluders)")
    return 0


def _train_config(args):
    from .training.config import TrainConfig

    cfg = _load(TrainConfig, args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if getattr(args, "epochs", None) is not None:
        cfg = cfg.replace(epochs=args.epochs)
    if getattr(args, "workers", None) is not None:
        cfg = cfg.replace(workers=args.workers)
    return cfg


def cmd_train(args) -> int:
    cfg = _train_config(args)
    if args.dry_run:
        print(f"config ok: mode={cfg.loss_mode} epochs={cfg.epochs} batch_size={cfg.batch_size} seed={cfg.seed}")
        return 0
    from .training.trainer import train

    log = None if args.quiet else (lambda s: print(s, flush=True))
    result = train(cfg, out_dir=args.out, log=log)
    _write_text(os.path.join(args.out, "config.json"), cfg.to_json() + "\n")
    best = result.best
    print(f"best epoch {result.best_epoch}: val mIoU {100 * best.clean.miou:.4f}% "
          f"(occluded {100 * best.occluded.miou:.4f}%) -> {result.checkpoint_path}")
    return 0


def cmd_eval(args) -> int:
    from .evaluate import evaluate, load_model, normalize_stack
    from .training.trainer import load_data, occluded_images

    cfg = _train_config(args)
    params, meta = load_model(args.checkpoint)
    _, val = load_data(cfg)
    clean = evaluate(params, normalize_stack(val.images), val.masks, cfg.batch_size)
    occ_imgs, occ_masks = occluded_images(val, cfg.eval_aug, cfg.eval_seed)
    occluded = evaluate(params, occ_imgs, occ_masks, cfg.batch_size)
    report = {"checkpoint": args.checkpoint, "epoch": meta.get("epoch"),
              "val_clean": asdict(clean), "val_occluded": asdict(occluded)}
    if args.out:
        _write_text(args.out, json.dumps(report, indent=1, sort_keys=True) + "\n")
    print(f"val mIoU {100 * clean.miou:.4f}% (occluded {100 * occluded.miou:.4f}%)")
    return 0


def cmd_ablate(args) -> int:
    from .data.formats import ensure_dir
    from .training.ablation import ablation, ablation_csv, ablation_table

    cfg = _train_config(args)
    modes = args.modes.split(",")
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [cfg.seed]
    log = None if args.quiet else (lambda s: print(s, flush=True))
    res = ablation(cfg, modes, seeds, log=log)
    ensure_dir(args.out)
    _write_text(os.path.join(args.out, "ablation.csv"), ablation_csv(res))
    table = ablation_table(res)
    _write_text(os.path.join(args.out, "ablation.txt"), table + "\n")
    print(table)
    return 0


def cmd_gradcheck(args) -> int:
    from . import gradcheck

    modules = list(gradcheck.SUITES) if args.module == "all" else [args.module]
    seed = args.seed if args.seed is not None else 0
    results = gradcheck.run(modules, seed=seed)
    width = max(len(r.op) for r in results)
    for r in results:
        print(f"{r.op:<{width}}  {r.max_rel_error:.3e}  {'ok' if r.ok else 'FAIL'}")
    failed = [r.op for r in results if not r.ok]
    if failed:
        raise GradcheckFailure(f"relative error >= {gradcheck.THRESHOLD} for: {', '.join(failed)}")
    return 0


# -- parser ---------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"usage: {message}", "")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="samcl", description="Thermal face segmentation with triplet-loss training and TiAug augmentation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON config document")
        sp.add_argument("--seed", type=int, default=None)
        return sp

    sp = common(sub.add_parser("synth-data", help="write synthetic THRM images, masks and a manifest"))
    sp.add_argument("--out", required=True)
    sp.add_argument("--count", type=int, required=True)
    sp.set_defaults(func=cmd_synth_data, seed_default=0)

    sp = common(sub.add_parser("augment", help="augment one image and write previews"))
    sp.add_argument("--in", dest="input", required=True, help="THRM image")
    sp.add_argument("--mask", required=True, help="PGM label mask")
    sp.add_argument("--out", required=True)
    sp.add_argument("--replay", help="params.json from an earlier run")
    sp.add_argument("--bins", type=int, default=32)
    sp.set_defaults(func=cmd_augment)

    for name, func, helptext in (("train", cmd_train, "train one model"), ("eval", cmd_eval, "score a checkpoint"),
                                 ("ablate", cmd_ablate, "compare loss modes over seeds")):
        sp = common(sub.add_parser(name, help=helptext))
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--workers", type=int)
        sp.set_defaults(func=func)
        if name == "train":
            sp.add_argument("--out", default="run")
            sp.add_argument("--dry-run", action="store_true")
            sp.add_argument("--quiet", action="store_true")
        elif name == "eval":
            sp.add_argument("--checkpoint", required=True)
            sp.add_argument("--out", help="write the report as JSON")
        else:
            sp.add_argument("--modes", default="rmi,rmi+tiaug,rmi+tiaug+samcl")
            sp.add_argument("--seeds", help="comma-separated, default: the config seed")
            sp.add_argument("--out", default="ablation")
            sp.add_argument("--quiet", action="store_true")

    sp = common(sub.add_parser("gradcheck", help="finite-difference gradient suites"))
    sp.add_argument("--module", choices=["tensor", "loss", "net", "all"], default="all")
    sp.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "seed_default", None) is not None and args.seed is None:
            args.seed = args.seed_default
        return args.func(args)
    except SamclError as exc:
        print(f"error: category={exc.category} code={exc.exit_code}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: category=io code=3: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
