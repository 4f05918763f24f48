"""Command-line entry point: ``hybridlf <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .autodiff.checkpoint import CheckpointError
from .data.io import LfFormatError, load_hybrid, load_lf, read_manifest, save_disparity, save_hybrid, save_lf, write_image
from .data.lightfield import LightField
from .data.resample import bicubic_resample
from .data.structure import extract_epi

SCENE_DIR = "scene_%03d"
HR_DIR = "hr"
INPUT_DIR = "input"


def _cmd_synth(args) -> int:
    from .synth import make_corpus

    out = Path(args.out)
    corpus = make_corpus(args.scenes, args.seed, args.scale, size=args.size, views=args.views)
    for i, (hybrid, bundle) in enumerate(corpus):
        scene = out / (SCENE_DIR % i)
        lo = float(np.floor(bundle.gt_disparity.min())) - 1.0
        hi = float(np.ceil(bundle.gt_disparity.max())) + 1.0
        entries = save_disparity(bundle.gt_disparity, scene / HR_DIR, lo, hi)
        save_lf(bundle.hr_lf, scene / HR_DIR, extra=entries)
        save_hybrid(hybrid, scene / INPUT_DIR)
    print(f"wrote {len(corpus)} scenes to {out}")
    return 0


def _scene_dirs(root: Path) -> list[Path]:
    scenes = sorted(p for p in root.iterdir() if (p / HR_DIR / "lf.meta").exists())
    if not scenes:
        raise FileNotFoundError(f"no scenes with {HR_DIR}/lf.meta under {root}")
    return scenes


def _cmd_train(args) -> int:
    from .train import TrainConfig, train

    config = TrainConfig.from_json(args.config) if args.config else TrainConfig(scale=args.scale)
    if config.scale != args.scale:
        config = TrainConfig.from_dict({**config.to_dict(), "scale": args.scale})
    overrides = {k: v for k, v in (("max_steps", args.steps), ("seed", args.seed)) if v is not None}
    if overrides:
        config = TrainConfig.from_dict({**config.to_dict(), **overrides})
    scenes = [load_lf(d / HR_DIR) for d in _scene_dirs(Path(args.data))]
    n_val = min(args.val, len(scenes) - 1)
    train_set, val_set = (scenes[:-n_val], scenes[-n_val:]) if n_val > 0 else (scenes, None)
    ckpt = Path(args.out)
    result = train(train_set, config, out_dir=ckpt.parent, val_corpus=val_set,
                   checkpoint_name=ckpt.name, metrics_name=ckpt.stem + ".csv")
    last = result.log[-1]
    print(f"trained {config.max_steps} steps in {result.runtime_s:.1f}s; "
          f"val PSNR fused {last['psnr_fused']:.2f} dB; checkpoint {ckpt}")
    return 0


def _cmd_reconstruct(args) -> int:
    from .model import HybridModel
    from .train import reconstruct

    model = HybridModel.load(args.ckpt)
    hybrid = load_hybrid(args.input)
    rec = reconstruct(hybrid, model, tile=args.tile)
    out = Path(args.out)
    extra = {"scale": hybrid.scale}
    if args.disparity:
        bound = model.config.d_max * model.config.scale
        extra.update(save_disparity(rec.disparity, out, -bound, bound))
    save_lf(LightField(rec.fused.astype(np.float64)), out, extra=extra)
    print(f"wrote reconstruction to {out}")
    return 0


def _cmd_eval(args) -> int:
    from .metrics import evaluate, report_paths

    pred, gt = load_lf(args.pred), load_lf(args.gt)
    report = evaluate(pred, gt, with_pr=not args.no_pr)
    report_path, pr_path = report_paths(args.report)
    report.write_csv(report_path)
    if report.pr is not None:
        report.write_pr_csv(pr_path)
    print(f"PSNR {report.psnr:.4f} dB  SSIM {report.ssim:.6f}")
    return 0


def _cmd_gradcheck(args) -> int:
    from . import gradsuite

    names = [args.module] if args.module else None
    try:
        results = gradsuite.run(names)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    failed = 0
    for name, report in results.items():
        status = "ok" if report.passed else "FAIL"
        failed += not report.passed
        print(f"{name:20s} max rel error {report.max_rel_error:.3e}  {status}")
    return 1 if failed else 0


def _cmd_epi(args) -> int:
    lf = load_lf(args.lf)
    if args.vertical:
        epi = extract_epi(lf, "vertical", args.s, args.col)
    else:
        epi = extract_epi(lf, "horizontal", args.t, args.row)
    write_image(args.out, np.clip(epi.image, 0.0, 1.0))
    return 0


def _cmd_baseline(args) -> int:
    meta = read_manifest(args.input)
    lf = load_hybrid(args.input).lr_lf if "scale" in meta else load_lf(args.input)
    up = np.clip(bicubic_resample(lf.luma, args.scale), 0.0, 1.0)
    save_lf(LightField(up), args.out, extra={"scale": args.scale})
    print(f"wrote bicubic x{args.scale} baseline to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridlf", description="Hybrid light-field super-resolution toolkit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic corpus with ground truth")
    p.add_argument("--scenes", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=int, default=2)
    p.add_argument("--size", type=int, default=64, help="HR view size in pixels")
    p.add_argument("--views", type=int, default=5, help="angular resolution per axis")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train the joint model on a synthetic corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--scale", type=int, default=2)
    p.add_argument("--config", help="JSON training config")
    p.add_argument("--out", required=True, help="checkpoint path (a .json sidecar and .csv log go next to it)")
    p.add_argument("--steps", type=int, help="override max_steps")
    p.add_argument("--seed", type=int, help="override the training seed")
    p.add_argument("--val", type=int, default=1, help="hold out this many trailing scenes for validation")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("reconstruct", help="super-resolve a hybrid input")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tile", type=int, help="LR tile size for tiled inference")
    p.add_argument("--disparity", action="store_true", help="also write the HR disparity maps")
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("eval", help="compare a predicted light field to ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report", required=True, help="CSV report; PR samples go to <report>_pr.csv")
    p.add_argument("--no-pr", action="store_true", help="skip the parallax PR curve")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of all differentiable ops")
    p.add_argument("--module", help="run a single named case")
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("epi", help="write one epipolar-plane image as PGM")
    p.add_argument("--lf", required=True)
    p.add_argument("--row", type=int, default=0, help="pixel row y of a horizontal EPI")
    p.add_argument("--t", type=int, default=0, help="view column t of a horizontal EPI")
    p.add_argument("--vertical", action="store_true")
    p.add_argument("--col", type=int, default=0, help="pixel column x of a vertical EPI")
    p.add_argument("--s", type=int, default=0, help="view row s of a vertical EPI")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_epi)

    p = sub.add_parser("baseline-bicubic", help="bicubic upsampling of every LR view")
    p.add_argument("--input", required=True)
    p.add_argument("--scale", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_baseline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (OSError, LfFormatError, CheckpointError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
