"""Command-line interface.

Subcommands: ``match`` (image pair to flow/disparity plus confidence),
``eval`` (EPE / outlier fraction), ``classify`` (outlier masks from
uncertainty or forward-backward checks, with optional scoring),
``propagate`` (label propagation over a frame sequence), and ``oracle``
(tiny-grid full-density dump). Exit code 0 on success, 2 on input
errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import cv2
import numpy as np

from .density import (
    MatchDensity,
    Support,
    compose_full_density,
    mean_log_likelihood,
    vector_to_density,
)
from .fields import MotionField, ScalarImage
from .fileio import (
    read_disparity_png,
    read_flo,
    read_flow_png,
    read_pgm16,
    write_disparity_png,
    write_flo,
    write_flow_png,
    write_pgm16,
)
from .matcher import MatchConfig, match_pair
from .metrics import compute_epe_fl
from .propagation import LabelProbMap, hard_labels, propagate_sequence, score_segmentation
from .reliability import classify_by_fb_consistency, classify_by_uncertainty, score_classification

UNKNOWN_LABEL = 255  # reserved in 8-bit label images


class InputError(Exception):
    pass


def _load_image(path: str) -> ScalarImage:
    img = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if img is None:
        raise InputError(f"cannot read image {path}")
    return ScalarImage(img.astype(np.float64))


def _load_field(path: str, stereo_sign: int = -1) -> MotionField:
    suffix = Path(path).suffix.lower()
    if suffix == ".flo":
        return read_flo(path)
    if suffix == ".png":
        img = cv2.imread(path, cv2.IMREAD_UNCHANGED)
        if img is None:
            raise InputError(f"cannot read {path}")
        if img.ndim == 3:
            return read_flow_png(path)
        disp, valid = read_disparity_png(path)
        return MotionField((stereo_sign * disp)[:, :, None], valid)
    raise InputError(f"unsupported field format: {path}")


def _load_labels(path: str) -> np.ndarray:
    img = cv2.imread(path, cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise InputError(f"cannot read label image {path}")
    labels = img.astype(np.int64)
    labels[labels == UNKNOWN_LABEL] = -1
    return labels


def _save_labels(path: str, labels: np.ndarray) -> None:
    out = labels.astype(np.int64).copy()
    out[out < 0] = UNKNOWN_LABEL
    cv2.imwrite(path, out.astype(np.uint8))


def _config(args: argparse.Namespace) -> MatchConfig:
    return MatchConfig(
        mode=args.mode,
        levels=args.levels,
        corr_range=args.range,
        tau=args.tau,
    )


def _cmd_match(args: argparse.Namespace) -> int:
    cfg = _config(args)
    i1 = _load_image(args.image1)
    i2 = _load_image(args.image2)
    flow, confidence, _ = match_pair(i1, i2, cfg)
    if args.out:
        suffix = Path(args.out).suffix.lower()
        if cfg.mode == "stereo":
            if suffix != ".png":
                raise InputError("stereo output must be a disparity .png")
            disp = cfg.stereo_sign * flow.vectors[:, :, 0]
            representable = np.rint(disp * 256.0)
            write_disparity_png(
                args.out, disp, flow.valid & (representable >= 1) & (representable <= 65535)
            )
        elif suffix == ".flo":
            write_flo(args.out, flow)
        elif suffix == ".png":
            write_flow_png(args.out, flow)
        else:
            raise InputError(f"unsupported output format: {args.out}")
    if args.confidence:
        write_pgm16(args.confidence, confidence.plane(0))
    print(f"matched {flow.width}x{flow.height} mode={cfg.mode} levels={cfg.num_levels}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    est = _load_field(args.est)
    gt = _load_field(args.gt)
    report = compute_epe_fl(est, gt)
    for line in report.lines():
        print(line)
    return 0


def _cmd_classify(args: argparse.Namespace) -> int:
    if args.confidence:
        conf = read_pgm16(args.confidence)
        mask = classify_by_uncertainty(conf, args.sigma)
        threshold: float | None = args.sigma
    elif args.forward and args.backward:
        mask = classify_by_fb_consistency(_load_field(args.forward), _load_field(args.backward))
        threshold = None
    else:
        raise InputError("provide --confidence or both --forward and --backward")

    if args.out:
        cv2.imwrite(args.out, mask.astype(np.uint8) * 255)
    print(f"outlier_fraction={mask.mean():.4f}")

    if args.gt and args.est:
        noc = None
        if args.noc:
            noc_img = cv2.imread(args.noc, cv2.IMREAD_GRAYSCALE)
            if noc_img is None:
                raise InputError(f"cannot read {args.noc}")
            noc = noc_img > 0
        report = score_classification(
            mask, _load_field(args.gt), _load_field(args.est), noc, threshold
        )
        print(report.table())
        for line in report.lines():
            print(line)
    return 0


def _cmd_propagate(args: argparse.Namespace) -> int:
    labels = _load_labels(args.labels)
    num_classes = args.classes or int(labels.max()) + 1
    if num_classes < 1:
        raise InputError("label image has no known labels")
    seed_map = LabelProbMap.from_labels(labels, num_classes)

    guides: list[MotionField | MatchDensity] = []
    if args.frames:
        if len(args.frames) < 2:
            raise InputError("--frames needs at least two images")
        cfg = _config(args)
        frames = [_load_image(p) for p in args.frames]
        for a, b in zip(frames[:-1], frames[1:]):
            flow, _, outputs = match_pair(a, b, cfg)
            if args.guidance == "density":
                guides.append(outputs[-1].residual_density)
            else:
                guides.append(flow)
    elif args.flows:
        guides = [_load_field(p) for p in args.flows]
    else:
        raise InputError("provide --frames or --flows")
    if args.repeat > 1:
        guides = [g for g in guides for _ in range(args.repeat)]

    maps = propagate_sequence(seed_map, guides)
    for t, m in enumerate(maps, start=1):
        if args.out_dir:
            Path(args.out_dir).mkdir(parents=True, exist_ok=True)
            _save_labels(str(Path(args.out_dir) / f"propagated_{t:04d}.png"), hard_labels(m))
    if args.gt:
        if len(args.gt) != len(maps):
            raise InputError(f"{len(maps)} propagated frames but {len(args.gt)} ground truths")
        for t, (m, gt_path) in enumerate(zip(maps, args.gt), start=1):
            miou, macc = score_segmentation(hard_labels(m), _load_labels(gt_path), num_classes)
            print(f"frame={t} miou={miou:.1f} macc={macc:.1f}")
    else:
        print(f"propagated {len(maps)} frames")
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    try:
        w, h = (int(t) for t in args.size.lower().split("x"))
    except ValueError as exc:
        raise InputError(f"bad --size {args.size!r}, expected WxH") from exc
    residuals = []
    for part in args.residuals.split(";"):
        try:
            residuals.append(tuple(float(t) for t in part.split(",")))
        except ValueError as exc:
            raise InputError(f"bad residual {part!r}") from exc
        if len(residuals[-1]) != 2:
            raise InputError("each residual must be 'u,v'")
    nlev = len(residuals)
    if w % 2 ** (nlev - 1) or h % 2 ** (nlev - 1):
        raise InputError(f"size {w}x{h} not divisible by 2^{nlev - 1}")

    rng = np.random.default_rng(args.seed)
    support = Support.square(args.range)
    levels = []
    for l, vec in enumerate(residuals):
        lw, lh = w // 2 ** (nlev - 1 - l), h // 2 ** (nlev - 1 - l)
        dens = vector_to_density(MotionField.constant(lh, lw, vec), support)
        if not dens.valid.all():
            raise InputError(f"residual {vec} outside support radius {args.range}")
        if args.noise > 0:
            mix = rng.random(dens.mass.shape)
            mix /= mix.sum(axis=(2, 3), keepdims=True)
            dens = MatchDensity((1 - args.noise) * dens.mass + args.noise * mix, support)
        levels.append(dens)

    max_support = args.max_support or args.range * (2**nlev - 1)
    full = compose_full_density(levels, max_support)
    mass = full.density.mass[0, 0]
    offs_dx, offs_dy = full.density.support.offsets()
    for dy, dx, m in sorted(
        zip(offs_dy.ravel(), offs_dx.ravel(), mass.ravel()), key=lambda t: -t[2]
    ):
        if m > 1e-12:
            print(f"atom du={dx:d} dv={dy:d} mass={m:.6f}")
    print(f"total_mass={mass.sum():.9f}")
    print(f"truncated_mass={full.truncated[0, 0]:.9f}")
    if args.gt:
        try:
            gu, gv = (float(t) for t in args.gt.split(","))
        except ValueError as exc:
            raise InputError(f"bad --gt {args.gt!r}, expected 'u,v'") from exc
        gt = MotionField.constant(h, w, (gu, gv))
        print(f"avg_loglik={mean_log_likelihood(full.density, gt):.6f}")
    return 0


def _add_matcher_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=("flow", "stereo"), default="flow")
    p.add_argument("--levels", type=int, default=None, help="pyramid levels (default 5 flow / 6 stereo)")
    p.add_argument("--range", type=int, default=4, help="per-level search radius")
    p.add_argument("--tau", type=float, default=0.02, help="softmax temperature")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="densematch", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized data generation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="match an image pair")
    p.add_argument("image1")
    p.add_argument("image2")
    _add_matcher_flags(p)
    p.add_argument("--out", help="output field (.flo or .png)")
    p.add_argument("--confidence", help="output confidence map (.pgm, 16-bit)")
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("eval", help="score an estimate against ground truth")
    p.add_argument("--est", required=True)
    p.add_argument("--gt", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("classify", help="predict inliers/outliers")
    p.add_argument("--confidence", help="confidence map (.pgm)")
    p.add_argument("--sigma", type=float, default=0.3, help="uncertainty threshold")
    p.add_argument("--forward", help="forward flow for the consistency check")
    p.add_argument("--backward", help="backward flow for the consistency check")
    p.add_argument("--est", help="estimated field, enables scoring")
    p.add_argument("--gt", help="ground-truth field, enables scoring")
    p.add_argument("--noc", help="non-occluded mask image (nonzero = evaluate)")
    p.add_argument("--out", help="output outlier mask (.png)")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("propagate", help="propagate labels over a sequence")
    p.add_argument("--labels", required=True, help="seed label image (255 = unknown)")
    p.add_argument("--frames", nargs="*", help="frame images; pairs are matched internally")
    p.add_argument("--flows", nargs="*", help="precomputed flow fields as guides")
    p.add_argument("--guidance", choices=("density", "vector"), default="density")
    p.add_argument("--repeat", type=int, default=1, help="apply each guide this many times")
    p.add_argument("--classes", type=int, default=None)
    _add_matcher_flags(p)
    p.add_argument("--out-dir", help="directory for propagated label images")
    p.add_argument("--gt", nargs="*", help="per-frame ground-truth label images")
    p.set_defaults(func=_cmd_propagate)

    p = sub.add_parser("oracle", help="tiny-grid full-density dump")
    p.add_argument("--size", default="4x4", help="grid size WxH")
    p.add_argument("--residuals", required=True, help="per-level 'u,v;u,v' coarse to fine")
    p.add_argument("--range", type=int, default=4)
    p.add_argument("--max-support", type=int, default=None)
    p.add_argument("--noise", type=float, default=0.0, help="mix fraction of random mass")
    p.add_argument("--gt", help="constant ground truth 'u,v' to score log-likelihood")
    p.set_defaults(func=_cmd_oracle)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
