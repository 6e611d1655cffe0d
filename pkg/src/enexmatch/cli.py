"""Command line front end.

One binary, four subcommands:

  generate   write a synthetic dataset and its manifest
  enroll     extract gallery features from a manifest into a snapshot
  match      rank enrolled subjects against probe observations
  evaluate   run the closed-set protocol and print a matching-rate table

Exit codes: 0 success, 1 runtime failure, 2 usage error. Reports go to
stdout, diagnostics to stderr. The snapshot path can also come from the
ENEXMATCH_SNAPSHOT environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import EnexError
from .evaluation import (
    SyntheticConfig,
    cmc_csv,
    emit_report,
    evaluate,
    generate_synthetic,
    ingest,
    probe_bundles,
)
from .features import FEATURE_IDS, FeatureConfig, SubjectSample, extract_bundle
from .gallery import Gallery
from .imaging import load_image, load_mask
from .matching import match_probe

EXIT_SUCCESS = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

SNAPSHOT_ENV = "ENEXMATCH_SNAPSHOT"


def _usage(message: str) -> int:
    print(f"usage error: {message}", file=sys.stderr)
    return EXIT_USAGE


def _feature_config(args: argparse.Namespace) -> FeatureConfig:
    return FeatureConfig(build_threshold=args.threshold)


def _snapshot_path(args: argparse.Namespace) -> Path | None:
    if args.snapshot:
        return Path(args.snapshot)
    return None


def cmd_generate(args: argparse.Namespace) -> int:
    try:
        config = SyntheticConfig(
            subjects=args.subjects,
            samples_per_subject=args.samples,
            metric_samples=args.metric_samples,
            probes_per_subject=args.probes,
            clothing_change_prob=args.clothing_change,
            back_view_prob=args.back_view,
            pixel_noise=args.pixel_noise,
            height_noise=args.height_noise,
            build_noise=args.build_noise,
            chroma_noise=args.chroma_noise,
            cameras=args.cameras,
            image_height=args.image_height,
            image_width=args.image_width,
            entrance_ref_height=args.entrance_ref,
            seed=args.seed,
        )
    except ValueError as exc:
        return _usage(str(exc))
    manifest = generate_synthetic(config, args.out)
    gallery_rows = sum(1 for e in manifest.entries if e.role == "gallery")
    probe_rows = len(manifest.entries) - gallery_rows
    print(
        f"wrote {config.subjects} subjects to {args.out}: "
        f"{gallery_rows} gallery rows, {probe_rows} probe rows, seed {config.seed}"
    )
    return EXIT_SUCCESS


def cmd_enroll(args: argparse.Namespace) -> int:
    snapshot = _snapshot_path(args)
    if snapshot is None:
        return _usage(f"snapshot path required (--snapshot or {SNAPSHOT_ENV})")
    if args.epsilon is not None and args.epsilon <= 0:
        return _usage("--epsilon must be positive")
    try:
        config = _feature_config(args)
    except ValueError as exc:
        return _usage(str(exc))
    gallery_map, _ = ingest(args.manifest, config)
    if not gallery_map:
        print("error: manifest has no gallery rows", file=sys.stderr)
        return EXIT_RUNTIME
    gallery = Gallery.load(snapshot) if snapshot.exists() else Gallery()
    for label, bundles in gallery_map.items():
        gallery = gallery.enroll(label, bundles)
    gallery = gallery.fit(args.epsilon)
    gallery.save(snapshot)
    print(
        f"enrolled {len(gallery_map)} classes (gallery now holds {gallery.n}), "
        f"fitted on features: {', '.join(gallery.covered_features()) or 'none'}, "
        f"saved to {snapshot}"
    )
    return EXIT_SUCCESS


def _single_probe(args: argparse.Namespace, config: FeatureConfig):
    image = load_image(args.image)
    mask = load_mask(args.mask) if args.mask else None
    sample = SubjectSample(
        image=image,
        mask=mask,
        bbox_height=args.bbox_height,
        bbox_width=args.bbox_width,
        entrance_ref_height=args.entrance_ref,
        camera_id=args.camera,
        view=args.view,
    )
    return [extract_bundle(sample, config)]


def cmd_match(args: argparse.Namespace) -> int:
    snapshot = _snapshot_path(args)
    if snapshot is None:
        return _usage(f"snapshot path required (--snapshot or {SNAPSHOT_ENV})")
    if (args.manifest is None) == (args.image is None):
        return _usage("give exactly one probe source: --manifest or --image")
    if args.top < 1:
        return _usage("--top must be at least 1")
    try:
        config = _feature_config(args)
    except ValueError as exc:
        return _usage(str(exc))
    gallery = Gallery.load(snapshot)
    if args.manifest is not None:
        probes = probe_bundles(args.manifest, config)
        if not probes:
            print("error: manifest has no probe rows", file=sys.stderr)
            return EXIT_RUNTIME
    else:
        try:
            probes = _single_probe(args, config)
        except ValueError as exc:
            return _usage(str(exc))
    blocks = []
    for index, probe in enumerate(probes):
        report = match_probe(probe, gallery)
        shown = report.ranking[: args.top]
        summary = ", ".join(
            f"{label} ({report.collective[label]:.3f})" for label in shown
        )
        name = report.probe_id if report.probe_id else f"#{index + 1}"
        blocks.append(f"top-{len(shown)} for probe {name}: {summary}\n" + report.to_text())
    print("\n".join(blocks), end="")
    return EXIT_SUCCESS


def cmd_evaluate(args: argparse.Namespace) -> int:
    if args.epsilon is not None and args.epsilon <= 0:
        return _usage("--epsilon must be positive")
    try:
        ks = tuple(int(tok) for tok in args.ranks.split(","))
    except ValueError:
        return _usage("--ranks must be comma-separated integers")
    if not ks or any(k < 1 for k in ks):
        return _usage("--ranks must be positive")
    features = None
    if args.features:
        features = tuple(tok for tok in args.features.split(",") if tok)
        unknown = set(features) - set(FEATURE_IDS)
        if unknown:
            return _usage(f"unknown features: {', '.join(sorted(unknown))}")
    try:
        config = _feature_config(args)
    except ValueError as exc:
        return _usage(str(exc))
    gallery_map, probes = ingest(args.manifest, config)
    result = evaluate(gallery_map, probes, epsilon=args.epsilon, ks=ks, features=features)
    name = ",".join(features) if features else "all-features"
    print(emit_report([(name, result.rank_accuracy)], ks), end="")
    if args.cmc_csv:
        Path(args.cmc_csv).write_text(cmc_csv(result.cmc), encoding="utf-8")
    print(
        f"evaluated {result.probe_count} probes against {result.n} classes",
        file=sys.stderr,
    )
    return EXIT_SUCCESS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="enexmatch",
        description="Match exiting subjects to enrolled entries using "
        "clothing color, height, body build, and skin complexion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("generate", help="write a synthetic dataset", formatter_class=fmt)
    p.add_argument("--subjects", type=int, required=True, help="number of subjects")
    p.add_argument("--samples", type=int, default=30, help="gallery samples per subject")
    p.add_argument(
        "--metric-samples",
        type=int,
        default=5,
        help="gallery samples per subject that carry box metrics and a mask",
    )
    p.add_argument("--probes", type=int, default=1, help="probe images per subject")
    p.add_argument(
        "--clothing-change",
        type=float,
        default=0.0,
        help="probability a probe wears new clothing colors",
    )
    p.add_argument(
        "--back-view",
        type=float,
        default=0.0,
        help="probability a probe faces away from the camera",
    )
    p.add_argument("--pixel-noise", type=float, default=0.0, help="per-pixel noise sigma")
    p.add_argument("--height-noise", type=float, default=0.0, help="box height noise sigma")
    p.add_argument("--build-noise", type=float, default=0.0, help="torso width noise sigma")
    p.add_argument("--chroma-noise", type=float, default=0.0, help="per-frame chroma jitter sigma")
    p.add_argument("--cameras", type=int, default=1, choices=(1, 2), help="cameras per observation")
    p.add_argument("--image-height", type=int, default=128, help="rendered frame height")
    p.add_argument("--image-width", type=int, default=64, help="rendered frame width")
    p.add_argument("--entrance-ref", type=int, default=200, help="entrance reference height, pixels")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser(
        "enroll", help="extract gallery features into a snapshot", formatter_class=fmt
    )
    p.add_argument("--manifest", required=True, help="dataset manifest CSV")
    p.add_argument(
        "--snapshot",
        default=os.environ.get(SNAPSHOT_ENV),
        help=f"snapshot file (default: ${SNAPSHOT_ENV})",
    )
    p.add_argument(
        "--epsilon",
        type=float,
        default=None,
        help="ridge added to the within-class scatter (default: scale-aware)",
    )
    p.add_argument(
        "--threshold",
        type=float,
        default=0.5,
        help="profile fraction a column needs to count toward body width",
    )
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("match", help="rank enrolled subjects for probes", formatter_class=fmt)
    p.add_argument(
        "--snapshot",
        default=os.environ.get(SNAPSHOT_ENV),
        help=f"snapshot file (default: ${SNAPSHOT_ENV})",
    )
    p.add_argument("--manifest", default=None, help="manifest whose probe rows are matched")
    p.add_argument("--image", default=None, help="single probe image (P6)")
    p.add_argument("--mask", default=None, help="silhouette mask for the probe (P5)")
    p.add_argument("--bbox-height", type=int, default=None, help="probe box height, pixels")
    p.add_argument("--bbox-width", type=int, default=None, help="probe box width, pixels")
    p.add_argument("--entrance-ref", type=int, default=None, help="entrance reference height")
    p.add_argument("--camera", default="c1", help="camera id for the single probe")
    p.add_argument("--view", default="unknown", help="probe view (front/back/lateral/oblique/unknown)")
    p.add_argument("--top", type=int, default=3, help="candidates in the summary line")
    p.add_argument(
        "--threshold",
        type=float,
        default=0.5,
        help="profile fraction a column needs to count toward body width",
    )
    p.set_defaults(func=cmd_match)

    p = sub.add_parser(
        "evaluate", help="closed-set protocol with a matching-rate table", formatter_class=fmt
    )
    p.add_argument("--manifest", required=True, help="dataset manifest CSV")
    p.add_argument(
        "--epsilon",
        type=float,
        default=None,
        help="ridge added to the within-class scatter (default: scale-aware)",
    )
    p.add_argument(
        "--threshold",
        type=float,
        default=0.5,
        help="profile fraction a column needs to count toward body width",
    )
    p.add_argument("--ranks", default="1,5,10", help="comma-separated ranks to tabulate")
    p.add_argument(
        "--features",
        default=None,
        help="comma-separated feature subset (default: all four)",
    )
    p.add_argument("--cmc-csv", default=None, help="also write the full curve to this CSV")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return EXIT_SUCCESS
        return code if isinstance(code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except (EnexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
