"""Dataset ingestion, synthetic data generation, and closed-set scoring.

A dataset is a CSV manifest plus the raster files it references. Every
probe label must also be enrolled (closed set), so the cumulative match
curve always reaches 1.0 at rank n.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ManifestError, UnknownLabelError
from .features import (
    FeatureBundle,
    FeatureConfig,
    SubjectSample,
    VIEWS,
    extract_bundle,
    fuse_bundles,
)
from .gallery import Gallery
from .imaging import (
    Image,
    SilhouetteMask,
    band_boundaries,
    load_image,
    load_mask,
    save_image,
    save_mask,
)
from .matching import match_probe

MANIFEST_NAME = "manifest.csv"
MANIFEST_COLUMNS = (
    "label",
    "role",
    "image",
    "mask",
    "bbox_height",
    "bbox_width",
    "entrance_ref_height",
    "camera_id",
    "view",
)
ROLES = ("gallery", "probe")


@dataclass(frozen=True)
class ManifestEntry:
    """One camera's row for one observation."""

    label: str
    role: str
    image: str
    mask: str | None = None
    bbox_height: int | None = None
    bbox_width: int | None = None
    entrance_ref_height: int | None = None
    camera_id: str = "c1"
    view: str = "front"


@dataclass(frozen=True)
class DatasetManifest:
    """Parsed manifest; file paths are relative to ``root``."""

    root: Path
    entries: tuple[ManifestEntry, ...]


def _parse_optional_int(raw: str, column: str, line: int) -> int | None:
    if raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ManifestError(f"line {line}: {column} must be an integer, got {raw!r}")


def read_manifest(path: str | Path) -> DatasetManifest:
    """Parse and validate a dataset manifest CSV."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc}") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows or tuple(rows[0]) != MANIFEST_COLUMNS:
        raise ManifestError(
            f"{path}: first line must be {','.join(MANIFEST_COLUMNS)}"
        )
    entries = []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(MANIFEST_COLUMNS):
            raise ManifestError(f"{path} line {line}: expected {len(MANIFEST_COLUMNS)} fields")
        record = dict(zip(MANIFEST_COLUMNS, row))
        if not record["label"]:
            raise ManifestError(f"{path} line {line}: empty label")
        if record["role"] not in ROLES:
            raise ManifestError(f"{path} line {line}: bad role {record['role']!r}")
        if record["view"] not in VIEWS:
            raise ManifestError(f"{path} line {line}: bad view {record['view']!r}")
        if not record["image"]:
            raise ManifestError(f"{path} line {line}: empty image path")
        entries.append(
            ManifestEntry(
                label=record["label"],
                role=record["role"],
                image=record["image"],
                mask=record["mask"] or None,
                bbox_height=_parse_optional_int(record["bbox_height"], "bbox_height", line),
                bbox_width=_parse_optional_int(record["bbox_width"], "bbox_width", line),
                entrance_ref_height=_parse_optional_int(
                    record["entrance_ref_height"], "entrance_ref_height", line
                ),
                camera_id=record["camera_id"] or "c1",
                view=record["view"],
            )
        )
    return DatasetManifest(root=path.parent, entries=tuple(entries))


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for e in manifest.entries:
            writer.writerow(
                [
                    e.label,
                    e.role,
                    e.image,
                    e.mask or "",
                    "" if e.bbox_height is None else e.bbox_height,
                    "" if e.bbox_width is None else e.bbox_width,
                    "" if e.entrance_ref_height is None else e.entrance_ref_height,
                    e.camera_id,
                    e.view,
                ]
            )


def load_sample(entry: ManifestEntry, root: str | Path) -> SubjectSample:
    """Materialize one manifest row into an observation."""
    root = Path(root)
    try:
        image = load_image(root / entry.image)
        mask = load_mask(root / entry.mask) if entry.mask else None
    except OSError as exc:
        raise ManifestError(f"cannot read {entry.image!r}: {exc}") from exc
    return SubjectSample(
        image=image,
        mask=mask,
        bbox_height=entry.bbox_height,
        bbox_width=entry.bbox_width,
        entrance_ref_height=entry.entrance_ref_height,
        camera_id=entry.camera_id,
        view=entry.view,
    )


def _observations(
    manifest: DatasetManifest, role: str, config: FeatureConfig
) -> list[FeatureBundle]:
    """Extract one fused bundle per observation of the given role.

    Rows are grouped by label and camera; cameras pair up row-by-row in
    file order, so every camera must contribute the same number of rows
    for a label.
    """
    grouped: dict[str, dict[str, list[ManifestEntry]]] = {}
    order: list[str] = []
    for entry in manifest.entries:
        if entry.role != role:
            continue
        if entry.label not in grouped:
            grouped[entry.label] = {}
            order.append(entry.label)
        grouped[entry.label].setdefault(entry.camera_id, []).append(entry)
    bundles = []
    for label in order:
        per_camera = grouped[label]
        counts = {len(v) for v in per_camera.values()}
        if len(counts) != 1:
            raise ManifestError(
                f"label {label!r} ({role}): cameras disagree on observation count"
            )
        count = counts.pop()
        cameras = sorted(per_camera)
        for i in range(count):
            extracted = {
                cid: extract_bundle(load_sample(per_camera[cid][i], manifest.root), config)
                for cid in cameras
            }
            bundles.append(fuse_bundles(extracted, label=label))
    return bundles


def probe_bundles(
    manifest: DatasetManifest | str | Path,
    config: FeatureConfig = FeatureConfig(),
) -> list[FeatureBundle]:
    """Extract only the probe-role observations of a dataset."""
    if not isinstance(manifest, DatasetManifest):
        manifest = read_manifest(manifest)
    return _observations(manifest, "probe", config)


def ingest(
    manifest: DatasetManifest | str | Path,
    config: FeatureConfig = FeatureConfig(),
) -> tuple[dict[str, list[FeatureBundle]], list[FeatureBundle]]:
    """Extract gallery and probe bundles from a dataset.

    Returns the gallery as label -> bundles in first-seen order and the
    probe bundles carrying their true label. Probe labels missing from
    the gallery violate the closed-set protocol and fail here.
    """
    if not isinstance(manifest, DatasetManifest):
        manifest = read_manifest(manifest)
    gallery_map: dict[str, list[FeatureBundle]] = {}
    for bundle in _observations(manifest, "gallery", config):
        gallery_map.setdefault(bundle.label, []).append(bundle)
    probes = _observations(manifest, "probe", config)
    missing = sorted({p.label for p in probes} - set(gallery_map))
    if missing:
        raise ManifestError(f"probe labels missing from the gallery: {missing}")
    return gallery_map, probes


@dataclass(frozen=True)
class CMCCurve:
    """Cumulative match accuracy at every rank from 1 to n."""

    accuracies: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.accuracies) == 0:
            raise ValueError("curve cannot be empty")
        previous = 0.0
        for a in self.accuracies:
            if not 0.0 <= a <= 1.0:
                raise ValueError("accuracies must lie in [0, 1]")
            if a < previous:
                raise ValueError("accuracies must be non-decreasing")
            previous = a
        if self.accuracies[-1] != 1.0:
            raise ValueError("closed-set curve must end at 1.0")

    def accuracy(self, k: int) -> float:
        if k < 1:
            raise ValueError("rank must be at least 1")
        return self.accuracies[min(k, len(self.accuracies)) - 1]


@dataclass(frozen=True)
class EvaluationResult:
    cmc: CMCCurve
    rank_accuracy: dict[int, float]
    n: int
    probe_count: int


def evaluate(
    gallery_map: Mapping[str, Sequence[FeatureBundle]],
    probes: Sequence[FeatureBundle],
    epsilon: float | None = None,
    ks: Sequence[int] = (1, 5, 10),
    features: Sequence[str] | None = None,
) -> EvaluationResult:
    """Enroll, fit, match every probe, and accumulate the match curve.

    ``features`` restricts both sides to a subset of traits, which is how
    single-trait ablations are run.
    """
    if len(probes) == 0:
        raise ValueError("no probes to evaluate")
    gallery = Gallery()
    for label, bundles in gallery_map.items():
        if features is not None:
            bundles = [b.restrict(features) for b in bundles]
        gallery = gallery.enroll(label, bundles)
    gallery = gallery.fit(epsilon)
    n = gallery.n
    hits = np.zeros(n, dtype=np.int64)
    for probe in probes:
        if probe.label is None or probe.label not in gallery_map:
            raise UnknownLabelError(f"probe label {probe.label!r} is not enrolled")
        if features is not None:
            probe = probe.restrict(features)
        report = match_probe(probe, gallery)
        rank = report.ranking.index(probe.label) + 1
        hits[rank - 1] += 1
    cumulative = np.cumsum(hits) / len(probes)
    curve = CMCCurve(tuple(float(a) for a in cumulative))
    table = {k: curve.accuracy(k) for k in ks}
    return EvaluationResult(
        cmc=curve, rank_accuracy=table, n=n, probe_count=len(probes)
    )


def emit_report(
    rows: Sequence[tuple[str, Mapping[int, float]]],
    ks: Sequence[int] = (1, 5, 10),
) -> str:
    """Fixed-width matching-rate table, three decimals per cell."""
    if not rows:
        raise ValueError("no rows to report")
    name_width = max(20, max(len(name) for name, _ in rows) + 2)
    lines = [
        "Rank".ljust(name_width) + "  ".join(f"{k:>5d}" for k in ks)
    ]
    for name, accuracies in rows:
        cells = "  ".join(f"{accuracies[k]:.3f}" for k in ks)
        lines.append(name.ljust(name_width) + cells)
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> list[tuple[str, dict[int, float]]]:
    """Invert emit_report, recovering names and the printed accuracies."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines or not lines[0].startswith("Rank"):
        raise ValueError("bad report header")
    ks = [int(tok) for tok in lines[0].split()[1:]]
    rows = []
    for line in lines[1:]:
        tokens = line.split()
        if len(tokens) < len(ks) + 1:
            raise ValueError(f"bad report row: {line!r}")
        values = tokens[-len(ks):]
        name = " ".join(tokens[: -len(ks)])
        rows.append((name, {k: float(v) for k, v in zip(ks, values)}))
    return rows


def cmc_csv(curve: CMCCurve) -> str:
    """Curve as a two-column CSV for external plotting."""
    lines = ["k,accuracy"]
    for k, accuracy in enumerate(curve.accuracies, start=1):
        lines.append(f"{k},{accuracy:.6f}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SyntheticConfig:
    """Parameters of the synthetic entry-exit dataset generator.

    Each subject gets stable latent attributes (clothing chroma, skin
    chroma, relative height, torso width); observations are flat-shaded
    band renderings of those attributes plus the configured noise.
    Probes may redraw their clothing colors (simulating a change of
    clothes between entry and exit) and may face away from the camera,
    which hides all skin pixels.
    """

    subjects: int
    samples_per_subject: int = 30
    metric_samples: int = 5
    probes_per_subject: int = 1
    clothing_change_prob: float = 0.0
    back_view_prob: float = 0.0
    pixel_noise: float = 0.0
    height_noise: float = 0.0
    build_noise: float = 0.0
    chroma_noise: float = 0.0
    cameras: int = 1
    image_height: int = 128
    image_width: int = 64
    entrance_ref_height: int = 200
    seed: int = 0

    def __post_init__(self) -> None:
        if self.subjects < 2:
            raise ValueError("need at least two subjects")
        if self.samples_per_subject < 1 or self.probes_per_subject < 1:
            raise ValueError("need at least one sample and one probe per subject")
        if not 0 <= self.metric_samples <= self.samples_per_subject:
            raise ValueError("metric_samples must not exceed samples_per_subject")
        for name in ("clothing_change_prob", "back_view_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("pixel_noise", "height_noise", "build_noise", "chroma_noise"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} cannot be negative")
        if self.cameras not in (1, 2):
            raise ValueError("cameras must be 1 or 2")
        if self.image_height < 12 or self.image_width < 16:
            raise ValueError("images must be at least 12x16")
        if self.entrance_ref_height < 2:
            raise ValueError("entrance_ref_height must be at least 2")


# Chroma sampling boxes. Clothing stays inside the RGB gamut at mid
# luma; skin stays inside the detector's box with margin for jitter,
# and the away-facing head color sits far outside it.
_CLOTHING_CB = (70.0, 186.0)
_CLOTHING_CR = (70.0, 186.0)
_SKIN_CB = (87.0, 117.0)
_SKIN_CR = (143.0, 163.0)
_SKIN_CB_CLIP = (80.0, 124.0)
_SKIN_CR_CLIP = (136.0, 170.0)
_BACK_HEAD_CHROMA = (110.0, 100.0)
_HEAD_LUMA = 150.0
_CLOTHING_LUMA = 128.0
_BACK_HEAD_LUMA = 60.0
_ARM_HEIGHT_FRACTION = 0.3
_ARM_COLUMNS = 2


@dataclass(frozen=True)
class _SubjectLatents:
    torso_chroma: tuple[float, float]
    leg_chroma: tuple[float, float]
    skin_chroma: tuple[float, float]
    height_ratio: float
    torso_fraction: float


def _ycbcr_to_rgb(y: float, cb: float, cr: float) -> np.ndarray:
    return np.array(
        [
            y + 1.402 * (cr - 128.0),
            y - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0),
            y + 1.772 * (cb - 128.0),
        ],
        dtype=np.float64,
    )


def _jitter_chroma(
    rng: np.random.Generator,
    chroma: tuple[float, float],
    scale: float,
    cb_clip: tuple[float, float],
    cr_clip: tuple[float, float],
) -> tuple[float, float]:
    if scale <= 0.0:
        return chroma
    cb, cr = chroma + rng.normal(0.0, scale, 2)
    return (
        float(np.clip(cb, *cb_clip)),
        float(np.clip(cr, *cr_clip)),
    )


def _render_frame(
    rng: np.random.Generator,
    config: SyntheticConfig,
    head: tuple[float, float, float],
    torso: tuple[float, float],
    legs: tuple[float, float],
) -> Image:
    h, w = config.image_height, config.image_width
    head_end, torso_end = band_boundaries(h)
    frame = np.empty((h, w, 3), dtype=np.float64)
    frame[:head_end] = _ycbcr_to_rgb(*head)
    frame[head_end:torso_end] = _ycbcr_to_rgb(_CLOTHING_LUMA, *torso)
    frame[torso_end:] = _ycbcr_to_rgb(_CLOTHING_LUMA, *legs)
    if config.pixel_noise > 0.0:
        frame = frame + rng.normal(0.0, config.pixel_noise, frame.shape)
    return Image(np.clip(np.floor(frame + 0.5), 0, 255).astype(np.uint8))


def _render_mask(config: SyntheticConfig, torso_columns: int) -> SilhouetteMask:
    h, w = config.image_height, config.image_width
    bits = np.zeros((h, w), dtype=np.bool_)
    start = (w - torso_columns) // 2
    bits[:, start : start + torso_columns] = True
    arm_height = max(1, round(_ARM_HEIGHT_FRACTION * h))
    arm_top = h // 6
    arm_rows = slice(arm_top, min(arm_top + arm_height, h))
    bits[arm_rows, max(0, start - _ARM_COLUMNS) : start] = True
    bits[arm_rows, start + torso_columns : start + torso_columns + _ARM_COLUMNS] = True
    return SilhouetteMask(bits)


def _torso_columns(rng: np.random.Generator, config: SyntheticConfig, fraction: float) -> int:
    width = fraction * config.image_width
    if config.build_noise > 0.0:
        width += rng.normal(0.0, config.build_noise)
    return int(np.clip(round(width), 3, config.image_width - 2 * _ARM_COLUMNS))


def _bbox_height(rng: np.random.Generator, config: SyntheticConfig, ratio: float) -> int:
    height = ratio * config.entrance_ref_height
    if config.height_noise > 0.0:
        height += rng.normal(0.0, config.height_noise)
    return int(np.clip(round(height), 1, config.entrance_ref_height))


def generate_synthetic(config: SyntheticConfig, out_dir: str | Path) -> DatasetManifest:
    """Materialize a synthetic dataset and its manifest under ``out_dir``.

    Output is a pure function of the configuration: the same settings
    always produce byte-identical files.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)

    latents = []
    for _ in range(config.subjects):
        latents.append(
            _SubjectLatents(
                torso_chroma=tuple(rng.uniform(*_CLOTHING_CB, 2)),
                leg_chroma=tuple(rng.uniform(*_CLOTHING_CB, 2)),
                skin_chroma=(
                    float(rng.uniform(*_SKIN_CB)),
                    float(rng.uniform(*_SKIN_CR)),
                ),
                height_ratio=float(rng.uniform(0.55, 0.95)),
                torso_fraction=float(rng.uniform(0.35, 0.85)),
            )
        )

    entries: list[ManifestEntry] = []
    camera_ids = [f"c{i + 1}" for i in range(config.cameras)]

    def render_observation(
        subject: int,
        role: str,
        index: int,
        torso: tuple[float, float],
        legs: tuple[float, float],
        back_view: bool,
        with_metrics: bool,
    ) -> None:
        label = f"s{subject + 1:03d}"
        lat = latents[subject]
        for camera_index, camera_id in enumerate(camera_ids):
            if back_view:
                head = (_BACK_HEAD_LUMA, *_BACK_HEAD_CHROMA)
            else:
                skin = _jitter_chroma(
                    rng, lat.skin_chroma, config.chroma_noise, _SKIN_CB_CLIP, _SKIN_CR_CLIP
                )
                head = (_HEAD_LUMA, *skin)
            torso_c = _jitter_chroma(
                rng, torso, config.chroma_noise, _CLOTHING_CB, _CLOTHING_CR
            )
            legs_c = _jitter_chroma(
                rng, legs, config.chroma_noise, _CLOTHING_CB, _CLOTHING_CR
            )
            frame = _render_frame(rng, config, head, torso_c, legs_c)
            stem = f"{label}_{role[0]}{index:03d}_{camera_id}"
            image_path = f"images/{stem}.ppm"
            save_image(frame, out / image_path)
            mask_path = None
            bbox_height = bbox_width = ref_height = None
            # Entrance metrics come from the first camera only.
            if with_metrics and camera_index == 0:
                columns = _torso_columns(rng, config, lat.torso_fraction)
                save_mask(_render_mask(config, columns), out / f"masks/{stem}.pgm")
                mask_path = f"masks/{stem}.pgm"
                bbox_height = _bbox_height(rng, config, lat.height_ratio)
                bbox_width = columns
                ref_height = config.entrance_ref_height
            entries.append(
                ManifestEntry(
                    label=label,
                    role=role,
                    image=image_path,
                    mask=mask_path,
                    bbox_height=bbox_height,
                    bbox_width=bbox_width,
                    entrance_ref_height=ref_height,
                    camera_id=camera_id,
                    view="back" if back_view else "front",
                )
            )

    for subject in range(config.subjects):
        lat = latents[subject]
        for index in range(config.samples_per_subject):
            render_observation(
                subject,
                "gallery",
                index,
                lat.torso_chroma,
                lat.leg_chroma,
                back_view=False,
                with_metrics=index < config.metric_samples,
            )

    for subject in range(config.subjects):
        lat = latents[subject]
        for index in range(config.probes_per_subject):
            torso, legs = lat.torso_chroma, lat.leg_chroma
            if rng.random() < config.clothing_change_prob:
                torso = tuple(rng.uniform(*_CLOTHING_CB, 2))
                legs = tuple(rng.uniform(*_CLOTHING_CB, 2))
            back_view = rng.random() < config.back_view_prob
            render_observation(
                subject, "probe", index, torso, legs, back_view, with_metrics=True
            )

    manifest = DatasetManifest(root=out, entries=tuple(entries))
    write_manifest(manifest, out / MANIFEST_NAME)
    return manifest
