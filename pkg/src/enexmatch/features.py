"""Soft-biometric feature extraction from single observations.

Four traits are computed per observation: clothing chroma histograms,
relative height, body-build ratio, and skin complexion. Each trait can be
independently unavailable (no silhouette, no box metrics, no skin pixels),
and downstream fitting and matching treat that as a first-class state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import FeatureUnavailableError
from .imaging import (
    BodyRegions,
    Image,
    SilhouetteMask,
    YCbCrImage,
    decompose_regions,
    normalize_size,
    rgb_to_ycbcr,
)

# Canonical trait order, used for report fields and fusion layout.
FEATURE_IDS = ("clothing", "height", "build", "complexion")

VIEWS = frozenset({"front", "back", "lateral", "oblique", "unknown"})

# Chroma box for skin detection, inclusive bounds on Cb and Cr.
SKIN_CB_RANGE = (77, 127)
SKIN_CR_RANGE = (133, 173)

HISTOGRAM_BINS = 24


@dataclass(frozen=True)
class FeatureConfig:
    """Extraction tunables shared across a dataset."""

    target_height: int = 128
    target_width: int = 64
    bins: int = HISTOGRAM_BINS
    build_threshold: float = 0.5
    skin_cb: tuple[int, int] = SKIN_CB_RANGE
    skin_cr: tuple[int, int] = SKIN_CR_RANGE

    def __post_init__(self) -> None:
        if not 0.0 < self.build_threshold < 1.0:
            raise ValueError("build_threshold must lie in (0, 1)")
        if self.bins < 1:
            raise ValueError("bins must be positive")


@dataclass(frozen=True)
class SubjectSample:
    """One observation of a subject from one camera.

    The mask and the box metrics come from the entrance crossing and may
    be absent; the color image is always present. ``entrance_ref_height``
    is the pixel height of the doorway used to normalize subject height.
    """

    image: Image
    mask: SilhouetteMask | None = None
    bbox_height: int | None = None
    bbox_width: int | None = None
    entrance_ref_height: int | None = None
    camera_id: str = "c1"
    view: str = "unknown"

    def __post_init__(self) -> None:
        if self.view not in VIEWS:
            raise ValueError(f"unknown view {self.view!r}")
        if self.mask is not None:
            if (self.mask.height, self.mask.width) != (
                self.image.height,
                self.image.width,
            ):
                raise ValueError("mask dimensions must match the image")
        for name in ("bbox_height", "bbox_width", "entrance_ref_height"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"{name} must be at least 1")
        if (
            self.bbox_height is not None
            and self.entrance_ref_height is not None
            and self.bbox_height > self.entrance_ref_height
        ):
            raise ValueError("bbox_height cannot exceed entrance_ref_height")


@dataclass(frozen=True)
class ClothingHistogram:
    """Concatenated Cb/Cr histograms of the torso and leg bands.

    One camera contributes four blocks of ``bins`` values each, ordered
    torso-Cb, torso-Cr, legs-Cb, legs-Cr; paired cameras concatenate
    their blocks in camera order. Every block is L1-normalized, or all
    zero when its band held no pixels.
    """

    values: np.ndarray
    bins: int = HISTOGRAM_BINS

    def __post_init__(self) -> None:
        v = self.values
        if not isinstance(v, np.ndarray) or v.ndim != 1:
            raise ValueError("values must be a 1-D array")
        block = 4 * self.bins
        if v.size == 0 or v.size % block != 0:
            raise ValueError(f"length must be a positive multiple of {block}")
        if np.any(v < 0):
            raise ValueError("histogram values cannot be negative")
        sums = v.reshape(-1, self.bins).sum(axis=1)
        if not np.all((np.abs(sums - 1.0) < 1e-9) | (sums == 0.0)):
            raise ValueError("each block must sum to 1 or be all zero")


@dataclass(frozen=True)
class HeightFeature:
    """Subject height relative to the entrance frame, in (0, 1]."""

    value: float

    def __post_init__(self) -> None:
        if not 0.0 < self.value <= 1.0:
            raise ValueError("relative height must lie in (0, 1]")


@dataclass(frozen=True)
class BuildFeature:
    """Peak height-to-effective-width ratio of the silhouette."""

    value: float

    def __post_init__(self) -> None:
        if not self.value > 0.0:
            raise ValueError("build ratio must be positive")


@dataclass(frozen=True)
class ComplexionFeature:
    """Mean skin chroma of the head band.

    ``means`` holds (Cb, Cr) per camera, concatenated in camera order.
    When no skin pixels were found, ``valid`` is false and the means are
    NaN placeholders that must not be read.
    """

    means: tuple[float, ...]
    valid: bool

    def __post_init__(self) -> None:
        if len(self.means) < 2 or len(self.means) % 2 != 0:
            raise ValueError("means must hold (Cb, Cr) pairs")
        if self.valid and not all(0.0 <= m <= 255.0 for m in self.means):
            raise ValueError("valid chroma means must lie in [0, 255]")

    @property
    def mean_cb(self) -> float:
        return self.means[0]

    @property
    def mean_cr(self) -> float:
        return self.means[1]


@dataclass(frozen=True)
class FeatureBundle:
    """All traits extracted from one observation, any of which may be absent."""

    clothing: ClothingHistogram | None = None
    height: HeightFeature | None = None
    build: BuildFeature | None = None
    complexion: ComplexionFeature | None = None
    label: str | None = None

    def feature_vector(self, feature_id: str) -> np.ndarray | None:
        """Numeric vector for one trait, or None when unavailable."""
        if feature_id == "clothing":
            return None if self.clothing is None else self.clothing.values
        if feature_id == "height":
            if self.height is None:
                return None
            return np.array([self.height.value], dtype=np.float64)
        if feature_id == "build":
            if self.build is None:
                return None
            return np.array([self.build.value], dtype=np.float64)
        if feature_id == "complexion":
            if self.complexion is None or not self.complexion.valid:
                return None
            return np.asarray(self.complexion.means, dtype=np.float64)
        raise KeyError(feature_id)

    def available_features(self) -> tuple[str, ...]:
        return tuple(
            fid for fid in FEATURE_IDS if self.feature_vector(fid) is not None
        )

    def restrict(self, features: Sequence[str]) -> "FeatureBundle":
        """Copy with every trait outside ``features`` dropped."""
        keep = set(features)
        unknown = keep - set(FEATURE_IDS)
        if unknown:
            raise KeyError(f"unknown features: {sorted(unknown)}")
        return FeatureBundle(
            clothing=self.clothing if "clothing" in keep else None,
            height=self.height if "height" in keep else None,
            build=self.build if "build" in keep else None,
            complexion=self.complexion if "complexion" in keep else None,
            label=self.label,
        )


def _chroma_histogram(region: YCbCrImage, channel: int, bins: int) -> np.ndarray:
    values = region.planes[..., channel].ravel()
    if values.size == 0:
        return np.zeros(bins, dtype=np.float64)
    idx = values.astype(np.int64) * bins // 256
    counts = np.bincount(idx, minlength=bins).astype(np.float64)
    return counts / values.size


def clothing_histogram(regions: BodyRegions, bins: int = HISTOGRAM_BINS) -> ClothingHistogram:
    """Chroma histograms over the torso and leg bands of one frame."""
    blocks = [
        _chroma_histogram(regions.torso, 1, bins),
        _chroma_histogram(regions.torso, 2, bins),
        _chroma_histogram(regions.legs, 1, bins),
        _chroma_histogram(regions.legs, 2, bins),
    ]
    return ClothingHistogram(np.concatenate(blocks), bins=bins)


def extract_height(sample: SubjectSample) -> HeightFeature:
    """Subject height as a fraction of the entrance reference height."""
    if sample.bbox_height is None or sample.entrance_ref_height is None:
        raise FeatureUnavailableError("height needs box metrics from the entrance")
    return HeightFeature(sample.bbox_height / sample.entrance_ref_height)


def vertical_projection(mask: SilhouetteMask) -> np.ndarray:
    """Foreground pixel count per column."""
    return mask.bits.sum(axis=0, dtype=np.int64)


def build_ratio(
    profiles: Sequence[np.ndarray], threshold: float = 0.5
) -> BuildFeature:
    """Peak height-to-effective-width ratio over the given column profiles.

    The effective width of a profile counts only columns reaching at
    least ``threshold`` times the profile peak, which suppresses swinging
    arms and other thin protrusions.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    if len(profiles) == 0:
        raise FeatureUnavailableError("no projection profiles given")
    best = 0.0
    for profile in profiles:
        counts = np.asarray(profile, dtype=np.int64)
        if counts.ndim != 1:
            raise ValueError("each profile must be a 1-D count array")
        peak = int(counts.max()) if counts.size else 0
        if peak <= 0:
            raise FeatureUnavailableError("projection profile is all zero")
        effective = int(np.count_nonzero(counts >= threshold * peak))
        best = max(best, peak / effective)
    return BuildFeature(best)


def skin_mask(
    region: YCbCrImage,
    cb_range: tuple[int, int] = SKIN_CB_RANGE,
    cr_range: tuple[int, int] = SKIN_CR_RANGE,
) -> SilhouetteMask:
    """Pixels whose chroma falls in the skin box (bounds inclusive)."""
    cb = region.planes[..., 1]
    cr = region.planes[..., 2]
    bits = (
        (cb >= cb_range[0])
        & (cb <= cb_range[1])
        & (cr >= cr_range[0])
        & (cr <= cr_range[1])
    )
    return SilhouetteMask(bits)


def complexion(
    region: YCbCrImage,
    cb_range: tuple[int, int] = SKIN_CB_RANGE,
    cr_range: tuple[int, int] = SKIN_CR_RANGE,
) -> ComplexionFeature:
    """Mean chroma over skin pixels of the head band.

    Returns an invalid feature when the band shows no skin at all, which
    is the normal outcome for a subject walking away from the camera.
    """
    skin = skin_mask(region, cb_range, cr_range)
    if not skin.bits.any():
        return ComplexionFeature((math.nan, math.nan), valid=False)
    cb = float(region.planes[..., 1][skin.bits].mean())
    cr = float(region.planes[..., 2][skin.bits].mean())
    return ComplexionFeature((cb, cr), valid=True)


def extract_bundle(
    sample: SubjectSample,
    config: FeatureConfig = FeatureConfig(),
    label: str | None = None,
) -> FeatureBundle:
    """Run the full extraction chain on one observation.

    Clothing and complexion come from the size-normalized frame; height
    and build come from the entrance box metrics and silhouette, and are
    left out when those are missing.
    """
    normalized = normalize_size(sample.image, config.target_height, config.target_width)
    regions = decompose_regions(rgb_to_ycbcr(normalized))
    clothing = clothing_histogram(regions, bins=config.bins)
    skin = complexion(regions.head, config.skin_cb, config.skin_cr)

    height: HeightFeature | None
    try:
        height = extract_height(sample)
    except FeatureUnavailableError:
        height = None

    build: BuildFeature | None = None
    if sample.mask is not None:
        try:
            build = build_ratio(
                [vertical_projection(sample.mask)], config.build_threshold
            )
        except FeatureUnavailableError:
            build = None

    return FeatureBundle(
        clothing=clothing,
        height=height,
        build=build,
        complexion=skin,
        label=label,
    )


def fuse_bundles(
    per_camera: Mapping[str, FeatureBundle], label: str | None = None
) -> FeatureBundle:
    """Merge one observation seen by paired cameras into a single bundle.

    Clothing histograms and complexion chroma are concatenated in sorted
    camera order; the fused complexion is valid only when every camera
    saw skin. Height and build are taken from the first camera (in that
    same order) that measured them, which is the entrance-facing one in
    datasets produced here.
    """
    if not per_camera:
        raise ValueError("need at least one camera")
    order = sorted(per_camera)
    bundles = [per_camera[cid] for cid in order]
    if len(bundles) == 1:
        only = bundles[0]
        if label is not None and only.label != label:
            return FeatureBundle(
                clothing=only.clothing,
                height=only.height,
                build=only.build,
                complexion=only.complexion,
                label=label,
            )
        return only

    if any(b.clothing is None for b in bundles):
        clothing = None
    else:
        clothing = ClothingHistogram(
            np.concatenate([b.clothing.values for b in bundles]),
            bins=bundles[0].clothing.bins,
        )

    if any(b.complexion is None or not b.complexion.valid for b in bundles):
        skin = ComplexionFeature((math.nan, math.nan), valid=False)
    else:
        means: tuple[float, ...] = ()
        for b in bundles:
            means = means + b.complexion.means
        skin = ComplexionFeature(means, valid=True)

    height = next((b.height for b in bundles if b.height is not None), None)
    build = next((b.build for b in bundles if b.build is not None), None)
    return FeatureBundle(
        clothing=clothing,
        height=height,
        build=build,
        complexion=skin,
        label=label,
    )
