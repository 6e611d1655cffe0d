"""Entry-exit subject matching from visual soft biometrics.

The pipeline enrolls subjects seen entering a monitored area, learns
per-feature separation transforms, and ranks the enrolled identities
for every subject seen exiting. Four appearance traits drive the
ranking: clothing chroma histograms, relative height, body-build
ratio, and skin complexion.
"""

from .errors import (
    DegenerateImageError,
    DegenerateProblemError,
    DimensionMismatchError,
    DimensionOverflowError,
    DuplicateLabelError,
    EmptyGalleryError,
    EnexError,
    FeatureUnavailableError,
    ImageFormatError,
    ImagePayloadError,
    ManifestError,
    NoUsableFeatureError,
    NonFiniteInputError,
    SnapshotChecksumError,
    SnapshotFormatError,
    SnapshotTruncatedError,
    UnfittedGalleryError,
    UnknownLabelError,
)
from .imaging import (
    BodyRegions,
    Image,
    SilhouetteMask,
    YCbCrImage,
    band_boundaries,
    decompose_regions,
    load_image,
    load_mask,
    normalize_size,
    rgb_to_ycbcr,
    save_image,
    save_mask,
)
from .features import (
    FEATURE_IDS,
    BuildFeature,
    ClothingHistogram,
    ComplexionFeature,
    FeatureBundle,
    FeatureConfig,
    HeightFeature,
    SubjectSample,
    build_ratio,
    clothing_histogram,
    complexion,
    extract_bundle,
    extract_height,
    fuse_bundles,
    skin_mask,
    vertical_projection,
)
from .discriminant import (
    ClassSamples,
    FeatureTransform,
    ScatterStatistics,
    between_scatter,
    default_ridge,
    fit_transform,
    project,
    scatter_statistics,
    within_scatter,
)
from .matching import (
    MatchReport,
    PerFeatureRanking,
    collective_confidence,
    confidence,
    match_probe,
    parse_match_report,
    rank_feature,
)
from .gallery import Gallery
from .evaluation import (
    CMCCurve,
    DatasetManifest,
    EvaluationResult,
    ManifestEntry,
    SyntheticConfig,
    cmc_csv,
    emit_report,
    evaluate,
    generate_synthetic,
    ingest,
    load_sample,
    parse_report,
    probe_bundles,
    read_manifest,
    write_manifest,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "EnexError",
    "ImageFormatError",
    "ImagePayloadError",
    "DimensionOverflowError",
    "DegenerateImageError",
    "FeatureUnavailableError",
    "DimensionMismatchError",
    "NonFiniteInputError",
    "DegenerateProblemError",
    "EmptyGalleryError",
    "DuplicateLabelError",
    "UnknownLabelError",
    "UnfittedGalleryError",
    "NoUsableFeatureError",
    "SnapshotFormatError",
    "SnapshotChecksumError",
    "SnapshotTruncatedError",
    "ManifestError",
    # imaging
    "Image",
    "YCbCrImage",
    "SilhouetteMask",
    "BodyRegions",
    "load_image",
    "save_image",
    "load_mask",
    "save_mask",
    "normalize_size",
    "rgb_to_ycbcr",
    "band_boundaries",
    "decompose_regions",
    # features
    "FEATURE_IDS",
    "FeatureConfig",
    "SubjectSample",
    "ClothingHistogram",
    "HeightFeature",
    "BuildFeature",
    "ComplexionFeature",
    "FeatureBundle",
    "clothing_histogram",
    "extract_height",
    "vertical_projection",
    "build_ratio",
    "skin_mask",
    "complexion",
    "extract_bundle",
    "fuse_bundles",
    # discriminant
    "ClassSamples",
    "ScatterStatistics",
    "FeatureTransform",
    "within_scatter",
    "between_scatter",
    "scatter_statistics",
    "default_ridge",
    "fit_transform",
    "project",
    # matching
    "PerFeatureRanking",
    "MatchReport",
    "rank_feature",
    "confidence",
    "collective_confidence",
    "match_probe",
    "parse_match_report",
    # gallery
    "Gallery",
    # evaluation
    "ManifestEntry",
    "DatasetManifest",
    "read_manifest",
    "write_manifest",
    "ingest",
    "load_sample",
    "probe_bundles",
    "CMCCurve",
    "EvaluationResult",
    "evaluate",
    "emit_report",
    "parse_report",
    "cmc_csv",
    "SyntheticConfig",
    "generate_synthetic",
]
