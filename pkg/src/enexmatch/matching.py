"""Per-feature ranking and collective-confidence fusion.

Each feature ranks every enrolled class by its distance to the probe;
ranks become confidences, confidences average across the features both
sides share, and the averaged score orders the final candidate list.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyGalleryError,
    NoUsableFeatureError,
    UnfittedGalleryError,
)
from .discriminant import project
from .features import FeatureBundle

if TYPE_CHECKING:  # pragma: no cover
    from .gallery import Gallery


@dataclass(frozen=True)
class PerFeatureRanking:
    """Gallery classes ordered by one feature, closest first."""

    feature_id: str
    labels: tuple[str, ...]
    distances: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.distances):
            raise ValueError("labels and distances must align")
        if len(self.labels) == 0:
            raise ValueError("ranking cannot be empty")

    def rank_of(self, label: str) -> int:
        return self.labels.index(label) + 1

    def distance_of(self, label: str) -> float:
        return self.distances[self.labels.index(label)]


@dataclass(frozen=True, eq=False)
class MatchReport:
    """Everything the matcher concluded about one probe."""

    probe_id: str | None
    n: int
    features_used: tuple[str, ...]
    per_feature: tuple[PerFeatureRanking, ...]
    confidences: Mapping[str, Mapping[str, float]]
    collective: Mapping[str, float]
    ranking: tuple[str, ...]

    def to_records(self) -> dict:
        """Plain-data view, the same shape parse_match_report returns."""
        classes = []
        for position, label in enumerate(self.ranking, start=1):
            classes.append(
                {
                    "label": label,
                    "ranks": tuple(
                        pf.rank_of(label) for pf in self.per_feature
                    ),
                    "cf": tuple(
                        self.confidences[fid][label] for fid in self.features_used
                    ),
                    "CF": self.collective[label],
                    "rank": position,
                }
            )
        return {
            "probe_id": self.probe_id,
            "n": self.n,
            "features": self.features_used,
            "classes": classes,
        }

    def to_text(self) -> str:
        """Serialize to the line-oriented record format.

        Line 1:   probe=<id> n=<n> features=<fid>,<fid>,...
        Then one line per class in final order:
                  <label> ranks=<r>,... cf=<c>,... CF=<v> rank=<k>
        Numbers are written with repr so parsing recovers them exactly;
        a missing probe id is written as "-".
        """
        lines = [
            "probe={} n={} features={}".format(
                self.probe_id if self.probe_id else "-",
                self.n,
                ",".join(self.features_used),
            )
        ]
        for row in self.to_records()["classes"]:
            lines.append(
                "{} ranks={} cf={} CF={} rank={}".format(
                    row["label"],
                    ",".join(str(r) for r in row["ranks"]),
                    ",".join(repr(c) for c in row["cf"]),
                    repr(row["CF"]),
                    row["rank"],
                )
            )
        return "\n".join(lines) + "\n"


def parse_match_report(text: str) -> dict:
    """Parse to_text output back into its plain-data form."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("empty report")
    head = lines[0].split()
    if len(head) != 3 or not head[0].startswith("probe="):
        raise ValueError("bad report header")
    fields = {}
    for token in head:
        key, _, value = token.partition("=")
        fields[key] = value
    probe_id = None if fields["probe"] == "-" else fields["probe"]
    features = tuple(f for f in fields["features"].split(",") if f)
    classes = []
    for line in lines[1:]:
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"bad class line: {line!r}")
        label = parts[0]
        row = {}
        for token in parts[1:]:
            key, _, value = token.partition("=")
            row[key] = value
        classes.append(
            {
                "label": label,
                "ranks": tuple(int(r) for r in row["ranks"].split(",")),
                "cf": tuple(float(c) for c in row["cf"].split(",")),
                "CF": float(row["CF"]),
                "rank": int(row["rank"]),
            }
        )
    return {
        "probe_id": probe_id,
        "n": int(fields["n"]),
        "features": features,
        "classes": classes,
    }


def rank_feature(
    probe: np.ndarray,
    class_sets: Sequence[tuple[str, np.ndarray]],
    feature_id: str,
) -> PerFeatureRanking:
    """Order classes by their closest sample to the probe.

    Class distance is the minimum Euclidean distance from the probe to
    any sample of the class. Distance ties keep the earlier-enrolled
    class first; ranks are always a dense 1..n.
    """
    if len(class_sets) == 0:
        raise EmptyGalleryError("no classes to rank")
    v = np.asarray(probe, dtype=np.float64)
    distances = []
    for label, samples in class_sets:
        s = np.asarray(samples, dtype=np.float64)
        if s.ndim != 2 or s.shape[1] != v.shape[0]:
            raise DimensionMismatchError(
                f"class {label!r} samples do not match the probe dimension"
            )
        deltas = s - v
        distances.append(float(np.sqrt((deltas * deltas).sum(axis=1)).min()))
    order = sorted(range(len(class_sets)), key=lambda i: (distances[i], i))
    return PerFeatureRanking(
        feature_id=feature_id,
        labels=tuple(class_sets[i][0] for i in order),
        distances=tuple(distances[i] for i in order),
    )


def confidence(rank: int, n: int) -> float:
    """Map a dense rank among n classes to a score in (0, 1]."""
    if n < 1:
        raise ValueError("n must be positive")
    if not 1 <= rank <= n:
        raise ValueError(f"rank must lie in 1..{n}")
    return (n - rank + 1) / n


def collective_confidence(values: Sequence[float], feature_count: int) -> float:
    """Mean per-feature confidence for one class."""
    if feature_count < 1:
        raise NoUsableFeatureError("no features to fuse")
    if len(values) != feature_count:
        raise ValueError("need exactly one confidence per feature")
    for v in values:
        if not 0.0 < v <= 1.0:
            raise ValueError("confidences must lie in (0, 1]")
    return sum(values) / feature_count


def match_probe(bundle: FeatureBundle, gallery: "Gallery") -> MatchReport:
    """Rank every enrolled class against one probe bundle.

    Only features available on both sides take part: the probe must have
    extracted the feature, and the fitted gallery must hold a transform
    plus samples of it for every class. The final order is by collective
    confidence, ties broken by the best single-feature rank and then by
    enrollment order.
    """
    if gallery.n == 0:
        raise EmptyGalleryError("gallery has no enrolled classes")
    if not gallery.fitted:
        raise UnfittedGalleryError("fit the gallery before matching")

    transforms = gallery.transforms
    usable = []
    for fid in gallery.covered_features():
        vector = bundle.feature_vector(fid)
        if vector is None:
            continue
        if vector.shape[0] != transforms[fid].input_dim:
            raise DimensionMismatchError(
                f"probe {fid} dimension {vector.shape[0]} does not match "
                f"the gallery fit ({transforms[fid].input_dim})"
            )
        usable.append(fid)
    if not usable:
        raise NoUsableFeatureError(
            "probe and gallery share no feature that can be ranked"
        )

    labels = gallery.labels
    n = gallery.n
    projected = gallery.projected
    rankings = []
    confidences: dict[str, dict[str, float]] = {}
    for fid in usable:
        projected_probe = project(transforms[fid], bundle.feature_vector(fid))
        class_sets = [(label, projected[fid][label]) for label in labels]
        ranking = rank_feature(projected_probe, class_sets, fid)
        rankings.append(ranking)
        confidences[fid] = {
            label: confidence(ranking.rank_of(label), n) for label in labels
        }

    collective = {
        label: collective_confidence(
            [confidences[fid][label] for fid in usable], len(usable)
        )
        for label in labels
    }
    best_rank = {
        label: min(r.rank_of(label) for r in rankings) for label in labels
    }
    position = {label: i for i, label in enumerate(labels)}
    final = tuple(
        sorted(
            labels,
            key=lambda lab: (-collective[lab], best_rank[lab], position[lab]),
        )
    )
    return MatchReport(
        probe_id=bundle.label,
        n=n,
        features_used=tuple(usable),
        per_feature=tuple(rankings),
        confidences=confidences,
        collective=collective,
        ranking=final,
    )
