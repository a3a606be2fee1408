"""File-output visualizations: match overlays, sweep plots and FAR/FRR curves."""

from collections import defaultdict
from pathlib import Path

import cv2
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from veinmatch.models.features import FeatureSet  # noqa: E402
from veinmatch.models.image import GrayImage  # noqa: E402
from veinmatch.models.matches import MatchSet  # noqa: E402
from veinmatch.models.report import EvaluationReport  # noqa: E402
from veinmatch.models.synthetic import RatioSweepRow, SweepRow  # noqa: E402
from veinmatch.vision.image_io import to_uint8  # noqa: E402

ACCEPTED_BGR = (0, 200, 0)
REJECTED_BGR = (0, 0, 220)
KEYPOINT_BGR = (220, 160, 0)
BLANK_LEVEL = 32
_CANVAS_MARGIN = 8


def _panel(img: GrayImage | None, features: FeatureSet) -> np.ndarray:
    if img is not None:
        return cv2.cvtColor(to_uint8(img), cv2.COLOR_GRAY2BGR)
    coords = features.coordinates()
    extent = coords.max(axis=0) if len(coords) else np.zeros(2)
    width = int(np.ceil(extent[0])) + _CANVAS_MARGIN
    height = int(np.ceil(extent[1])) + _CANVAS_MARGIN
    return np.full((height, width, 3), BLANK_LEVEL, dtype=np.uint8)


def _pad_to_height(panel: np.ndarray, height: int) -> np.ndarray:
    if panel.shape[0] == height:
        return panel
    pad = np.full((height - panel.shape[0], panel.shape[1], 3), BLANK_LEVEL, dtype=np.uint8)
    return np.vstack([panel, pad])


def _pixel(x: float, y: float, offset: int = 0) -> tuple[int, int]:
    return int(round(x)) + offset, int(round(y))


def render_match_overlay(
    query: FeatureSet,
    gallery: FeatureSet,
    matches: MatchSet,
    survivors: MatchSet | None = None,
    query_image: GrayImage | None = None,
    gallery_image: GrayImage | None = None,
) -> np.ndarray:
    """Query and gallery side by side with one anti-aliased line per match.

    Pairs in ``survivors`` are drawn green and the rest red; without
    ``survivors`` every match counts as accepted.
    """
    left = _panel(query_image, query)
    right = _panel(gallery_image, gallery)
    height = max(left.shape[0], right.shape[0])
    canvas = np.hstack([_pad_to_height(left, height), _pad_to_height(right, height)])
    offset = left.shape[1]

    for kp in query.keypoints:
        cv2.circle(canvas, _pixel(kp.x, kp.y), 2, KEYPOINT_BGR, 1, cv2.LINE_AA)
    for kp in gallery.keypoints:
        cv2.circle(canvas, _pixel(kp.x, kp.y, offset), 2, KEYPOINT_BGR, 1, cv2.LINE_AA)

    kept = {(p.query_idx, p.gallery_idx) for p in (survivors if survivors is not None else matches).pairs}
    # rejected first so accepted lines stay on top
    ordered = sorted(matches.pairs, key=lambda p: (p.query_idx, p.gallery_idx) in kept)
    for pair in ordered:
        q = query.keypoints[pair.query_idx]
        g = gallery.keypoints[pair.gallery_idx]
        color = ACCEPTED_BGR if (pair.query_idx, pair.gallery_idx) in kept else REJECTED_BGR
        cv2.line(canvas, _pixel(q.x, q.y), _pixel(g.x, g.y, offset), color, 1, cv2.LINE_AA)
    return canvas


def write_overlay(path: Path, canvas: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), canvas):
        raise OSError(f"failed to write overlay: {path}")


def plot_sweep(rows: list[SweepRow], path: Path) -> None:
    """Mean recall and precision over seeds against the common threshold, one line per angle."""
    grouped: dict[float, dict[float, list[SweepRow]]] = defaultdict(lambda: defaultdict(list))
    for row in rows:
        grouped[row.angle][row.threshold].append(row)

    fig, (ax_recall, ax_precision) = plt.subplots(1, 2, figsize=(11, 4.5))
    for angle in sorted(grouped):
        thresholds = sorted(grouped[angle])
        recall = [np.mean([r.recall for r in grouped[angle][t]]) for t in thresholds]
        precision = [np.mean([r.precision for r in grouped[angle][t]]) for t in thresholds]
        ax_recall.plot(thresholds, recall, marker="o", label=f"{angle:g}°")
        ax_precision.plot(thresholds, precision, marker="o", label=f"{angle:g}°")
    for ax, label in ((ax_recall, "recall"), (ax_precision, "precision")):
        ax.set_xlabel("threshold T_mu = T_D (px)")
        ax.set_ylabel(label)
        ax.set_ylim(0.0, 1.05)
        ax.grid(True, alpha=0.3)
    ax_recall.legend(title="rotation")
    fig.tight_layout()
    _save(fig, path)


def plot_ratio_sweep(rows: list[RatioSweepRow], path: Path) -> None:
    ratios = [row.ratio for row in rows]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(ratios, [row.matches for row in rows], marker="o", label="ratio test")
    ax.plot(ratios, [row.survivors for row in rows], marker="s", label="after MMD")
    ax.set_xlabel("distance ratio")
    ax.set_ylabel("matches")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def plot_error_curves(report: EvaluationReport, path: Path) -> None:
    """FAR and FRR against the score threshold for every report row."""
    fig, ax = plt.subplots(figsize=(8, 5))
    for row in report.rows:
        label = f"{row.filter.value} t={row.template_size}"
        far = row.eer.far_curve
        frr = row.eer.frr_curve
        (line,) = ax.plot([p.threshold for p in far], [p.rate for p in far], label=f"FAR {label}")
        ax.plot([p.threshold for p in frr], [p.rate for p in frr], linestyle="--", color=line.get_color())
        ax.plot([row.eer.threshold_at_eer], [row.eer.eer], marker="x", color=line.get_color())
    ax.set_xlabel("score threshold")
    ax.set_ylabel("rate")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    _save(fig, path)


def _save(fig: plt.Figure, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
