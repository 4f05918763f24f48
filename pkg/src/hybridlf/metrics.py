"""Image quality metrics and parallax-edge precision/recall on EPIs. All inputs are luma in [0, 1]."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .data.lightfield import LightField

PSNR_CAP = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03
TAU_GT = 0.3
DEFAULT_THRESHOLDS = tuple(np.round(np.linspace(0.05, 1.5, 146), 4))  # 0.01 steps
PR_TOL = 1e-3  # precision slack for count-level ties between sampled curves

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])


def _luma(x) -> np.ndarray:
    if isinstance(x, LightField):
        return x.luma
    return np.asarray(getattr(x, "data", x), dtype=np.float64)


def _pair(a, b):
    a, b = _luma(a), _luma(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def psnr_views(a, b, peak: float = 1.0) -> np.ndarray:
    """Per-view PSNR in dB over the last two axes, capped at 100 dB."""
    a, b = _pair(a, b)
    mse = np.mean(np.square(a - b), axis=(-2, -1))
    with np.errstate(divide="ignore"):
        value = 10.0 * np.log10(peak**2 / mse)
    return np.minimum(np.where(mse == 0, PSNR_CAP, value), PSNR_CAP)


def psnr(a, b, peak: float = 1.0) -> float:
    """PSNR of an image, or the mean of per-view PSNRs of a light field."""
    return float(np.mean(psnr_views(a, b, peak)))


def _gaussian_window() -> np.ndarray:
    r = np.arange(SSIM_WINDOW) - SSIM_WINDOW // 2
    g = np.exp(-(r**2) / (2 * SSIM_SIGMA**2))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = g.size
    x = ndimage.correlate1d(x, g, axis=-1, mode="constant")
    x = ndimage.correlate1d(x, g, axis=-2, mode="constant")
    half = k // 2
    return x[..., half:x.shape[-2] - half, half:x.shape[-1] - half]


def ssim_map(a, b, peak: float = 1.0) -> np.ndarray:
    a, b = _pair(a, b)
    if min(a.shape[-2:]) < SSIM_WINDOW:
        raise ValueError(f"image {a.shape[-2:]} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    g = _gaussian_window()
    c1, c2 = (SSIM_K1 * peak) ** 2, (SSIM_K2 * peak) ** 2
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a**2
    var_b = _filter_valid(b * b, g) - mu_b**2
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))


def ssim_views(a, b, peak: float = 1.0) -> np.ndarray:
    return np.mean(ssim_map(a, b, peak), axis=(-2, -1))


def ssim(a, b, peak: float = 1.0) -> float:
    """Gaussian-window SSIM averaged over valid pixels and views."""
    return float(np.mean(ssim_map(a, b, peak)))


# -- parallax edges -------------------------------------------------------------


def _epi_stacks(luma: np.ndarray):
    """Every horizontal EPI [N, H, M, W] and vertical EPI [M, W, N, H] as two stacked arrays."""
    return luma.transpose(1, 2, 0, 3), luma.transpose(0, 3, 1, 2)


def epi_edge_magnitude(epis: np.ndarray) -> np.ndarray:
    """Sobel gradient magnitude over the last two axes of a stack of EPIs."""
    kx = _SOBEL_X.reshape((1,) * (epis.ndim - 2) + (3, 3))
    gx = ndimage.correlate(epis, kx, mode="nearest")
    gy = ndimage.correlate(epis, np.swapaxes(kx, -1, -2), mode="nearest")
    return np.hypot(gx, gy)


def _dilate(edges: np.ndarray) -> np.ndarray:
    footprint = np.ones((1,) * (edges.ndim - 2) + (3, 3), bool)
    return ndimage.binary_dilation(edges, structure=footprint)


@dataclass
class PrCurve:
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    def rows(self):
        return zip(self.thresholds.tolist(), self.precision.tolist(), self.recall.tolist())


def parallax_pr(pred, gt, thresholds=DEFAULT_THRESHOLDS, tau_gt: float = TAU_GT) -> PrCurve:
    """Precision/recall of EPI edges of ``pred`` against EPI edges of ``gt``.

    Ground-truth edges are Sobel magnitudes above ``tau_gt``; predicted edges
    are magnitudes above each sweep threshold. A predicted edge counts as
    correct if a ground-truth edge lies within one pixel, and vice versa for
    recall. Counts are pooled over all horizontal and vertical EPIs. With no
    predicted edges precision is defined as 1.
    """
    pred, gt = _pair(pred, gt)
    if pred.ndim != 4:
        raise ValueError(f"parallax_pr expects [M, N, H, W] light fields, got {pred.shape}")
    thresholds = np.asarray(thresholds, dtype=np.float64)
    tp_pred = np.zeros(thresholds.size)
    n_pred = np.zeros(thresholds.size)
    tp_gt = np.zeros(thresholds.size)
    n_gt = 0
    for p_epis, g_epis in zip(_epi_stacks(pred), _epi_stacks(gt)):
        g_edges = epi_edge_magnitude(g_epis) > tau_gt
        g_near = _dilate(g_edges)
        n_gt += int(g_edges.sum())
        mag = epi_edge_magnitude(p_epis)
        for k, tau in enumerate(thresholds):
            p_edges = mag > tau
            n_pred[k] += p_edges.sum()
            tp_pred[k] += (p_edges & g_near).sum()
            tp_gt[k] += (g_edges & _dilate(p_edges)).sum()
    precision = np.where(n_pred > 0, tp_pred / np.maximum(n_pred, 1), 1.0)
    recall = tp_gt / n_gt if n_gt else np.zeros(thresholds.size)
    return PrCurve(thresholds=thresholds, precision=precision, recall=recall)


def interpolated_precision(curve: PrCurve, recall_levels: np.ndarray) -> np.ndarray:
    """Best precision achieved at recall >= r; -inf where the curve never reaches r."""
    out = np.full(np.shape(recall_levels), -np.inf)
    for i, r in enumerate(np.ravel(recall_levels)):
        reach = curve.recall >= r
        if reach.any():
            out.flat[i] = curve.precision[reach].max()
    return out


def pr_dominates(a: PrCurve, b: PrCurve, min_recall: float = 0.5, levels: int = 51, tol: float = PR_TOL) -> bool:
    """True if curve ``a`` has interpolated precision >= ``b`` - ``tol`` at every recall level >= ``min_recall``.

    Recall levels run up to the largest recall either curve reaches; ``a``
    must itself reach ``min_recall``.
    """
    top = max(float(a.recall.max(initial=0)), float(b.recall.max(initial=0)))
    if a.recall.max(initial=0) < min_recall:
        return False
    grid = np.linspace(min_recall, top, levels)
    return bool(np.all(interpolated_precision(a, grid) >= interpolated_precision(b, grid) - tol))


# -- reports --------------------------------------------------------------------


@dataclass
class MetricReport:
    psnr_views: np.ndarray
    ssim_views: np.ndarray
    pr: PrCurve | None = None
    runtime_s: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def psnr(self) -> float:
        return float(np.mean(self.psnr_views))

    @property
    def ssim(self) -> float:
        return float(np.mean(self.ssim_views))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["view_s", "view_t", "psnr", "ssim"])
            M, N = self.psnr_views.shape
            for s in range(M):
                for t in range(N):
                    w.writerow([s, t, f"{self.psnr_views[s, t]:.6f}", f"{self.ssim_views[s, t]:.6f}"])
            w.writerow(["mean", "", f"{self.psnr:.6f}", f"{self.ssim:.6f}"])

    def write_pr_csv(self, path) -> None:
        if self.pr is None:
            raise ValueError("report has no PR samples")
        with open(path, "w", newline="\n", encoding="ascii") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["threshold", "precision", "recall"])
            for row in self.pr.rows():
                w.writerow([f"{v:.6f}" for v in row])


def evaluate(pred, gt, with_pr: bool = True) -> MetricReport:
    start = time.perf_counter()
    pred, gt = _pair(pred, gt)
    report = MetricReport(
        psnr_views=psnr_views(pred, gt),
        ssim_views=ssim_views(pred, gt),
        pr=parallax_pr(pred, gt) if with_pr else None,
    )
    report.runtime_s = time.perf_counter() - start
    return report


def report_paths(report_path) -> tuple[Path, Path]:
    report_path = Path(report_path)
    return report_path, report_path.with_name(report_path.stem + "_pr.csv")
