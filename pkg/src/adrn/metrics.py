"""Band-wise image quality metrics and multi-run reports.

PSNR uses a fixed peak of 1.0 on normalized data and is capped at 100 dB
when the error is exactly zero. SSIM follows the standard single-scale
formulation: 11x11 Gaussian window (sigma 1.5), C1 = (0.01 * peak)**2,
C2 = (0.03 * peak)**2, averaged over the valid (fully windowed) region.
MPSNR and MSSIM are plain means over bands. Multi-run statistics report the
mean and sample standard deviation (n - 1 in the denominator) across runs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .cube import HsiCube

PSNR_CAP_DB = 100.0
_WINDOW_SIZE = 11
_WINDOW_SIGMA = 1.5


def psnr_band(x_hat: np.ndarray, x: np.ndarray, peak: float = 1.0) -> float:
    """10 * log10(peak**2 / mse); 100 dB when the images are identical."""
    if x_hat.shape != x.shape:
        raise ValueError(f"shape mismatch: {x_hat.shape} vs {x.shape}")
    diff = x_hat.astype(np.float64) - x.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP_DB
    return float(10.0 * np.log10(peak * peak / mse))


def _gaussian_window(size: int = _WINDOW_SIZE, sigma: float = _WINDOW_SIGMA) -> np.ndarray:
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable correlation keeping only fully covered (valid) pixels."""
    t = sliding_window_view(img, len(kernel), axis=0)
    t = np.tensordot(t, kernel, axes=([2], [0]))
    t = sliding_window_view(t, len(kernel), axis=1)
    return np.tensordot(t, kernel, axes=([2], [0]))


def ssim_band(x_hat: np.ndarray, x: np.ndarray, peak: float = 1.0) -> float:
    """Mean structural similarity of one band.

    Images smaller than the 11x11 window fall back to a single global-stats
    SSIM value over the whole image, with a warning.
    """
    if x_hat.shape != x.shape:
        raise ValueError(f"shape mismatch: {x_hat.shape} vs {x.shape}")
    if x_hat.ndim != 2:
        raise ValueError(f"expected 2-D band images, got {x_hat.ndim}-D")
    a = x_hat.astype(np.float64)
    b = x.astype(np.float64)
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    if min(a.shape) < _WINDOW_SIZE:
        warnings.warn(
            f"image {a.shape} smaller than the {_WINDOW_SIZE}x{_WINDOW_SIZE} SSIM window; "
            "using global statistics",
            stacklevel=2,
        )
        mu_a, mu_b = a.mean(), b.mean()
        va, vb = a.var(), b.var()
        cov = ((a - mu_a) * (b - mu_b)).mean()
        return float(
            ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
            / ((mu_a**2 + mu_b**2 + c1) * (va + vb + c2))
        )
    w = _gaussian_window()
    mu_a = _filter_valid(a, w)
    mu_b = _filter_valid(b, w)
    var_a = _filter_valid(a * a, w) - mu_a * mu_a
    var_b = _filter_valid(b * b, w) - mu_b * mu_b
    cov = _filter_valid(a * b, w) - mu_a * mu_b
    score = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(score.mean())


@dataclass(frozen=True)
class RunStats:
    """Mean and sample std of a summary metric across repeated runs."""

    mpsnr_mean: float
    mpsnr_std: float
    mssim_mean: float
    mssim_std: float
    n_runs: int


@dataclass
class QualityReport:
    """Per-band and summary quality of one denoised cube (plus optional repeats)."""

    psnr_per_band: np.ndarray
    ssim_per_band: np.ndarray
    mpsnr: float
    mssim: float
    run_stats: RunStats | None = None


def _band_scores(clean: HsiCube, denoised: HsiCube) -> tuple[np.ndarray, np.ndarray]:
    psnr = np.array(
        [psnr_band(denoised.band(b), clean.band(b)) for b in range(clean.bands)]
    )
    ssim = np.array(
        [ssim_band(denoised.band(b), clean.band(b)) for b in range(clean.bands)]
    )
    return psnr, ssim


def evaluate(
    clean: HsiCube, denoised: HsiCube, extra_runs: Sequence[HsiCube] = ()
) -> QualityReport:
    """Score a denoised cube against the clean reference.

    ``extra_runs`` holds further denoised cubes of the same scene (e.g. from
    repeated noise draws); when present, the report additionally carries
    mean +/- sample std of MPSNR and MSSIM across all runs.
    """
    runs = [denoised, *extra_runs]
    for run in runs:
        if run.values.shape != clean.values.shape:
            raise ValueError(
                f"dimension mismatch: clean {clean.values.shape} vs run {run.values.shape}"
            )
    psnr, ssim = _band_scores(clean, denoised)
    report = QualityReport(
        psnr_per_band=psnr,
        ssim_per_band=ssim,
        mpsnr=float(psnr.mean()),
        mssim=float(ssim.mean()),
    )
    if len(runs) > 1:
        mpsnrs = [report.mpsnr]
        mssims = [report.mssim]
        for run in runs[1:]:
            p, s = _band_scores(clean, run)
            mpsnrs.append(float(p.mean()))
            mssims.append(float(s.mean()))
        report.run_stats = RunStats(
            mpsnr_mean=float(np.mean(mpsnrs)),
            mpsnr_std=float(np.std(mpsnrs, ddof=1)),
            mssim_mean=float(np.mean(mssims)),
            mssim_std=float(np.std(mssims, ddof=1)),
            n_runs=len(runs),
        )
    return report


def format_mean_std(mean: float, std: float, decimals: int = 3, std_decimals: int = 4) -> str:
    """Compact 'mean±std' cell, e.g. '35.527±0.0104'."""
    return f"{mean:.{decimals}f}±{std:.{std_decimals}f}"


def report_csv(report: QualityReport, path: str | Path) -> None:
    """Per-band rows followed by a mean row (and run stats when present)."""
    lines = ["band,psnr_db,ssim"]
    for b in range(len(report.psnr_per_band)):
        lines.append(f"{b},{report.psnr_per_band[b]:.6f},{report.ssim_per_band[b]:.6f}")
    lines.append(f"mean,{report.mpsnr:.6f},{report.mssim:.6f}")
    if report.run_stats is not None:
        rs = report.run_stats
        lines.append(f"runs_mean,{rs.mpsnr_mean:.6f},{rs.mssim_mean:.6f}")
        lines.append(f"runs_std,{rs.mpsnr_std:.6f},{rs.mssim_std:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def report_table(report: QualityReport) -> str:
    """Aligned text table of the summary metrics."""
    rows = [("Metric", "Value")]
    if report.run_stats is not None:
        rs = report.run_stats
        rows.append(("MPSNR (dB)", format_mean_std(rs.mpsnr_mean, rs.mpsnr_std)))
        rows.append(("MSSIM", format_mean_std(rs.mssim_mean, rs.mssim_std, decimals=4)))
        rows.append(("runs", str(rs.n_runs)))
    else:
        rows.append(("MPSNR (dB)", f"{report.mpsnr:.3f}"))
        rows.append(("MSSIM", f"{report.mssim:.4f}"))
    width = max(len(name) for name, _ in rows)
    lines = [f"{name:<{width}}  {value}" for name, value in rows]
    return "\n".join(lines)
