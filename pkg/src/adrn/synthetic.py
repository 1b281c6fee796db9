"""Seeded synthetic hyperspectral scenes for demos and end-to-end tests.

The generator sums smooth Gaussian intensity blobs over a gentle background
gradient. Each blob's amplitude follows a slow sinusoid across the spectrum,
so neighboring bands are strongly correlated (as in real sensors) while the
scene still has spatial structure worth denoising. Output is normalized per
band to [0, 1] and fully determined by the seed.
"""

from __future__ import annotations

import numpy as np

from .cube import HsiCube, normalize_per_band


def make_synthetic_cube(
    rows: int = 64,
    cols: int = 64,
    bands: int = 16,
    blobs: int = 6,
    seed: int = 0,
) -> HsiCube:
    if min(rows, cols, bands) < 1:
        raise ValueError(f"dimensions must be positive, got {rows}x{cols}x{bands}")
    if blobs < 1:
        raise ValueError(f"need at least one blob, got {blobs}")
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:rows, 0:cols].astype(np.float64)

    values = np.zeros((rows, cols, bands), dtype=np.float64)
    b_axis = np.arange(bands, dtype=np.float64)

    # background: a tilted plane whose tilt drifts slowly across the spectrum
    tilt = 0.15 * np.sin(2.0 * np.pi * b_axis / max(bands, 2) + rng.uniform(0, 2 * np.pi))
    base_plane = yy / max(rows - 1, 1) - 0.5
    cross_plane = xx / max(cols - 1, 1) - 0.5
    for b in range(bands):
        values[:, :, b] = 0.5 + tilt[b] * base_plane + 0.1 * cross_plane

    for _ in range(blobs):
        cy = rng.uniform(0.1, 0.9) * rows
        cx = rng.uniform(0.1, 0.9) * cols
        width = rng.uniform(0.08, 0.25) * min(rows, cols)
        footprint = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * width**2))
        amplitude = rng.uniform(0.4, 1.0)
        freq = rng.uniform(0.5, 1.5)
        phase = rng.uniform(0, 2 * np.pi)
        spectrum = amplitude * (0.6 + 0.4 * np.sin(2.0 * np.pi * freq * b_axis / bands + phase))
        values += footprint[:, :, None] * spectrum[None, None, :]

    return normalize_per_band(HsiCube(values.astype(np.float32)))
