"""Additive Gaussian noise simulators for hyperspectral cubes.

Three regimes are supported, each described by a :class:`NoiseSpec`:

* ``constant``: one standard deviation shared by every band.
* ``rand_per_band``: an independent draw from Uniform(0, sigma_max] per band.
* ``gauss_profile``: a deterministic bell-shaped sigma curve across the
  spectrum whose squared values sum to beta**2.

Sigmas are quoted on the 0-255 gray-level scale and divided by 255 when the
noise is added to [0, 1] data. Noisy values are not clipped. Every draw is
derived from the NoiseSpec seed through named child streams, so a given
(cube, spec) pair always produces the same noisy cube, band by band,
regardless of processing order.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cube import HsiCube

KINDS = ("constant", "rand_per_band", "gauss_profile")


@dataclass(frozen=True)
class NoiseSpec:
    """Parameters of one noise regime. Unused fields stay None."""

    kind: str
    seed: int = 0
    sigma: float | None = None
    sigma_max: float | None = None
    beta: float | None = None
    eta: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}, expected one of {KINDS}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.kind == "constant":
            if self.sigma is None or self.sigma <= 0:
                raise ValueError(f"constant noise needs sigma > 0, got {self.sigma}")
        elif self.kind == "rand_per_band":
            if self.sigma_max is None or self.sigma_max <= 0:
                raise ValueError(f"rand_per_band noise needs sigma_max > 0, got {self.sigma_max}")
        else:
            if self.beta is None or self.beta <= 0:
                raise ValueError(f"gauss_profile noise needs beta > 0, got {self.beta}")
            if self.eta is None or self.eta <= 0:
                raise ValueError(f"gauss_profile noise needs eta > 0, got {self.eta}")

    @classmethod
    def constant(cls, sigma: float, seed: int = 0) -> "NoiseSpec":
        return cls(kind="constant", sigma=float(sigma), seed=seed)

    @classmethod
    def rand_per_band(cls, sigma_max: float, seed: int = 0) -> "NoiseSpec":
        return cls(kind="rand_per_band", sigma_max=float(sigma_max), seed=seed)

    @classmethod
    def gauss_profile(cls, beta: float, eta: float, seed: int = 0) -> "NoiseSpec":
        return cls(kind="gauss_profile", beta=float(beta), eta=float(eta), seed=seed)

    @property
    def tag(self) -> str:
        """Short filename-safe label, e.g. 'constant25' or 'gauss200x30'."""
        if self.kind == "constant":
            return f"constant{self.sigma:g}"
        if self.kind == "rand_per_band":
            return f"rand{self.sigma_max:g}"
        return f"gauss{self.beta:g}x{self.eta:g}"

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "seed": self.seed}
        for name in ("sigma", "sigma_max", "beta", "eta"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseSpec":
        known = {"kind", "seed", "sigma", "sigma_max", "beta", "eta"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown noise spec fields: {sorted(unknown)}")
        if "kind" not in data:
            raise ValueError("noise spec is missing 'kind'")
        return cls(**data)


def save_noise_spec(spec: NoiseSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


def load_noise_spec(path: str | Path) -> NoiseSpec:
    return NoiseSpec.from_dict(json.loads(Path(path).read_text()))


def band_sigma_profile(beta: float, eta: float, bands: int) -> np.ndarray:
    """Bell-shaped per-band sigmas (float64) whose squares sum to beta**2.

    Band k (1-based) gets sigma(k) = beta * sqrt(g(k) / sum_j g(j)) with
    g(k) = exp(-(k - B/2)**2 / (2 * eta**2)).
    """
    if bands < 1:
        raise ValueError(f"bands must be positive, got {bands}")
    if beta <= 0 or eta <= 0:
        raise ValueError(f"beta and eta must be positive, got beta={beta}, eta={eta}")
    k = np.arange(1, bands + 1, dtype=np.float64)
    g = np.exp(-((k - bands / 2.0) ** 2) / (2.0 * eta**2))
    return beta * np.sqrt(g / g.sum())


def band_sigmas(spec: NoiseSpec, bands: int) -> np.ndarray:
    """Per-band sigma vector (0-255 scale) a spec produces for a B-band cube."""
    if bands < 1:
        raise ValueError(f"bands must be positive, got {bands}")
    if spec.kind == "constant":
        return np.full(bands, spec.sigma, dtype=np.float64)
    if spec.kind == "gauss_profile":
        return band_sigma_profile(spec.beta, spec.eta, bands)
    rng = np.random.default_rng(_child_seeds(spec.seed, bands)[0])
    # Uniform(0, sigma_max]: 1 - U with U ~ [0, 1) keeps the draw strictly positive
    return spec.sigma_max * (1.0 - rng.random(bands))


def _child_seeds(seed: int, bands: int) -> list[np.random.SeedSequence]:
    """Child 0 drives per-band sigma draws; children 1..B drive each band's noise."""
    return np.random.SeedSequence(seed).spawn(bands + 1)


def apply_noise(cube: HsiCube, spec: NoiseSpec) -> HsiCube:
    """Additive zero-mean Gaussian noise per band; values are not clipped.

    The input is expected to hold normalized [0, 1] data; anything clearly
    outside that range triggers a warning because the sigma/255 convention
    would then be meaningless.
    """
    v = cube.values
    if v.min() < -1e-6 or v.max() > 1.0 + 1e-6:
        warnings.warn(
            f"cube values span [{v.min():.4g}, {v.max():.4g}]; noise sigmas assume [0, 1] data",
            stacklevel=2,
        )
    sigmas = band_sigmas(spec, cube.bands)
    seeds = _child_seeds(spec.seed, cube.bands)
    noisy = np.empty_like(v)
    for b in range(cube.bands):
        rng = np.random.default_rng(seeds[1 + b])
        noise = rng.normal(0.0, sigmas[b] / 255.0, size=v.shape[:2])
        noisy[:, :, b] = v[:, :, b] + noise
    return HsiCube(noisy, band_names=list(cube.band_names) if cube.band_names else None)
