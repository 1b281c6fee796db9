"""Hyperspectral cube data model, geometry helpers, and raw-file I/O.

A cube lives in memory as a float32 array of shape (rows, cols, bands). On
disk it is raw float32, little endian, in one of the three standard band
interleaves (bsq, bil, bip), accompanied by a small text header
``<name>.hdr`` that records the dimensions, dtype, interleave, and byte
order. Round trips through save/load are bit exact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

INTERLEAVES = ("bsq", "bil", "bip")


class CubeFormatError(ValueError):
    """Raised when a cube file or its header cannot be interpreted."""


@dataclass
class HsiCube:
    """A hyperspectral image: float32 values of shape (rows, cols, bands)."""

    values: np.ndarray
    band_names: list[str] | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3:
            raise ValueError(f"cube values must be 3-D (rows, cols, bands), got {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 1 or v.shape[2] < 1:
            raise ValueError(f"cube dimensions must be positive, got {v.shape}")
        if v.dtype != np.float32:
            v = v.astype(np.float32)
        self.values = v
        if self.band_names is not None and len(self.band_names) != v.shape[2]:
            raise ValueError(
                f"{len(self.band_names)} band names for {v.shape[2]} bands"
            )

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def bands(self) -> int:
        return self.values.shape[2]

    def band(self, index: int) -> np.ndarray:
        """One band as a (rows, cols) view."""
        return self.values[:, :, index]


@dataclass(frozen=True)
class Region:
    """A rectangular spatial region given as half-open [start, stop) ranges."""

    rows: tuple[int, int]
    cols: tuple[int, int]

    def __post_init__(self):
        for name, (lo, hi) in (("rows", self.rows), ("cols", self.cols)):
            if lo < 0 or hi <= lo:
                raise ValueError(f"region {name} range [{lo}, {hi}) is empty or negative")

    @property
    def height(self) -> int:
        return self.rows[1] - self.rows[0]

    @property
    def width(self) -> int:
        return self.cols[1] - self.cols[0]

    def crop(self, values: np.ndarray) -> np.ndarray:
        return values[self.rows[0] : self.rows[1], self.cols[0] : self.cols[1]]

    def overlaps(self, other: "Region") -> bool:
        rows_meet = self.rows[0] < other.rows[1] and other.rows[0] < self.rows[1]
        cols_meet = self.cols[0] < other.cols[1] and other.cols[0] < self.cols[1]
        return rows_meet and cols_meet


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint train/test regions of one scene."""

    train: Region
    test: Region

    def validate(self, rows: int, cols: int) -> None:
        for name, region in (("train", self.train), ("test", self.test)):
            if region.rows[1] > rows or region.cols[1] > cols:
                raise ValueError(
                    f"{name} region {region} exceeds cube extent {rows}x{cols}"
                )
        if self.train.overlaps(self.test):
            raise ValueError("train and test regions overlap")


def default_split(rows: int, cols: int, test_size: int = 200) -> SplitSpec:
    """Test block in the top-left corner, training on the remaining full-width strip."""
    if rows <= test_size:
        raise ValueError(f"cube with {rows} rows is too small for a {test_size}-row test block")
    if cols < test_size:
        raise ValueError(f"cube with {cols} cols is too small for a {test_size}-col test block")
    return SplitSpec(
        train=Region(rows=(test_size, rows), cols=(0, cols)),
        test=Region(rows=(0, test_size), cols=(0, test_size)),
    )


def normalize_per_band(cube: HsiCube) -> HsiCube:
    """Min-max scale each band to [0, 1] using that band's full spatial extent.

    A constant band cannot be scaled; it is set to zero and a warning is
    emitted. Applying the function twice gives the same result as once.
    """
    out = np.empty_like(cube.values)
    for b in range(cube.bands):
        band = cube.values[:, :, b]
        lo = band.min()
        hi = band.max()
        if hi == lo:
            warnings.warn(f"band {b} is constant; normalized to all zeros", stacklevel=2)
            out[:, :, b] = 0.0
        else:
            out[:, :, b] = (band - lo) / (hi - lo)
    return HsiCube(out, band_names=list(cube.band_names) if cube.band_names else None)


def spectral_window_indices(bands: int, band: int, k: int) -> list[int]:
    """Indices of the k bands adjacent to ``band``, excluding ``band`` itself.

    Nominally k//2 below and the rest above; at the ends of the spectrum the
    short side's deficit is shifted to the other side so the count stays k.
    """
    if not 0 <= band < bands:
        raise ValueError(f"band {band} out of range for {bands} bands")
    if k < 1 or k > bands - 1:
        raise ValueError(f"window size {k} must be in [1, bands-1] = [1, {bands - 1}]")
    avail_below = band
    avail_above = bands - 1 - band
    take_below = min(k // 2, avail_below)
    take_above = min(k - take_below, avail_above)
    take_below = k - take_above  # any deficit above is shifted back below
    below = list(range(band - take_below, band))
    above = list(range(band + 1, band + 1 + take_above))
    return below + above


def spectral_window(cube: HsiCube, band: int, k: int) -> np.ndarray:
    """The k adjacent bands of ``band`` stacked as a (k, rows, cols) array."""
    idx = spectral_window_indices(cube.bands, band, k)
    return np.ascontiguousarray(np.transpose(cube.values[:, :, idx], (2, 0, 1)))


def axis_origins(extent: int, patch: int, stride: int) -> list[int]:
    """Patch start offsets along one axis: a stride grid plus a flush final origin.

    The last origin is always extent - patch, so the patches cover every
    position along the axis even when the stride does not land exactly.
    """
    if patch < 1:
        raise ValueError(f"patch size must be positive, got {patch}")
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")
    if patch > extent:
        raise ValueError(f"patch size {patch} exceeds extent {extent}")
    last = extent - patch
    origins = list(range(0, last + 1, stride))
    if origins[-1] != last:
        origins.append(last)
    return origins


def patch_grid(height: int, width: int, patch: int, stride: int) -> list[tuple[int, int]]:
    """All (row, col) patch origins covering a height x width region."""
    rows = axis_origins(height, patch, stride)
    cols = axis_origins(width, patch, stride)
    return [(r, c) for r in rows for c in cols]


def _header_path(path: Path) -> Path:
    return path.with_name(path.name + ".hdr")


def save_cube(cube: HsiCube, path: str | Path, interleave: str = "bsq") -> None:
    """Write raw little-endian float32 samples plus a text header next to them."""
    if interleave not in INTERLEAVES:
        raise CubeFormatError(f"unknown interleave {interleave!r}, expected one of {INTERLEAVES}")
    path = Path(path)
    v = cube.values
    if interleave == "bip":
        ordered = v  # (rows, cols, bands), band index fastest
    elif interleave == "bil":
        ordered = np.transpose(v, (0, 2, 1))  # (rows, bands, cols)
    else:
        ordered = np.transpose(v, (2, 0, 1))  # (bands, rows, cols)
    data = np.ascontiguousarray(ordered, dtype="<f4")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data.tobytes())
    lines = [
        f"rows = {cube.rows}",
        f"cols = {cube.cols}",
        f"bands = {cube.bands}",
        "dtype = float32",
        f"interleave = {interleave}",
        "byte_order = little",
    ]
    _header_path(path).write_text("\n".join(lines) + "\n")


def _parse_header(text: str, path: Path) -> dict[str, str]:
    fields: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CubeFormatError(f"{path}: malformed header line {raw!r}")
        key, _, value = line.partition("=")
        fields[key.strip().lower()] = value.strip().lower()
    return fields


def load_cube(path: str | Path) -> HsiCube:
    """Read a cube written by :func:`save_cube`. The inverse is bit exact."""
    path = Path(path)
    header = _header_path(path)
    if not path.exists():
        raise CubeFormatError(f"cube file not found: {path}")
    if not header.exists():
        raise CubeFormatError(f"missing header file: {header}")
    fields = _parse_header(header.read_text(), header)
    for key in ("rows", "cols", "bands", "dtype", "interleave"):
        if key not in fields:
            raise CubeFormatError(f"{header}: missing required field {key!r}")
    try:
        rows = int(fields["rows"])
        cols = int(fields["cols"])
        bands = int(fields["bands"])
    except ValueError as exc:
        raise CubeFormatError(f"{header}: non-integer dimension ({exc})") from exc
    if min(rows, cols, bands) < 1:
        raise CubeFormatError(f"{header}: dimensions must be positive")
    if fields["dtype"] != "float32":
        raise CubeFormatError(f"{header}: unsupported dtype {fields['dtype']!r}")
    if fields.get("byte_order", "little") != "little":
        raise CubeFormatError(f"{header}: unsupported byte order {fields['byte_order']!r}")
    interleave = fields["interleave"]
    if interleave not in INTERLEAVES:
        raise CubeFormatError(f"{header}: unknown interleave {interleave!r}")
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    expected = rows * cols * bands
    if raw.size != expected:
        raise CubeFormatError(
            f"{path}: has {raw.size} samples, header implies {expected}"
        )
    if interleave == "bip":
        values = raw.reshape(rows, cols, bands)
    elif interleave == "bil":
        values = np.transpose(raw.reshape(rows, bands, cols), (0, 2, 1))
    else:
        values = np.transpose(raw.reshape(bands, rows, cols), (1, 2, 0))
    return HsiCube(np.ascontiguousarray(values))
