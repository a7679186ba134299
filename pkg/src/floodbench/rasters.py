"""Core raster types, PNG ingestion and boundary extraction.

Rasters come in three flavors: multi-channel real-valued fields
(images, probability stacks, disparity), single-channel soft masks in
[0, 1], and ternary evaluation labels. All types validate on
construction and freeze their storage, so instances can be shared
freely across threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import MalformedLabelError, ShapeMismatchError

# Ternary label codes: pixels that cannot / may / must end up under water.
CANNOT = 0
MAY = 1
MUST = 2

_LABEL_CODES = frozenset((CANNOT, MAY, MUST))

_RASTER_MAGIC = b"FBRT"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


class ChannelField:
    """A C x H x W stack of finite real values.

    Accepts a 2-D array as a single-channel field. The underlying
    array is copied and made read-only.
    """

    __slots__ = ("_values",)

    def __init__(self, values) -> None:
        arr = np.array(values, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[np.newaxis]
        if arr.ndim != 3:
            raise ValueError(f"expected 2-D or 3-D data, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("empty field")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field contains NaN or Inf")
        self._values = _freeze(arr)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def channels(self) -> int:
        return self._values.shape[0]

    @property
    def height(self) -> int:
        return self._values.shape[1]

    @property
    def width(self) -> int:
        return self._values.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self._values.shape

    def __repr__(self) -> str:
        return f"ChannelField(C={self.channels}, H={self.height}, W={self.width})"


class SoftMask:
    """An H x W raster of probabilities in [0, 1]."""

    __slots__ = ("_values",)

    def __init__(self, values) -> None:
        arr = np.array(values, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"expected a non-empty 2-D mask, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("mask contains NaN or Inf")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("mask values must lie in [0, 1]")
        self._values = _freeze(arr)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape

    def binary(self, threshold: float = 0.5) -> "BinaryMask":
        """Threshold into a hard mask: pixel on iff value >= threshold."""
        return BinaryMask(self._values >= threshold)

    def __repr__(self) -> str:
        return f"SoftMask(H={self.shape[0]}, W={self.shape[1]})"


class BinaryMask:
    """An H x W boolean raster."""

    __slots__ = ("_values",)

    def __init__(self, values) -> None:
        arr = np.array(values)
        if arr.dtype != np.bool_:
            uniq = np.unique(arr)
            if not np.all(np.isin(uniq, (0, 1))):
                raise ValueError("binary mask may only contain {0, 1}")
            arr = arr.astype(bool)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"expected a non-empty 2-D mask, got shape {arr.shape}")
        self._values = _freeze(arr)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape

    def __repr__(self) -> str:
        return f"BinaryMask(H={self.shape[0]}, W={self.shape[1]})"


class TernaryLabelMap:
    """An H x W map of {CANNOT, MAY, MUST} evaluation codes."""

    __slots__ = ("_values",)

    def __init__(self, values) -> None:
        arr = np.array(values)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError(f"expected a non-empty 2-D label map, got shape {arr.shape}")
        bad = ~np.isin(arr, tuple(_LABEL_CODES))
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise MalformedLabelError(
                f"label code {arr[r, c]!r} at pixel ({r}, {c}) is not one of {{0, 1, 2}}"
            )
        self._values = _freeze(arr.astype(np.uint8))

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape

    def must(self) -> BinaryMask:
        """The must-be-flooded region as a hard mask."""
        return BinaryMask(self._values == MUST)

    def __repr__(self) -> str:
        return f"TernaryLabelMap(H={self.shape[0]}, W={self.shape[1]})"


class BoundarySet:
    """Pixel coordinates of a mask boundary, with the source raster size.

    Coordinates are stored sorted row-major and deduplicated.
    """

    __slots__ = ("_coords", "height", "width")

    def __init__(self, coords, height: int, width: int) -> None:
        arr = np.asarray(coords, dtype=np.int64).reshape(-1, 2)
        if arr.size:
            if arr[:, 0].min() < 0 or arr[:, 0].max() >= height:
                raise ValueError("row coordinate out of range")
            if arr[:, 1].min() < 0 or arr[:, 1].max() >= width:
                raise ValueError("column coordinate out of range")
            arr = np.unique(arr, axis=0)
        self._coords = _freeze(arr)
        self.height = int(height)
        self.width = int(width)

    @property
    def coordinates(self) -> np.ndarray:
        return self._coords

    def __len__(self) -> int:
        return self._coords.shape[0]

    def __repr__(self) -> str:
        return f"BoundarySet(n={len(self)}, H={self.height}, W={self.width})"


@dataclass(frozen=True)
class LossWeights:
    """Coefficients of the ten weighted loss terms.

    Grouped by decoder: disparity reconstruction (ssimse,
    gradient_matching), segmentation (cross_entropy, entropy_seg,
    wgan_seg) and flood mask (tv, ground_intersection, bce,
    entropy_mask, wgan_mask). Defaults are all 1.0.
    """

    ssimse: float = 1.0
    gradient_matching: float = 1.0
    cross_entropy: float = 1.0
    entropy_seg: float = 1.0
    wgan_seg: float = 1.0
    tv: float = 1.0
    ground_intersection: float = 1.0
    bce: float = 1.0
    entropy_mask: float = 1.0
    wgan_mask: float = 1.0

    def __post_init__(self) -> None:
        for name, value in self.__dict__.items():
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"loss weight {name}={value} must be finite and >= 0")


class ConfusionCounts(NamedTuple):
    tp: int
    fp: int
    fn: int
    tn: int


class LoadedMask(NamedTuple):
    soft: SoftMask
    binary: BinaryMask


# ---------------------------------------------------------------------------
# PNG ingestion / encoding
# ---------------------------------------------------------------------------

def _read_gray_png(path) -> np.ndarray:
    path = Path(path)
    with Image.open(path) as img:
        if img.mode != "L":
            raise ValueError(f"{path}: expected an 8-bit single-channel PNG, got mode {img.mode!r}")
        return np.asarray(img, dtype=np.uint8)


def load_label_map(path) -> TernaryLabelMap:
    """Load a ternary label map from an 8-bit grayscale PNG with codes {0, 1, 2}."""
    arr = _read_gray_png(path)
    bad = arr > MUST
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise MalformedLabelError(f"{path}: label code {arr[r, c]} at pixel ({r}, {c}) is not one of {{0, 1, 2}}")
    return TernaryLabelMap(arr)


def write_label_map(path, label: TernaryLabelMap) -> None:
    Image.fromarray(label.values, mode="L").save(Path(path), format="PNG")


def load_mask(path, threshold: float = 0.5) -> LoadedMask:
    """Load an 8-bit grayscale PNG as a soft mask (pixel/255) plus its thresholded view."""
    arr = _read_gray_png(path)
    soft = SoftMask(arr.astype(np.float64) / 255.0)
    return LoadedMask(soft, soft.binary(threshold))


def load_image(path) -> ChannelField:
    """Load an 8-bit single- or triple-channel PNG as a C x H x W field in [0, 1]."""
    path = Path(path)
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            raise ValueError(f"{path}: expected an 8-bit L or RGB PNG, got mode {img.mode!r}")
        arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    else:
        arr = arr.transpose(2, 0, 1)
    return ChannelField(arr)


def write_image(path, field: ChannelField) -> None:
    """Encode a 1- or 3-channel field with values in [0, 1] as PNG."""
    values = field.values
    if values.min() < 0.0 or values.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")
    pixels = np.rint(values * 255.0).astype(np.uint8)
    if field.channels == 1:
        Image.fromarray(pixels[0], mode="L").save(Path(path), format="PNG")
    elif field.channels == 3:
        Image.fromarray(pixels.transpose(1, 2, 0), mode="RGB").save(Path(path), format="PNG")
    else:
        raise ValueError(f"can only encode 1- or 3-channel fields, got {field.channels}")


def write_mask(path, mask: SoftMask | BinaryMask) -> None:
    """Encode a mask to 8-bit grayscale PNG; load_mask(write_mask(m)) preserves pixels."""
    if isinstance(mask, BinaryMask):
        arr = mask.values.astype(np.uint8) * 255
    else:
        arr = np.rint(mask.values * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(Path(path), format="PNG")


# ---------------------------------------------------------------------------
# Flat binary raster format for non-image fields
# ---------------------------------------------------------------------------

def write_raster(path, field: ChannelField | np.ndarray) -> None:
    """Write a C x H x W float64 raster: magic FBRT, u32-LE C,H,W, then LE doubles."""
    values = field.values if isinstance(field, ChannelField) else ChannelField(field).values
    c, h, w = values.shape
    with open(Path(path), "wb") as fh:
        fh.write(_RASTER_MAGIC)
        fh.write(struct.pack("<III", c, h, w))
        fh.write(values.astype("<f8").tobytes())


def read_raster(path) -> ChannelField:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != _RASTER_MAGIC:
        raise ValueError(f"{path}: bad magic {data[:4]!r}, expected {_RASTER_MAGIC!r}")
    c, h, w = struct.unpack("<III", data[4:16])
    expected = 16 + c * h * w * 8
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for a {c}x{h}x{w} raster, got {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=16).reshape(c, h, w)
    return ChannelField(values)


# ---------------------------------------------------------------------------
# Boundary extraction and confusion counting
# ---------------------------------------------------------------------------

def sobel_boundary(mask: BinaryMask) -> BoundarySet:
    """Boundary pixels of a hard mask under the 3x3 Sobel detector.

    A pixel belongs to the boundary iff the magnitude of the Sobel
    response is nonzero. Borders are replicate-padded so a flood front
    touching the image edge still produces a boundary. Constant masks
    (all zeros or all ones) yield an empty set.
    """
    arr = mask.values.astype(np.int64)
    gr = ndimage.sobel(arr, axis=0, mode="nearest")
    gc = ndimage.sobel(arr, axis=1, mode="nearest")
    coords = np.argwhere((gr != 0) | (gc != 0))
    return BoundarySet(coords, *arr.shape)


def confusion_counts(pred: BinaryMask, label: TernaryLabelMap) -> ConfusionCounts:
    """Confusion counts against ternary labels; MAY pixels count toward nothing."""
    if pred.shape != label.shape:
        raise ShapeMismatchError(f"prediction {pred.shape} vs label {label.shape}")
    p = pred.values
    lab = label.values
    must = lab == MUST
    cannot = lab == CANNOT
    return ConfusionCounts(
        tp=int(np.count_nonzero(p & must)),
        fp=int(np.count_nonzero(p & cannot)),
        fn=int(np.count_nonzero(~p & must)),
        tn=int(np.count_nonzero(~p & cannot)),
    )
