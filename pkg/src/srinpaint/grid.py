"""Core data types and file I/O.

Conventions, binding for the whole package:

* Images are (height, width) float64 arrays, row-major with x (the column
  index) fastest.  Intensities live in [0, 1]; operations that can overshoot
  say so and clamping happens only at driver/file boundaries.
* Masks mark corrupted pixels with True ("bad").
* A lifted field psi(theta_r, x, y) is an (N, height, width) float64 array:
  one image-sized slice per discrete orientation theta_r = r*pi/N.  Angles
  are undirected, so the orientation grid is pi-periodic.
* Lifted fields round-trip losslessly through the "SRLF1" binary container;
  images round-trip exactly up to 8-bit quantization.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as _PilImage

from .errors import FormatError

SRLF_MAGIC = b"SRLF1"


@dataclass(frozen=True)
class Image:
    """A grayscale image: float64 intensities on a (height, width) grid."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image data must be 2-D and non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def clamped(self) -> "Image":
        return Image(np.clip(self.data, 0.0, 1.0))


@dataclass(frozen=True)
class Mask:
    """Partition of the pixel grid: bad == True marks corrupted pixels."""

    bad: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bad, dtype=bool)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"mask must be 2-D and non-empty, got shape {arr.shape}")
        object.__setattr__(self, "bad", arr)

    @property
    def width(self) -> int:
        return self.bad.shape[1]

    @property
    def height(self) -> int:
        return self.bad.shape[0]

    @property
    def good(self) -> np.ndarray:
        return ~self.bad

    def check_matches(self, img: Image) -> None:
        if self.bad.shape != img.data.shape:
            raise ValueError(
                f"mask shape {self.bad.shape} does not match image shape {img.data.shape}"
            )


@dataclass(frozen=True)
class AngleGrid:
    """N undirected orientations theta_r = r*pi/N, r = 0..N-1 (period pi)."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"need at least one orientation, got n={self.n}")

    @property
    def spacing(self) -> float:
        return np.pi / self.n

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.n) * (np.pi / self.n)

    def nearest_bin(self, theta: float) -> int:
        # round-half-up, wrapping theta ~ pi back onto bin 0; dividing by pi
        # first keeps exact dyadic fractions (pi/4 -> 0.25) exact
        return int(np.floor((theta / np.pi) * self.n + 0.5)) % self.n


@dataclass(frozen=True)
class LiftedField:
    """Orientation-resolved activation psi(r, y, x) on the angle grid."""

    grid: AngleGrid
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"lifted field must be 3-D (n, height, width), got {arr.shape}")
        if arr.shape[0] != self.grid.n:
            raise ValueError(
                f"slice count {arr.shape[0]} does not match angle grid n={self.grid.n}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("lifted field contains non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def mass(self) -> float:
        return float(self.data.sum())


@dataclass(frozen=True)
class FrequencyGrid:
    """DFT frequencies in cycles per pixel, with the usual aliasing convention."""

    width: int
    height: int
    lam: np.ndarray = field(init=False)  # shape (width,)
    mu: np.ndarray = field(init=False)   # shape (height,)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("frequency grid needs positive dimensions")
        object.__setattr__(self, "lam", np.fft.fftfreq(self.width))
        object.__setattr__(self, "mu", np.fft.fftfreq(self.height))


# ---------------------------------------------------------------------------
# image / mask file I/O
# ---------------------------------------------------------------------------

def _read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()

    def next_token(pos):
        # skip whitespace and '#' comments
        while pos < len(blob):
            ch = blob[pos:pos + 1]
            if ch in b" \t\r\n":
                pos += 1
            elif ch == b"#":
                nl = blob.find(b"\n", pos)
                pos = len(blob) if nl < 0 else nl + 1
            else:
                break
        start = pos
        while pos < len(blob) and blob[pos:pos + 1] not in b" \t\r\n":
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        return blob[start:pos], pos

    magic, pos = next_token(0)
    if magic == b"P6":
        raise FormatError(f"{path}: color PPM (P6) is not supported, need grayscale")
    if magic not in (b"P5", b"P2"):
        raise FormatError(f"{path}: not a PGM file (magic {magic!r})")
    w_tok, pos = next_token(pos)
    h_tok, pos = next_token(pos)
    maxval_tok, pos = next_token(pos)
    try:
        w, h, maxval = int(w_tok), int(h_tok), int(maxval_tok)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if w < 1 or h < 1 or maxval < 1:
        raise FormatError(f"{path}: bad PGM dimensions {w}x{h} maxval {maxval}")
    if maxval > 65535:
        raise FormatError(f"{path}: PGM maxval {maxval} exceeds 16-bit range")

    if magic == b"P2":
        tokens = blob[pos:].split()
        if len(tokens) < w * h:
            raise FormatError(f"{path}: truncated PGM data")
        raw = np.array(tokens[: w * h], dtype=np.float64)
    else:
        pos += 1  # single whitespace byte after maxval
        nbytes = w * h * (2 if maxval > 255 else 1)
        payload = blob[pos:pos + nbytes]
        if len(payload) < nbytes:
            raise FormatError(f"{path}: truncated PGM data")
        dtype = ">u2" if maxval > 255 else np.uint8
        raw = np.frombuffer(payload, dtype=dtype).astype(np.float64)
    return (raw / maxval).reshape(h, w)


def _read_png(path) -> np.ndarray:
    with _PilImage.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.float64) / 255.0
        if im.mode in ("I;16", "I;16B", "I;16L"):
            return np.asarray(im, dtype=np.float64) / 65535.0
        if im.mode == "I":
            arr = np.asarray(im, dtype=np.float64)
            if arr.max() > 65535:
                raise FormatError(f"{path}: unsupported bit depth (>16 bit)")
            return arr / 65535.0
        raise FormatError(f"{path}: unsupported PNG mode {im.mode!r}, need 8/16-bit grayscale")


def _infer_format(path, fmt=None) -> str:
    if fmt is not None:
        fmt = fmt.lower()
        if fmt not in ("pgm", "png"):
            raise ValueError(f"unsupported image format {fmt!r}")
        return fmt
    name = str(path).lower()
    if name.endswith(".png"):
        return "png"
    return "pgm"


def load_image(path, fmt=None) -> Image:
    """Load an 8- or 16-bit grayscale PGM or PNG, rescaled linearly to [0, 1]."""
    fmt = _infer_format(path, fmt)
    data = _read_png(path) if fmt == "png" else _read_pgm(path)
    return Image(data)


def quantize_u8(values: np.ndarray) -> np.ndarray:
    """Clamp to [0,1] and quantize with round-half-up: 0.5 -> 128."""
    v = np.clip(values, 0.0, 1.0)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def save_image(img: Image, path, fmt=None) -> None:
    """Write img as binary PGM (P5, maxval 255) or 8-bit grayscale PNG."""
    fmt = _infer_format(path, fmt)
    bytes8 = quantize_u8(img.data)
    if fmt == "pgm":
        with open(path, "wb") as fh:
            fh.write(b"P5\n%d %d\n255\n" % (img.width, img.height))
            fh.write(bytes8.tobytes())
    else:
        _PilImage.fromarray(bytes8, mode="L").save(path, format="PNG")


def load_mask(path, fmt=None) -> Mask:
    """Load a mask image: a pixel is bad iff its 8-bit value is >= 128."""
    img = load_image(path, fmt)
    return Mask(img.data >= 128.0 / 255.0)


def save_mask(mask: Mask, path, fmt=None) -> None:
    save_image(Image(np.where(mask.bad, 1.0, 0.0)), path, fmt)


# ---------------------------------------------------------------------------
# lifted-field container ("SRLF1")
# ---------------------------------------------------------------------------
# Layout: 5 magic bytes, then N, width, height as little-endian uint32,
# then N*width*height float64 little-endian in (r, y, x) order.

def save_lifted(fld: LiftedField, path) -> None:
    with open(path, "wb") as fh:
        fh.write(SRLF_MAGIC)
        fh.write(struct.pack("<III", fld.grid.n, fld.width, fld.height))
        fh.write(np.ascontiguousarray(fld.data, dtype="<f8").tobytes())


def load_lifted(path) -> LiftedField:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:5] != SRLF_MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:5]!r}, expected {SRLF_MAGIC!r}")
    if len(blob) < 17:
        raise FormatError(f"{path}: truncated header")
    n, w, h = struct.unpack("<III", blob[5:17])
    if n < 1 or w < 1 or h < 1:
        raise FormatError(f"{path}: invalid dimensions n={n} width={w} height={h}")
    expect = 17 + 8 * n * w * h
    if len(blob) != expect:
        raise FormatError(f"{path}: payload size {len(blob) - 17} bytes, expected {expect - 17}")
    data = np.frombuffer(blob[17:], dtype="<f8").reshape(n, h, w)
    return LiftedField(AngleGrid(n), np.array(data, dtype=np.float64))
