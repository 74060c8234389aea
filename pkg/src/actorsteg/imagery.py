"""Grayscale images, PGM (P5) file I/O, and synthetic cover sources.

A cover source is a short deterministic processing pipeline (noise texture,
box smoothing, bilinear resampling, quantization). Sources with different
parameters produce images with measurably different residual statistics,
which is what makes cover-source mismatch reproducible on a desk: train the
classifiers on one source, test on another, and the mismatch is real but
fully controlled.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .seeding import rng_for

MIN_DIM = 8


class PgmError(Exception):
    """Base class for PGM reader/writer failures."""


class MalformedHeaderError(PgmError):
    """Header is not a parseable binary PGM header."""


class UnsupportedFormatError(PgmError):
    """A NetPBM variant other than binary PGM (P5), e.g. ASCII P2."""


class UnsupportedDepthError(PgmError):
    """Sample depth other than 8-bit (maxval 255)."""


class TruncatedDataError(PgmError):
    """Pixel payload shorter than width * height."""


@dataclass(frozen=True, eq=False)
class Image:
    """8-bit grayscale image. ``pixels`` is a read-only (height, width) uint8 array.

    Images are immutable after construction; every operation that modifies
    pixels returns a new Image.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"pixels must be 2-D, got shape {px.shape}")
        if px.dtype != np.uint8:
            if not np.issubdtype(px.dtype, np.integer):
                raise ValueError(f"pixels must be integral, got dtype {px.dtype}")
            if px.min() < 0 or px.max() > 255:
                raise ValueError("pixel values outside [0, 255]")
            px = px.astype(np.uint8)
        if px.shape[0] < MIN_DIM or px.shape[1] < MIN_DIM:
            raise ValueError(
                f"image must be at least {MIN_DIM}x{MIN_DIM}, got {px.shape[1]}x{px.shape[0]}"
            )
        px = np.ascontiguousarray(px).copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def content_hash(self) -> str:
        """SHA-256 of the raw row-major pixel bytes."""
        return hashlib.sha256(self.pixels.tobytes()).hexdigest()


@dataclass(frozen=True)
class CoverSourceSpec:
    """Parameters of one synthetic cover source.

    Equal specs generate bit-identical image streams. The generation pipeline
    runs in a fixed order: noise texture, box smoothing, bilinear resampling,
    quantization, clamp to [0, 255].
    """

    source_id: str
    base_noise_sigma: float
    smoothing_kernel_radius: int
    quantization_step: int
    resample_factor: float
    rng_seed: int

    def __post_init__(self):
        if not self.source_id:
            raise ValueError("source_id must be non-empty")
        if self.base_noise_sigma < 0:
            raise ValueError("base_noise_sigma must be >= 0")
        if self.smoothing_kernel_radius < 0:
            raise ValueError("smoothing_kernel_radius must be >= 0")
        if self.quantization_step < 1:
            raise ValueError("quantization_step must be >= 1")
        if not (0.5 < self.resample_factor <= 2.0):
            raise ValueError("resample_factor must lie in (0.5, 2.0]")

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "base_noise_sigma": self.base_noise_sigma,
            "smoothing_kernel_radius": self.smoothing_kernel_radius,
            "quantization_step": self.quantization_step,
            "resample_factor": self.resample_factor,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CoverSourceSpec":
        return cls(
            source_id=str(d["source_id"]),
            base_noise_sigma=float(d["base_noise_sigma"]),
            smoothing_kernel_radius=int(d["smoothing_kernel_radius"]),
            quantization_step=int(d["quantization_step"]),
            resample_factor=float(d["resample_factor"]),
            rng_seed=int(d["rng_seed"]),
        )


def box_filter(x: np.ndarray, radius: int) -> np.ndarray:
    """Mean filter with a (2*radius+1)^2 window and edge-replicate padding."""
    x = np.asarray(x, dtype=np.float64)
    if radius <= 0:
        return x
    k = 2 * radius + 1
    p = np.pad(x, radius, mode="edge")
    s = np.zeros((p.shape[0] + 1, p.shape[1] + 1), dtype=np.float64)
    s[1:, 1:] = p.cumsum(axis=0).cumsum(axis=1)
    win = s[k:, k:] - s[:-k, k:] - s[k:, :-k] + s[:-k, :-k]
    return win / float(k * k)


def _resample_bilinear(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resampling with edge clamping."""
    sh, sw = src.shape
    ys = np.linspace(0.0, sh - 1.0, out_h)
    xs = np.linspace(0.0, sw - 1.0, out_w)
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, sh - 2)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, sw - 2)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    tl = src[np.ix_(y0, x0)]
    tr = src[np.ix_(y0, x0 + 1)]
    bl = src[np.ix_(y0 + 1, x0)]
    br = src[np.ix_(y0 + 1, x0 + 1)]
    top = (1.0 - wx) * tl + wx * tr
    bot = (1.0 - wx) * bl + wx * br
    return (1.0 - wy) * top + wy * bot


def generate_cover(spec: CoverSourceSpec, width: int, height: int, index: int) -> Image:
    """Deterministically generate cover number ``index`` from a source.

    Pure function of (spec, width, height, index). Pipeline order is fixed:
    noise texture at the pre-resample scale, box smoothing, bilinear resample
    to the target geometry, quantization (round half up), clamp to [0, 255].
    """
    if width < MIN_DIM or height < MIN_DIM:
        raise ValueError(f"cover dimensions must be at least {MIN_DIM}, got {width}x{height}")
    rng = rng_for(spec.rng_seed, "cover", index)
    if spec.resample_factor == 1.0:
        bh, bw = height, width
    else:
        bh = max(2, int(round(height / spec.resample_factor)))
        bw = max(2, int(round(width / spec.resample_factor)))
    base = 128.0 + spec.base_noise_sigma * rng.standard_normal((bh, bw))
    if spec.smoothing_kernel_radius > 0:
        base = box_filter(base, spec.smoothing_kernel_radius)
    if (bh, bw) != (height, width):
        base = _resample_bilinear(base, height, width)
    q = float(spec.quantization_step)
    px = np.floor(base / q + 0.5) * q
    px = np.clip(px, 0.0, 255.0)
    return Image(px.astype(np.uint8))


def write_image(image: Image, path) -> None:
    """Write a binary PGM (P5, maxval 255). Round-trips bit-exactly with read_image."""
    if not isinstance(image, Image):
        raise TypeError("write_image expects an Image")
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + image.pixels.tobytes())


def read_image(path) -> Image:
    """Read a binary 8-bit PGM (P5, maxval 255).

    Raises UnsupportedFormatError for other NetPBM variants (e.g. ASCII P2),
    UnsupportedDepthError for maxval != 255, TruncatedDataError for short
    pixel payloads, and MalformedHeaderError for anything else unparseable.
    """
    data = Path(path).read_bytes()

    def next_token(pos: int) -> tuple[bytes, int]:
        while pos < len(data):
            c = data[pos]
            if c in b" \t\r\n":
                pos += 1
            elif c == ord("#"):
                nl = data.find(b"\n", pos)
                if nl < 0:
                    raise MalformedHeaderError("unterminated comment in header")
                pos = nl + 1
            else:
                break
        start = pos
        while pos < len(data) and data[pos] not in b" \t\r\n":
            pos += 1
        if start == pos:
            raise MalformedHeaderError("unexpected end of header")
        return data[start:pos], pos

    magic, pos = next_token(0)
    if magic == b"P2":
        raise UnsupportedFormatError("ASCII PGM (P2) is not supported; use binary P5")
    if magic in (b"P1", b"P3", b"P4", b"P6", b"P7"):
        raise UnsupportedFormatError(f"unsupported NetPBM format {magic.decode('ascii')}")
    if magic != b"P5":
        raise MalformedHeaderError(f"not a PGM file (magic {magic[:8]!r})")

    fields = []
    for _ in range(3):
        tok, pos = next_token(pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise MalformedHeaderError(f"non-numeric header field {tok[:16]!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"non-positive dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedDepthError(f"maxval {maxval} unsupported, only 8-bit (maxval 255)")
    # Exactly one whitespace byte separates the header from the raster.
    if pos >= len(data):
        raise TruncatedDataError("file ends before pixel data")
    pos += 1
    need = width * height
    raster = data[pos : pos + need]
    if len(raster) < need:
        raise TruncatedDataError(f"expected {need} pixel bytes, found {len(raster)}")
    px = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return Image(px)
