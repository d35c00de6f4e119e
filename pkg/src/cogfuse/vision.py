"""Image front-end: tiling plus global thumbnail, pixel shuffle, MLP adapter.

Images are ``(H, W, 3)`` float64 arrays with values in ``[0, 1]``. Feature
maps are ``(H, W, C)`` arrays. Binary PPM/PGM files are the only on-disk
image format.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .numeric import (
    CogfuseError,
    InvalidInputError,
    ShapeError,
    as_feature_matrix,
    rng_from_seed,
)

__all__ = [
    "ImageFormatError",
    "PatchSet",
    "AdapterWeights",
    "as_image",
    "synthetic_image",
    "adaptive_encode",
    "area_resize",
    "pixel_shuffle",
    "pixel_unshuffle",
    "init_adapter",
    "identity_adapter",
    "mlp_adapter",
    "gelu",
    "PatchEmbedder",
    "decode_pnm",
    "read_pnm",
    "write_pnm",
]


class ImageFormatError(CogfuseError, ValueError):
    """Raised for undecodable PPM/PGM data. ``offset`` is the byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def as_image(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidInputError(f"image must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"image has zero area: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("image contains non-finite values")
    return arr


def synthetic_image(height: int, width: int, seed: int) -> np.ndarray:
    """Uniform-noise RGB image in ``[0, 1)``, deterministic given the seed."""
    if height < 1 or width < 1:
        raise InvalidInputError(f"image has zero area: ({height}, {width})")
    return rng_from_seed(seed).random((height, width, 3))


@dataclass(frozen=True)
class PatchSet:
    """Row-major ``tile x tile`` patches plus the area-averaged thumbnail."""

    patches: tuple
    global_image: np.ndarray
    grid: tuple  # (tile rows, tile cols)
    tile: int

    def __len__(self) -> int:
        return len(self.patches)


def _area_weights(n_in: int, n_out: int) -> np.ndarray:
    # Row i averages input interval [i*n_in/n_out, (i+1)*n_in/n_out) by overlap length.
    edges = np.arange(n_out + 1, dtype=np.float64) * (n_in / n_out)
    lo = np.maximum(edges[:-1, None], np.arange(n_in)[None, :])
    hi = np.minimum(edges[1:, None], np.arange(1, n_in + 1)[None, :])
    return np.clip(hi - lo, 0.0, None) / (n_in / n_out)


def area_resize(img, out_h: int, out_w: int) -> np.ndarray:
    """Box-filter resample to ``(out_h, out_w)``; preserves the image mean."""
    img = np.asarray(img, dtype=np.float64)
    if out_h < 1 or out_w < 1:
        raise InvalidInputError(f"output size must be positive, got ({out_h}, {out_w})")
    a_h = _area_weights(img.shape[0], out_h)
    a_w = _area_weights(img.shape[1], out_w)
    rows = np.tensordot(a_h, img, axes=(1, 0))  # (out_h, W, C)
    return np.tensordot(rows, a_w, axes=(1, 1)).transpose(0, 2, 1)


def adaptive_encode(img, tile: int = 448, thumb: int = 448) -> PatchSet:
    img = as_image(img)
    if tile < 1 or thumb < 1:
        raise InvalidInputError(f"tile and thumb must be >= 1, got tile={tile}, thumb={thumb}")
    h, w, _ = img.shape
    rows, cols = math.ceil(h / tile), math.ceil(w / tile)
    padded = np.zeros((rows * tile, cols * tile, 3))
    padded[:h, :w] = img
    patches = tuple(
        padded[r * tile : (r + 1) * tile, c * tile : (c + 1) * tile].copy()
        for r in range(rows)
        for c in range(cols)
    )
    return PatchSet(
        patches=patches,
        global_image=area_resize(img, thumb, thumb),
        grid=(rows, cols),
        tile=tile,
    )


def pixel_shuffle(feat, r: int = 2) -> np.ndarray:
    """Space-to-depth: ``(H, W, C) -> (H/r, W/r, C r^2)``.

    Output channel ``(a*r + b)*C + c`` of cell ``(i, j)`` holds input
    ``(i*r + a, j*r + b, c)``, i.e. each ``r x r`` block is read row-major.
    """
    x = np.asarray(feat)
    if x.ndim != 3:
        raise ShapeError(f"feature map must be (H, W, C), got {x.shape}")
    h, w, c = x.shape
    if r < 1 or h % r or w % r:
        raise ShapeError(f"factor {r} does not divide spatial shape ({h}, {w})")
    return (
        x.reshape(h // r, r, w // r, r, c)
        .transpose(0, 2, 1, 3, 4)
        .reshape(h // r, w // r, r * r * c)
    )


def pixel_unshuffle(feat, r: int = 2) -> np.ndarray:
    """Exact inverse of :func:`pixel_shuffle`."""
    x = np.asarray(feat)
    if x.ndim != 3:
        raise ShapeError(f"feature map must be (H, W, C), got {x.shape}")
    h, w, cr2 = x.shape
    if r < 1 or cr2 % (r * r):
        raise ShapeError(f"channel count {cr2} is not a multiple of r^2={r * r}")
    c = cr2 // (r * r)
    return x.reshape(h, w, r, r, c).transpose(0, 2, 1, 3, 4).reshape(h * r, w * r, c)


def gelu(x):
    # tanh approximation
    return 0.5 * x * (1.0 + np.tanh(math.sqrt(2.0 / math.pi) * (x + 0.044715 * x**3)))


_ACTIVATIONS = {
    "gelu": gelu,
    "relu": lambda x: np.maximum(x, 0.0),
    "identity": lambda x: x,
}


@dataclass(frozen=True)
class AdapterWeights:
    w1: np.ndarray  # (input_dim, hidden_dim)
    b1: np.ndarray
    w2: np.ndarray  # (hidden_dim, output_dim)
    b2: np.ndarray
    activation: str = "gelu"

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise InvalidInputError(f"unknown activation {self.activation!r}")
        w1, w2 = np.asarray(self.w1), np.asarray(self.w2)
        if w1.ndim != 2 or w2.ndim != 2 or w1.shape[1] != w2.shape[0]:
            raise ShapeError(f"adapter layers do not chain: {w1.shape} then {w2.shape}")
        if np.shape(self.b1) != (w1.shape[1],) or np.shape(self.b2) != (w2.shape[1],):
            raise ShapeError("bias shapes do not match layer widths")

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def output_dim(self) -> int:
        return self.w2.shape[1]


def init_adapter(input_dim: int, hidden_dim: int, output_dim: int, seed: int,
                 activation: str = "gelu") -> AdapterWeights:
    """Seeded 1/sqrt(fan_in)-scaled normal weights, zero biases."""
    rng = rng_from_seed(seed)
    w1 = rng.standard_normal((input_dim, hidden_dim)) / math.sqrt(input_dim)
    w2 = rng.standard_normal((hidden_dim, output_dim)) / math.sqrt(hidden_dim)
    return AdapterWeights(w1, np.zeros(hidden_dim), w2, np.zeros(output_dim), activation)


def identity_adapter(dim: int, activation: str = "identity") -> AdapterWeights:
    eye = np.eye(dim)
    return AdapterWeights(eye, np.zeros(dim), eye.copy(), np.zeros(dim), activation)


def mlp_adapter(feat, w: AdapterWeights) -> np.ndarray:
    """affine -> activation -> affine, row by row."""
    feat = as_feature_matrix(feat, "feat")
    if feat.shape[1] != w.input_dim:
        raise ShapeError(f"features have {feat.shape[1]} columns, adapter expects {w.input_dim}")
    hidden = _ACTIVATIONS[w.activation](feat @ w.w1 + w.b1)
    return hidden @ w.w2 + w.b2


class PatchEmbedder:
    """Stand-in for the frozen visual encoder.

    Cuts a tile into ``patch x patch`` pixel blocks (zero-padding the
    border) and projects each flattened block with a fixed seeded linear
    map, producing an ``(rows, cols, embed_dim)`` feature map.
    """

    def __init__(self, patch: int = 14, embed_dim: int = 64, seed: int = 0):
        if patch < 1 or embed_dim < 1:
            raise InvalidInputError("patch and embed_dim must be >= 1")
        self.patch = patch
        self.embed_dim = embed_dim
        fan_in = patch * patch * 3
        self.proj = rng_from_seed(seed).standard_normal((fan_in, embed_dim)) / math.sqrt(fan_in)

    def __call__(self, tile_img, multiple: int = 1) -> np.ndarray:
        img = as_image(tile_img)
        gh = math.ceil(math.ceil(img.shape[0] / self.patch) / multiple) * multiple
        gw = math.ceil(math.ceil(img.shape[1] / self.patch) / multiple) * multiple
        p = self.patch
        padded = np.zeros((gh * p, gw * p, 3))
        padded[: img.shape[0], : img.shape[1]] = img
        blocks = padded.reshape(gh, p, gw, p, 3).transpose(0, 2, 1, 3, 4).reshape(gh, gw, -1)
        return blocks @ self.proj


# --- PPM / PGM ------------------------------------------------------------

_WS = b" \t\n\r\v\f"


def _read_header_token(data: bytes, pos: int) -> tuple[bytes, int, int]:
    """Return ``(token, start, end)`` of the next header token after ``pos``."""
    while pos < len(data):
        if data[pos] in _WS:
            pos += 1
        elif data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    start = pos
    while pos < len(data) and data[pos] not in _WS and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ImageFormatError("unexpected end of header", start)
    return data[start:pos], start, pos


def decode_pnm(data: bytes) -> np.ndarray:
    """Decode binary P6 (RGB) or P5 (grey, replicated to 3 channels)."""
    magic, _, pos = _read_header_token(data, 0)
    if magic not in (b"P6", b"P5"):
        raise ImageFormatError(f"unsupported magic {magic!r}; expected P5 or P6", 0)
    fields = []
    for _ in range(3):
        tok, start, pos = _read_header_token(data, pos)
        if not tok.isdigit():
            raise ImageFormatError(f"expected a decimal integer, got {tok!r}", start)
        fields.append(int(tok))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ImageFormatError(f"degenerate image size {width}x{height}", pos)
    if not 1 <= maxval <= 65535:
        raise ImageFormatError(f"maxval {maxval} out of range", pos)
    if pos >= len(data) or data[pos] not in _WS:
        raise ImageFormatError("missing whitespace after header", pos)
    pos += 1
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * channels * dtype.itemsize
    if len(data) - pos < need:
        raise ImageFormatError(
            f"truncated raster: need {need} bytes, have {len(data) - pos}", len(data)
        )
    raster = np.frombuffer(data, dtype=dtype, count=width * height * channels, offset=pos)
    img = raster.reshape(height, width, channels).astype(np.float64) / maxval
    if channels == 1:
        img = np.repeat(img, 3, axis=2)
    return img


def read_pnm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_pnm(fh.read())


def write_pnm(path: str | os.PathLike, img, maxval: int = 255) -> None:
    """Write an ``(H, W, 3)`` image in ``[0, 1]`` as binary P6."""
    img = as_image(img)
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P6\n{img.shape[1]} {img.shape[0]}\n{maxval}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + q.astype(dtype).tobytes())
