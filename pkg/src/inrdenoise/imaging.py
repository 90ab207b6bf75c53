"""Image container, deterministic noise synthesis, test phantoms, and PNM I/O.

Pixel data lives in [0, 1] as float64, shape (H, W, C) with C in {1, 3}.
All randomness goes through :class:`Prng`, a counter-based SplitMix64
generator chosen for cross-platform bit-reproducibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# SplitMix64 constants (Steele, Lea & Flood, "Fast splittable PRNGs").
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK = 0xFFFFFFFFFFFFFFFF
# Distinct odd constant used only to derive independent sub-streams.
_STREAM_SALT = 0xD1B54A32D192ED03


def _mix64(z: int) -> int:
    """SplitMix64 finalizer on a python int, mod 2^64."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, stream: int) -> int:
    """Deterministically derive an independent stream seed from (seed, stream)."""
    return _mix64(_mix64(seed & _MASK) ^ _mix64((stream * _STREAM_SALT + _GAMMA) & _MASK))


class Prng:
    """Counter-based SplitMix64 stream with Box-Muller Gaussian variates.

    Output i of the stream is mix64(seed + (i+1)*GAMMA), so arbitrary blocks
    can be generated vectorized without losing the sequential contract.
    Uniforms lie in (0, 1]; each Box-Muller pair consumes exactly two uniforms.
    """

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be a non-negative integer")
        self.seed = seed & _MASK
        self.counter = 0

    def derive(self, stream: int) -> "Prng":
        return Prng(derive_seed(self.seed, stream))

    def next_u64(self) -> int:
        self.counter += 1
        return _mix64((self.seed + self.counter * _GAMMA) & _MASK)

    def _block_u64(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        z = np.uint64(self.seed) + idx * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles uniform on (0, 1]: ((bits >> 11) + 1) * 2^-53."""
        bits = self._block_u64(n)
        return ((bits >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)

    def normals(self, n: int) -> np.ndarray:
        """n standard normal variates via Box-Muller, two uniforms per pair."""
        pairs = (n + 1) // 2
        u = self.uniforms(2 * pairs)
        r = np.sqrt(-2.0 * np.log(u[0::2]))
        theta = (2.0 * math.pi) * u[1::2]
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]


@dataclass
class Image:
    """H x W x C grid of float64 intensities in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"image data must be 2D or 3D, got ndim={arr.ndim}")
        if arr.shape[2] not in (1, 3):
            raise ValueError(f"channel count must be 1 or 3, got {arr.shape[2]}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image dimensions must be positive")
        if not np.isfinite(arr).all():
            raise ValueError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image values must lie in [0, 1]")
        self.data = arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def flat(self) -> np.ndarray:
        """Row-major (H*W, C) view of the pixels."""
        return self.data.reshape(-1, self.channels)


@dataclass
class NoisySample:
    """A clean image, its noisy observation, and the generating parameters.

    ``noise`` keeps the raw unclamped Gaussian field so noise statistics can
    be checked without the clamp bias; the observation itself is clamped.
    """

    clean: Image
    noisy: Image
    sigma255: float
    seed: int
    noise: np.ndarray = field(repr=False)


def add_gaussian_noise(clean: Image, sigma255: float, seed: int) -> NoisySample:
    """Additive i.i.d. Gaussian noise with std sigma255 on the 0-255 scale."""
    if sigma255 < 0:
        raise ValueError(f"sigma255 must be >= 0, got {sigma255}")
    if sigma255 == 0:
        return NoisySample(clean=clean, noisy=clean, sigma255=0.0, seed=seed,
                           noise=np.zeros_like(clean.data))
    rng = Prng(seed)
    n = rng.normals(clean.data.size).reshape(clean.data.shape) * (sigma255 / 255.0)
    noisy = Image(np.clip(clean.data + n, 0.0, 1.0))
    return NoisySample(clean=clean, noisy=noisy, sigma255=float(sigma255), seed=seed, noise=n)


PHANTOM_KINDS = ("gradient", "disk", "stripes", "composite")


def synth_phantom(h: int, w: int, kind: str) -> Image:
    """Deterministic analytic test images (seedless)."""
    if h < 16 or w < 16:
        raise ValueError(f"phantom size must be at least 16x16, got {h}x{w}")
    if kind not in PHANTOM_KINDS:
        raise ValueError(f"unknown phantom kind {kind!r}; choose from {PHANTOM_KINDS}")
    r = np.arange(h, dtype=np.float64)[:, None]
    c = np.arange(w, dtype=np.float64)[None, :]
    ramp = (r / (h - 1) + c / (w - 1)) / 2.0
    rc, cc = (h - 1) / 2.0, (w - 1) / 2.0
    radius = min(h, w) / 4.0
    in_disk = (r - rc) ** 2 + (c - cc) ** 2 <= radius ** 2
    bands = ((np.zeros((h, 1)) + c) // 4).astype(np.int64) % 2  # vertical, period 8 px

    if kind == "gradient":
        px = ramp
    elif kind == "disk":
        px = np.where(in_disk, 0.8, 0.2) + np.zeros((h, w))
    elif kind == "stripes":
        px = np.where(bands == 0, 0.25, 0.75) + np.zeros((h, w))
    else:
        # Mid-range base keeps sigma=25 noise mostly unclipped.
        px = 0.15 + 0.6 * ramp + 0.1 * (2 * bands - 1)
        px = np.where(in_disk, 0.5 * px + 0.4, px)
    return Image(px)


def save_pnm(image: Image, path: str) -> None:
    """Write binary PGM (P5) for 1 channel or PPM (P6) for 3, maxval 255."""
    magic = b"P5" if image.channels == 1 else b"P6"
    payload = np.rint(image.data * 255.0).astype(np.uint8)
    header = magic + b"\n" + f"{image.width} {image.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes())


def _read_pnm_tokens(buf: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` ASCII integer tokens, skipping whitespace and # comments."""
    tokens: list[int] = []
    i = 0
    while len(tokens) < count:
        if i >= len(buf):
            raise ValueError("truncated PNM header")
        ch = buf[i:i + 1]
        if ch == b"#":
            while i < len(buf) and buf[i:i + 1] != b"\n":
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(buf) and not buf[j:j + 1].isspace() and buf[j:j + 1] != b"#":
                j += 1
            tok = buf[i:j]
            if not tok.isdigit():
                raise ValueError(f"malformed PNM header token {tok!r}")
            tokens.append(int(tok))
            i = j
    return tokens, i


def load_pnm(path: str) -> Image:
    """Read binary PGM (P5) or PPM (P6) with maxval 255."""
    with open(path, "rb") as fh:
        buf = fh.read()
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported PNM magic {magic!r} (need binary P5 or P6)")
    channels = 1 if magic == b"P5" else 3
    (w, h, maxval), pos = _read_pnm_tokens(buf[2:], 3)
    pos += 2
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval} (need 255)")
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise ValueError("malformed PNM header: missing whitespace before payload")
    pos += 1
    need = w * h * channels
    payload = buf[pos:pos + need]
    if len(payload) < need:
        raise ValueError(f"truncated PNM payload: expected {need} bytes, got {len(payload)}")
    arr = np.frombuffer(payload, dtype=np.uint8).astype(np.float64).reshape(h, w, channels)
    return Image(arr / 255.0)
