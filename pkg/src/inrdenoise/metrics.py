"""Quality and noise metrics: PSNR, SSIM, SNR, error maps, MAD noise, t-test.

All operations are pure functions on [0, 1]-ranged images or plain arrays.
Infinities are reported as math.inf and serialized as the string "inf".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .imaging import Image

# SSIM constants on the [0, 1] dynamic range, original convention.
_SSIM_C1 = 0.01 ** 2
_SSIM_C2 = 0.03 ** 2
_SSIM_WIN = 11
_SSIM_SIGMA = 1.5

# median(|N(0,1)|) = Phi^-1(0.75): the Donoho MAD-to-sigma constant.
_MAD_SCALE = 0.6745


@dataclass
class MetricsRecord:
    """Per-iteration training metrics; clean-reference fields are optional."""

    iteration: int
    loss: float
    psnr_noisy: float
    psnr_clean: float | None = None
    ssim_clean: float | None = None
    sigma_hat: float | None = None


def _check_same_dims(a: Image, b: Image, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(f"{op}: image dims differ, {a.data.shape} vs {b.data.shape}")


def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio in dB with peak 1.0; inf for identical inputs."""
    _check_same_dims(a, b, "psnr")
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _valid_conv_sep(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Separable 'valid' correlation with a symmetric 1D kernel on both axes."""
    win = k.size
    v = np.lib.stride_tricks.sliding_window_view(x, win, axis=0) @ k
    return np.lib.stride_tricks.sliding_window_view(v, win, axis=1) @ k


def ssim(a: Image, b: Image) -> float:
    """Mean local SSIM, 11x11 Gaussian window (sigma 1.5), valid region only."""
    _check_same_dims(a, b, "ssim")
    if min(a.height, a.width) < _SSIM_WIN:
        raise ValueError(f"ssim needs min dim >= {_SSIM_WIN}, got {a.height}x{a.width}")
    k = _gaussian_window(_SSIM_WIN, _SSIM_SIGMA)
    vals = []
    for c in range(a.channels):
        x = a.data[:, :, c]
        y = b.data[:, :, c]
        mu_x = _valid_conv_sep(x, k)
        mu_y = _valid_conv_sep(y, k)
        sxx = _valid_conv_sep(x * x, k) - mu_x ** 2
        syy = _valid_conv_sep(y * y, k) - mu_y ** 2
        sxy = _valid_conv_sep(x * y, k) - mu_x * mu_y
        num = (2 * mu_x * mu_y + _SSIM_C1) * (2 * sxy + _SSIM_C2)
        den = (mu_x ** 2 + mu_y ** 2 + _SSIM_C1) * (sxx + syy + _SSIM_C2)
        vals.append(float(np.mean(num / den)))
    return float(np.mean(vals))


def snr(signal: np.ndarray, error: np.ndarray) -> float:
    """Norm ratio ||signal|| / ||error||; inf for a zero error vector."""
    s = np.asarray(signal, dtype=np.float64).reshape(-1)
    e = np.asarray(error, dtype=np.float64).reshape(-1)
    if s.size != e.size:
        raise ValueError(f"snr: length mismatch {s.size} vs {e.size}")
    ns = float(np.linalg.norm(s))
    if ns == 0.0:
        raise ValueError("snr: signal is all-zero")
    ne = float(np.linalg.norm(e))
    if ne == 0.0:
        return math.inf
    return ns / ne


def error_map(x_hat: Image, clean: Image) -> np.ndarray:
    """Signed, unclamped reconstruction error field x_hat - clean."""
    _check_same_dims(x_hat, clean, "error_map")
    return x_hat.data - clean.data


def mad_sigma(field: np.ndarray) -> float:
    """Robust noise std on the 0-255 scale via one-level Haar MAD.

    The estimator is median(|diagonal detail|)/0.6745; diagonal coefficients
    of an orthonormal Haar level are N(0, sigma^2) for i.i.d. Gaussian input.
    Color fields average the per-channel estimates. Odd trailing row/column
    is dropped.
    """
    f = np.asarray(field, dtype=np.float64)
    if f.ndim == 2:
        f = f[:, :, None]
    if f.ndim != 3:
        raise ValueError(f"mad_sigma needs a 2D or HxWxC field, got ndim={f.ndim}")
    h, w = f.shape[0] - f.shape[0] % 2, f.shape[1] - f.shape[1] % 2
    if h < 2 or w < 2:
        raise ValueError(f"mad_sigma needs at least 2x2, got {f.shape[0]}x{f.shape[1]}")
    f = f[:h, :w, :]
    a = f[0::2, 0::2]
    b = f[0::2, 1::2]
    c = f[1::2, 0::2]
    d = f[1::2, 1::2]
    hh = (a - b - c + d) / 2.0
    per_channel = np.median(np.abs(hh), axis=(0, 1)) / _MAD_SCALE
    return float(np.mean(per_channel)) * 255.0


def paired_t_test(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Two-sided paired t-test; p from the Student-t CDF via betainc.

    Degenerate cases: zero-spread nonzero differences give t = +/-inf, p = 0;
    all-zero differences give t = 0, p = 1.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.size != b.size:
        raise ValueError(f"paired_t_test: length mismatch {a.size} vs {b.size}")
    n = a.size
    if n < 2:
        raise ValueError(f"paired_t_test needs n >= 2 pairs, got {n}")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean), 0.0
    t = mean / (sd / math.sqrt(n))
    nu = n - 1
    # P(|T| > |t|) = I_{nu/(nu+t^2)}(nu/2, 1/2) for Student t with nu dof.
    p = float(betainc(nu / 2.0, 0.5, nu / (nu + t * t)))
    return t, p


def fmt_metric(x: float | None) -> str:
    """CSV cell for a metric: empty for missing, 'inf' sentinel for infinities."""
    if x is None:
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.6f}"
