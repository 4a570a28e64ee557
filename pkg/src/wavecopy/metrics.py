"""Image and field quality metrics plus the motion-to-photon latency budget."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

from .errors import DimMismatchError, EmptyError, TooSmallError, ZeroFieldError

SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_C1 = (0.01 * 255.0) ** 2
SSIM_C2 = (0.03 * 255.0) ** 2


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak SNR in dB over all pixels and channels; +inf for identical images."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def _ssim_channel(x: np.ndarray, y: np.ndarray) -> float:
    w = _gaussian_kernel(SSIM_WIN, SSIM_SIGMA)
    kern = np.outer(w, w)

    def f(img):
        return convolve2d(img, kern, mode="valid")

    ux, uy = f(x), f(y)
    uxx, uyy, uxy = f(x * x), f(y * y), f(x * y)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    vxy = uxy - ux * uy
    s = ((2 * ux * uy + SSIM_C1) * (2 * vxy + SSIM_C2)) / (
        (ux**2 + uy**2 + SSIM_C1) * (vx + vy + SSIM_C2)
    )
    return float(s.mean())


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity, Gaussian 11x11 sigma=1.5, averaged over channels."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    if a.shape[0] < SSIM_WIN or a.shape[1] < SSIM_WIN:
        raise TooSmallError(f"ssim needs at least {SSIM_WIN}x{SSIM_WIN} images")
    x = a.astype(np.float64)
    y = b.astype(np.float64)
    return float(np.mean([_ssim_channel(x[..., c], y[..., c]) for c in range(x.shape[2])]))


def field_fidelity(f, g) -> float:
    """|<f, g>| / (||f|| * ||g||): 1 means equal up to global phase and scale."""
    f = np.asarray(f, dtype=complex).reshape(-1)
    g = np.asarray(g, dtype=complex).reshape(-1)
    if f.shape != g.shape:
        raise DimMismatchError("field vectors must have equal length")
    nf = np.linalg.norm(f)
    ng = np.linalg.norm(g)
    if nf == 0.0 or ng == 0.0:
        raise ZeroFieldError("fidelity undefined for an all-zero field")
    return float(abs(np.vdot(f, g)) / (nf * ng))


@dataclass
class LatencyBudget:
    """Motion-to-photon component ranges in milliseconds."""

    sensor: tuple = (1.0, 5.0)
    rendering: tuple = (4.0, 16.0)
    display_scan: tuple = (2.0, 16.0)
    photon_emission: tuple = (1.0, 2.0)
    network: tuple | None = None  # (1.0, 20.0) when a network hop is present

    def components(self):
        named = [
            ("sensor", self.sensor),
            ("rendering", self.rendering),
            ("display_scan", self.display_scan),
            ("photon_emission", self.photon_emission),
        ]
        if self.network is not None:
            named.append(("network", self.network))
        for name, (lo, hi) in named:
            if lo > hi:
                raise ValueError(f"latency component {name} has min > max")
        return named


def latency_budget(budget: LatencyBudget, limit_ms: float = 20.0) -> dict:
    """Sum component ranges and compare against the motion-sickness limit."""
    comps = budget.components()
    lo = sum(c[1][0] for c in comps)
    hi = sum(c[1][1] for c in comps)
    return {
        "min_total_ms": lo,
        "max_total_ms": hi,
        "feasible_best_case": lo <= limit_ms,
        "guaranteed": hi <= limit_ms,
    }


def _quantile(sorted_vals: np.ndarray, q: float) -> float:
    # Linear interpolation between order statistics (the numpy default).
    n = len(sorted_vals)
    if n == 1:
        return float(sorted_vals[0])
    pos = q * (n - 1)
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    frac = pos - lo
    return float(sorted_vals[lo] * (1.0 - frac) + sorted_vals[hi] * frac)


def summarize(values) -> dict:
    """Boxplot statistics; +/-inf values are excluded but counted."""
    vals = np.asarray(list(values), dtype=float)
    if vals.size == 0:
        raise EmptyError("no values to summarize")
    finite = vals[np.isfinite(vals)]
    n_inf = int(vals.size - finite.size)
    if finite.size == 0:
        raise EmptyError("no finite values to summarize")
    s = np.sort(finite)
    return {
        "min": float(s[0]),
        "q1": _quantile(s, 0.25),
        "median": _quantile(s, 0.5),
        "q3": _quantile(s, 0.75),
        "max": float(s[-1]),
        "count": int(finite.size),
        "non_finite": n_inf,
    }
