"""Spectral operators on periodic fields.

Wirtinger derivatives, the solution operator for d/dzbar (Cauchy
transform) and the principal singular integral d o (d/dzbar)^-1
(Beurling transform), all realized as Fourier multipliers on the
periodic grid.  The zero mode of every inverse is gauged to zero, so
transforms return mean-zero output.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.fft

from .grid import ComplexField, GridSpec

_WORKERS = 1


def set_fft_workers(n: int) -> None:
    """Set the FFT worker count (bit-identical results per fixed count)."""
    global _WORKERS
    n = int(n)
    if n < 1:
        n = os.cpu_count() or 1
    _WORKERS = n


def get_fft_workers() -> int:
    return _WORKERS


def _fft2(a: np.ndarray) -> np.ndarray:
    return scipy.fft.fft2(a, workers=_WORKERS)


def _ifft2(a: np.ndarray) -> np.ndarray:
    return scipy.fft.ifft2(a, workers=_WORKERS)


def _dz_multiplier(grid: GridSpec) -> np.ndarray:
    kx, ky = grid.frequencies()
    return 0.5j * (kx - 1j * ky)


def _dzbar_multiplier(grid: GridSpec) -> np.ndarray:
    kx, ky = grid.frequencies()
    return 0.5j * (kx + 1j * ky)


def spectral_derivative(f: ComplexField, which: str) -> ComplexField:
    """Wirtinger derivative d_z or d_zbar via Fourier multiplier.

    Parameters
    ----------
    f : ComplexField
    which : {"d_z", "d_zbar"}

    The zero mode maps to zero; on a single mode exp(i(xi1 x + xi2 y))
    the multiplier is (i/2)(xi1 -+ i xi2).
    """
    if which == "d_z":
        mult = _dz_multiplier(f.grid)
    elif which == "d_zbar":
        mult = _dzbar_multiplier(f.grid)
    else:
        raise ValueError(f"which must be 'd_z' or 'd_zbar', got {which!r}")
    return f.with_samples(_ifft2(mult * _fft2(f.samples)))


def cauchy_transform(h: ComplexField) -> ComplexField:
    """Mean-zero spectral inverse of d_zbar.

    Returns F with d_zbar F = h - mean(h) and mean(F) = 0.
    """
    spec = _fft2(h.samples)
    mult = _dzbar_multiplier(h.grid)
    out = np.zeros_like(spec)
    nz = mult != 0
    out[nz] = spec[nz] / mult[nz]
    return h.with_samples(_ifft2(out))


def beurling_transform(h: ComplexField) -> ComplexField:
    """The composition d_z o (d_zbar)^-1; an isometry on mean-zero fields.

    Mode xi != 0 is multiplied by (xi1 - i xi2)/(xi1 + i xi2), the zero
    mode by 0.  The Nyquist rows use the same formula, which keeps the
    discrete operator unitary off the zero mode.
    """
    kx, ky = h.grid.frequencies()
    denom = kx + 1j * ky
    mult = np.zeros_like(denom, dtype=np.complex128)
    nz = denom != 0
    mult[nz] = (kx[nz] - 1j * ky[nz]) / denom[nz]
    return h.with_samples(_ifft2(mult * _fft2(h.samples)))


def lp_norm(f: ComplexField, p: float) -> float:
    """Riemann-sum L^p norm; p = inf gives max |f|."""
    if p == np.inf:
        return float(np.max(np.abs(f.samples)))
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    h = f.grid.spacing
    return float((np.sum(np.abs(f.samples) ** p) * h * h) ** (1.0 / p))


def band_limit(f: ComplexField, keep_fraction: float = 2.0 / 3.0) -> ComplexField:
    """Zero all modes with max(|m1|, |m2|) above keep_fraction * N/2."""
    n = f.grid.resolution
    m = np.fft.fftfreq(n, d=1.0 / n)  # integer mode numbers
    cutoff = keep_fraction * (n / 2)
    mask1d = np.abs(m) <= cutoff
    mask = np.outer(mask1d, mask1d)
    return f.with_samples(_ifft2(mask * _fft2(f.samples)))


def random_band_limited(grid: GridSpec, rng: np.random.Generator,
                        keep_fraction: float = 2.0 / 3.0,
                        mean_zero: bool = False) -> ComplexField:
    """Random smooth test field, band-limited to the retained spectrum."""
    n = grid.resolution
    raw = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    f = band_limit(ComplexField(grid, raw), keep_fraction)
    if mean_zero:
        f = f - f.mean()
    return f


def radial_profile(f: ComplexField, r_min: float, r_max: float,
                   n_bins: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Mean of |f| over logarithmic radial bins on [r_min, r_max].

    Returns (bin_centers, means); bins with no samples are dropped.
    """
    if not (0 < r_min < r_max):
        raise ValueError("need 0 < r_min < r_max")
    r = f.grid.radii()
    v = np.abs(f.samples)
    edges = np.logspace(np.log10(r_min), np.log10(r_max), n_bins + 1)
    centers, means = [], []
    idx = np.digitize(r, edges)
    for b in range(1, n_bins + 1):
        sel = idx == b
        if np.any(sel):
            centers.append(np.sqrt(edges[b - 1] * edges[b]))
            means.append(float(np.mean(v[sel])))
    return np.asarray(centers), np.asarray(means)
