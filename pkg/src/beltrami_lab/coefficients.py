"""Beltrami coefficients: construction, mollification, Sobolev gauges.

A coefficient is a compactly supported complex field mu with
sup |mu| < 1.  The two closed-form families used throughout the test
suite are the radial-stretch coefficient -((K-1)/(K+1)) z/zbar and the
logarithmic example (z/zbar)/(2 log|z| - 1).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.fft

from . import operators
from .grid import ComplexField, GridSpec

_SUP_MATCH_TOL = 1e-12


@dataclass(frozen=True)
class BeltramiCoefficient:
    """Compactly supported coefficient with ellipticity metadata.

    ``sup_bound`` always equals the grid maximum of |samples|;
    ``profile``, when present, evaluates the underlying closed form at
    arbitrary points (used by inversion-based operations to avoid
    interpolating through phase singularities).
    """

    field: ComplexField
    sup_bound: float
    support_radius: float
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = ""

    def __post_init__(self):
        grid = self.field.grid
        if not (self.sup_bound < 1.0):
            raise ValueError(f"ellipticity violated: sup |mu| = {self.sup_bound} >= 1")
        grid_max = self.field.max_abs()
        if abs(grid_max - self.sup_bound) > _SUP_MATCH_TOL:
            raise ValueError(
                f"sup_bound {self.sup_bound} does not match grid max {grid_max}")
        if self.support_radius > grid.half_extent / 2 + 1e-15:
            raise ValueError(
                f"support radius {self.support_radius} exceeds half_extent/2 = "
                f"{grid.half_extent / 2}")
        outside = grid.radii() > self.support_radius
        if np.any(self.field.samples[outside] != 0):
            raise ValueError("coefficient must vanish identically outside its support radius")

    @property
    def grid(self) -> GridSpec:
        return self.field.grid

    @property
    def ellipticity(self) -> float:
        """K = (1 + sup|mu|) / (1 - sup|mu|)."""
        return (1.0 + self.sup_bound) / (1.0 - self.sup_bound)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Coefficient values at arbitrary points (closed form when known)."""
        points = np.asarray(points, dtype=np.complex128)
        if self.profile is not None:
            return np.asarray(self.profile(points), dtype=np.complex128)
        from .solver import interpolate_field  # deferred: avoids import cycle
        vals = interpolate_field(self.field, points)
        vals[np.abs(points) > self.support_radius] = 0.0
        return vals


def _coeff_from_samples(grid, samples, support_radius, profile=None, label=""):
    fld = ComplexField(grid, samples)
    return BeltramiCoefficient(fld, fld.max_abs(), float(support_radius),
                               profile=profile, label=label)


def make_radial_stretch_coefficient(K: float, R: float, grid: GridSpec) -> BeltramiCoefficient:
    """Coefficient of the radial stretching z |z|^(1/K - 1), truncated at |z| = R.

    mu(z) = -((K-1)/(K+1)) z/zbar on 0 < |z| <= R, zero elsewhere.
    """
    if not (K >= 1):
        raise ValueError(f"K must be >= 1, got {K}")
    if not (0 < R <= grid.half_extent / 2):
        raise ValueError(f"need 0 < R <= half_extent/2, got R={R}")
    s = (K - 1.0) / (K + 1.0)

    def profile(z):
        z = np.asarray(z, dtype=np.complex128)
        out = np.zeros_like(z)
        r = np.abs(z)
        m = (r > 0) & (r <= R)
        out[m] = -s * z[m] / np.conj(z[m])
        return out

    return _coeff_from_samples(grid, profile(grid.mesh()), R, profile,
                               label=f"radial(K={K},R={R})")


def make_log_example_coefficient(R: float, grid: GridSpec) -> BeltramiCoefficient:
    """The W^{1,2} model coefficient (z/zbar)/(2 log|z| - 1), truncated at R.

    Requires R < 1 so the denominator keeps its sign on the support.
    """
    if not (0 < R < 1):
        raise ValueError(f"need 0 < R < 1, got R={R}")
    if R > grid.half_extent / 2:
        raise ValueError(f"support radius {R} exceeds half_extent/2")

    def profile(z):
        z = np.asarray(z, dtype=np.complex128)
        out = np.zeros_like(z)
        r = np.abs(z)
        m = (r > 0) & (r <= R)
        out[m] = (z[m] / np.conj(z[m])) / (2.0 * np.log(r[m]) - 1.0)
        return out

    return _coeff_from_samples(grid, profile(grid.mesh()), R, profile,
                               label=f"logexample(R={R})")


def coefficient_from_field(field: ComplexField, support_radius: float,
                           label: str = "") -> BeltramiCoefficient:
    """Wrap raw samples (e.g. from a QCBF1 file) as a coefficient."""
    samples = np.array(field.samples)
    samples[field.grid.radii() > support_radius] = 0.0
    return _coeff_from_samples(field.grid, samples, support_radius, label=label)


# -- mollification --------------------------------------------------------------

@dataclass(frozen=True)
class MollifierSpec:
    """Dilated smooth bump psi_n(z) = n^2 psi(n z), supported on |z| <= 1/n.

    The profile is the standard normalized bump c exp(-1/(1-|z|^2)); on a
    grid the kernel is renormalized by its own quadrature so the discrete
    weights sum to exactly one.
    """

    index: int

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"mollifier index must be a positive integer, got {self.index}")

    def kernel(self, grid: GridSpec) -> np.ndarray:
        r = grid.radii()
        ker = np.zeros_like(r)
        m = self.index * r < 1.0
        ker[m] = np.exp(-1.0 / (1.0 - (self.index * r[m]) ** 2))
        total = ker.sum()
        if total == 0.0:
            raise ValueError(
                f"mollifier 1/n = {1 / self.index} is below grid resolution {grid.spacing}")
        return ker / (total * grid.spacing ** 2)

    def quadrature_mass(self, grid: GridSpec) -> float:
        return float(self.kernel(grid).sum() * grid.spacing ** 2)


def mollify(mu: BeltramiCoefficient, spec: MollifierSpec) -> BeltramiCoefficient:
    """Convolve with psi_n; support grows by 1/n, sup norm cannot grow."""
    grid = mu.grid
    radius_out = mu.support_radius + 1.0 / spec.index
    if radius_out > grid.half_extent / 2 + 1e-15:
        raise ValueError(
            f"mollified support {radius_out} would exceed half_extent/2; "
            f"shrink the support or increase n")
    ker = spec.kernel(grid)
    w = operators.get_fft_workers()
    conv = scipy.fft.ifft2(
        scipy.fft.fft2(mu.field.samples, workers=w)
        * scipy.fft.fft2(np.fft.ifftshift(ker), workers=w),
        workers=w) * grid.spacing ** 2
    conv[grid.radii() > radius_out] = 0.0
    out = _coeff_from_samples(grid, conv, radius_out,
                              label=f"{mu.label}|mollify(n={spec.index})")
    if out.sup_bound > mu.sup_bound + 1e-9:
        raise AssertionError("mollification increased the sup norm beyond slack")
    return out


# -- Sobolev gauge ---------------------------------------------------------------

def sobolev_norm(mu: BeltramiCoefficient, p: float,
                 region_radius: float | None = None,
                 with_function_norm: bool = False):
    """L^p norm of |D mu| = sqrt(|d_z mu|^2 + |d_zbar mu|^2).

    Derivatives are spectral.  ``region_radius`` restricts the quadrature
    to |z| <= region_radius; the default integrates over the whole grid,
    which for sharply truncated coefficients includes the support-edge
    jump (that jump is genuinely not Sobolev, and dominates refinement
    studies; pass a region inside the support to probe interior
    regularity instead).  With ``with_function_norm`` the pair
    (|mu|_p, |D mu|_p) is returned.
    """
    if not (1 < p < np.inf):
        raise ValueError(f"p must lie in (1, inf), got {p}")
    gz = operators.spectral_derivative(mu.field, "d_z").samples
    gzb = operators.spectral_derivative(mu.field, "d_zbar").samples
    dens = np.abs(gz) ** 2 + np.abs(gzb) ** 2
    h = mu.grid.spacing
    if region_radius is not None:
        mask = mu.grid.radii() <= region_radius
        semi = float((np.sum(dens[mask] ** (p / 2.0)) * h * h) ** (1.0 / p))
        if with_function_norm:
            fn = float((np.sum(np.abs(mu.field.samples[mask]) ** p) * h * h) ** (1.0 / p))
            return fn, semi
        return semi
    semi = float((np.sum(dens ** (p / 2.0)) * h * h) ** (1.0 / p))
    if with_function_norm:
        return operators.lp_norm(mu.field, p), semi
    return semi


# -- inverse-map coefficient ------------------------------------------------------

def inverse_coefficient_at(mu: BeltramiCoefficient, sol, points: np.ndarray,
                           tol: float = 1e-12) -> np.ndarray:
    """nu at arbitrary points w: invert phi, then -mu(z) dphi/conj(dphi) at z."""
    from . import solver  # deferred: solver imports this module's types
    from .errors import DegenerateJacobianError

    points = np.asarray(points, dtype=np.complex128)
    pre = solver.invert_points(sol, points, tol=tol)
    dphi_pre = sol._interp("dphi", sol.dphi, pre)
    small = np.abs(dphi_pre) < 1e-12
    if np.any(small):
        bad = points.ravel()[np.flatnonzero(small.ravel())[0]]
        raise DegenerateJacobianError(f"|dphi| < 1e-12 at preimage of sample {bad}")
    uni = dphi_pre / np.conj(dphi_pre)
    uni /= np.abs(uni)
    return -mu.evaluate(pre) * uni


def inverse_coefficient(mu: BeltramiCoefficient, sol, tol: float = 1e-12,
                        pad_cells: float = 3.0) -> BeltramiCoefficient:
    """Coefficient of the inverse map, nu = -mu(phi^-1) * dphi/conj(dphi) (phi^-1).

    Sampled on the grid: points outside the image of the support map to
    exact zero; interior points are inverted with Newton and the
    unimodular derivative factor is interpolated from the solution.
    """
    from . import solver  # deferred: solver imports this module's types

    grid = mu.grid
    if sol.mu.grid != grid:
        raise ValueError("solution and coefficient live on different grids")
    if mu.sup_bound == 0.0:
        return _coeff_from_samples(grid, np.zeros_like(mu.field.samples), mu.support_radius,
                                   label=f"inverse({mu.label})")

    z = grid.mesh()
    r_img = solver.image_radius(sol, mu.support_radius) + pad_cells * grid.spacing
    r_img = min(r_img, grid.half_extent / 2)
    mask = grid.radii() <= r_img

    samples = np.zeros_like(mu.field.samples)
    samples[mask] = inverse_coefficient_at(mu, sol, z[mask], tol=tol)
    return _coeff_from_samples(grid, samples, r_img, label=f"inverse({mu.label})")


# -- critical exponents ------------------------------------------------------------

@dataclass(frozen=True)
class ExponentReport:
    """Integrability exponents attached to a (p, K) pair.

    q0: second-derivative integrability exponent, 1/q0 = 1/p + (K-1)/(2K).
    p0: dual exponent q0/(q0-1); None when q0 <= 1.
    r_sup: supremum of Sobolev exponents for the inverse coefficient,
        2p/(2K - (K-1)p); None outside its validity branch.
    """

    p: float
    K: float
    q0: float
    p0: float | None
    r_sup: float | None


def critical_exponents(p: float, K: float) -> ExponentReport:
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if not (p > 1):
        raise ValueError(f"p must exceed 1, got {p}")
    q0 = 1.0 / (1.0 / p + (K - 1.0) / (2.0 * K))
    p0 = q0 / (q0 - 1.0) if q0 > 1.0 else None
    r_sup = None
    if p > 2.0 * K / (K + 1.0):
        denom = 2.0 * K - (K - 1.0) * p
        if denom > 0:
            r_sup = 2.0 * p / denom
    return ExponentReport(p=float(p), K=float(K), q0=q0, p0=p0, r_sup=r_sup)


# -- coefficient spec mini-grammar ---------------------------------------------------

_CALL_RE = re.compile(r"^(?P<name>[a-z]+)\((?P<args>[^()]*)\)$")


def _parse_kwargs(text: str) -> dict:
    out = {}
    if text.strip():
        for part in text.split(","):
            if "=" not in part:
                raise ValueError(f"malformed argument {part!r} (expected key=value)")
            k, v = part.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def parse_coefficient_spec(spec: str, grid: GridSpec) -> BeltramiCoefficient:
    """Parse 'radial(K=..,R=..)', 'logexample(R=..)' or 'file:<path>',
    each optionally followed by '|mollify(n=..)'."""
    parts = [p.strip() for p in spec.split("|")]
    base = parts[0]

    if base.startswith("file:"):
        from .formats import read_field_qcbf
        fld = read_field_qcbf(base[len("file:"):])
        if fld.grid != grid:
            raise ValueError(
                f"field file grid {fld.grid} does not match requested grid {grid}")
        mu = coefficient_from_field(fld, grid.half_extent / 2, label=base)
    else:
        m = _CALL_RE.match(base)
        if not m:
            raise ValueError(f"cannot parse coefficient spec {base!r}")
        name, kwargs = m.group("name"), _parse_kwargs(m.group("args"))
        if name == "radial":
            _expect_keys(name, kwargs, {"K", "R"})
            mu = make_radial_stretch_coefficient(float(kwargs["K"]), float(kwargs["R"]), grid)
        elif name == "logexample":
            _expect_keys(name, kwargs, {"R"})
            mu = make_log_example_coefficient(float(kwargs["R"]), grid)
        else:
            raise ValueError(f"unknown coefficient family {name!r}")

    for suffix in parts[1:]:
        m = _CALL_RE.match(suffix)
        if not m or m.group("name") != "mollify":
            raise ValueError(f"unknown coefficient suffix {suffix!r}")
        kwargs = _parse_kwargs(m.group("args"))
        _expect_keys("mollify", kwargs, {"n"})
        mu = mollify(mu, MollifierSpec(int(kwargs["n"])))
    return mu


def _expect_keys(name: str, kwargs: dict, allowed: set) -> None:
    extra = set(kwargs) - allowed
    missing = allowed - set(kwargs)
    if extra:
        raise ValueError(f"{name}: unknown keys {sorted(extra)}")
    if missing:
        raise ValueError(f"{name}: missing keys {sorted(missing)}")
