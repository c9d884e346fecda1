"""Principal solutions of the Beltrami equation by Neumann iteration.

The fixed point of h = mu*B(h) + mu yields the principal map
phi = z + C(h) with d_zbar phi = h - mean(h) and d_z phi = 1 + B(h).
Iteration contracts in L^2 with factor at most sup|mu| because B is an
isometry off the zero mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from . import geometry, operators
from .coefficients import BeltramiCoefficient
from .errors import ConvergenceError, DegenerateJacobianError, InversionError
from .formats import atomic_write_text, read_field_qcbf, write_field_qcbf
from .grid import ComplexField, GridSpec


@dataclass(frozen=True)
class PrincipalSolution:
    """Solved principal map: phi(z) = z + displacement(z).

    Fields follow the Neumann construction: ``h`` is the fixed point,
    ``dphi`` = 1 + B(h), ``displacement`` = C(h).  ``trace`` holds the
    per-iteration L^2 update norms.
    """

    mu: BeltramiCoefficient
    h: ComplexField
    dphi: ComplexField
    displacement: ComplexField
    trace: tuple[float, ...]
    tol: float
    log_deriv: Optional[ComplexField] = None

    def __post_init__(self):
        object.__setattr__(self, "_spline_cache", {})

    @property
    def grid(self) -> GridSpec:
        return self.mu.grid

    @property
    def iterations(self) -> int:
        return len(self.trace)

    @property
    def residual(self) -> float:
        return self.trace[-1] if self.trace else 0.0

    def phi_dzbar(self) -> ComplexField:
        return self.h - self.h.mean()

    def phi_dz(self) -> ComplexField:
        return self.dphi

    def jacobian(self) -> np.ndarray:
        return np.abs(self.dphi.samples) ** 2 - np.abs(self.phi_dzbar().samples) ** 2

    def phi_samples(self) -> np.ndarray:
        """phi evaluated at every grid node."""
        return self.grid.mesh() + self.displacement.samples

    def with_log_derivative(self, g: ComplexField) -> "PrincipalSolution":
        return PrincipalSolution(self.mu, self.h, self.dphi, self.displacement,
                                 self.trace, self.tol, log_deriv=g)

    # -- interpolation ------------------------------------------------------

    def _spline(self, name: str, fld: ComplexField):
        cache = self._spline_cache
        if name not in cache:
            cache[name] = (
                ndimage.spline_filter(fld.samples.real, order=3, mode="grid-wrap"),
                ndimage.spline_filter(fld.samples.imag, order=3, mode="grid-wrap"),
            )
        return cache[name]

    def _interp(self, name: str, fld: ComplexField, points: np.ndarray) -> np.ndarray:
        re_c, im_c = self._spline(name, fld)
        grid = self.grid
        xi = (points.real + grid.half_extent) / grid.spacing
        yi = (points.imag + grid.half_extent) / grid.spacing
        re = ndimage.map_coordinates(re_c, [yi, xi], order=3, mode="grid-wrap", prefilter=False)
        im = ndimage.map_coordinates(im_c, [yi, xi], order=3, mode="grid-wrap", prefilter=False)
        return re + 1j * im

    def map_points(self, points: np.ndarray) -> np.ndarray:
        """phi at arbitrary points via bicubic interpolation of the displacement."""
        points = np.asarray(points, dtype=np.complex128)
        return points + self._interp("displacement", self.displacement, points)


def interpolate_field(fld: ComplexField, points: np.ndarray) -> np.ndarray:
    """Bicubic periodic interpolation of a field at complex points."""
    points = np.asarray(points, dtype=np.complex128)
    grid = fld.grid
    xi = (points.real + grid.half_extent) / grid.spacing
    yi = (points.imag + grid.half_extent) / grid.spacing
    re = ndimage.map_coordinates(fld.samples.real, [yi, xi], order=3, mode="grid-wrap")
    im = ndimage.map_coordinates(fld.samples.imag, [yi, xi], order=3, mode="grid-wrap")
    return re + 1j * im


# -- Neumann iteration ---------------------------------------------------------


def _iterate(mu_samples: np.ndarray, source: ComplexField, tol: float,
             max_iter: int, what: str) -> tuple[ComplexField, tuple[float, ...]]:
    current = source
    trace: list[float] = []
    for _ in range(max_iter):
        step = operators.beurling_transform(current)
        new = step.with_samples(mu_samples * step.samples + source.samples)
        resid = operators.lp_norm(new - current, 2)
        trace.append(resid)
        current = new
        if resid <= tol:
            return current, tuple(trace)
    raise ConvergenceError(
        f"{what}: no convergence to {tol} within {max_iter} iterations "
        f"(last residual {trace[-1]:.3e})", tuple(trace))


def neumann_solve(mu: BeltramiCoefficient, tol: float = 1e-10,
                  max_iter: int = 200) -> PrincipalSolution:
    """Solve h = mu*B(h) + mu and assemble the principal solution.

    Raises ConvergenceError (carrying the residual trace) if max_iter is
    exhausted, and DegenerateJacobianError if the assembled map loses
    orientation on |z| <= half_extent/2.
    """
    if not (tol > 0):
        raise ValueError(f"tol must be positive, got {tol}")
    h, trace = _iterate(mu.field.samples, mu.field, tol, max_iter, "neumann_solve")
    bh = operators.beurling_transform(h)
    dphi = bh + 1.0
    displacement = operators.cauchy_transform(h)
    sol = PrincipalSolution(mu, h, dphi, displacement, trace, tol)
    inner = mu.grid.radii() <= mu.grid.half_extent / 2
    if np.any(sol.jacobian()[inner] <= 0):
        raise DegenerateJacobianError(
            "assembled solution loses orientation on the sample region")
    return sol


@dataclass(frozen=True)
class LogDerivativeResult:
    """Output of the log-derivative construction.

    ``sigma`` solves (I - mu B) sigma = d_z mu; ``g`` = C(sigma) satisfies
    d_zbar g = mu d_z g + d_z mu up to the solve tolerance, and
    exp(g) tracks d_z phi.
    """

    g: ComplexField
    sigma: ComplexField
    trace: tuple[float, ...]


def log_derivative_solve(mu: BeltramiCoefficient, tol: float = 1e-10,
                         max_iter: int = 200) -> LogDerivativeResult:
    """Neumann solve for sigma = mu*B(sigma) + d_z mu; returns g = C(sigma).

    The coefficient should be grid-differentiable (mollify rough ones
    first; a sharp support jump leaks ringing into d_z mu).
    """
    dmu = operators.spectral_derivative(mu.field, "d_z")
    sigma, trace = _iterate(mu.field.samples, dmu, tol, max_iter, "log_derivative_solve")
    return LogDerivativeResult(operators.cauchy_transform(sigma), sigma, trace)


def second_derivative(sol: PrincipalSolution, sigma: ComplexField) -> ComplexField:
    """d_zbar d_z phi = dphi * sigma, pointwise."""
    if sigma.grid != sol.grid:
        raise ValueError("sigma grid does not match the solution grid")
    return sol.dphi * sigma


# -- map evaluation and inversion ------------------------------------------------


def _require_safe_region(points: np.ndarray, grid: GridSpec) -> None:
    half = grid.half_extent / 2
    if np.any(np.abs(points.real) > half) or np.any(np.abs(points.imag) > half):
        raise ValueError(f"points must lie inside [-{half}, {half}]^2")


def evaluate_map(sol: PrincipalSolution, points: "geometry.PointCloud") -> "geometry.PointCloud":
    """Image of a point cloud under phi (bicubic off-grid evaluation)."""
    pts = points.points
    _require_safe_region(pts, sol.grid)
    mapped = sol.map_points(pts)
    return geometry.PointCloud(mapped, label=f"{points.label}|mapped({sol.mu.label})")


def invert_points(sol: PrincipalSolution, targets: np.ndarray, tol: float = 1e-9,
                  max_iter: int = 50) -> np.ndarray:
    """Newton inversion of phi at each target (initial guess z0 = w).

    Falls back to a coarse grid search for stalled points; raises
    InversionError naming the offenders if any still fail.
    """
    w = np.asarray(targets, dtype=np.complex128).ravel()
    z = w.copy()
    mean_h = sol.h.mean()

    def newton(z, active):
        for _ in range(max_iter):
            if not np.any(active):
                break
            f = sol.map_points(z[active]) - w[active]
            done = np.abs(f) <= tol
            if np.all(done):
                active = active.copy()
                active[np.flatnonzero(active)[done]] = False
                continue
            pz = sol._interp("dphi", sol.dphi, z[active])
            pzb = sol._interp("h", sol.h, z[active]) - mean_h
            det = np.abs(pz) ** 2 - np.abs(pzb) ** 2
            if np.any(det < 1e-12):
                bad = np.flatnonzero(active)[det < 1e-12][0]
                raise DegenerateJacobianError(
                    f"Jacobian determinant below 1e-12 while inverting target "
                    f"index {bad} ({w[bad]})")
            step = (np.conj(pz) * f - pzb * np.conj(f)) / det
            zz = z.copy()
            zz[active] = z[active] - step
            z = zz
        return z

    z = newton(z, np.ones(w.shape, dtype=bool))
    resid = np.abs(sol.map_points(z) - w)
    stalled = resid > tol
    if np.any(stalled):
        # coarse grid search restart for the stragglers
        phi_nodes = sol.phi_samples().ravel()
        mesh = sol.grid.mesh().ravel()
        idx = np.flatnonzero(stalled)
        for i in idx:
            z[i] = mesh[np.argmin(np.abs(phi_nodes - w[i]))]
        z = newton(z, stalled)
        resid = np.abs(sol.map_points(z) - w)
        bad = resid > tol
        if np.any(bad):
            which = np.flatnonzero(bad)
            raise InversionError(
                f"Newton inversion failed for {which.size} target(s), first at index "
                f"{which[0]} ({w[which[0]]}), residual {resid[which[0]]:.3e}",
                which, w[which])
    return z.reshape(np.asarray(targets).shape)


def invert_map(sol: PrincipalSolution, targets: "geometry.PointCloud",
               tol: float = 1e-9) -> "geometry.PointCloud":
    pre = invert_points(sol, targets.points, tol=tol)
    return geometry.PointCloud(pre, label=f"{targets.label}|inverted({sol.mu.label})")


def image_radius(sol: PrincipalSolution, radius: float) -> float:
    """Max |phi| over grid samples with |z| <= radius."""
    mask = sol.grid.radii() <= radius
    return float(np.max(np.abs(sol.phi_samples()[mask])))


# -- residuals ---------------------------------------------------------------------


def equation_residual(phi_dz: ComplexField, phi_dzbar: ComplexField,
                      mu: BeltramiCoefficient, region: np.ndarray | None = None) -> float:
    """Scale-free strong-form residual, median |d_zbar phi - mu d_z phi| / |d_z phi|.

    ``region`` is a boolean sample mask; the default is |z| <= half_extent/2
    (the periodization halo is excluded).
    """
    if phi_dz.grid != phi_dzbar.grid or phi_dz.grid != mu.grid:
        raise ValueError("fields must share a grid")
    if region is None:
        region = phi_dz.grid.radii() <= phi_dz.grid.half_extent / 2
    num = np.abs(phi_dzbar.samples - mu.field.samples * phi_dz.samples)
    den = np.abs(phi_dz.samples) + 1e-300
    return float(np.median((num / den)[region]))


def weak_residual(f: ComplexField, mu: BeltramiCoefficient, test: ComplexField) -> complex:
    """Distributional pairing <d_zbar f - mu d_z f, test> with no derivative on f.

    Computed as the grid quadrature of -f * d_zbar(test) + f * d_z(mu*test).
    The test field must be supported inside |z| <= half_extent/2.
    """
    if f.grid != mu.grid or f.grid != test.grid:
        raise ValueError("fields must share a grid")
    outside = test.grid.radii() > test.grid.half_extent / 2
    if np.any(test.samples[outside] != 0):
        raise ValueError("test function must vanish outside |z| <= half_extent/2")
    tzb = operators.spectral_derivative(test, "d_zbar")
    mt = mu.field * test
    dmt = operators.spectral_derivative(mt, "d_z")
    h = f.grid.spacing
    val = np.sum(-f.samples * tzb.samples + f.samples * dmt.samples) * h * h
    return complex(val)


# -- smooth test-function builders ---------------------------------------------------


def bump_field(grid: GridSpec, center: complex = 0j, radius: float = 0.9) -> ComplexField:
    """C^inf bump supported on |z - center| < radius, peak value 1."""
    z = grid.mesh()
    rc = np.abs(z - center)
    out = np.zeros_like(rc)
    m = rc < radius
    out[m] = np.exp(1.0 - 1.0 / (1.0 - (rc[m] / radius) ** 2))
    return ComplexField(grid, out)


def _glue(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    p = t > 0
    out[p] = np.exp(-1.0 / t[p])
    return out


def smooth_window(grid: GridSpec, inner: float, outer: float) -> ComplexField:
    """Radial C^inf cutoff: 1 on |z| <= inner, 0 on |z| >= outer."""
    if not (0 < inner < outer):
        raise ValueError("need 0 < inner < outer")
    r = grid.radii()
    w = np.ones_like(r)
    w[r >= outer] = 0.0
    m = (r > inner) & (r < outer)
    t = (r[m] - inner) / (outer - inner)
    w[m] = _glue(1.0 - t) / (_glue(1.0 - t) + _glue(t))
    return ComplexField(grid, w)


# -- serialization ---------------------------------------------------------------------


def save_solution(sol: PrincipalSolution, directory) -> None:
    """Write h/dphi/displacement as QCBF1 plus a key=value metadata sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_field_qcbf(sol.h, directory / "h.qcbf")
    write_field_qcbf(sol.dphi, directory / "dphi.qcbf")
    write_field_qcbf(sol.displacement, directory / "displacement.qcbf")
    meta = "\n".join([
        f"K={sol.mu.ellipticity:.17g}",
        f"sup_bound={sol.mu.sup_bound:.17g}",
        f"tol={sol.tol:.17g}",
        f"iterations={sol.iterations}",
        f"residual={sol.residual:.17g}",
    ]) + "\n"
    atomic_write_text(directory / "metadata.txt", meta)


def load_solution_fields(directory) -> dict:
    """Read back the three QCBF1 fields and parsed metadata."""
    directory = Path(directory)
    fields = {name: read_field_qcbf(directory / f"{name}.qcbf")
              for name in ("h", "dphi", "displacement")}
    meta = {}
    for line in (directory / "metadata.txt").read_text().splitlines():
        if "=" in line:
            key, val = line.split("=", 1)
            meta[key.strip()] = float(val)
    return {"fields": fields, "metadata": meta}
