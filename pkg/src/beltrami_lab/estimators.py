"""Scikit-learn style wrappers around the solver and dimension estimator.

``BeltramiMapTransformer`` treats a solved quasiconformal map as a point
transformer (fit solves the equation, transform/inverse_transform move
point sets), and ``BoxCountingDimension`` is a fit-only estimator for
the box-counting slope of a planar cloud.  Both follow the estimator
contract (get_params/set_params, fitted attributes with trailing
underscores), so they compose with pipelines and model-selection
utilities.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import measure, solver
from .coefficients import BeltramiCoefficient, parse_coefficient_spec
from .geometry import PointCloud
from .grid import GridSpec


def check_points(X) -> tuple[np.ndarray, bool]:
    """Validate a point set given as complex (n,) or real (n, 2).

    Returns (complex points, came_as_planar) where the flag records the
    (n, 2) layout so transformers can answer in kind.
    """
    arr = np.asarray(X)
    if arr.ndim == 2 and arr.shape[1] == 2 and not np.iscomplexobj(arr):
        pts = arr[:, 0].astype(np.float64) + 1j * arr[:, 1].astype(np.float64)
        planar = True
    elif arr.ndim == 1:
        pts = arr.astype(np.complex128)
        planar = False
    else:
        raise ValueError(
            f"expected complex shape (n,) or real shape (n, 2), got shape {arr.shape}")
    if pts.size == 0:
        raise ValueError("empty point set")
    if not np.all(np.isfinite(pts.view(np.float64))):
        raise ValueError("points must be finite")
    return pts, planar


def _pack_points(pts: np.ndarray, planar: bool):
    if planar:
        return np.column_stack([pts.real, pts.imag])
    return pts


def check_scalar_param(value, name: str, low=None, high=None):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite number, got {value!r}")
    if low is not None and value < low:
        raise ValueError(f"{name} must be >= {low}, got {value}")
    if high is not None and value > high:
        raise ValueError(f"{name} must be <= {high}, got {value}")
    return float(value)


class BeltramiMapTransformer(TransformerMixin, BaseEstimator):
    """Principal quasiconformal map as a planar point transformer.

    Parameters
    ----------
    coeff : str or BeltramiCoefficient
        Coefficient spec string ('radial(K=2,R=0.8)', 'logexample(R=0.3)',
        optionally '|mollify(n=..)') or a ready coefficient.
    grid_size : int
        Samples per axis of the periodic solve grid.
    half_extent : float
        Domain half width L; the solve lives on [-L, L)^2.
    tol, max_iter : float, int
        Neumann iteration stopping rule.

    Attributes
    ----------
    solution_ : PrincipalSolution
    n_iter_ : int
    residual_ : float
    """

    def __init__(self, coeff="radial(K=2,R=0.8)", grid_size=256, half_extent=2.0,
                 tol=1e-10, max_iter=200):
        self.coeff = coeff
        self.grid_size = grid_size
        self.half_extent = half_extent
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X=None, y=None):
        """Solve the equation for the configured coefficient; X is ignored."""
        del X, y
        tol = check_scalar_param(self.tol, "tol", low=0.0)
        if tol == 0.0:
            raise ValueError("tol must be positive")
        grid = GridSpec(int(self.grid_size), check_scalar_param(self.half_extent, "half_extent"))
        if isinstance(self.coeff, BeltramiCoefficient):
            if self.coeff.grid != grid:
                raise ValueError("coefficient grid does not match grid_size/half_extent")
            mu = self.coeff
        else:
            mu = parse_coefficient_spec(str(self.coeff), grid)
        self.solution_ = solver.neumann_solve(mu, tol=tol, max_iter=int(self.max_iter))
        self.n_iter_ = self.solution_.iterations
        self.residual_ = self.solution_.residual
        return self

    def transform(self, X):
        """Map points forward through phi."""
        check_is_fitted(self, "solution_")
        pts, planar = check_points(X)
        out = solver.evaluate_map(self.solution_, PointCloud(pts)).points
        return _pack_points(out, planar)

    def inverse_transform(self, X, tol: float = 1e-9):
        """Map points back through phi^-1 (Newton inversion)."""
        check_is_fitted(self, "solution_")
        pts, planar = check_points(X)
        out = solver.invert_points(self.solution_, pts, tol=tol)
        return _pack_points(out, planar)


class BoxCountingDimension(BaseEstimator):
    """Box-counting dimension estimator for planar point clouds.

    Parameters
    ----------
    scales : sequence of float, optional
        Box sides for the log-log fit.  The default is the dyadic ladder
        2^-2 .. 2^-8.

    Attributes
    ----------
    dimension_, intercept_, r_squared_ : float
    fit_result_ : DimensionFit
    """

    def __init__(self, scales=None):
        self.scales = scales

    def fit(self, X, y=None):
        del y
        pts, _ = check_points(X)
        scales = self.scales if self.scales is not None else [2.0 ** (-k) for k in range(2, 9)]
        self.fit_result_ = measure.box_dimension(PointCloud(pts), scales)
        self.dimension_ = self.fit_result_.slope
        self.intercept_ = self.fit_result_.intercept
        self.r_squared_ = self.fit_result_.r_squared
        return self
