"""Local weighted polynomial regression with predictive standard errors.

Memory-based smoother in the style of Cleveland's loess: a prediction at a
query point fits a weighted least-squares polynomial (degree 0, 1 or 2) to
the k = ceil(span * N) nearest data points, weighted by the tricube kernel
w = (1 - (dist / dist_max)^3)^3 in per-coordinate standardized Euclidean
distance. Each prediction exposes

  * the fitted mean b(x)' betahat(x),
  * the equivalent-kernel row l(x)' = b(x)' (B'WB)^{-1} B'W, whose entries
    sum to one and express the prediction as a weighted average of the
    responses,
  * a local noise level sigma2(x) from weighted neighborhood residuals,
  * the predictive standard error sqrt(sigma2(x)) * ||l(x)||.

The model is the data: fitting stores inputs, responses and per-coordinate
scales, nothing else.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class LoessConfig:
    """Smoothing configuration.

    span: fraction of the data in each local neighborhood, in (0, 1].
    degree: local polynomial degree (0, 1, or 2; 2 includes cross terms).
    min_neighbors: floor on neighborhood size; defaults to the basis size.
    kernel: "tricube" (default) or "uniform" distance weighting.
    """

    span: float = 0.4
    degree: int = 1
    min_neighbors: Optional[int] = None
    kernel: str = "tricube"

    def __post_init__(self):
        if not 0.0 < self.span <= 1.0:
            raise ValueError(f"span must lie in (0, 1], got {self.span}")
        if self.degree not in (0, 1, 2):
            raise ValueError(f"degree must be 0, 1, or 2, got {self.degree}")
        if self.kernel not in ("tricube", "uniform"):
            raise ValueError(f"kernel must be 'tricube' or 'uniform', got {self.kernel!r}")


def basis_size(dim: int, degree: int) -> int:
    """Number of terms in the local polynomial basis."""
    if degree == 0:
        return 1
    if degree == 1:
        return 1 + dim
    return 1 + dim + dim * (dim + 1) // 2


def _basis(x_centered: np.ndarray, degree: int) -> np.ndarray:
    """Polynomial design matrix of centered rows; first column is 1."""
    n, d = x_centered.shape
    cols = [np.ones(n)]
    if degree >= 1:
        cols.extend(x_centered[:, j] for j in range(d))
    if degree == 2:
        for j in range(d):
            for l in range(j, d):
                cols.append(x_centered[:, j] * x_centered[:, l])
    return np.column_stack(cols)


@dataclass(frozen=True)
class LoessPrediction:
    """Prediction at one query point."""

    mean: float
    stderr: float
    kernel_norm: float
    local_sigma2: float
    degenerate: bool = False  # True when the local system was singular
    kernel: Optional[np.ndarray] = field(default=None, repr=False)  # length-N row l(x)


class LoessModel:
    """Fitted (memory-based) local regression model."""

    def __init__(self, inputs: np.ndarray, responses: np.ndarray, config: LoessConfig):
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        responses = np.asarray(responses, dtype=float).ravel()
        if inputs.ndim != 2:
            raise ValueError("inputs must form an N x d matrix")
        n, d = inputs.shape
        if not 1 <= d <= 4:
            raise ValueError(f"input dimension must be 1..4, got {d}")
        if responses.shape[0] != n:
            raise ValueError(f"{n} inputs but {responses.shape[0]} responses")
        if not np.all(np.isfinite(inputs)):
            raise ValueError("inputs contain non-finite values")
        if not np.all(np.isfinite(responses)):
            raise ValueError("responses contain non-finite values")

        r = basis_size(d, config.degree)
        min_nb = config.min_neighbors if config.min_neighbors is not None else r
        if min_nb < r:
            raise ValueError(f"min_neighbors={min_nb} below basis size r={r}")
        if n < min_nb:
            raise ValueError(f"need at least {min_nb} points, got {n}")

        scales = inputs.std(axis=0, ddof=1) if n > 1 else np.ones(d)
        scales = np.where(scales > 0, scales, 1.0)  # zero-variance coordinate: scale 1

        self.inputs = inputs
        self.responses = responses
        self.config = config
        self.normalization = scales
        self._scaled = inputs / scales
        self._r = r
        self._min_neighbors = min_nb

    @property
    def n_points(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def _neighborhood_size(self) -> int:
        n = self.n_points
        k = math.ceil(self.config.span * n)
        return min(n, max(k, self._min_neighbors))

    def _predict_from_dist2(self, x: np.ndarray, dist2: np.ndarray,
                            with_kernel: bool) -> LoessPrediction:
        n = self.n_points
        r = self._r
        k = self._neighborhood_size()

        if k == n:
            d2max = dist2.max()
        else:
            d2max = np.partition(dist2, k - 1)[k - 1]
        members = np.flatnonzero(dist2 <= d2max)  # boundary ties all included
        k_size = members.size

        if self.config.kernel == "uniform" or d2max == 0.0:
            w = np.ones(k_size)
        else:
            rel = np.sqrt(dist2[members] / d2max)
            w = (1.0 - rel**3) ** 3
            np.maximum(w, 0.0, out=w)
        sw = w.sum()
        if sw <= 0.0:  # all mass on the boundary: fall back to uniform
            w = np.ones(k_size)
            sw = float(k_size)

        # Covariates centered at the query and standardized, so the fitted
        # value at x is coef[0] and the normal equations stay well scaled.
        xb = (self.inputs[members] - x) / self.normalization
        y = self.responses[members]
        B = _basis(xb, self.config.degree)
        bw = B * w[:, None]
        M = B.T @ bw
        degenerate = False
        try:
            # a = M^{-1} e1 gives the equivalent-kernel row l = w * (B a);
            # the Cholesky factorization doubles as the singularity test.
            fac = cho_factor(M, lower=True, check_finite=False)
            rhs = np.empty((r, 2))
            rhs[:, 0] = bw.T @ y
            rhs[:, 1] = 0.0
            rhs[0, 1] = 1.0
            sol = cho_solve(fac, rhs, check_finite=False)
            coef = sol[:, 0]
            l_local = w * (B @ sol[:, 1])
            mean = float(coef[0])
            resid = y - B @ coef
            r_eff = r
        except LinAlgError:
            degenerate = True
            l_local = w / sw
            mean = float(l_local @ y)
            resid = y - mean
            r_eff = 1

        dof = 1.0 - r_eff / k_size
        if dof > 0:
            sigma2 = float(w @ (resid * resid) / (sw * dof))
        else:
            sigma2 = 0.0
        sigma2 = max(sigma2, 0.0)
        knorm = float(np.sqrt(l_local @ l_local))
        stderr = math.sqrt(sigma2) * knorm

        kern = None
        if with_kernel:
            kern = np.zeros(n)
            kern[members] = l_local
        return LoessPrediction(mean, stderr, knorm, sigma2, degenerate, kern)

    def _mean_from_dist2(self, x: np.ndarray, dist2: np.ndarray) -> float:
        """Fitted mean only; skips the standard-error machinery."""
        n = self.n_points
        k = self._neighborhood_size()
        d2max = dist2.max() if k == n else np.partition(dist2, k - 1)[k - 1]
        members = np.flatnonzero(dist2 <= d2max)
        if self.config.kernel == "uniform" or d2max == 0.0:
            w = np.ones(members.size)
        else:
            rel = np.sqrt(dist2[members] / d2max)
            w = (1.0 - rel**3) ** 3
            np.maximum(w, 0.0, out=w)
        sw = w.sum()
        if sw <= 0.0:
            w = np.ones(members.size)
            sw = float(members.size)
        xb = (self.inputs[members] - x) / self.normalization
        y = self.responses[members]
        B = _basis(xb, self.config.degree)
        bw = B * w[:, None]
        try:
            fac = cho_factor(B.T @ bw, lower=True, check_finite=False)
            coef = cho_solve(fac, bw.T @ y, check_finite=False)
            return float(coef[0])
        except LinAlgError:
            return float((w @ y) / sw)

    def predict_mean(self, x) -> float:
        """Fitted mean at `x` without standard errors (fast path)."""
        x = np.asarray(x, dtype=float).ravel()
        diff = self._scaled - x / self.normalization
        dist2 = np.einsum("ij,ij->i", diff, diff)
        return self._mean_from_dist2(x, dist2)

    def predict_mean_many(self, xs) -> np.ndarray:
        """Fitted means at each row of `xs` (fast path)."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        dist2 = cdist(xs / self.normalization, self._scaled, "sqeuclidean")
        return np.array([self._mean_from_dist2(xs[j], dist2[j]) for j in range(xs.shape[0])])

    def predict(self, x, with_kernel: bool = False) -> LoessPrediction:
        """Local fit at the query point `x` (length-d array-like)."""
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != self.dim:
            raise ValueError(f"query has dimension {x.shape[0]}, model expects {self.dim}")
        if not np.all(np.isfinite(x)):
            raise ValueError("query point contains non-finite values")
        diff = self._scaled - x / self.normalization
        dist2 = np.einsum("ij,ij->i", diff, diff)
        return self._predict_from_dist2(x, dist2, with_kernel)

    def predict_many(self, xs) -> tuple[np.ndarray, np.ndarray]:
        """Means and standard errors at each row of `xs`; batch distance pass."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if xs.shape[1] != self.dim:
            raise ValueError(f"queries have dimension {xs.shape[1]}, model expects {self.dim}")
        dist2 = cdist(xs / self.normalization, self._scaled, "sqeuclidean")
        means = np.empty(xs.shape[0])
        stderrs = np.empty(xs.shape[0])
        for j in range(xs.shape[0]):
            pred = self._predict_from_dist2(xs[j], dist2[j], with_kernel=False)
            means[j] = pred.mean
            stderrs[j] = pred.stderr
        return means, stderrs


def fit(inputs, responses, config: LoessConfig = LoessConfig()) -> LoessModel:
    """Fit a loess model; the data plus per-coordinate scales are the model."""
    return LoessModel(inputs, responses, config)


def predict(model: LoessModel, x, with_kernel: bool = False) -> LoessPrediction:
    """Module-level alias for `LoessModel.predict`."""
    return model.predict(x, with_kernel=with_kernel)
