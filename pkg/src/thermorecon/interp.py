"""Spatial interpolation baselines: inverse-distance kNN and kriging."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import least_squares
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist, pdist

logger = logging.getLogger(__name__)

VARIOGRAM_MODELS = ("gaussian", "linear", "power")
SILL_FLOOR = 1e-12


class KrigingError(ValueError):
    pass


@dataclass
class SampleSet:
    """Point samples; coincident positions are merged by averaging."""

    positions: np.ndarray  # (n, 3)
    values: np.ndarray  # (n,)

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if pos.shape[1] < 3:
            pos = np.pad(pos, ((0, 0), (0, 3 - pos.shape[1])))
        vals = np.asarray(self.values, dtype=float).ravel()
        if len(vals) == 0:
            raise ValueError("at least one sample is required")
        if len(vals) != len(pos):
            raise ValueError("one value per position expected")
        uniq, inverse = np.unique(pos, axis=0, return_inverse=True)
        if len(uniq) < len(pos):
            inverse = inverse.ravel()
            merged = np.bincount(inverse, weights=vals) / np.bincount(inverse)
            pos, vals = uniq, merged
        self.positions, self.values = pos, vals

    def __len__(self) -> int:
        return len(self.values)

    def to_csv(self) -> str:
        lines = ["x,y,z,value"]
        lines += [f"{p[0]!r},{p[1]!r},{p[2]!r},{v!r}" for p, v in zip(self.positions.tolist(), self.values.tolist())]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- kNN


def knn_interpolate(samples: SampleSet, queries, k: int, weighting: str = "inverse_distance") -> np.ndarray:
    """Weighted average of the ``k`` nearest samples.

    Queries that coincide with a sample return that sample's value.
    """
    if not 1 <= k <= len(samples):
        raise ValueError(f"k must lie in [1, {len(samples)}]")
    if weighting not in ("uniform", "inverse_distance"):
        raise ValueError(f"unknown weighting {weighting!r}")
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if queries.shape[1] < 3:
        queries = np.pad(queries, ((0, 0), (0, 3 - queries.shape[1])))
    dist, idx = cKDTree(samples.positions).query(queries, k=k)
    dist = dist.reshape(len(queries), k)
    idx = idx.reshape(len(queries), k)
    vals = samples.values[idx]
    out = np.empty(len(queries))
    exact = dist[:, 0] == 0.0
    out[exact] = vals[exact, 0]
    rest = ~exact
    if weighting == "uniform":
        out[rest] = vals[rest].mean(axis=1)
    else:
        w = 1.0 / dist[rest]
        out[rest] = (w * vals[rest]).sum(axis=1) / w.sum(axis=1)
    return out


# ---------------------------------------------------------------- variograms


@dataclass
class Variogram:
    model: str
    nugget: float = 0.0
    sill: float = 1.0  # partial sill (gaussian) or slope/scale (linear, power)
    range: float = 1.0  # gaussian range; exponent for the power model
    degenerate: bool = False

    def __call__(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        if self.model == "gaussian":
            g = self.sill * (1.0 - np.exp(-3.0 * h**2 / self.range**2))
        elif self.model == "linear":
            g = self.sill * h
        elif self.model == "power":
            g = self.sill * h**self.range
        else:
            raise ValueError(f"unknown variogram model {self.model!r}")
        return np.where(h > 0, self.nugget + g, 0.0)


def experimental_variogram(samples: SampleSet, n_bins: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Binned semivariance: centre distance, semivariance and pair count per non-empty bin."""
    d = pdist(samples.positions)
    dv = pdist(samples.values[:, None], metric="sqeuclidean")
    if n_bins is None:
        n_bins = max(1, math.ceil(math.sqrt(len(d))))
    edges = np.linspace(0.0, d.max(), n_bins + 1)
    which = np.clip(np.digitize(d, edges[1:-1], right=True), 0, n_bins - 1)
    counts = np.bincount(which, minlength=n_bins)
    sums = np.bincount(which, weights=dv, minlength=n_bins)
    dsum = np.bincount(which, weights=d, minlength=n_bins)
    ok = counts > 0
    return dsum[ok] / counts[ok], 0.5 * sums[ok] / counts[ok], counts[ok]


def fit_variogram(samples: SampleSet, model: str = "gaussian") -> Variogram:
    """Least-squares fit of ``model`` to the binned experimental semivariogram."""
    if model not in VARIOGRAM_MODELS:
        raise ValueError(f"unknown variogram model {model!r}")
    if len(samples) < 3:
        raise ValueError("at least 3 samples are needed to fit a variogram")
    if len(np.unique(np.round(pdist(samples.positions), 12))) < 2:
        raise ValueError("at least 2 distinct pair distances are needed")
    if np.ptp(samples.values) == 0:
        warnings.warn("constant sample values: degenerate variogram fit", RuntimeWarning, stacklevel=2)
        return Variogram(model, 0.0, SILL_FLOOR, 1.0, degenerate=True)

    h, gamma, counts = experimental_variogram(samples)
    dmax = float(pdist(samples.positions).max())
    scale = float(gamma.max())
    w = np.sqrt(counts)

    if model == "gaussian":
        def resid(p):
            return w * (Variogram(model, p[0], p[1], p[2])(h) - gamma) / scale
        x0 = [0.0, scale, 0.5 * dmax]
        lb, ub = [0.0, SILL_FLOOR, 1e-6 * dmax], [np.inf, np.inf, np.inf]
    elif model == "linear":
        def resid(p):
            return w * (Variogram(model, p[0], p[1])(h) - gamma) / scale
        x0 = [0.0, scale / dmax]
        lb, ub = [0.0, SILL_FLOOR], [np.inf, np.inf]
    else:
        def resid(p):
            return w * (Variogram(model, p[0], p[1], p[2])(h) - gamma) / scale
        x0 = [0.0, scale / dmax, 1.0]
        lb, ub = [0.0, SILL_FLOOR, 1e-3], [np.inf, np.inf, 1.999]
    starts = [x0]
    if model == "gaussian":
        # the gaussian fit has local minima at large ranges; restart from shorter ones
        starts += [[0.0, scale, f * dmax] for f in (0.05, 0.1, 0.25)]
    fits = [least_squares(resid, s, bounds=(lb, ub), x_scale="jac") for s in starts]
    p = min(fits, key=lambda r: r.cost).x
    if model == "linear":
        return Variogram(model, float(p[0]), float(p[1]))
    return Variogram(model, float(p[0]), float(p[1]), float(p[2]))


# ---------------------------------------------------------------- kriging


@dataclass
class KrigingResult:
    values: np.ndarray
    variances: np.ndarray
    weights: np.ndarray  # (n_queries, n_samples)
    jittered: bool = False


def _drift_columns(samples: SampleSet) -> tuple[np.ndarray, np.ndarray]:
    """Centre and the coordinate axes along which the samples actually vary."""
    centre = samples.positions.mean(axis=0)
    spread = np.ptp(samples.positions, axis=0)
    axes = np.flatnonzero(spread > 1e-12 * max(1.0, float(spread.max())))
    return centre, axes


def _drift(points: np.ndarray, centre: np.ndarray, axes: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(len(points)), points[:, axes] - centre[axes]])


def _krige(samples: SampleSet, variogram: Variogram, queries, drift: bool) -> KrigingResult:
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if queries.shape[1] < 3:
        queries = np.pad(queries, ((0, 0), (0, 3 - queries.shape[1])))
    n = len(samples)
    if drift:
        centre, axes = _drift_columns(samples)
        f = _drift(samples.positions, centre, axes)
        f0 = _drift(queries, centre, axes)
        if n <= f.shape[1]:
            raise KrigingError(f"universal kriging needs more than {f.shape[1]} samples")
    else:
        f = np.ones((n, 1))
        f0 = np.ones((len(queries), 1))
    p = f.shape[1]
    a = np.zeros((n + p, n + p))
    a[:n, :n] = variogram(cdist(samples.positions, samples.positions))
    a[:n, n:] = f
    a[n:, :n] = f.T
    b = np.vstack([variogram(cdist(samples.positions, queries)), f0.T])

    jittered = False
    with warnings.catch_warnings():
        warnings.simplefilter("error", sla.LinAlgWarning)
        try:
            lu = sla.lu_factor(a)
            if np.min(np.abs(np.diag(lu[0]))) <= 1e-14 * np.abs(a).max():
                raise sla.LinAlgError("singular")
        except (sla.LinAlgError, sla.LinAlgWarning):
            jittered = True
            a[:n, :n] -= 1e-12 * max(1.0, float(np.abs(a).max())) * np.eye(n)
            try:
                lu = sla.lu_factor(a)
            except (sla.LinAlgError, sla.LinAlgWarning) as exc:
                cause = "coplanar or collinear samples" if drift else "duplicate samples"
                raise KrigingError(f"singular kriging system ({cause})") from exc
            logger.warning("kriging system regularised with diagonal jitter")
    sol = sla.lu_solve(lu, b)
    lam = sol[:n].T
    mu = sol[n:].T
    values = lam @ samples.values
    variances = np.einsum("qi,iq->q", lam, b[:n]) + np.einsum("qj,qj->q", mu, f0)
    return KrigingResult(values, variances, lam, jittered)


def ordinary_kriging(samples: SampleSet, variogram: Variogram, queries) -> KrigingResult:
    return _krige(samples, variogram, queries, drift=False)


def universal_kriging(samples: SampleSet, variogram: Variogram, queries) -> KrigingResult:
    """Kriging with a regional-linear drift in the coordinates."""
    return _krige(samples, variogram, queries, drift=True)


# ---------------------------------------------------------------- fields

METHODS = ("knn", "ok", "uk")


def interpolate_field(positions, samples: SampleSet, method: str, **params) -> np.ndarray:
    """Evaluate a baseline interpolant at every node position.

    ``params``: ``k`` and ``weighting`` for kNN; ``variogram`` (a
    :class:`Variogram` or model name, default gaussian) for kriging.
    """
    if hasattr(positions, "nodes"):
        positions = positions.nodes
    positions = np.asarray(positions, dtype=float)
    if method == "knn":
        k = min(params.get("k", 3), len(samples))
        return knn_interpolate(samples, positions, k, params.get("weighting", "inverse_distance"))
    if method not in ("ok", "uk"):
        raise ValueError(f"method must be one of {METHODS}")
    if np.ptp(samples.values) == 0:
        # constant samples: every unbiased interpolant returns the constant
        return np.full(len(positions), samples.values[0])
    variogram = params.get("variogram", "gaussian")
    if isinstance(variogram, str):
        variogram = fit_variogram(samples, variogram)
    krige = ordinary_kriging if method == "ok" else universal_kriging
    return krige(samples, variogram, positions).values
