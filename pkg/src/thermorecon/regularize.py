"""Vertex Morphing filter and sigmoid bound projection.

The design chain is ``latent -> A @ latent -> sigmoid -> temperature``; either
stage can be switched off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree
from scipy.special import expit, logit


@dataclass(frozen=True)
class Bounds:
    lower: float
    upper: float
    beta: float = 1.0

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("lower bound must be below upper bound")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")


@dataclass(frozen=True)
class FilterKernel:
    matrix: sp.csr_matrix
    radius: float
    kind: str = "linear_hat"

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def build_kernel(positions, radius: float) -> FilterKernel:
    """Row-normalised linear hat weights ``max(0, 1 - d / radius)``."""
    if not radius > 0:
        raise ValueError("radius must be > 0")
    if hasattr(positions, "nodes"):
        positions = positions.nodes
    positions = np.asarray(positions, dtype=float)
    n = len(positions)
    tree = cKDTree(positions)
    neighbours = tree.query_ball_point(positions, r=radius)
    rows, cols, vals = [], [], []
    for p, qs in enumerate(neighbours):
        qs = np.asarray(sorted(set(qs) | {p}))
        d = np.linalg.norm(positions[qs] - positions[p], axis=1)
        w = np.maximum(0.0, 1.0 - d / radius)
        keep = w > 0
        w = w[keep] / w[keep].sum()
        rows.append(np.full(keep.sum(), p))
        cols.append(qs[keep])
        vals.append(w)
    m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return FilterKernel(m.tocsr(), float(radius))


def forward_filter(kernel: FilterKernel, control) -> np.ndarray:
    control = np.asarray(control, dtype=float)
    if control.shape != (kernel.size,):
        raise ValueError(f"expected {kernel.size} values, got {control.shape}")
    return kernel.matrix @ control


def backward_filter(kernel: FilterKernel, physical_gradient) -> np.ndarray:
    physical_gradient = np.asarray(physical_gradient, dtype=float)
    if physical_gradient.shape != (kernel.size,):
        raise ValueError(f"expected {kernel.size} values, got {physical_gradient.shape}")
    return kernel.matrix.T @ physical_gradient


def sigmoid_map(s, bounds: Bounds) -> tuple[np.ndarray, np.ndarray]:
    """Temperature and its derivative for latent value(s) ``s``."""
    sig = expit(bounds.beta * np.asarray(s, dtype=float))
    span = bounds.upper - bounds.lower
    return bounds.lower + span * sig, span * bounds.beta * sig * (1.0 - sig)


def sigmoid_inverse(delta_t, bounds: Bounds) -> np.ndarray:
    phi = (np.asarray(delta_t, dtype=float) - bounds.lower) / (bounds.upper - bounds.lower)
    if np.any((phi <= 0) | (phi >= 1)):
        raise ValueError("temperature outside the open bound interval")
    return logit(phi) / bounds.beta


def chain_gradient(kernel: FilterKernel | None, bounds: Bounds | None, control, grad_dt) -> np.ndarray:
    """Pull a temperature gradient back to the latent control field."""
    grad = np.asarray(grad_dt, dtype=float)
    s = np.asarray(control, dtype=float) if kernel is None else forward_filter(kernel, control)
    if bounds is not None:
        grad = sigmoid_map(s, bounds)[1] * grad
    if kernel is not None:
        grad = backward_filter(kernel, grad)
    return grad


@dataclass
class DesignMap:
    """Map between the optimizer's design vector and nodal temperatures."""

    kernel: FilterKernel | None = None
    bounds: Bounds | None = None

    def temperature(self, control) -> np.ndarray:
        s = np.asarray(control, dtype=float) if self.kernel is None else forward_filter(self.kernel, control)
        if self.bounds is None:
            return s.copy()
        return sigmoid_map(s, self.bounds)[0]

    def pullback(self, control, grad_dt) -> np.ndarray:
        return chain_gradient(self.kernel, self.bounds, control, grad_dt)

    def initial_control(self, n: int, delta_t: float = 0.0) -> np.ndarray:
        """Constant design vector producing a uniform temperature ``delta_t``.

        Row sums of the kernel are one, so a constant latent field filters to
        itself.
        """
        if self.bounds is None:
            return np.full(n, float(delta_t))
        return np.full(n, float(sigmoid_inverse(delta_t, self.bounds)))
