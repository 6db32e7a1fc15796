"""Smoothness bookkeeping: anisotropic Hoelder parameters, rate exponents,
and a numerical bias oracle for models with known targets."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import Bandwidth, KernelSpec

__all__ = ["HolderParams", "rate_exponent", "phi", "bias_oracle"]


@dataclass(frozen=True)
class HolderParams:
    """Coordinatewise smoothness indices beta_i with constants L_i."""

    beta: tuple
    L: tuple = None

    def __post_init__(self):
        beta = tuple(float(b) for b in np.atleast_1d(np.asarray(self.beta, dtype=float)))
        if any(b <= 0 for b in beta):
            raise ValueError("smoothness indices must be positive")
        object.__setattr__(self, "beta", beta)
        if self.L is None:
            object.__setattr__(self, "L", tuple(1.0 for _ in beta))
        else:
            L = tuple(float(v) for v in np.atleast_1d(np.asarray(self.L, dtype=float)))
            if len(L) != len(beta):
                raise ValueError("L must match beta in length")
            object.__setattr__(self, "L", L)

    @classmethod
    def isotropic(cls, beta: float, d: int) -> "HolderParams":
        return cls(beta=(float(beta),) * d)

    @property
    def d(self) -> int:
        return len(self.beta)

    @property
    def beta_bar(self) -> float:
        """Harmonic mean d / sum(1/beta_i), recomputed on access."""
        return self.d / sum(1.0 / b for b in self.beta)


def rate_exponent(params: HolderParams, d: int | None = None) -> float:
    """Exponent beta_bar / (2 beta_bar + d) of the sup-norm convergence rate."""
    if d is None:
        d = params.d
    elif d != params.d:
        raise ValueError(f"d={d} does not match len(beta)={params.d}")
    bb = params.beta_bar
    return bb / (2.0 * bb + d)


def phi(T: float, d: int, params: HolderParams | None = None) -> float:
    """The ridge scale function: log(T)/sqrt(T) for d<=2, else
    (log(T)/T)^(beta_bar/(2 beta_bar + d - 2))."""
    if T < 3:
        raise ValueError("phi requires T >= 3")
    if d <= 2:
        return math.log(T) / math.sqrt(T)
    if params is None:
        raise ValueError("d >= 3 requires smoothness parameters")
    bb = params.beta_bar
    return (math.log(T) / T) ** (bb / (2.0 * bb + d - 2.0))


def _axis_nodes(kernel: KernelSpec, min_nodes_per_axis: int = 64):
    """Gauss-Legendre nodes/weights on [-1/2,1/2], panelled at kernel kinks."""
    breaks = kernel.breaks
    n_pieces = len(breaks) - 1
    per_piece = max(int(math.ceil(min_nodes_per_axis / n_pieces)), kernel.degree + 1)
    base_nodes, base_weights = np.polynomial.legendre.leggauss(per_piece)
    nodes, weights = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        half = (hi - lo) / 2.0
        mid = (hi + lo) / 2.0
        nodes.append(mid + half * base_nodes)
        weights.append(half * base_weights)
    return np.concatenate(nodes), np.concatenate(weights)


def bias_oracle(target, kernel: KernelSpec, h: Bandwidth, grid) -> float:
    """sup over the grid of |target - target * K_h| computed by tensorized
    quadrature at kernel resolution (>= 64 nodes per axis).

    ``target`` must be vectorized over points shaped (..., d).  It is
    evaluated on the h-enlargement of the grid, so it has to be defined there.
    """
    pts = np.asarray(grid, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    d = h.d
    if pts.shape[1] != d:
        raise ValueError("grid dimension does not match bandwidth")

    nodes_1d, weights_1d = _axis_nodes(kernel)
    kvals_1d = kernel.evaluator(nodes_1d)

    mesh = np.meshgrid(*([nodes_1d] * d), indexing="ij")
    u = np.stack([m.ravel() for m in mesh], axis=-1)          # (P, d)
    wmesh = np.meshgrid(*([weights_1d] * d), indexing="ij")
    kmesh = np.meshgrid(*([kvals_1d] * d), indexing="ij")
    w = np.ones(u.shape[0])
    for i in range(d):
        w *= wmesh[i].ravel() * kmesh[i].ravel()              # weights * prod k(u_i)

    shifted = pts[:, None, :] - u[None, :, :] * h.as_array()  # (m, P, d)
    conv = np.einsum("mp,p->m", np.asarray(target(shifted), dtype=float), w)
    direct = np.asarray(target(pts), dtype=float)
    return float(np.max(np.abs(direct - conv)))
