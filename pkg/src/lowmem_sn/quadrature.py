"""Discrete-ordinate angular quadrature sets.

Weights are normalized to sum to one, so the scalar flux is the plain
weighted sum ``sum_j w_j psi_j``.  Every rule built here is exact for
polynomials of degree two in the direction, centrally symmetric, and has
no ordinate parallel to a mesh face.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class AngularQuadrature:
    """Ordinates ``omega`` (shape ``(n, dim)``) and positive weights ``weights``."""

    dim: int
    ordinates: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        ords = np.array(self.ordinates, dtype=float).reshape(len(self.weights), -1)
        w = np.array(self.weights, dtype=float)
        if ords.shape[1] != self.dim:
            raise ValueError(f"ordinates have {ords.shape[1]} components, expected {self.dim}")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")
        ords.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "ordinates", ords)
        object.__setattr__(self, "weights", w)

    @property
    def n_omega(self) -> int:
        return len(self.weights)

    @property
    def mu(self) -> np.ndarray:
        """First direction component (the slab cosine in 1D)."""
        return self.ordinates[:, 0]

    def octant(self) -> np.ndarray:
        """Sign-pattern index per ordinate; bit ``a`` set when component ``a`` is negative."""
        neg = (self.ordinates < 0).astype(int)
        return (neg * (1 << np.arange(self.dim))).sum(axis=1)

    def partner(self) -> np.ndarray:
        """Index of the ordinate ``-omega_j`` for each ``j`` (``-1`` when absent)."""
        out = np.full(self.n_omega, -1)
        for j, om in enumerate(self.ordinates):
            d = np.abs(self.ordinates + om).max(axis=1)
            k = int(np.argmin(d))
            if d[k] < 1e-13 and abs(self.weights[k] - self.weights[j]) < 1e-14:
                out[j] = k
        return out

    def to_csv(self, path: str | Path) -> None:
        names = ["omega_x", "omega_y", "omega_z"][: self.dim] + ["weight"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(names)
            for om, w in zip(self.ordinates, self.weights):
                writer.writerow([repr(float(c)) for c in om] + [repr(float(w))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "AngularQuadrature":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(c) for c in r] for r in rows[1:]])
        return cls(dim=data.shape[1] - 1, ordinates=data[:, :-1], weights=data[:, -1])


@dataclass(frozen=True)
class MomentReport:
    weight_residual: float
    first_moment_residual: float
    second_moment_residual: float
    centrally_symmetric: bool
    nondegenerate: bool
    tol: float

    @property
    def passed(self) -> bool:
        return (
            max(self.weight_residual, self.first_moment_residual, self.second_moment_residual)
            <= self.tol
        )


def check_moments(q: AngularQuadrature, tol: float = 1e-12) -> MomentReport:
    w, om = q.weights, q.ordinates
    r0 = abs(w.sum() - 1.0)
    r1 = float(np.abs(w @ om).max())
    second = np.einsum("j,ja,jb->ab", w, om, om)
    r2 = float(np.abs(second - np.eye(q.dim) / 3.0).max())
    return MomentReport(
        weight_residual=float(r0),
        first_moment_residual=r1,
        second_moment_residual=r2,
        centrally_symmetric=bool(np.all(q.partner() >= 0)),
        nondegenerate=bool(np.abs(om).min() > 0),
        tol=tol,
    )


def gauss_legendre_slab(n: int) -> AngularQuadrature:
    """``n``-point Gauss-Legendre rule on [-1, 1] with weights summing to one."""
    if n < 2 or n % 2:
        raise ValueError(f"slab quadrature needs an even number of points >= 2, got {n}")
    mu, w = np.polynomial.legendre.leggauss(n)
    w = w / 2.0
    # leggauss is symmetric to rounding; enforce it exactly
    mu = 0.5 * (mu - mu[::-1])
    w = 0.5 * (w + w[::-1])
    return AngularQuadrature(dim=1, ordinates=mu[:, None], weights=w)


def product_sphere_disk(n_polar: int, n_azimuth: int) -> AngularQuadrature:
    """Product rule on the upper unit hemisphere projected to the disk.

    Gauss-Legendre in the polar cosine over (0, 1) times ``n_azimuth``
    equally spaced azimuths offset by ``pi / n_azimuth``.
    """
    if n_polar < 2 or n_polar % 2:
        raise ValueError("n_polar must be an even integer >= 2")
    if n_azimuth < 4 or n_azimuth % 2:
        raise ValueError("n_azimuth must be an even integer >= 4")
    x, wx = np.polynomial.legendre.leggauss(n_polar)
    cos_t = 0.5 * (x + 1.0)
    w_t = 0.5 * wx
    sin_t = np.sqrt(1.0 - cos_t**2)
    # phi_k is a multiple of pi/2 iff 2(2k+1) is divisible by n_azimuth
    if np.any((2 * (2 * np.arange(n_azimuth) + 1)) % n_azimuth == 0):
        raise ValueError(f"n_azimuth={n_azimuth} yields an axis-aligned ordinate")
    # build half the azimuths and mirror, so central symmetry holds bitwise
    phi = (2 * np.arange(n_azimuth // 2) + 1) * np.pi / n_azimuth
    half = np.stack(
        [np.outer(sin_t, np.cos(phi)).ravel(), np.outer(sin_t, np.sin(phi)).ravel()], axis=1
    )
    om = np.concatenate([half, -half])
    w_half = np.outer(w_t, np.full(n_azimuth // 2, 1.0 / n_azimuth)).ravel()
    w = np.concatenate([w_half, w_half])
    q = AngularQuadrature(dim=2, ordinates=om, weights=w / w.sum())
    rep = check_moments(q, tol=1e-12)
    if not rep.passed:
        raise ValueError(f"product rule ({n_polar}, {n_azimuth}) fails the moment check: {rep}")
    return q
