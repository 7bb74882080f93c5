"""Tensor-product Cartesian meshes, cell-local orthogonal DG bases and sweep orderings."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np


class SpaceKind(enum.Enum):
    P0 = "p0"
    P1 = "p1"
    Q1 = "q1"
    LM = "lm"
    RLM = "rlm"

    @classmethod
    def parse(cls, value: "str | SpaceKind") -> "SpaceKind":
        if isinstance(value, SpaceKind):
            return value
        return cls(value.lower())

    @property
    def low_memory(self) -> bool:
        return self in (SpaceKind.LM, SpaceKind.RLM)


@dataclass(frozen=True)
class CartesianMesh:
    """Axis-aligned tensor mesh given by node coordinates per axis.

    Cells are numbered in C order over the axis indices, i.e. in 2D cell
    ``(i, j)`` has index ``i * ny + j``.
    """

    nodes: tuple[np.ndarray, ...]

    def __post_init__(self):
        nodes = tuple(np.asarray(n, dtype=float) for n in self.nodes)
        if len(nodes) not in (1, 2):
            raise ValueError("only 1D and 2D meshes are supported")
        for n in nodes:
            if n.ndim != 1 or len(n) < 2:
                raise ValueError("each axis needs at least two nodes")
            if np.any(np.diff(n) <= 0):
                raise ValueError("degenerate domain: node coordinates must increase strictly")
            n.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def dim(self) -> int:
        return len(self.nodes)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(len(n) - 1 for n in self.nodes)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.counts))

    @property
    def lower(self) -> np.ndarray:
        return np.array([n[0] for n in self.nodes])

    @property
    def upper(self) -> np.ndarray:
        return np.array([n[-1] for n in self.nodes])

    @cached_property
    def index(self) -> np.ndarray:
        """Axis indices of every cell, shape ``(n_cells, dim)``."""
        grids = np.meshgrid(*[np.arange(c) for c in self.counts], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def widths(self) -> np.ndarray:
        """Cell widths per axis, shape ``(n_cells, dim)``."""
        h = [np.diff(n) for n in self.nodes]
        return np.stack([h[a][self.index[:, a]] for a in range(self.dim)], axis=1)

    @cached_property
    def centers(self) -> np.ndarray:
        c = [0.5 * (n[1:] + n[:-1]) for n in self.nodes]
        return np.stack([c[a][self.index[:, a]] for a in range(self.dim)], axis=1)

    @cached_property
    def volumes(self) -> np.ndarray:
        return self.widths.prod(axis=1)

    @cached_property
    def face_areas(self) -> np.ndarray:
        """Measure of the faces normal to each axis, shape ``(n_cells, dim)``; 1 in 1D."""
        return self.volumes[:, None] / self.widths

    @cached_property
    def neighbors(self) -> np.ndarray:
        """``neighbors[c, a, s]``: cell across the lower (s=0) / upper (s=1) face, or -1."""
        out = np.full((self.n_cells, self.dim, 2), -1, dtype=np.int64)
        shape = self.counts
        for a in range(self.dim):
            for s, step in ((0, -1), (1, 1)):
                idx = self.index.copy()
                idx[:, a] += step
                ok = (idx[:, a] >= 0) & (idx[:, a] < shape[a])
                flat = np.ravel_multi_index(tuple(idx[ok].T), shape)
                out[ok, a, s] = flat
        return out

    @property
    def n_faces(self) -> int:
        total = 0
        for a in range(self.dim):
            c = list(self.counts)
            c[a] += 1
            total += int(np.prod(c))
        return total

    @property
    def n_boundary_faces(self) -> int:
        return int((self.neighbors < 0).sum())

    def interior_faces(self, axis: int) -> np.ndarray:
        """Pairs ``(lower cell, upper cell)`` sharing a face normal to ``axis``."""
        lo = np.nonzero(self.neighbors[:, axis, 1] >= 0)[0]
        return np.stack([lo, self.neighbors[lo, axis, 1]], axis=1)

    def upwind(self, signs: Sequence[float]) -> np.ndarray:
        """Upwind neighbor along each axis for a direction with the given component signs."""
        up = np.empty((self.n_cells, self.dim), dtype=np.int64)
        for a, s in enumerate(signs):
            if s == 0:
                raise ValueError("ordinate with a zero component has ambiguous upwinding")
            up[:, a] = self.neighbors[:, a, 0 if s > 0 else 1]
        return up

    def locate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Cell index and reference coordinates in [-1, 1]^d for each point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx = []
        for a, n in enumerate(self.nodes):
            i = np.searchsorted(n, pts[:, a], side="right") - 1
            idx.append(np.clip(i, 0, len(n) - 2))
        cells = np.ravel_multi_index(tuple(idx), self.counts)
        ref = 2.0 * (pts - self.centers[cells]) / self.widths[cells]
        return cells, ref

    @cached_property
    def _orders(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "counts": list(self.counts),
        }


def build_mesh(domain: Sequence, counts: Sequence[int] | int) -> CartesianMesh:
    """Uniform mesh.  ``domain`` is ``(a, b)`` in 1D or ``((ax, bx), (ay, by))`` in 2D."""
    dom = np.asarray(domain, dtype=float)
    if dom.ndim == 1:
        dom = dom[None, :]
    counts = np.atleast_1d(counts).astype(int)
    if len(counts) == 1 and len(dom) > 1:
        counts = np.repeat(counts, len(dom))
    if len(counts) != len(dom):
        raise ValueError("counts do not match the domain dimension")
    if np.any(counts < 1):
        raise ValueError("cell counts must be positive")
    if np.any(dom[:, 1] <= dom[:, 0]):
        raise ValueError("degenerate domain")
    return CartesianMesh(tuple(np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(dom, counts)))


def piecewise_uniform_1d(breaks: Sequence[float], widths: Sequence[float]) -> CartesianMesh:
    """Join uniform 1D sub-meshes; segment ``k`` spans ``breaks[k]..breaks[k+1]`` with width ``widths[k]``."""
    pieces = []
    for lo, hi, h in zip(breaks[:-1], breaks[1:], widths):
        n = int(round((hi - lo) / h))
        if n < 1 or abs(n * h - (hi - lo)) > 1e-9 * (hi - lo):
            raise ValueError(f"width {h} does not tile [{lo}, {hi}]")
        pieces.append(np.linspace(lo, hi, n + 1)[:-1])
    pieces.append(np.array([breaks[-1]]))
    return CartesianMesh((np.concatenate(pieces),))


def sweep_order(mesh: CartesianMesh, ordinate) -> np.ndarray:
    """Cells in an order where every cell follows its upwind neighbors.

    Lexicographic from the upwind corner, axis 0 outermost.  Cached on the
    mesh per sign pattern.
    """
    om = np.atleast_1d(np.asarray(ordinate, dtype=float))
    if np.any(om[: mesh.dim] == 0):
        raise ValueError("ordinate with a zero component has ambiguous upwinding")
    signs = tuple(bool(s > 0) for s in om[: mesh.dim])
    cache = mesh._orders
    if signs not in cache:
        ranges = [np.arange(c) if s else np.arange(c)[::-1] for c, s in zip(mesh.counts, signs)]
        grids = np.meshgrid(*ranges, indexing="ij")
        order = np.ravel_multi_index(tuple(g.ravel() for g in grids), mesh.counts)
        order.setflags(write=False)
        cache[signs] = order
    return cache[signs]


# ---------------------------------------------------------------------------
# cell-local bases
# ---------------------------------------------------------------------------


def _exponents(kind: SpaceKind, dim: int) -> list[tuple[int, ...]]:
    if kind is SpaceKind.P0:
        return [(0,) * dim]
    if dim == 1:
        return [(0,), (1,)]
    if kind is SpaceKind.P1:
        return [(0, 0), (1, 0), (0, 1)]
    return [(0, 0), (1, 0), (0, 1), (1, 1)]


@dataclass(frozen=True)
class BasisSet:
    """Monomials ``prod_a xi_a**e_a`` in reference coordinates xi in [-1, 1]^d.

    Legendre-orthogonal on every rectangle; function 0 is the constant and
    every other function has zero mean.
    """

    dim: int
    exponents: tuple[tuple[int, ...], ...]

    @classmethod
    def for_space(cls, kind: SpaceKind | str, dim: int) -> "BasisSet":
        kind = SpaceKind.parse(kind)
        return cls(dim, tuple(_exponents(kind, dim)))

    @property
    def n_p(self) -> int:
        return len(self.exponents)

    @property
    def mass_diag(self) -> np.ndarray:
        """``(1/|K|) int_K b_r^2``; the mass matrix is ``|K| * diag(mass_diag)``."""
        e = np.array(self.exponents)
        return np.prod(np.where(e == 1, 1.0 / 3.0, 1.0), axis=1)

    def slope_index(self, axis: int) -> int:
        """Basis index of the linear function along ``axis`` (the P1 slope)."""
        target = tuple(1 if a == axis else 0 for a in range(self.dim))
        return self.exponents.index(target)

    def values(self, xi: np.ndarray) -> np.ndarray:
        """Basis values at reference points ``xi`` of shape ``(npts, dim)``; returns ``(npts, n_p)``."""
        xi = np.atleast_2d(xi)
        e = np.array(self.exponents)
        return np.prod(np.where(e[None, :, :] == 1, xi[:, None, :], 1.0), axis=2)

    def gradients(self, xi: np.ndarray) -> np.ndarray:
        """Reference gradients, shape ``(npts, n_p, dim)``."""
        xi = np.atleast_2d(xi)
        e = np.array(self.exponents)
        npts = xi.shape[0]
        out = np.zeros((npts, self.n_p, self.dim))
        for a in range(self.dim):
            fac = np.where(e[None, :, :] == 1, xi[:, None, :], 1.0)
            fac[:, :, a] = e[None, :, a]
            out[:, :, a] = fac.prod(axis=2)
        return out


def gauss_points(dim: int, n: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre rule on [-1, 1]^dim; weights sum to ``2**dim``."""
    x, w = np.polynomial.legendre.leggauss(n)
    grids = np.meshgrid(*([x] * dim), indexing="ij")
    wgrids = np.meshgrid(*([w] * dim), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return pts, wts


def project(selector: str, v: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto cell constants (``"Pi0"``) or zero-mean parts (``"Pi1"``).

    ``v`` has the basis index last; with an orthogonal basis both maps are
    coefficient masks.
    """
    v = np.asarray(v)
    if v.ndim < 1 or v.shape[-1] < 1:
        raise ValueError("layout mismatch: basis index must be the last axis")
    out = np.zeros_like(v)
    if selector == "Pi0":
        out[..., 0] = v[..., 0]
    elif selector == "Pi1":
        out[..., 1:] = v[..., 1:]
    else:
        raise ValueError(f"unknown projection {selector!r}")
    return out
