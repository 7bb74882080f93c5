"""Upwind slope reconstruction from cell averages.

For every ordinate and axis the P1 slope of a cell is rebuilt from its own
average and the averages of upwind cells along that axis.  Slopes are stored
as coefficients of the local basis functions ``xi_a``, i.e. ``(h_a / 2)``
times the physical slope.  The reconstruction splits into a linear map ``R``
on averages and a data vector ``r_alpha`` carrying the inflow values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .assembly import BlockSystem, _as_angular_field
from .mesh import CartesianMesh

Suppression = Union[str, Sequence[tuple[int, float]]]


@dataclass(frozen=True)
class ReconstructionSpec:
    """Stencil choice and faces across which reconstruction is disabled.

    ``suppress`` is ``"auto"`` (faces where a cross section jumps),
    ``"none"``, or a list of ``(axis, coordinate)`` pairs naming mesh planes.
    """

    stencil: str = "two"
    suppress: Suppression = "auto"

    def __post_init__(self):
        if self.stencil not in ("two", "three"):
            raise ValueError(f"unknown stencil {self.stencil!r}")
        if isinstance(self.suppress, str) and self.suppress not in ("auto", "none"):
            raise ValueError(f"unknown suppression mode {self.suppress!r}")


def suppression_mask(system: BlockSystem, suppress: Suppression) -> np.ndarray:
    """``mask[c, a, s]`` is True when the face of cell ``c`` on side ``s`` of axis ``a`` is blocked."""
    mesh = system.mesh
    nb = mesh.neighbors
    mask = np.zeros(nb.shape, dtype=bool)
    if isinstance(suppress, str):
        if suppress == "none":
            return mask
        for s in (0, 1):
            ok = nb[:, :, s] >= 0
            other = np.where(ok, nb[:, :, s], 0)
            jump = (system.sigma_s[other] != system.sigma_s[:, None]) | (
                system.sigma_a[other] != system.sigma_a[:, None]
            )
            mask[:, :, s] = ok & jump
        return mask
    for axis, coord in suppress:
        nodes = mesh.nodes[axis]
        k = int(np.argmin(np.abs(nodes - coord)))
        if abs(nodes[k] - coord) > 1e-9 * (nodes[-1] - nodes[0]):
            raise ValueError(f"no mesh plane at coordinate {coord} on axis {axis}")
        i = mesh.index[:, axis]
        mask[i == k, axis, 0] = True
        mask[i == k - 1, axis, 1] = True
    return mask


def _fit_weights(lo: np.ndarray, hi: np.ndarray, h_self: float) -> np.ndarray:
    """Weights mapping cell averages to the slope coefficient of the fitted polynomial.

    ``lo``/``hi`` are cell bounds relative to the centre of the target cell;
    the polynomial of degree ``len(lo) - 1`` matches all averages.
    """
    k = len(lo)
    m = np.arange(k)
    V = (hi[:, None] ** (m + 1) - lo[:, None] ** (m + 1)) / ((m + 1) * (hi - lo)[:, None])
    return 0.5 * h_self * np.linalg.inv(V)[1]


@dataclass
class Reconstruction:
    """Stencil tables per octant and the inflow vector per ordinate.

    The slope coefficient of cell ``c`` along axis ``a`` for an ordinate in
    octant ``o`` is ``self_w*u[c] + w1*u[i1] + w2*u[i2]`` (absent cells have
    index -1) plus ``r_alpha``.
    """

    system: BlockSystem
    spec: ReconstructionSpec
    slope_index: np.ndarray   # (dim,) basis index of each axis slope
    self_w: np.ndarray        # (n_oct, n_cells, dim)
    i1: np.ndarray
    w1: np.ndarray
    i2: np.ndarray
    w2: np.ndarray
    r_alpha: np.ndarray       # (n_omega, n_cells, n_p - 1)

    def apply_R(self, u0: np.ndarray) -> np.ndarray:
        """Linear part: averages ``(n_omega, n_cells)`` to slope block ``(n_omega, n_cells, n_p-1)``."""
        s = self.system
        u0 = np.asarray(u0, dtype=float).reshape(s.n_omega, s.n_cells)
        out = np.zeros((s.n_omega, s.n_cells, s.n_p - 1))
        for o in np.unique(s.octant):
            ls = np.nonzero(s.octant == o)[0]
            u = u0[ls]
            for a, r in enumerate(self.slope_index):
                v = self.self_w[o, :, a] * u
                for idx, w in ((self.i1, self.w1), (self.i2, self.w2)):
                    ok = idx[o, :, a] >= 0
                    v[:, ok] += w[o, ok, a] * u[:, idx[o, ok, a]]
                out[ls, :, r - 1] = v
        return out

    def deviation(self, slopes: np.ndarray) -> np.ndarray:
        """``(I - Sigma^T P1)``: subtract the weighted ordinate mean."""
        mean = np.tensordot(self.system.weights, slopes, axes=(0, 0))
        return slopes - mean[None]


def _axis_tables(mesh: CartesianMesh, axis: int):
    """Per-axis two- and three-cell weights for both sweep directions.

    Returns dicts keyed by direction sign with arrays over the axis index;
    rows are ``(self, up1[, up2])`` weights, NaN where the stencil leaves the mesh.
    """
    x = mesh.nodes[axis]
    n = len(x) - 1
    two, three = {}, {}
    for sg in (1, -1):
        t2 = np.full((n, 2), np.nan)
        t3 = np.full((n, 3), np.nan)
        for i in range(n):
            c = 0.5 * (x[i] + x[i + 1])
            h = x[i + 1] - x[i]
            cells = [i, i - sg, i - 2 * sg]
            valid = [0 <= k < n for k in cells]
            lo = np.array([x[k] - c for k in cells if 0 <= k < n])
            hi = np.array([x[k + 1] - c for k in cells if 0 <= k < n])
            if valid[1]:
                t2[i] = _fit_weights(lo[:2], hi[:2], h)
            if valid[1] and valid[2]:
                t3[i] = _fit_weights(lo, hi, h)
        two[sg], three[sg] = t2, t3
    return two, three


def build_reconstruction(system: BlockSystem, spec: ReconstructionSpec | None = None) -> Reconstruction:
    spec = spec or ReconstructionSpec()
    mesh, basis = system.mesh, system.basis
    d, nx = mesh.dim, mesh.n_cells
    if basis.n_p < d + 1:
        raise ValueError("reconstruction needs a local space with linear slopes")
    mask = suppression_mask(system, spec.suppress)
    n_oct = 1 << d
    shape = (n_oct, nx, d)
    self_w, w1, w2 = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    i1 = np.full(shape, -1, dtype=np.int64)
    i2 = np.full(shape, -1, dtype=np.int64)
    boundary = np.zeros(shape, dtype=bool)
    sidx = np.array([basis.slope_index(a) for a in range(d)])
    cells = np.arange(nx)
    for a in range(d):
        two, three = _axis_tables(mesh, a)
        ia = mesh.index[:, a]
        for o in range(n_oct):
            sg = -1 if (o >> a) & 1 else 1
            side = 0 if sg > 0 else 1
            up1 = system.upwind[o][:, a]
            blocked1 = mask[cells, a, side]
            at_bnd = up1 < 0
            # half-cell difference against the inflow value
            bnd = at_bnd & ~blocked1
            self_w[o, bnd, a] = sg
            boundary[o, bnd, a] = True
            inner = ~at_bnd & ~blocked1
            up2 = np.where(inner, system.upwind[o][np.where(inner, up1, 0), a], -1)
            use3 = inner & (up2 >= 0) if spec.stencil == "three" else np.zeros(nx, dtype=bool)
            if spec.stencil == "three":
                use3 &= ~mask[np.where(use3, up1, 0), a, side]
            use2 = inner & ~use3
            t2, t3 = two[sg][ia], three[sg][ia]
            self_w[o, use2, a] = t2[use2, 0]
            w1[o, use2, a] = t2[use2, 1]
            i1[o, use2, a] = up1[use2]
            self_w[o, use3, a] = t3[use3, 0]
            w1[o, use3, a] = t3[use3, 1]
            w2[o, use3, a] = t3[use3, 2]
            i1[o, use3, a] = up1[use3]
            i2[o, use3, a] = up2[use3]

    r_alpha = np.zeros((system.n_omega, nx, basis.n_p - 1))
    for l, om in enumerate(system.quad.ordinates):
        o = system.octant[l]
        for a in range(d):
            cs = np.nonzero(boundary[o, :, a])[0]
            if len(cs) == 0:
                continue
            sg = 1.0 if om[a] > 0 else -1.0
            pts = mesh.centers[cs].copy()
            pts[:, a] -= sg * 0.5 * mesh.widths[cs, a]
            alpha = _as_angular_field(system.problem.inflow, om, pts)
            r_alpha[l, cs, sidx[a] - 1] = -sg * alpha
    return Reconstruction(system, spec, sidx, self_w, i1, w1, i2, w2, r_alpha)


def reconstruct_slopes(rec: Reconstruction, averages: np.ndarray) -> np.ndarray:
    """Full reconstructed slope block ``R u + r_alpha`` for per-ordinate averages."""
    return rec.apply_R(averages) + rec.r_alpha


def apply_rstar(rec: Reconstruction, v0: np.ndarray, include_inflow: bool = False) -> np.ndarray:
    """Anisotropic slope deviation of the reconstruction of ``v0``.

    The weighted ordinate mean of the result vanishes cellwise.  Without
    ``include_inflow`` the map is linear and sends zero to zero.
    """
    s = rec.apply_R(v0)
    if include_inflow:
        s = s + rec.r_alpha
    return rec.deviation(s)
