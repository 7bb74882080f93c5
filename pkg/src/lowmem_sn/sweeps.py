"""Transport sweeps: exact inversion of the block lower-triangular L blocks."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from . import _kernels
from .assembly import BlockSystem

if TYPE_CHECKING:
    from .reconstruction import Reconstruction

VARIANTS = ("full", "00", "tilde00")


class SweepPlan:
    """Cell orders and local inverses for one of the sweepable blocks.

    ``"full"`` inverts L, ``"00"`` the cell-average block L00 and
    ``"tilde00"`` the block ``L00 + L01 R`` with the reconstruction folded
    into the marching update.  Local matrices are inverted once per
    (ordinate, cell class) at construction.
    """

    def __init__(self, system: BlockSystem, variant: str = "full", rec: "Reconstruction | None" = None):
        if variant not in VARIANTS:
            raise ValueError(f"unknown sweep variant {variant!r}")
        if variant == "tilde00" and rec is None:
            raise ValueError("the reconstructed sweep needs a reconstruction")
        self.system = system
        self.variant = variant
        self.rec = rec
        if variant == "full":
            self.sel = np.arange(system.n_p, dtype=np.int64)
        else:
            self.sel = np.zeros(1, dtype=np.int64)
        if variant != "tilde00":
            sub = system.local[:, :, self.sel[:, None], self.sel[None, :]]
            self.local_inverse = np.ascontiguousarray(np.linalg.inv(sub))

    @property
    def block_shape(self) -> tuple[int, ...]:
        s = self.system
        if self.variant == "full":
            return (s.n_omega, s.n_cells, s.n_p)
        return (s.n_omega, s.n_cells)

    def invert(self, rhs: np.ndarray) -> np.ndarray:
        s = self.system
        rhs = np.ascontiguousarray(np.asarray(rhs, dtype=float).reshape(self.block_shape))
        args = (s.coupling, s.mesh.face_areas, s.cell_class, s.upwind, s.octant, s.orders, s.weights)
        if self.variant == "tilde00":
            r = self.rec
            u = np.empty_like(rhs)
            loc = np.empty((s.n_omega, s.n_cells, s.n_p))
            _kernels.sweep_reconstructed(
                s.local, *args, r.slope_index.astype(np.int64),
                r.self_w, r.i1, r.w1, r.i2, r.w2, rhs, u, loc,
            )
            return u
        b = rhs if self.variant == "full" else rhs[..., None]
        out = np.empty_like(b)
        _kernels.sweep(self.local_inverse, *args, self.sel, b, out)
        return out if self.variant == "full" else out[..., 0]


def invert_transport_block(plan: SweepPlan | BlockSystem, rhs: np.ndarray, block: str | None = None) -> np.ndarray:
    """Solve ``block * x = rhs`` by sweeping; ``rhs`` carries the ordinate weights like L.

    Accepts a prepared plan, or a system plus the variant name.
    """
    if isinstance(plan, BlockSystem):
        plan = SweepPlan(plan, block or "full")
    elif block is not None and block != plan.variant:
        raise ValueError("plan variant does not match the requested block")
    return plan.invert(rhs)
