"""Restarted GMRES with a residual history."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class SolverConfig:
    """Krylov settings.  ``restart=None`` runs unrestarted GMRES.

    A restart cycle that fails to shrink the true residual below
    ``stall_factor`` times its starting value aborts the solve.
    """

    tol: float = 1e-10
    max_iter: int = 2000
    restart: int | None = 30
    stall_factor: float = 0.9

    def __post_init__(self):
        if not 0 < self.stall_factor <= 1:
            raise ValueError("stall_factor must lie in (0, 1]")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.restart is not None and self.restart < 1:
            raise ValueError("restart must be at least 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


def default_tolerance(eps: float) -> float:
    """Relative GMRES tolerance reachable in double precision.

    The reduced systems have condition numbers growing like ``eps**-2`` while
    their right-hand sides shrink like ``eps**2``; the true residual bottoms
    out near ``u / eps**2``.  The tolerance is ``1e3 u / eps**2`` clipped to
    ``[1e-10, 1e-6]``, but never below ten times that floor.
    """
    floor = np.finfo(float).eps / eps**2
    return float(max(min(1e-6, max(1e-10, 1e3 * floor)), 10.0 * floor))


def solver_config(eps: float, **overrides) -> SolverConfig:
    """Unrestarted GMRES at the attainable tolerance; diffusive problems stall when restarted."""
    opts = dict(tol=default_tolerance(eps), restart=None, max_iter=20000)
    opts.update(overrides)
    return SolverConfig(**opts)


@dataclass
class KrylovStats:
    iterations: int = 0
    residual: float = 0.0
    history: list[float] = field(default_factory=list)


class ConvergenceError(RuntimeError):
    """GMRES did not reach the tolerance; ``stats`` holds the residual history."""

    def __init__(self, message: str, stats: KrylovStats):
        super().__init__(message)
        self.stats = stats


def gmres(
    apply: Callable[[np.ndarray], np.ndarray],
    rhs: np.ndarray,
    config: SolverConfig = SolverConfig(),
    x0: np.ndarray | None = None,
    callback: Callable[[int, float], None] | None = None,
) -> tuple[np.ndarray, KrylovStats]:
    """Solve ``apply(x) = rhs`` to relative residual ``config.tol``.

    Arnoldi with classical Gram-Schmidt applied twice, Givens rotations for
    the least-squares update.  Residual norms in ``stats.history`` are
    relative to ``||rhs||``.
    """
    b = np.asarray(rhs, dtype=float).ravel()
    n = b.size
    bnorm = np.linalg.norm(b)
    stats = KrylovStats()
    if bnorm == 0.0:
        stats.history.append(0.0)
        return np.zeros(n), stats
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel().copy()
    m = min(config.restart or n, n)

    def op(v):
        y = np.array(apply(v), dtype=float).ravel()  # copy: apply may return its input
        if y.size != n:
            raise ValueError("operator dimension does not match the right-hand side")
        return y

    r = b - op(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    stats.history.append(beta / bnorm)
    while True:
        if beta <= config.tol * bnorm:
            stats.residual = beta / bnorm
            return x, stats
        if stats.iterations >= config.max_iter:
            stats.residual = beta / bnorm
            raise ConvergenceError(
                f"GMRES stalled at relative residual {stats.residual:.3e} after {stats.iterations} iterations",
                stats,
            )
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k = 0
        while k < m and stats.iterations < config.max_iter:
            w = op(V[k])
            h = V[: k + 1] @ w
            w -= h @ V[: k + 1]
            h2 = V[: k + 1] @ w
            w -= h2 @ V[: k + 1]
            h += h2
            hn = np.linalg.norm(w)
            H[: k + 1, k] = h
            H[k + 1, k] = hn
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            den = np.hypot(H[k, k], H[k + 1, k])
            cs[k], sn[k] = H[k, k] / den, H[k + 1, k] / den
            H[k, k] = den
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            k += 1
            stats.iterations += 1
            res = abs(g[k]) / bnorm
            stats.history.append(res)
            if callback is not None:
                callback(stats.iterations, res)
            if res <= config.tol or hn <= 1e-300:
                break
            V[k] = w / hn
        y = np.linalg.solve(np.triu(H[:k, :k]), g[:k]) if k else np.zeros(0)
        x += y @ V[:k]
        r = b - op(x)
        prev, beta = beta, np.linalg.norm(r)
        # the recursive estimate can undershoot the true residual; trust the latter
        stats.history[-1] = beta / bnorm
        if beta > config.tol * bnorm and beta > config.stall_factor * prev:
            # a whole cycle without progress: rounding floor or singular operator
            stats.residual = beta / bnorm
            raise ConvergenceError(
                f"GMRES stagnated at relative residual {stats.residual:.3e} after {stats.iterations} iterations",
                stats,
            )
