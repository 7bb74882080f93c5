"""Compiled inner loops for block application and transport sweeps."""

import numpy as np
from numba import njit


@njit(cache=True)
def apply_transport(A, C, face, cls, upw, octs, w, rsel, csel, u, out):
    n_o, n_x = u.shape[0], u.shape[1]
    d = face.shape[1]
    nr, nc = rsel.shape[0], csel.shape[0]
    for l in range(n_o):
        o = octs[l]
        for c in range(n_x):
            k = cls[c]
            for i in range(nr):
                r = rsel[i]
                acc = 0.0
                for j in range(nc):
                    acc += A[l, k, r, csel[j]] * u[l, c, j]
                for a in range(d):
                    n = upw[o, c, a]
                    if n >= 0:
                        f = face[c, a]
                        for j in range(nc):
                            acc += f * C[l, a, r, csel[j]] * u[l, n, j]
                out[l, c, i] = w[l] * acc


@njit(cache=True)
def sweep(Ainv, C, face, cls, upw, octs, orders, w, sel, rhs, out):
    """Solve the block lower-triangular system cell by cell in sweep order.

    ``Ainv[l, k]`` is the inverse of the local matrix restricted to ``sel``.
    """
    n_o, n_x, m = rhs.shape
    d = face.shape[1]
    b = np.empty(m)
    for l in range(n_o):
        o = octs[l]
        for t in range(n_x):
            c = orders[o, t]
            for i in range(m):
                b[i] = rhs[l, c, i] / w[l]
            for a in range(d):
                n = upw[o, c, a]
                if n >= 0:
                    f = face[c, a]
                    for i in range(m):
                        acc = 0.0
                        for j in range(m):
                            acc += C[l, a, sel[i], sel[j]] * out[l, n, j]
                        b[i] -= f * acc
            k = cls[c]
            for i in range(m):
                acc = 0.0
                for j in range(m):
                    acc += Ainv[l, k, i, j] * b[j]
                out[l, c, i] = acc


@njit(cache=True)
def sweep_reconstructed(A, C, face, cls, upw, octs, orders, w, sidx,
                        s_self, s_i1, s_c1, s_i2, s_c2, rhs, u, loc):
    """Sweep for the cell-average block with reconstructed slopes folded in.

    Unknown per cell is the average ``u``; its slope coefficients along each
    axis are ``s_self*u + s_c1*u[s_i1] + s_c2*u[s_i2]`` (upwind cells only,
    so they are known when the cell is reached).  ``loc`` receives the full
    local vector (average, reconstructed slopes, zeros elsewhere).
    """
    n_o, n_x = rhs.shape
    d = face.shape[1]
    n_p = A.shape[2]
    for l in range(n_o):
        o = octs[l]
        for t in range(n_x):
            c = orders[o, t]
            k = cls[c]
            b = rhs[l, c] / w[l]
            diag = A[l, k, 0, 0]
            for a in range(d):
                r = sidx[a]
                a0r = A[l, k, 0, r]
                diag += a0r * s_self[o, c, a]
                i1 = s_i1[o, c, a]
                if i1 >= 0:
                    b -= a0r * s_c1[o, c, a] * u[l, i1]
                i2 = s_i2[o, c, a]
                if i2 >= 0:
                    b -= a0r * s_c2[o, c, a] * u[l, i2]
                n = upw[o, c, a]
                if n >= 0:
                    acc = 0.0
                    for s in range(n_p):
                        acc += C[l, a, 0, s] * loc[l, n, s]
                    b -= face[c, a] * acc
            uc = b / diag
            u[l, c] = uc
            for s in range(n_p):
                loc[l, c, s] = 0.0
            loc[l, c, 0] = uc
            for a in range(d):
                v = s_self[o, c, a] * uc
                i1 = s_i1[o, c, a]
                if i1 >= 0:
                    v += s_c1[o, c, a] * u[l, i1]
                i2 = s_i2[o, c, a]
                if i2 >= 0:
                    v += s_c2[o, c, a] * u[l, i2]
                loc[l, c, sidx[a]] = v
