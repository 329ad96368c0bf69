"""Compiled pairwise kernels.

Every radial potential is reduced to a profile ``phi(r^2)`` with
``grad K(x) = phi(|x|^2) * x``.  Potential kinds are dispatched by an integer
code so a single compiled loop serves all of them.
"""
import threading

import numpy as np
from numba import njit

GAUSSIAN_ATTRACTIVE = 0
GAUSSIAN_PAIR = 1
SMOOTHED_MORSE = 2
QUADRATIC_WITH_CUTOFF = 3


@njit(cache=True)
def radial_profile(kind, p, r2):
    if kind == GAUSSIAN_ATTRACTIVE:
        # p = (A, s)
        return p[0] / (p[1] * p[1]) * np.exp(-0.5 * r2 / (p[1] * p[1]))
    elif kind == GAUSSIAN_PAIR:
        # p = (Ca, la, Cr, lr)
        la2 = p[1] * p[1]
        lr2 = p[3] * p[3]
        return p[0] / la2 * np.exp(-0.5 * r2 / la2) - p[2] / lr2 * np.exp(-0.5 * r2 / lr2)
    elif kind == SMOOTHED_MORSE:
        # p = (Ca, la, Cr, lr, delta)
        q = np.sqrt(r2 + p[4] * p[4])
        return (p[0] / p[1] * np.exp(-q / p[1]) - p[2] / p[3] * np.exp(-q / p[3])) / q
    else:
        # p = (R1, width, tail gradient)
        R1 = p[0]
        if r2 <= R1 * R1:
            return 1.0
        r = np.sqrt(r2)
        if r >= R1 + p[1]:
            return p[2] / r
        u = (r - R1) / p[1]
        s = u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
        return (r * (1.0 - s) + p[2] * s) / r


# reassociation lets LLVM vectorize the row reductions; the compiled order is
# fixed, so results stay reproducible run to run
_FASTMATH = {"reassoc", "contract", "nsz"}

# pair distances are processed in blocks of at most this many entries
PAIR_BLOCK = 1 << 20


@njit(cache=True)
def _scalar_profiles(kind, p, r2, out):
    for j in range(r2.size):
        out[j] = radial_profile(kind, p, r2[j])


def profile_values(kind, p, r2, out=None, scratch=None):
    """phi(r2) for an array of squared distances, written into ``out``.

    Exponential kinds go through numpy ufuncs (SIMD exp) working in place in
    preallocated buffers; the piecewise quadratic profile uses the compiled
    scalar version.
    """
    if out is None:
        out = np.empty_like(r2)
    if kind == GAUSSIAN_ATTRACTIVE:
        s2 = p[1] * p[1]
        np.multiply(r2, -0.5 / s2, out=out)
        np.exp(out, out=out)
        out *= p[0] / s2
    elif kind == GAUSSIAN_PAIR:
        if scratch is None:
            scratch = np.empty_like(r2)
        la2, lr2 = p[1] * p[1], p[3] * p[3]
        np.multiply(r2, -0.5 / la2, out=out)
        np.exp(out, out=out)
        out *= p[0] / la2
        np.multiply(r2, -0.5 / lr2, out=scratch)
        np.exp(scratch, out=scratch)
        scratch *= p[2] / lr2
        out -= scratch
    elif kind == SMOOTHED_MORSE:
        if scratch is None:
            scratch = np.empty_like(r2)
        q = r2 + p[4] * p[4]
        np.sqrt(q, out=q)
        np.multiply(q, -1.0 / p[1], out=out)
        np.exp(out, out=out)
        out *= p[0] / p[1]
        np.multiply(q, -1.0 / p[3], out=scratch)
        np.exp(scratch, out=scratch)
        scratch *= p[2] / p[3]
        out -= scratch
        out /= q
    else:
        _scalar_profiles(kind, p, r2, out)
    return out


class _Workspace(threading.local):
    """Per-thread pair buffers, reused across calls to avoid page-faulting
    fresh multi-megabyte arrays on every force evaluation."""

    def __init__(self):
        self.size = 0
        self.bufs = ()

    def get(self, size):
        if size > self.size:
            self.bufs = tuple(np.empty(size) for _ in range(3))
            self.size = size
        return tuple(b[:size] for b in self.bufs)


_workspace = _Workspace()


@njit(cache=True)
def _r2_row(xt, i, seg):
    seg[:] = 0.0
    for k in range(xt.shape[0]):
        xi = xt[k, i]
        row = xt[k, i + 1:]
        for j in range(seg.size):
            t = xi - row[j]
            seg[j] += t * t


@njit(cache=True)
def _block_r2(xt, i0, i1, r2):
    """Packed squared distances of pairs (i, j), i0 <= i < i1, j > i."""
    n = xt.shape[1]
    pos = 0
    for i in range(i0, i1):
        m = n - i - 1
        _r2_row(xt, i, r2[pos:pos + m])
        pos += m
    return pos


@njit(cache=True, fastmath=_FASTMATH)
def _acc_row(xi, row, wrow, wi, phi, orow):
    acc = 0.0
    for j in range(phi.size):
        f = phi[j] * (xi - row[j])
        acc += wrow[j] * f
        orow[j] += wi * f
    return acc


@njit(cache=True)
def _block_accumulate(xt, w, i0, i1, phi, out):
    d, n = xt.shape
    pos = 0
    for i in range(i0, i1):
        m = n - i - 1
        seg = phi[pos:pos + m]
        for k in range(d):
            out[k, i] -= _acc_row(xt[k, i], xt[k, i + 1:], w[i + 1:], w[i], seg, out[k, i + 1:])
        pos += m


def self_field(x, w, kind, p, cutoff2):
    """E_i = -sum_j w_j grad K(x_i - x_j) over all atoms, one profile value per pair.

    Each pair contribution is computed once and applied with opposite signs
    to both atoms.  Pairs are visited in a fixed order, independent of any
    scheduling, so the result is reproducible bit for bit.
    """
    n, d = x.shape
    xt = np.ascontiguousarray(x.T)
    out = np.zeros((d, n))
    if n < 2:
        return out.T.copy()
    r2, phi, scratch = _workspace.get(min(PAIR_BLOCK + n, n * (n - 1) // 2))
    i0 = 0
    while i0 < n - 1:
        i1, count = i0, 0
        while i1 < n - 1 and (count == 0 or count + n - i1 - 1 <= PAIR_BLOCK):
            count += n - i1 - 1
            i1 += 1
        m = _block_r2(xt, i0, i1, r2)
        profile_values(kind, p, r2[:m], phi[:m], scratch[:m])
        if cutoff2 < np.inf:
            phi[:m][r2[:m] > cutoff2] = 0.0
        _block_accumulate(xt, w, i0, i1, phi[:m], out)
        i0 = i1
    return out.T.copy()


@njit(cache=True)
def field_at(targets, x, w, kind, p, cutoff2):
    """E(y) = -sum_j w_j grad K(y - x_j) at arbitrary target points."""
    m, d = targets.shape
    n = x.shape[0]
    out = np.zeros((m, d))
    diff = np.empty(d)
    for i in range(m):
        for j in range(n):
            r2 = 0.0
            for k in range(d):
                diff[k] = targets[i, k] - x[j, k]
                r2 += diff[k] * diff[k]
            if r2 > cutoff2:
                continue
            phi = radial_profile(kind, p, r2)
            for k in range(d):
                out[i, k] -= w[j] * phi * diff[k]
    return out
