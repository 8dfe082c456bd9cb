"""Pure-Python/numpy fallback for the compiled per-hop kernels.

Every function mirrors ``_kernels.pyx`` operation-for-operation so both
backends produce bit-identical results.
"""
import math

import numpy as np

BACKEND = "python"


def _fold(u, length):
    if length <= 0:
        return 0.0
    period = 2.0 * length
    m = math.fmod(u, period)
    if m != 0.0 and m < 0:
        m += period
    return m if m <= length else period - m


def positions_at(t, offsets, start, speed, cosd, sind, x0, y0, L, W, out):
    n = len(offsets) - 1
    for i in range(n):
        lo, hi = int(offsets[i]), int(offsets[i + 1])
        k = lo + int(np.searchsorted(start[lo:hi], t, side="right")) - 1
        k = max(k, lo)
        dist = float(speed[k]) * (t - float(start[k]))
        out[i, 0] = _fold(float(x0[k]) + dist * float(cosd[k]), L)
        out[i, 1] = _fold(float(y0[k]) + dist * float(sind[k]), W)


def contact(pos, R, dist, adj):
    diff = pos[:, None, :] - pos[None, :, :]
    dx = diff[..., 0]
    dy = diff[..., 1]
    np.sqrt(dx * dx + dy * dy, out=dist)
    np.fill_diagonal(dist, 0.0)
    adj[...] = dist <= R
    np.fill_diagonal(adj, 0)


def remaining_estimates(Q, adj, d, nbrs, out):
    rows = Q[nbrs, d, :]
    masked = np.where(adj[nbrs].astype(bool), rows, np.inf)
    best = masked.min(axis=1) if masked.shape[1] else np.full(len(nbrs), np.inf)
    best[np.isinf(best)] = 0.0
    best[nbrs == d] = 0.0
    out[:] = best


def echo_update(row, nbrs, targets, selected, eta, eta2):
    rates = np.where(nbrs == selected, eta, eta2)
    old = row[nbrs]
    row[nbrs] = old + rates * (targets - old)
