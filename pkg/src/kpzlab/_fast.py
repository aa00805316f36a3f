"""Compiled kernels: cell-keyed weight generation and the DP sweeps.

All weight values anywhere in the package come from these routines (or from
the scipy path for log-gamma weights), so identical seeds give bit-identical
results across entry points.  numpy's vectorized transcendentals are not used
for weights: they can differ from libm by one ulp.

Sign conventions: sites are (row, col), 0-based; paths step down (row+1) or
right (col+1); antidiagonal index d = row + col.

Tilting: a cell (gi, gj) in global coordinates is tilted iff theta > 0,
|gi - gj| <= hw_sites and t0 <= gi < t1, t0 <= gj < t1.  The bound [t0, t1)
is the conditioning square, so the accumulated log-LR covers every tilted
cell no matter how much surrounding padding a caller later materializes.
"""

import numpy as np
from numba import njit

from .rng import COL_MULT, ROW_MULT, SEED_MULT, STREAM_MULT

_U_SEED = np.uint64(SEED_MULT)
_U_ROW = np.uint64(ROW_MULT)
_U_COL = np.uint64(COL_MULT)
_U_STREAM = np.uint64(STREAM_MULT)
NEG_INF = -np.inf


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _cell_v(seedt, i, j):
    # uniform in (0,1); never 0, so -log(v) is finite
    z = _mix64(seedt + np.uint64(i) * _U_ROW + np.uint64(j) * _U_COL)
    return (np.float64(z >> np.uint64(11)) + 0.5) * 2.0**-53


@njit(cache=True, inline="always")
def _logaddexp(a, b):
    if a < b:
        a, b = b, a
    if b == NEG_INF:
        return a
    return a + np.log1p(np.exp(b - a))


@njit(cache=True, inline="always")
def _in_corridor(gi, gj, hw_sites, t0, t1):
    if gi < t0 or gi >= t1 or gj < t0 or gj >= t1:
        return False
    d = gi - gj
    if d < 0:
        d = -d
    return d <= hw_sites


@njit(cache=True)
def derive_seeds(master, start, count):
    """Replicate keys for indices [start, start+count); mirrors rng.derive_seed."""
    out = np.empty(count, dtype=np.uint64)
    for k in range(count):
        out[k] = _mix64(master * _U_SEED + np.uint64(start + k + 1) * _U_STREAM)
    return out


@njit(cache=True)
def fill_weights(out, seedt, r0, c0, kind, param, theta, hw_sites, t0, t1):
    """Materialize weights for cells (r0+i, c0+j) and return the tilt log-LR.

    kind 0 = exponential(param), 1 = constant(param).  Tilted cells are drawn
    from exponential(param*(1-theta)); the log-LR accumulates row-major so it
    matches the fused kernels exactly.
    """
    rows, cols = out.shape
    log_lr = 0.0
    lc = np.log1p(-theta)
    for i in range(rows):
        gi = r0 + i
        for j in range(cols):
            gj = c0 + j
            if kind == 1:
                out[i, j] = param
                continue
            v = _cell_v(seedt, gi, gj)
            if theta > 0.0 and _in_corridor(gi, gj, hw_sites, t0, t1):
                w = -np.log(v) / (param * (1.0 - theta))
                log_lr += -theta * w - lc
            else:
                w = -np.log(v) / param
            out[i, j] = w
    return log_lr


@njit(cache=True)
def fill_uniforms(out, seedt, r0, c0):
    """Cell uniforms only; feeds the scipy inverse-CDF path for log-gamma."""
    rows, cols = out.shape
    for i in range(rows):
        for j in range(cols):
            out[i, j] = _cell_v(seedt, r0 + i, c0 + j)


@njit(cache=True)
def terminal_passage(seedt, r0, c0, rows, cols, rate, theta, hw_sites, t0, t1):
    """Last passage value from (r0,c0) to (r0+rows-1, c0+cols-1), fused with
    weight generation; returns (value, tilt log-LR)."""
    V = np.empty(cols)
    lc = np.log1p(-theta)
    log_lr = 0.0
    acc = 0.0
    for i in range(rows):
        gi = r0 + i
        for j in range(cols):
            gj = c0 + j
            v = _cell_v(seedt, gi, gj)
            if theta > 0.0 and _in_corridor(gi, gj, hw_sites, t0, t1):
                w = -np.log(v) / (rate * (1.0 - theta))
                log_lr += -theta * w - lc
            else:
                w = -np.log(v) / rate
            if i == 0:
                acc = acc + w if j > 0 else w
                V[j] = acc
            elif j == 0:
                V[0] += w
            else:
                a = V[j] if V[j] >= V[j - 1] else V[j - 1]
                V[j] = a + w
    return V[cols - 1], log_lr


@njit(cache=True)
def terminal_logz(seedt, r0, c0, rows, cols, beta, rate, theta, hw_sites, t0, t1):
    """Polymer log partition function over the same rectangle; log domain
    throughout with pairwise log-add."""
    V = np.empty(cols)
    lc = np.log1p(-theta)
    log_lr = 0.0
    acc = 0.0
    for i in range(rows):
        gi = r0 + i
        for j in range(cols):
            gj = c0 + j
            v = _cell_v(seedt, gi, gj)
            if theta > 0.0 and _in_corridor(gi, gj, hw_sites, t0, t1):
                w = -np.log(v) / (rate * (1.0 - theta))
                log_lr += -theta * w - lc
            else:
                w = -np.log(v) / rate
            if i == 0:
                acc = acc + beta * w if j > 0 else beta * w
                V[j] = acc
            elif j == 0:
                V[0] += beta * w
            else:
                V[j] = _logaddexp(V[j], V[j - 1]) + beta * w
    return V[cols - 1], log_lr


@njit(cache=True)
def screen_lpp_chunk(seeds, r0, c0, rows, cols, rate, theta, hw_sites, t0, t1):
    g = np.empty(seeds.size)
    lr = np.empty(seeds.size)
    for k in range(seeds.size):
        g[k], lr[k] = terminal_passage(
            seeds[k] * _U_SEED, r0, c0, rows, cols, rate, theta, hw_sites, t0, t1
        )
    return g, lr


@njit(cache=True)
def screen_logz_chunk(seeds, r0, c0, rows, cols, beta, rate, theta, hw_sites, t0, t1):
    g = np.empty(seeds.size)
    lr = np.empty(seeds.size)
    for k in range(seeds.size):
        g[k], lr[k] = terminal_logz(
            seeds[k] * _U_SEED, r0, c0, rows, cols, beta, rate, theta, hw_sites, t0, t1
        )
    return g, lr


@njit(cache=True)
def segment_chunk(seeds, anchor_rc, rate, theta, hw_sites, t0, t1):
    """Per replicate, passage values of the consecutive diagonal segments
    anchor t-1 -> anchor t (both endpoints included per segment)."""
    nseg = anchor_rc.size - 1
    g = np.empty((seeds.size, nseg))
    lr = np.empty(seeds.size)
    for k in range(seeds.size):
        seedt = seeds[k] * _U_SEED
        tot_lr = 0.0
        for t in range(nseg):
            a = anchor_rc[t]
            b = anchor_rc[t + 1]
            val, l = terminal_passage(
                seedt, a, a, b - a + 1, b - a + 1, rate, theta, hw_sites, t0, t1
            )
            g[k, t] = val
            tot_lr += l
        lr[k] = tot_lr
    return g, lr


@njit(cache=True)
def passage_field_from(W):
    """DP table of passage values from the (0,0) corner of W."""
    rows, cols = W.shape
    V = np.empty((rows, cols))
    acc = 0.0
    for j in range(cols):
        acc += W[0, j]
        V[0, j] = acc
    for i in range(1, rows):
        V[i, 0] = V[i - 1, 0] + W[i, 0]
        for j in range(1, cols):
            a = V[i - 1, j] if V[i - 1, j] >= V[i, j - 1] else V[i, j - 1]
            V[i, j] = a + W[i, j]
    return V


@njit(cache=True)
def logz_field_from(W, beta):
    rows, cols = W.shape
    V = np.empty((rows, cols))
    acc = 0.0
    for j in range(cols):
        acc += beta * W[0, j]
        V[0, j] = acc
    for i in range(1, rows):
        V[i, 0] = V[i - 1, 0] + beta * W[i, 0]
        for j in range(1, cols):
            V[i, j] = _logaddexp(V[i - 1, j], V[i, j - 1]) + beta * W[i, j]
    return V


@njit(cache=True)
def geodesic_backtrace(V, ti, tj):
    """Sites of the maximizing path from the field's corner to (ti, tj).

    Ties prefer the same-row predecessor, so vertical steps happen as early
    as possible along the path.
    """
    path = np.empty((ti + tj + 1, 2), dtype=np.int64)
    i, j = ti, tj
    for k in range(ti + tj, -1, -1):
        path[k, 0] = i
        path[k, 1] = j
        if i > 0 and j > 0:
            if V[i, j - 1] >= V[i - 1, j]:
                j -= 1
            else:
                i -= 1
        elif j > 0:
            j -= 1
        elif i > 0:
            i -= 1
    return path


@njit(cache=True)
def polymer_backward_walk(V, path_key, ti, tj):
    """Sample a polymer path from the field's corner to (ti, tj) by walking
    backwards; step t uses the uniform keyed by (path_key, t)."""
    path = np.empty((ti + tj + 1, 2), dtype=np.int64)
    i, j = ti, tj
    for k in range(ti + tj, -1, -1):
        path[k, 0] = i
        path[k, 1] = j
        if i > 0 and j > 0:
            u = _cell_v(path_key, k, 0)
            # P(left) = exp(V[i,j-1]) / (exp(V[i,j-1]) + exp(V[i-1,j]))
            d = V[i - 1, j] - V[i, j - 1]
            p_left = 1.0 / (1.0 + np.exp(d))
            if u < p_left:
                j -= 1
            else:
                i -= 1
        elif j > 0:
            j -= 1
        elif i > 0:
            i -= 1
    return path
