"""Shared brute-force oracles: path enumeration on small grids, independent
of the DP implementations they check."""

import numpy as np
import pytest
from mpmath import mp, mpf, exp as mpexp, log as mplog

import kpzlab as kz


def enumerate_paths(a, b):
    """All up-right site sequences from a to b (inclusive)."""
    if a == b:
        return [[a]]
    out = []
    if b[0] > a[0]:
        for p in enumerate_paths(a, (b[0] - 1, b[1])):
            out.append(p + [b])
    if b[1] > a[1]:
        for p in enumerate_paths(a, (b[0], b[1] - 1)):
            out.append(p + [b])
    return out


def path_weight(W, path):
    return sum(float(W[i, j]) for i, j in path)


def oracle_passage(W, a, b):
    return max(path_weight(W, p) for p in enumerate_paths(a, b))


def oracle_logz(W, beta, a, b, dps=50):
    """High-precision log of the path-sum partition function."""
    mp.dps = dps
    total = mpf(0)
    for p in enumerate_paths(a, b):
        total += mpexp(mpf(beta) * mpf(repr(path_weight(W, p))))
    return float(mplog(total))


def oracle_marginal(W, beta, a, b, antidiag, dps=50):
    """Site -> probability that the polymer passes it, by enumeration."""
    mp.dps = dps
    mass = {}
    total = mpf(0)
    for p in enumerate_paths(a, b):
        wt = mpexp(mpf(beta) * mpf(repr(path_weight(W, p))))
        total += wt
        for (i, j) in p:
            if i + j == antidiag:
                mass[(i, j)] = mass.get((i, j), mpf(0)) + wt
    return {s: float(v / total) for s, v in mass.items()}


def ordered_disjoint(p1, p2):
    """Path 2 strictly right of path 1 on every shared antidiagonal."""
    occ1 = {i + j: (i, j) for i, j in p1}
    occ2 = {i + j: (i, j) for i, j in p2}
    for d in set(occ1) & set(occ2):
        if not occ1[d][1] < occ2[d][1]:
            return False
    return True


def oracle_two_path(W, starts, ends):
    (a1, a2), (b1, b2) = starts, ends
    best = None
    for p1 in enumerate_paths(a1, b1):
        for p2 in enumerate_paths(a2, b2):
            if ordered_disjoint(p1, p2):
                v = path_weight(W, p1) + path_weight(W, p2)
                if best is None or v > best:
                    best = v
    return best


def random_grid(rng, rows, cols):
    w = rng.exponential(1.0, size=(rows, cols))
    return kz.EnvGrid(rows, cols, w, kz.exponential(1.0), 0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
