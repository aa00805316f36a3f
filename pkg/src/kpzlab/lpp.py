"""Zero-temperature kernels: last passage values, geodesics, disjoint
two-path passage and quadrangle defects.

Passage values include BOTH endpoint weights; composing through an
intermediate site therefore subtracts that site's weight once, which keeps
the composition law exact on the lattice.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from . import _fast
from .env import EnvGrid
from .errors import BoundsError, InfeasibleError, ParameterError, UnreachableError

Site = Tuple[int, int]


@dataclass
class PassageField:
    """values[i, j] = max over up-right paths source -> (i, j) of the total
    weight; -inf where (i, j) is not reachable."""

    source: Site
    values: np.ndarray
    grid: EnvGrid


@dataclass
class LatticePath:
    sites: List[Site]

    @property
    def source(self) -> Site:
        return self.sites[0]

    @property
    def target(self) -> Site:
        return self.sites[-1]

    def weight(self, grid: EnvGrid) -> float:
        return float(sum(grid.weights[i, j] for i, j in self.sites))


def _check_site(grid: EnvGrid, site: Site, name: str = "site") -> None:
    i, j = site
    if not (0 <= i < grid.rows and 0 <= j < grid.cols):
        raise BoundsError(f"{name} {site} outside {grid.rows}x{grid.cols} grid")


def passage_field(grid: EnvGrid, source: Site = (0, 0)) -> PassageField:
    _check_site(grid, source, "source")
    si, sj = source
    sub = _fast.passage_field_from(np.ascontiguousarray(grid.weights[si:, sj:]))
    values = np.full((grid.rows, grid.cols), -np.inf)
    values[si:, sj:] = sub
    return PassageField(source, values, grid)


def backward_passage_field(grid: EnvGrid, target: Site) -> PassageField:
    """values[i, j] = max path weight (i, j) -> target (both ends included)."""
    _check_site(grid, target, "target")
    ti, tj = target
    flipped = np.ascontiguousarray(grid.weights[ti::-1, tj::-1])
    sub = _fast.passage_field_from(flipped)[::-1, ::-1]
    values = np.full((grid.rows, grid.cols), -np.inf)
    values[: ti + 1, : tj + 1] = sub
    return PassageField(target, values, grid)


def _require_reachable(a: Site, b: Site) -> None:
    if b[0] < a[0] or b[1] < a[1]:
        raise UnreachableError(f"{b} is not weakly down-right of {a}")


def point_to_point(grid: EnvGrid, a: Site, b: Site) -> float:
    _check_site(grid, a, "a")
    _check_site(grid, b, "b")
    _require_reachable(a, b)
    sub = _fast.passage_field_from(
        np.ascontiguousarray(grid.weights[a[0] : b[0] + 1, a[1] : b[1] + 1])
    )
    return float(sub[-1, -1])


def geodesic(grid: EnvGrid, a: Site, b: Site) -> LatticePath:
    """A maximizing path a -> b; ties in the backtrace prefer the same-row
    predecessor (vertical steps as early as possible)."""
    _check_site(grid, a, "a")
    _check_site(grid, b, "b")
    _require_reachable(a, b)
    sub = _fast.passage_field_from(
        np.ascontiguousarray(grid.weights[a[0] : b[0] + 1, a[1] : b[1] + 1])
    )
    steps = _fast.geodesic_backtrace(sub, b[0] - a[0], b[1] - a[1])
    return LatticePath([(int(i) + a[0], int(j) + a[1]) for i, j in steps])


def _common_antidiag(p: Site, q: Site, what: str) -> int:
    if p[0] + p[1] != q[0] + q[1]:
        raise ParameterError(f"{what} {p} and {q} are not on a common antidiagonal")
    return p[0] + p[1]


def _antidiag_weights(grid: EnvGrid, d: int) -> np.ndarray:
    """Weights on antidiagonal d indexed by row; -inf off the grid."""
    wd = np.full(grid.rows, -np.inf)
    lo, hi = max(0, d - grid.cols + 1), min(grid.rows - 1, d)
    idx = np.arange(lo, hi + 1)
    wd[idx] = grid.weights[idx, d - idx]
    return wd


def two_path_passage(grid: EnvGrid, starts, ends) -> float:
    """Max total weight of two vertex-disjoint ordered up-right paths
    a1 -> b1 and a2 -> b2, path 2 strictly to the right of path 1 on every
    antidiagonal both occupy.

    DP over antidiagonals tracking ordered row pairs, O(n^3) time.  Starts
    (and ends) need not share an antidiagonal; the later path enters (the
    earlier one leaves) as a single-path phase.
    """
    (a1, a2), (b1, b2) = starts, ends
    for s, name in ((a1, "a1"), (a2, "a2"), (b1, "b1"), (b2, "b2")):
        _check_site(grid, s, name)
    if not _strictly_left(a1, a2):
        raise ParameterError("a1 must be strictly left of a2")
    if not _strictly_left(b1, b2):
        raise ParameterError("b1 must be strictly left of b2")
    _require_reachable(a1, b1)
    _require_reachable(a2, b2)

    W = grid.weights
    rows = grid.rows
    NEG = -np.inf
    da1, da2 = a1[0] + a1[1], a2[0] + a2[1]
    db1, db2 = b1[0] + b1[1], b2[0] + b2[1]
    d_join, d_split = max(da1, da2), min(db1, db2)
    if d_split < d_join:
        # no shared antidiagonal: disjointness is automatic
        return point_to_point(grid, a1, b1) + point_to_point(grid, a2, b2)

    def advance_single(vec, d):
        # one antidiagonal step of a single path: stay (right) or row+1 (down)
        nxt = vec.copy()
        nxt[1:] = np.maximum(nxt[1:], vec[:-1])
        return nxt + _antidiag_weights(grid, d)

    # single-path prefix for the earlier starter
    if da1 <= da2:
        vec = np.full(rows, NEG)
        vec[a1[0]] = W[a1]
        for d in range(da1 + 1, da2 + 1):
            vec = advance_single(vec, d)
        state = np.full((rows, rows), NEG)
        state[:, a2[0]] = vec + W[a2]
    else:
        vec = np.full(rows, NEG)
        vec[a2[0]] = W[a2]
        for d in range(da2 + 1, da1 + 1):
            vec = advance_single(vec, d)
        state = np.full((rows, rows), NEG)
        state[a1[0], :] = vec + W[a1]
    tri = np.tril(np.ones((rows, rows), dtype=bool), k=-1)  # ordered: i1 > i2
    state[~tri] = NEG

    # joint phase over shared antidiagonals
    for d in range(d_join + 1, d_split + 1):
        wd = _antidiag_weights(grid, d)
        down1 = np.full_like(state, NEG)
        down1[1:, :] = state[:-1, :]
        best = np.maximum(state, down1)
        down2 = np.full_like(best, NEG)
        down2[:, 1:] = best[:, :-1]
        best = np.maximum(best, down2)
        state = best + wd[:, None] + wd[None, :]
        state[~tri] = NEG

    # single-path suffix for the later finisher
    if db1 <= db2:
        vec = state[b1[0], :].copy()
        for d in range(db1 + 1, db2 + 1):
            vec = advance_single(vec, d)
        val = vec[b2[0]]
    else:
        vec = state[:, b2[0]].copy()
        for d in range(db2 + 1, db1 + 1):
            vec = advance_single(vec, d)
        val = vec[b1[0]]
    if not np.isfinite(val):
        raise InfeasibleError("no vertex-disjoint ordered path pair exists")
    return float(val)


def _strictly_left(p: Site, q: Site) -> bool:
    """q weakly up-right of p and distinct: any path p -> (target right of q's
    targets) must cross any path q -> (target left of p's)."""
    return p != q and q[0] <= p[0] and q[1] >= p[1]


def quadrangle_defect(grid: EnvGrid, x1: Site, x2: Site, y1: Site, y2: Site) -> float:
    """[G(x1->y1) + G(x2->y2)] - [G(x1->y2) + G(x2->y1)]; nonnegative by
    planarity for every environment."""
    if not (_strictly_left(x1, x2) and _strictly_left(y1, y2)):
        raise ParameterError("need x1 left of x2 and y1 left of y2")
    f1 = passage_field(grid, x1)
    f2 = passage_field(grid, x2)
    for f, x in ((f1, x1), (f2, x2)):
        for y in (y1, y2):
            if not np.isfinite(f.values[y]):
                raise InfeasibleError(f"{y} unreachable from {x}")
    return float(f1.values[y1] + f2.values[y2] - f1.values[y2] - f2.values[y1])
