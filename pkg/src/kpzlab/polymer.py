"""Positive-temperature kernels: log-partition DP, quenched marginals and
path sampling, backbones, restricted free energies.

All partition arithmetic stays in the log domain with pairwise log-add-exp;
unnormalized values are never exponentiated (free energies reach ~10^3 at
experiment scale).  The intermediate-site score logz_in + logz_out - beta*w
subtracts the site's energy once, mirroring the endpoint convention of the
zero-temperature kernels.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from . import _fast
from .env import EnvGrid
from .errors import BoundsError, ParameterError, RangeError, UnreachableError
from .lpp import LatticePath, Site, _check_site, _require_reachable
from .rng import MASK64, PATH_SALT, mix64, seed_key


@dataclass
class PolymerField:
    """logz[i, j] = log sum over up-right paths source -> (i, j) of
    exp(beta * path weight); -inf where unreachable."""

    source: Site
    beta: float
    logz: np.ndarray
    grid: EnvGrid
    reverse: bool = False  # True: paths run (i, j) -> source


@dataclass
class QuenchedMarginal:
    antidiag: int
    sites: List[Site]
    probs: np.ndarray

    @property
    def mass(self) -> Dict[Site, float]:
        return {s: float(p) for s, p in zip(self.sites, self.probs)}


def _check_beta(beta: float) -> None:
    if not beta > 0:
        raise ParameterError(f"beta must be > 0, got {beta}")


def log_partition_field(grid: EnvGrid, beta: float, source: Site = (0, 0)) -> PolymerField:
    _check_beta(beta)
    _check_site(grid, source, "source")
    si, sj = source
    sub = _fast.logz_field_from(np.ascontiguousarray(grid.weights[si:, sj:]), beta)
    logz = np.full((grid.rows, grid.cols), -np.inf)
    logz[si:, sj:] = sub
    return PolymerField(source, beta, logz, grid)


def backward_log_partition_field(grid: EnvGrid, beta: float, target: Site) -> PolymerField:
    """logz[i, j] over paths (i, j) -> target, via the reversed grid."""
    _check_beta(beta)
    _check_site(grid, target, "target")
    ti, tj = target
    flipped = np.ascontiguousarray(grid.weights[ti::-1, tj::-1])
    sub = _fast.logz_field_from(flipped, beta)[::-1, ::-1]
    logz = np.full((grid.rows, grid.cols), -np.inf)
    logz[: ti + 1, : tj + 1] = sub
    return PolymerField(target, beta, logz, grid, reverse=True)


def log_partition(grid: EnvGrid, beta: float, a: Site, b: Site) -> float:
    _check_beta(beta)
    _check_site(grid, a, "a")
    _check_site(grid, b, "b")
    _require_reachable(a, b)
    sub = _fast.logz_field_from(
        np.ascontiguousarray(grid.weights[a[0] : b[0] + 1, a[1] : b[1] + 1]), beta
    )
    return float(sub[-1, -1])


def _antidiag_sites(grid: EnvGrid, d: int) -> List[Site]:
    lo, hi = max(0, d - grid.cols + 1), min(grid.rows - 1, d)
    return [(i, d - i) for i in range(lo, hi + 1)]


def _site_scores(field_in: PolymerField, field_out: PolymerField, beta: float, d: int):
    """Sites on antidiagonal d with score logz_in + logz_out - beta*w."""
    grid = field_in.grid
    a, b = field_in.source, field_out.source
    if not (a[0] + a[1]) < d < (b[0] + b[1]):
        raise RangeError(f"antidiagonal {d} not strictly between the endpoints")
    sites = _antidiag_sites(grid, d)
    scores = np.array(
        [
            field_in.logz[s] + field_out.logz[s] - beta * grid.weights[s]
            for s in sites
        ]
    )
    return sites, scores


def quenched_marginal(
    field_in: PolymerField, field_out: PolymerField, antidiag: int, beta: float
) -> QuenchedMarginal:
    """Quenched polymer location law on one antidiagonal:
    mass(k) proportional to exp(logz_in(k) + logz_out(k) - beta*w(k))."""
    _check_beta(beta)
    sites, scores = _site_scores(field_in, field_out, beta, antidiag)
    finite = np.isfinite(scores)
    probs = np.zeros_like(scores)
    if finite.any():
        m = scores[finite].max()
        ex = np.exp(scores[finite] - m)
        probs[finite] = ex / ex.sum()
    return QuenchedMarginal(antidiag, sites, probs)


def sample_path(grid: EnvGrid, beta: float, a: Site, b: Site, seed: int) -> LatticePath:
    """Path with the exact quenched polymer law given the grid; deterministic
    in seed.  Backward sampling from b using the in-field only."""
    _check_beta(beta)
    _check_site(grid, a, "a")
    _check_site(grid, b, "b")
    _require_reachable(a, b)
    sub = _fast.logz_field_from(
        np.ascontiguousarray(grid.weights[a[0] : b[0] + 1, a[1] : b[1] + 1]), beta
    )
    path_key = np.uint64(mix64((seed_key(seed) + PATH_SALT) & MASK64))
    steps = _fast.polymer_backward_walk(sub, path_key, b[0] - a[0], b[1] - a[1])
    return LatticePath([(int(i) + a[0], int(j) + a[1]) for i, j in steps])


def backbone(
    grid: EnvGrid,
    beta: Union[float],
    a: Site,
    b: Site,
    antidiags: List[int],
) -> List[Site]:
    """Per antidiagonal, the site maximizing in-score + out-score - site
    energy; beta=math.inf uses passage values (zero temperature).  Ties go to
    the leftmost site (smallest column)."""
    from .lpp import backward_passage_field, passage_field

    if beta == math.inf:
        fin = passage_field(grid, a)
        fout = backward_passage_field(grid, b)
        get_in, get_out = fin.values, fout.values
        scale = 1.0
    else:
        _check_beta(beta)
        fin = log_partition_field(grid, beta, a)
        fout = backward_log_partition_field(grid, beta, b)
        get_in, get_out = fin.logz, fout.logz
        scale = beta
    out: List[Site] = []
    for d in antidiags:
        if not (a[0] + a[1]) < d < (b[0] + b[1]):
            raise RangeError(f"antidiagonal {d} not strictly between endpoints")
        sites = _antidiag_sites(grid, d)
        # order by increasing column so argmax lands on the leftmost maximizer
        sites = sorted(sites, key=lambda s: s[1])
        scores = np.array(
            [get_in[s] + get_out[s] - scale * grid.weights[s] for s in sites]
        )
        out.append(sites[int(np.argmax(scores))])
    return out


def restricted_free_energy(
    field_in: PolymerField,
    field_out: PolymerField,
    beta: float,
    antidiag: int,
    window: List[Site],
) -> float:
    """log sum over window sites of exp(logz_in + logz_out - beta*w)."""
    if not window:
        raise ParameterError("window must be nonempty")
    _check_beta(beta)
    sites, scores = _site_scores(field_in, field_out, beta, antidiag)
    index = {s: k for k, s in enumerate(sites)}
    sel = []
    for s in window:
        if tuple(s) not in index:
            raise ParameterError(f"window site {s} not on antidiagonal {antidiag}")
        sel.append(scores[index[tuple(s)]])
    sel = np.asarray(sel)
    m = sel.max()
    if not np.isfinite(m):
        return float("-inf")
    return float(m + np.log(np.exp(sel - m).sum()))
