"""Random environments: seeded i.i.d. weight grids and exponentially tilted
variants with exact log-likelihood-ratio accounting.

Weights are keyed per cell, so the same (dist, seed, tilt) triple always
yields the same value at a given (row, col) no matter the grid shape around
it.  Tilting draws cells inside a diagonal corridor from exponential(1-theta)
and returns log_lr with exp(log_lr) = base density / tilted density at the
sampled grid, making tilted expectations exactly unbiased after reweighting.
"""

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _fast
from .errors import ParameterError
from .rng import MASK64, seed_key

_MAGIC = b"KPZG"
_VERSION = 1


@dataclass(frozen=True)
class Distribution:
    """Weight law tag: exponential(rate), constant(value) or log_gamma(shape)."""

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in ("exponential", "constant", "log-gamma"):
            raise ParameterError(f"unknown distribution kind {self.kind!r}")
        if self.kind != "constant" and self.param <= 0:
            raise ParameterError(f"{self.kind} parameter must be > 0, got {self.param}")
        if self.kind == "constant" and self.param < 0:
            raise ParameterError("constant weights must be nonnegative")

    @property
    def mean(self) -> float:
        if self.kind == "exponential":
            return 1.0 / self.param
        if self.kind == "constant":
            return self.param
        if self.param <= 1:
            return float("inf")
        return 1.0 / (self.param - 1.0)  # inverse-gamma mean


def exponential(rate: float = 1.0) -> Distribution:
    return Distribution("exponential", float(rate))


def constant(value: float) -> Distribution:
    return Distribution("constant", float(value))


def log_gamma(shape: float) -> Distribution:
    return Distribution("log-gamma", float(shape))


@dataclass(frozen=True)
class TiltSpec:
    """Exponential tilt of strength theta inside the diagonal corridor
    |row - col| <= corridor_halfwidth * min(rows, cols)^(2/3)."""

    theta: float
    corridor_halfwidth: float

    def __post_init__(self):
        if not 0.0 <= self.theta < 1.0:
            raise ParameterError(f"theta must be in [0, 1), got {self.theta}")
        if self.corridor_halfwidth < 0:
            raise ParameterError("corridor_halfwidth must be nonnegative")

    def halfwidth_sites(self, rows: int, cols: int) -> float:
        return self.corridor_halfwidth * min(rows, cols) ** (2.0 / 3.0)


@dataclass
class EnvGrid:
    rows: int
    cols: int
    weights: np.ndarray
    dist: Distribution
    seed: int
    tilt: Optional[TiltSpec] = None

    def __post_init__(self):
        self.weights.flags.writeable = False

    def weight(self, site) -> float:
        return float(self.weights[site[0], site[1]])


def _kind_code(dist: Distribution) -> int:
    return {"exponential": 0, "constant": 1, "log-gamma": 2}[dist.kind]


def materialize(rows, cols, dist, seed, tilt=None, r0=0, c0=0, tilt_frame=None):
    """Weight matrix for cells [r0, r0+rows) x [c0, c0+cols); returns
    (weights, log_lr).

    tilt_frame = (t0, t1, hw_sites) restricts the corridor to global rows and
    cols in [t0, t1) with the given halfwidth; by default the corridor spans
    the materialized rectangle with halfwidth from the grid's own size.
    """
    if rows < 1 or cols < 1:
        raise ParameterError("grid dimensions must be >= 1")
    w = np.empty((rows, cols))
    if tilt is None or tilt.theta == 0.0:
        theta, t0, t1, hw = 0.0, 0, 0, -1.0
    elif tilt_frame is not None:
        theta = tilt.theta
        t0, t1, hw = tilt_frame
    else:
        theta = tilt.theta
        t0, t1 = min(r0, c0), max(r0 + rows, c0 + cols)
        hw = tilt.halfwidth_sites(rows, cols)
    if dist.kind == "log-gamma":
        if theta != 0.0:
            raise ParameterError("tilting is only defined for exponential weights")
        from scipy.stats import gamma

        u = np.empty((rows, cols))
        _fast.fill_uniforms(u, np.uint64(seed_key(seed)), r0, c0)
        w = 1.0 / gamma.ppf(u, dist.param)
        return w, 0.0
    log_lr = _fast.fill_weights(
        w, np.uint64(seed_key(seed)), r0, c0, _kind_code(dist), dist.param, theta, hw, t0, t1
    )
    return w, float(log_lr)


def sample_grid(rows: int, cols: int, dist: Distribution, seed: int) -> EnvGrid:
    """i.i.d. grid; deterministic in (dist, seed, rows, cols)."""
    w, _ = materialize(rows, cols, dist, seed)
    return EnvGrid(rows, cols, w, dist, seed)


def sample_tilted_grid(rows, cols, base_dist, tilt, seed):
    """Tilted grid plus log_lr = sum over corridor cells of
    -theta*w - log(1-theta); exp(log_lr) is the base/tilted density ratio."""
    if base_dist.kind != "exponential":
        raise ParameterError("tilting is only defined for exponential weights")
    w, log_lr = materialize(rows, cols, base_dist, seed, tilt)
    return EnvGrid(rows, cols, w, base_dist, seed, tilt), log_lr


def log_likelihood_ratio(grid: EnvGrid) -> float:
    """Recompute log_lr of a (possibly tilted) grid from its metadata."""
    if grid.tilt is None or grid.tilt.theta == 0.0:
        return 0.0
    _, log_lr = materialize(grid.rows, grid.cols, grid.dist, grid.seed, grid.tilt)
    return log_lr


def save_grid(grid: EnvGrid, path) -> None:
    """Binary container: fixed header then row-major float64, little-endian."""
    tilt = grid.tilt
    header = struct.pack(
        "<4sHIIBdQBdd",
        _MAGIC,
        _VERSION,
        grid.rows,
        grid.cols,
        _kind_code(grid.dist),
        grid.dist.param,
        int(grid.seed) & MASK64,
        0 if tilt is None else 1,
        0.0 if tilt is None else tilt.theta,
        0.0 if tilt is None else tilt.corridor_halfwidth,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(grid.weights.astype("<f8").tobytes(order="C"))


def load_grid(path) -> EnvGrid:
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize("<4sHIIBdQBdd"))
        magic, ver, rows, cols, kind, param, seed, has_tilt, theta, chw = struct.unpack(
            "<4sHIIBdQBdd", head
        )
        if magic != _MAGIC or ver != _VERSION:
            raise ParameterError("not a grid container or unsupported version")
        body = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8").reshape(rows, cols)
    dist = Distribution(["exponential", "constant", "log-gamma"][kind], param)
    tilt = TiltSpec(theta, chw) if has_tilt else None
    return EnvGrid(rows, cols, body.copy(), dist, seed, tilt)


def grid_to_csv(grid: EnvGrid, path) -> None:
    np.savetxt(path, grid.weights, delimiter=",", fmt="%.17g")
