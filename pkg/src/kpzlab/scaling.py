"""KPZ 1:2:3 coordinate maps between lattice and continuum, plus empirical
calibration of the centering and scale constants.

Conventions.  Rescaled time s in [0, 1] maps to antidiagonal
d = round(s * (2n-2)) (offset by padding); rescaled space x maps to the
signed antidiagonal offset delta = col - row = round-to-parity(x * sigma_x).
With the exact exponential constants c(n) = 4n, sigma_h = 2^(4/3) n^(1/3),
sigma_x = 2^(5/3) n^(2/3), the rescaled profile
(G(corner -> site_of(x, 1)) - c(n)) / sigma_h fluctuates around -x^2, which
is what fixes the spatial unit.
"""

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import _fast
from .env import Distribution, EnvGrid, exponential, log_gamma, materialize
from .errors import ParameterError, RangeError
from .parallel import default_threads, run_chunked
from .rng import derive_seed

# GUE Tracy-Widom location constants (standard tables); used only to convert
# robust sample statistics into centering/scale estimates.
TW_GUE_MEAN = -1.771087
TW_GUE_SD = 0.901773
TW_GUE_MEDIAN = -1.804912
TW_GUE_IQR = 1.211026


@dataclass(frozen=True)
class ScalingMap:
    """Bijection between continuum coordinates (x, s) and lattice sites."""

    n: int
    mode: str  # "exact-exponential" | "calibrated"
    c: float
    sigma_h: float
    sigma_x: float
    pad_before: int = 0
    pad_after: int = 0

    @classmethod
    def exact_exponential(cls, n: int, pad_before: int = 0, pad_after: int = 0) -> "ScalingMap":
        return cls(
            n=n,
            mode="exact-exponential",
            c=4.0 * n,
            sigma_h=2.0 ** (4.0 / 3.0) * n ** (1.0 / 3.0),
            sigma_x=2.0 ** (5.0 / 3.0) * n ** (2.0 / 3.0),
            pad_before=pad_before,
            pad_after=pad_after,
        )

    # -- frame ---------------------------------------------------------------
    @property
    def grid_shape(self) -> Tuple[int, int]:
        side = self.pad_before + self.n + self.pad_after
        return side, side

    @property
    def source_site(self) -> Tuple[int, int]:
        return self.pad_before, self.pad_before

    @property
    def terminal_site(self) -> Tuple[int, int]:
        return self.pad_before + self.n - 1, self.pad_before + self.n - 1

    @property
    def dmax(self) -> int:
        return 2 * (self.n - 1)

    def antidiag_of(self, s: float) -> int:
        if not 0.0 <= s <= 1.0:
            raise RangeError(f"time {s} outside [0, 1]")
        return 2 * self.pad_before + int(round(s * self.dmax))

    # -- heights -------------------------------------------------------------
    def to_rescaled(self, raw):
        return (np.asarray(raw, dtype=float) - self.c) / self.sigma_h

    def from_rescaled(self, h):
        return np.asarray(h, dtype=float) * self.sigma_h + self.c

    def segment_center(self, d_lo: int, d_hi: int) -> float:
        """Centering for a passage spanning antidiagonals [d_lo, d_hi]."""
        return self.c * (d_hi - d_lo) / self.dmax

    # -- space ---------------------------------------------------------------
    def site_of(self, x: float, s: float) -> Tuple[int, int]:
        d = self.antidiag_of(s)
        delta = x * self.sigma_x
        parity = d & 1
        dstar = int(round((delta - parity) / 2.0)) * 2 + parity
        i, j = (d - dstar) // 2, (d + dstar) // 2
        side = self.grid_shape[0]
        if not (0 <= i < side and 0 <= j < side):
            raise RangeError(f"(x={x}, s={s}) maps outside the padded lattice")
        return i, j

    def coord_of(self, site: Tuple[int, int]) -> Tuple[float, float]:
        i, j = site
        d = i + j
        s = (d - 2 * self.pad_before) / self.dmax
        return (j - i) / self.sigma_x, s

    def x_of_site(self, site: Tuple[int, int]) -> float:
        return (site[1] - site[0]) / self.sigma_x

    def offset_of(self, x: float, d: int) -> int:
        """Signed antidiagonal offset delta = col - row for coordinate x."""
        parity = d & 1
        return int(round((x * self.sigma_x - parity) / 2.0)) * 2 + parity


def shear_correction(nu: float, x: float, y: float, duration: float = 1.0) -> float:
    """Additive correction making sheared passage values comparable with the
    originals: 2*nu*(y - x) + nu^2 * duration, in rescaled height units."""
    return 2.0 * nu * (y - x) + nu * nu * duration


def shear_pair(grid: EnvGrid, smap: ScalingMap, nu: float, probes: Sequence[Tuple[float, float]]):
    """For each probe (x, y): (value at sheared endpoints + correction,
    value at original endpoints), both rescaled.  The caller loops replicate
    grids and feeds the two lists to a two-sample test."""
    from .lpp import passage_field

    originals = []
    sheared = []
    by_source = {}
    for x, y in probes:
        src = smap.site_of(x, 0.0)
        if src not in by_source:
            by_source[src] = passage_field(grid, src)
        f = by_source[src]
        tgt = smap.site_of(y, 1.0)
        tgt_sheared = smap.site_of(y + nu, 1.0)
        originals.append(float(smap.to_rescaled(f.values[tgt])))
        sheared.append(
            float(smap.to_rescaled(f.values[tgt_sheared])) + shear_correction(nu, x, y)
        )
    return np.array(sheared), np.array(originals)


@dataclass
class CalibrationEntry:
    n: int
    c: float
    sigma_h: float
    sigma_x: float


@dataclass
class CalibrationReport:
    model: str
    beta: float
    replicates: int
    seed: int
    entries: List[CalibrationEntry]
    exponent: float
    exponent_stderr: float

    def map_for(self, n: int, pad_before: int = 0, pad_after: int = 0) -> ScalingMap:
        for e in self.entries:
            if e.n == n:
                return ScalingMap(
                    n=n,
                    mode="calibrated",
                    c=e.c,
                    sigma_h=e.sigma_h,
                    sigma_x=e.sigma_x,
                    pad_before=pad_before,
                    pad_after=pad_after,
                )
        raise ParameterError(f"no calibration entry for n={n}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "model": self.model,
                "beta": self.beta,
                "replicates": self.replicates,
                "seed": self.seed,
                "entries": [
                    {"n": e.n, "c": e.c, "sigma_h": e.sigma_h, "sigma_x": e.sigma_x}
                    for e in self.entries
                ],
                "exponent": self.exponent,
                "stderr": self.exponent_stderr,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "CalibrationReport":
        d = json.loads(text)
        return cls(
            model=d["model"],
            beta=d["beta"],
            replicates=d["replicates"],
            seed=d["seed"],
            entries=[CalibrationEntry(**e) for e in d["entries"]],
            exponent=d["exponent"],
            exponent_stderr=d["stderr"],
        )


def power_law_fit(scales: Sequence[float], stats: Sequence[float]) -> Tuple[float, float]:
    """Least-squares slope of log(stat) vs log(scale) with its standard error."""
    xs = np.log(np.asarray(scales, dtype=float))
    ys = np.log(np.asarray(stats, dtype=float))
    if xs.size < 2:
        raise ParameterError("need at least two scales for a slope")
    xc = xs - xs.mean()
    slope = float((xc * ys).sum() / (xc * xc).sum())
    if xs.size == 2:
        return slope, 0.0
    resid = ys - ys.mean() - slope * xc
    var = float((resid**2).sum() / (xs.size - 2) / (xc * xc).sum())
    return slope, math.sqrt(var)


def _profile_offsets(n: int) -> List[int]:
    m1 = max(1, int(round(0.25 * n ** (2.0 / 3.0))))
    m2 = max(2, int(round(0.5 * n ** (2.0 / 3.0))))
    return [-m2, -m1, 0, m1, m2]


def _calibrate_worker(args):
    model, beta, dist_kind, dist_param, n, start, count, seed = args
    dist = Distribution(dist_kind, dist_param)
    offsets = _profile_offsets(n)
    m2 = max(offsets)
    side = n + m2
    vals = np.empty((count, len(offsets)))
    for k in range(count):
        w, _ = materialize(side, side, dist, derive_seed(seed, start + k))
        if model == "exp-lpp":
            V = _fast.passage_field_from(w)
        else:
            V = _fast.logz_field_from(w, beta)
        for t, m in enumerate(offsets):
            vals[k, t] = V[n - 1 + m, n - 1 - m]
    return vals


def calibrate(
    model: str,
    n_list: Sequence[int],
    replicates: int,
    seed: int,
    beta: float = 1.0,
    dist: Optional[Distribution] = None,
    threads: Optional[int] = None,
) -> CalibrationReport:
    """Empirical centering/scale tables from unconditioned replicates.

    c(n) and sigma_h(n) come from the median and interquartile range of the
    terminal value, converted with the GUE Tracy-Widom table constants;
    sigma_x(n) from a quadratic fit to the mean profile over a few
    antidiagonal offsets.
    """
    if sorted(n_list) != list(n_list):
        raise ParameterError("n_list must be ascending")
    if replicates < 1000:
        raise ParameterError("need at least 10^3 replicates per size")
    if model not in ("exp-lpp", "exp-polymer", "log-gamma"):
        raise ParameterError(f"unknown model {model!r}")
    if dist is None:
        dist = log_gamma(2.0) if model == "log-gamma" else exponential(1.0)
    threads = threads or default_threads()

    entries = []
    for n in n_list:
        tasks = []
        per = max(200, -(-replicates // (threads * 2)))
        at = 0
        while at < replicates:
            cnt = min(per, replicates - at)
            tasks.append((model, beta, dist.kind, dist.param, n, at, cnt, seed))
            at += cnt
        vals = np.concatenate(run_chunked(_calibrate_worker, tasks, threads), axis=0)
        center = vals[:, len(_profile_offsets(n)) // 2]
        q25, q50, q75 = np.quantile(center, [0.25, 0.5, 0.75])
        sigma_h = float((q75 - q25) / TW_GUE_IQR)
        c = float(q50 - TW_GUE_MEDIAN * sigma_h)
        offsets = np.array(_profile_offsets(n), dtype=float)
        drop = vals.mean(axis=0)
        drop = drop[len(offsets) // 2] - drop  # mean parabola loss vs center
        delta2 = (2.0 * offsets) ** 2
        a = float((drop * delta2).sum() / (delta2 * delta2).sum())
        sigma_x = float(math.sqrt(sigma_h / a)) if a > 0 else float("nan")
        entries.append(CalibrationEntry(n=n, c=c, sigma_h=sigma_h, sigma_x=sigma_x))

    if len(entries) >= 2:
        exponent, stderr = power_law_fit(
            [e.n for e in entries], [e.sigma_h for e in entries]
        )
    else:
        exponent, stderr = float("nan"), float("nan")
    return CalibrationReport(
        model=model,
        beta=beta if model != "exp-lpp" else math.inf,
        replicates=replicates,
        seed=seed,
        entries=entries,
        exponent=exponent,
        exponent_stderr=stderr,
    )
