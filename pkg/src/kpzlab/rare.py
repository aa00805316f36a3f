"""Conditioning engines for the upper-tail event and tail(-ratio) estimators.

Three ways to condition on a rescaled terminal height above L: rejection
(resample until the event holds), quantile (keep the top q fraction of a
fixed budget; the effective threshold is reported, not chosen), and tilted
importance sampling (corridor-tilted environments with exact reweighting).

Replicate seeds derive from (master seed, replicate index), and every merge
is keyed by index, so results are independent of worker count.  Ratio
estimation uses common random numbers: both tail indicators are evaluated on
one sample stream.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from . import _fast
from .env import Distribution, TiltSpec, materialize
from .errors import (
    EmptyEnsembleError,
    InsufficientDataError,
    ParameterError,
)
from .parallel import default_threads, run_chunked
from .rng import MASK64
from .scaling import ScalingMap

PILOT_STREAM_BASE = 1 << 40  # replicate indices reserved for theta tuning


@dataclass(frozen=True)
class ModelSpec:
    """Everything needed to regenerate a replicate's environment."""

    model: str  # "exp-lpp" | "exp-polymer" | "log-gamma"
    n: int
    beta: float = math.inf
    dist_kind: str = "exponential"
    dist_param: float = 1.0
    pad_before: int = 0
    pad_after: int = 0

    def __post_init__(self):
        if self.model not in ("exp-lpp", "exp-polymer", "log-gamma"):
            raise ParameterError(f"unknown model {self.model!r}")
        if self.model == "exp-lpp" and self.beta != math.inf:
            raise ParameterError("exp-lpp is the zero-temperature model")
        if self.model != "exp-lpp" and not self.beta > 0:
            raise ParameterError("positive-temperature model needs beta > 0")

    @property
    def zero_temperature(self) -> bool:
        return self.model == "exp-lpp"

    @property
    def dist(self) -> Distribution:
        return Distribution(self.dist_kind, self.dist_param)

    @property
    def side(self) -> int:
        return self.pad_before + self.n + self.pad_after

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "n": self.n,
            "beta": None if self.beta == math.inf else self.beta,
            "dist_kind": self.dist_kind,
            "dist_param": self.dist_param,
            "pad_before": self.pad_before,
            "pad_after": self.pad_after,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        d = dict(d)
        if d.get("beta") is None:
            d["beta"] = math.inf
        return cls(**d)


def tilt_frame(spec: ModelSpec, tilt: Optional[TiltSpec]) -> Tuple[int, int, float]:
    """Corridor box and halfwidth (in sites) for a framed experiment: the
    corridor lives inside the conditioning square of side n."""
    if tilt is None:
        return 0, 0, -1.0
    t0 = spec.pad_before
    t1 = spec.pad_before + spec.n
    return t0, t1, tilt.corridor_halfwidth * spec.n ** (2.0 / 3.0)


def materialize_frame(spec: ModelSpec, seed: int, tilt: Optional[TiltSpec]):
    """Full padded weight matrix for one replicate; returns (W, log_lr)."""
    side = spec.side
    return materialize(
        side, side, spec.dist, seed, tilt=tilt, tilt_frame=tilt_frame(spec, tilt)
    )


# ----------------------------------------------------------------------------
# screening: terminal rescaled heights for a run of replicate indices
# ----------------------------------------------------------------------------


def _screen_worker(args):
    spec_d, theta, corridor, master, start, count = args
    spec = ModelSpec.from_dict(spec_d)
    seeds = _fast.derive_seeds(np.uint64(master & MASK64), start, count)
    pb, n = spec.pad_before, spec.n
    tilt = TiltSpec(theta, corridor) if theta > 0 else None
    t0, t1, hw = tilt_frame(spec, tilt)
    if spec.model == "exp-lpp":
        g, lr = _fast.screen_lpp_chunk(
            seeds, pb, pb, n, n, spec.dist_param, theta, hw, t0, t1
        )
    elif spec.model == "exp-polymer":
        g, lr = _fast.screen_logz_chunk(
            seeds, pb, pb, n, n, spec.beta, spec.dist_param, theta, hw, t0, t1
        )
    else:  # log-gamma: scipy inverse-CDF path, no tilting
        if theta > 0:
            raise ParameterError("tilting is only defined for exponential weights")
        g = np.empty(count)
        lr = np.zeros(count)
        for k in range(count):
            w, _ = materialize(n, n, spec.dist, int(seeds[k]), r0=pb, c0=pb)
            g[k] = _fast.logz_field_from(w, spec.beta)[-1, -1]
        return seeds, g, lr
    return seeds, g, lr


def screen(
    spec: ModelSpec,
    master_seed: int,
    start: int,
    count: int,
    theta: float = 0.0,
    corridor: float = 0.0,
    threads: Optional[int] = None,
):
    """Terminal raw values and tilt log-LRs for replicates [start, start+count)."""
    threads = threads or default_threads()
    per = max(1024, -(-count // (threads * 4)))
    tasks = []
    at = start
    while at < start + count:
        c = min(per, start + count - at)
        tasks.append((spec.to_dict(), theta, corridor, master_seed, at, c))
        at += c
    parts = run_chunked(_screen_worker, tasks, threads)
    seeds = np.concatenate([p[0] for p in parts])
    g = np.concatenate([p[1] for p in parts])
    lr = np.concatenate([p[2] for p in parts])
    return seeds, g, lr


# ----------------------------------------------------------------------------
# conditioned ensembles
# ----------------------------------------------------------------------------


@dataclass
class ConditionedEnsemble:
    model: ModelSpec
    smap: ScalingMap
    method: str  # "rejection" | "quantile" | "tilted"
    params: dict
    threshold_L: float
    seeds: np.ndarray  # uint64, per accepted sample
    hhat: np.ndarray
    weights: np.ndarray
    budget: int
    acceptance_rate: float
    payload: Optional[np.ndarray] = None  # per-sample extras (e.g. segment energies)

    def __post_init__(self):
        if self.seeds.size and self.hhat.min() <= self.threshold_L:
            raise ParameterError("ensemble contains samples at or below the threshold")

    @property
    def size(self) -> int:
        return int(self.seeds.size)

    @property
    def effective_sample_size(self) -> float:
        s = self.weights.sum()
        return float(s * s / (self.weights**2).sum()) if self.size else 0.0

    def canonical_order(self) -> np.ndarray:
        """Sample order independent of how seeds were streamed in."""
        return np.lexsort((self.hhat, self.seeds))

    def tilt(self) -> Optional[TiltSpec]:
        if self.method == "tilted":
            return TiltSpec(self.params["theta"], self.params["corridor"])
        return None


def _accept(seeds, hraw, lr, smap, thr):
    h = smap.to_rescaled(hraw)
    keep = h > thr
    return seeds[keep], h[keep], np.exp(lr[keep])


def condition(
    spec: ModelSpec,
    smap: ScalingMap,
    method: str,
    budget: int,
    seed: int,
    target_L: Optional[float] = None,
    q: Optional[float] = None,
    theta: Optional[float] = None,
    corridor: float = 0.75,
    threads: Optional[int] = None,
) -> ConditionedEnsemble:
    """Draw a conditioned ensemble of environments with rescaled terminal
    height above a threshold."""
    if budget < 1:
        raise ParameterError("budget must be >= 1")
    threads = threads or default_threads()

    if method == "rejection":
        if target_L is None:
            raise ParameterError("rejection conditioning needs target_L")
        seeds, g, lr = screen(spec, seed, 0, budget, threads=threads)
        s, h, w = _accept(seeds, g, lr, smap, target_L)
        if s.size == 0 and target_L > -math.inf:
            # rule-of-three upper bound on the acceptance probability
            raise EmptyEnsembleError(
                f"no acceptances in {budget} replicates; "
                f"P(hhat > {target_L}) <= {3.0 / budget:.3g} at 95%",
                acceptance_bound=3.0 / budget,
            )
        return ConditionedEnsemble(
            model=spec,
            smap=smap,
            method=method,
            params={"target_L": target_L, "budget": budget, "seed": seed},
            threshold_L=target_L,
            seeds=s,
            hhat=h,
            weights=np.ones_like(h),
            budget=budget,
            acceptance_rate=s.size / budget,
        )

    if method == "quantile":
        if q is None or not 0.0 < q < 1.0:
            raise ParameterError("quantile conditioning needs q in (0, 1)")
        seeds, g, lr = screen(spec, seed, 0, budget, threads=threads)
        h = smap.to_rescaled(g)
        thr = float(np.quantile(h, 1.0 - q))
        keep = h > thr
        return ConditionedEnsemble(
            model=spec,
            smap=smap,
            method=method,
            params={"q": q, "budget": budget, "seed": seed},
            threshold_L=thr,
            seeds=seeds[keep],
            hhat=h[keep],
            weights=np.ones(int(keep.sum())),
            budget=budget,
            acceptance_rate=float(keep.mean()),
        )

    if method == "tilted":
        if target_L is None:
            raise ParameterError("tilted conditioning needs target_L")
        if theta is None:
            theta = tune_theta(spec, smap, target_L, seed, corridor, threads=threads)
        seeds, g, lr = screen(
            spec, seed, 0, budget, theta=theta, corridor=corridor, threads=threads
        )
        s, h, w = _accept(seeds, g, lr, smap, target_L)
        if s.size == 0:
            raise EmptyEnsembleError(
                f"tilted run produced no samples above {target_L}",
                acceptance_bound=3.0 / budget,
            )
        return ConditionedEnsemble(
            model=spec,
            smap=smap,
            method=method,
            params={
                "target_L": target_L,
                "budget": budget,
                "seed": seed,
                "theta": theta,
                "corridor": corridor,
            },
            threshold_L=target_L,
            seeds=s,
            hhat=h,
            weights=w,
            budget=budget,
            acceptance_rate=s.size / budget,
        )

    raise ParameterError(f"unknown conditioning method {method!r}")


def tune_theta(
    spec: ModelSpec,
    smap: ScalingMap,
    target_L: float,
    seed: int,
    corridor: float = 0.75,
    pilot: int = 400,
    iters: int = 9,
    threads: Optional[int] = None,
) -> float:
    """Bisect theta so the tilted median of hhat lands near target_L."""

    def tilted_median(th, it):
        _, g, _ = screen(
            spec,
            seed,
            PILOT_STREAM_BASE + it * pilot,
            pilot,
            theta=th,
            corridor=corridor,
            threads=threads,
        )
        return float(np.median(smap.to_rescaled(g)))

    # heuristic initial upper bracket from the corridor mean shift
    guess = target_L * 2.0 ** (-2.0 / 3.0) * spec.n ** (-2.0 / 3.0)
    hi = min(0.9, max(2.5 * guess / (1.0 + guess), 0.02))
    lo = 0.0
    it = 0
    while tilted_median(hi, it) < target_L and hi < 0.9:
        lo, hi = hi, min(0.9, hi * 1.8)
        it += 1
        if it > 12:
            break
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        it += 1
        if tilted_median(mid, it) < target_L:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ----------------------------------------------------------------------------
# tail estimators
# ----------------------------------------------------------------------------


@dataclass
class TailEstimate:
    L: float
    prob: float
    ci_low: float
    ci_high: float
    method: str
    budget: int
    effective_hits: float


@dataclass
class TailRatioEstimate:
    L: float
    delta: float
    ratio: float
    ci_low: float
    ci_high: float
    prediction: float

    def __post_init__(self):
        if not (self.ci_low <= self.ratio <= self.ci_high):
            raise ParameterError("ratio CI does not bracket the estimate")


def wilson_interval(hits: int, total: int, z: float = 1.959963984540054):
    if total <= 0:
        return 0.0, 1.0
    phat = hits / total
    z2 = z * z
    denom = 1.0 + z2 / total
    center = (phat + z2 / (2 * total)) / denom
    half = z * math.sqrt(phat * (1 - phat) / total + z2 / (4 * total * total)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _weighted_tail(ind_w: np.ndarray, budget: int):
    """Mean and delta-method log-normal 95% CI for a weighted indicator."""
    m = float(ind_w.mean())
    if m <= 0.0:
        return 0.0, 0.0, 0.0
    se = float(ind_w.std(ddof=1) / math.sqrt(budget))
    rel = 1.959963984540054 * se / m
    return m, m * math.exp(-rel), m * math.exp(rel)


def estimate_tail(
    spec: ModelSpec,
    smap: ScalingMap,
    L: float,
    method: str,
    budget: int,
    seed: int,
    theta: Optional[float] = None,
    corridor: float = 0.75,
    threads: Optional[int] = None,
    min_hits: float = 10.0,
) -> TailEstimate:
    """Unbiased estimate of P(hhat > L) with a 95% confidence interval."""
    if L == -math.inf:
        return TailEstimate(L, 1.0, 1.0, 1.0, method, budget, float(budget))
    if method in ("rejection", "quantile"):
        _, g, _ = screen(spec, seed, 0, budget, threads=threads)
        hits = int((smap.to_rescaled(g) > L).sum())
        if hits < min_hits:
            raise InsufficientDataError(
                f"only {hits} hits above L={L} in {budget} replicates",
                achieved=hits,
            )
        lo, hi = wilson_interval(hits, budget)
        return TailEstimate(L, hits / budget, lo, hi, method, budget, float(hits))
    if method == "tilted":
        if theta is None:
            theta = tune_theta(spec, smap, L, seed, corridor, threads=threads)
        _, g, lr = screen(
            spec, seed, 0, budget, theta=theta, corridor=corridor, threads=threads
        )
        ind = smap.to_rescaled(g) > L
        w = np.where(ind, np.exp(lr), 0.0)
        wpos = w[ind]
        ess = float(wpos.sum() ** 2 / (wpos**2).sum()) if ind.any() else 0.0
        if ess < min_hits:
            raise InsufficientDataError(
                f"effective hits {ess:.1f} < {min_hits} above L={L}", achieved=ess
            )
        p, lo, hi = _weighted_tail(w, budget)
        return TailEstimate(L, p, lo, hi, method, budget, ess)
    raise ParameterError(f"unknown tail method {method!r}")


def tail_ratio(
    spec: ModelSpec,
    smap: ScalingMap,
    L: float,
    delta: float,
    method: str,
    budget: int,
    seed: int,
    theta: Optional[float] = None,
    corridor: float = 0.75,
    threads: Optional[int] = None,
) -> TailRatioEstimate:
    """P(hhat > L + delta) / P(hhat > L) on common random numbers, with the
    Gaussian-bridge prediction exp(-2 delta sqrt(L))."""
    if delta < 0:
        raise ParameterError("delta must be >= 0")
    prediction = math.exp(-2.0 * delta * math.sqrt(L)) if L > 0 else float("nan")
    if method == "tilted" and theta is None:
        # aim the tilt between the two levels
        theta = tune_theta(spec, smap, L + 0.5 * delta, seed, corridor, threads=threads)
    if method == "tilted":
        _, g, lr = screen(
            spec, seed, 0, budget, theta=theta, corridor=corridor, threads=threads
        )
        w = np.exp(lr)
    else:
        _, g, _ = screen(spec, seed, 0, budget, threads=threads)
        w = np.ones_like(g)
    h = smap.to_rescaled(g)
    A = np.where(h > L + delta, w, 0.0)
    B = np.where(h > L, w, 0.0)
    nb = int((B > 0).sum())
    na = int((A > 0).sum())
    if na < 10 or nb < 10:
        raise InsufficientDataError(
            f"hits {na} above L+delta and {nb} above L are too few", achieved=min(na, nb)
        )
    if delta == 0.0:
        return TailRatioEstimate(L, 0.0, 1.0, 1.0, 1.0, 1.0)
    am, bm = float(A.mean()), float(B.mean())
    ratio = am / bm
    n = g.size
    va = float(A.var(ddof=1)) / n
    vb = float(B.var(ddof=1)) / n
    cab = float(np.cov(A, B, ddof=1)[0, 1]) / n
    var_log = va / am**2 + vb / bm**2 - 2.0 * cab / (am * bm)
    half = 1.959963984540054 * math.sqrt(max(var_log, 0.0))
    return TailRatioEstimate(
        L, delta, ratio, ratio * math.exp(-half), ratio * math.exp(half), prediction
    )


# ----------------------------------------------------------------------------
# segment-sum conditioning (for the proportionality experiment)
# ----------------------------------------------------------------------------


def _segment_worker(args):
    spec_d, anchors, theta, corridor, master, start, count = args
    spec = ModelSpec.from_dict(spec_d)
    seeds = _fast.derive_seeds(np.uint64(master & MASK64), start, count)
    tilt = TiltSpec(theta, corridor) if theta > 0 else None
    t0, t1, hw = tilt_frame(spec, tilt)
    g, lr = _fast.segment_chunk(
        seeds, np.asarray(anchors, dtype=np.int64), spec.dist_param, theta, hw, t0, t1
    )
    return seeds, g, lr


def condition_segments(
    spec: ModelSpec,
    smap: ScalingMap,
    times,
    method: str,
    budget: int,
    seed: int,
    target_L: Optional[float] = None,
    q: Optional[float] = None,
    theta: Optional[float] = None,
    corridor: float = 0.75,
    threads: Optional[int] = None,
) -> ConditionedEnsemble:
    """Condition on the segment-sum of passage values along the diagonal
    anchors at the given interior times exceeding a threshold.

    The per-sample payload holds the rescaled segment energies E_j;
    hhat is their sum.
    """
    if spec.model != "exp-lpp":
        raise ParameterError("segment conditioning is implemented at zero temperature")
    times = sorted(times)
    if any(not 0.0 < s < 1.0 for s in times):
        raise ParameterError("interior times must lie strictly inside (0, 1)")
    threads = threads or default_threads()
    pb, n = spec.pad_before, spec.n
    anchors = [pb] + [pb + int(round(s * (n - 1))) for s in times] + [pb + n - 1]
    if sorted(set(anchors)) != anchors:
        raise ParameterError("times map to coinciding anchor sites")
    d_anchor = [2 * a for a in anchors]
    centers = np.array(
        [smap.segment_center(d_anchor[t], d_anchor[t + 1]) for t in range(len(anchors) - 1)]
    )

    if method == "tilted" and theta is None:
        theta = tune_theta(spec, smap, target_L, seed, corridor, threads=threads)
    th = theta if method == "tilted" else 0.0
    per = max(1024, -(-budget // ((threads or 1) * 4)))
    tasks = []
    at = 0
    while at < budget:
        c = min(per, budget - at)
        tasks.append((spec.to_dict(), anchors, th, corridor if th > 0 else 0.0, seed, at, c))
        at += c
    parts = run_chunked(_segment_worker, tasks, threads)
    seeds = np.concatenate([p[0] for p in parts])
    g = np.concatenate([p[1] for p in parts], axis=0)
    lr = np.concatenate([p[2] for p in parts])
    energies = (g - centers[None, :]) / smap.sigma_h
    total = energies.sum(axis=1)

    if method == "quantile":
        if q is None:
            raise ParameterError("quantile conditioning needs q")
        thr = float(np.quantile(total, 1.0 - q))
        keep = total > thr
        w = np.ones(int(keep.sum()))
        params = {"q": q, "budget": budget, "seed": seed, "times": times}
    elif method in ("rejection", "tilted"):
        if target_L is None:
            raise ParameterError(f"{method} conditioning needs target_L")
        thr = target_L
        keep = total > thr
        w = np.exp(lr[keep]) if method == "tilted" else np.ones(int(keep.sum()))
        params = {
            "target_L": target_L,
            "budget": budget,
            "seed": seed,
            "times": times,
            "theta": th,
            "corridor": corridor,
        }
        if not keep.any():
            raise EmptyEnsembleError(
                f"no segment sums above {target_L}", acceptance_bound=3.0 / budget
            )
    else:
        raise ParameterError(f"unknown conditioning method {method!r}")
    return ConditionedEnsemble(
        model=spec,
        smap=smap,
        method=method,
        params=params,
        threshold_L=thr,
        seeds=seeds[keep],
        hhat=total[keep],
        weights=w,
        budget=budget,
        acceptance_rate=float(keep.mean()),
        payload=energies[keep],
    )
