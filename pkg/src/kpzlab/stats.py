"""Statistical verification suite: one report per theorem-level prediction.

Each report is a pure function of its input ensemble and parameters; samples
are processed in a canonical order (sorted by replicate seed) so reordering
the ensemble never changes a digest.  Weighted variants of every statistic
reduce to the unweighted ones at unit weights.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import kolmogorov as _kolmogorov_sf
from scipy.stats import norm

from . import _fast
from .env import TiltSpec
from .errors import InsufficientDataError, ParameterError, RangeError
from .parallel import default_threads, run_chunked
from .rare import ConditionedEnsemble, ModelSpec, materialize_frame, screen
from .rng import derive_seed
from .scaling import ScalingMap, power_law_fit

# ----------------------------------------------------------------------------
# weighted primitives
# ----------------------------------------------------------------------------


def wmean(x: np.ndarray, w: np.ndarray) -> float:
    return float((w * x).sum() / w.sum())


def wvar(x: np.ndarray, w: np.ndarray) -> float:
    m = wmean(x, w)
    return float((w * (x - m) ** 2).sum() / w.sum())


def wcov(x: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    mx, my = wmean(x, w), wmean(y, w)
    return float((w * (x - mx) * (y - my)).sum() / w.sum())


def wquantile(x: np.ndarray, w: np.ndarray, q) -> np.ndarray:
    """Weighted quantile, inverted-CDF convention (smallest x with
    cumulative weight >= q * total)."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    cw = np.cumsum(w[order])
    qs = np.atleast_1d(np.asarray(q, dtype=float))
    idx = np.searchsorted(cw, qs * cw[-1], side="left")
    out = xs[np.minimum(idx, xs.size - 1)]
    return out if np.ndim(q) else float(out[0])


def kolmogorov_sf(t: float) -> float:
    """P(sup|B(F)| > t) for the Kolmogorov distribution (asymptotic law of
    sqrt(n) D_n)."""
    return float(_kolmogorov_sf(t))


def ks_one_sample(x: np.ndarray, w: np.ndarray, cdf) -> Tuple[float, float]:
    """Weighted one-sample KS statistic against a callable CDF and its
    asymptotic p-value at the effective sample size."""
    order = np.argsort(x, kind="stable")
    xs = x[order]
    cw = np.cumsum(w[order]) / w.sum()
    F = np.asarray(cdf(xs), dtype=float)
    lower = np.concatenate(([0.0], cw[:-1]))
    D = float(max(np.abs(cw - F).max(), np.abs(F - lower).max()))
    n_eff = float(w.sum() ** 2 / (w**2).sum())
    rt = math.sqrt(n_eff)
    p = kolmogorov_sf((rt + 0.12 + 0.11 / rt) * D)
    return D, p


def ks_two_sample(a: np.ndarray, b: np.ndarray) -> Tuple[float, float]:
    """Two-sample KS statistic with the asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    allv = np.concatenate([a, b])
    ca = np.searchsorted(a, allv, side="right") / a.size
    cb = np.searchsorted(b, allv, side="right") / b.size
    D = float(np.abs(ca - cb).max())
    en = math.sqrt(a.size * b.size / (a.size + b.size))
    p = kolmogorov_sf((en + 0.12 + 0.11 / en) * D)
    return D, p


def exponent_fit(pairs: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """Least-squares slope of log(statistic) vs log(scale) with stderr."""
    if len(pairs) < 3:
        raise ParameterError("need at least 3 scales")
    scales = [p[0] for p in pairs]
    stats = [p[1] for p in pairs]
    if any(s <= 0 for s in scales) or any(v <= 0 for v in stats):
        raise ParameterError("scales and statistics must be positive")
    return power_law_fit(scales, stats)


# ----------------------------------------------------------------------------
# per-sample recomputation (paths, profiles, defects, quenched masses)
# ----------------------------------------------------------------------------


def _ensemble_core(ens: ConditionedEnsemble) -> dict:
    tilt = ens.tilt()
    return {
        "model": ens.model.to_dict(),
        "map": {
            "n": ens.smap.n,
            "mode": ens.smap.mode,
            "c": ens.smap.c,
            "sigma_h": ens.smap.sigma_h,
            "sigma_x": ens.smap.sigma_x,
            "pad_before": ens.smap.pad_before,
            "pad_after": ens.smap.pad_after,
        },
        "tilt": None if tilt is None else {"theta": tilt.theta, "corridor": tilt.corridor_halfwidth},
    }


def _rebuild(core: dict):
    spec = ModelSpec.from_dict(core["model"])
    smap = ScalingMap(**core["map"])
    tilt = None if core["tilt"] is None else TiltSpec(core["tilt"]["theta"], core["tilt"]["corridor"])
    return spec, smap, tilt


def _path_x_zero_temp(W, spec, smap, d_rels):
    pb, n = spec.pad_before, spec.n
    sub = np.ascontiguousarray(W[pb : pb + n, pb : pb + n])
    V = _fast.passage_field_from(sub)
    path = _fast.geodesic_backtrace(V, n - 1, n - 1)
    out = np.empty(len(d_rels))
    for t, d in enumerate(d_rels):
        i, j = path[d]
        out[t] = (j - i) / smap.sigma_x
    return out


def _path_x_backbone(W, spec, smap, d_rels):
    pb, n = spec.pad_before, spec.n
    sub = np.ascontiguousarray(W[pb : pb + n, pb : pb + n])
    beta = spec.beta
    Vin = _fast.logz_field_from(sub, beta)
    Vout = _fast.logz_field_from(np.ascontiguousarray(sub[::-1, ::-1]), beta)[::-1, ::-1]
    out = np.empty(len(d_rels))
    for t, d in enumerate(d_rels):
        lo, hi = max(0, d - n + 1), min(n - 1, d)
        rows = np.arange(hi, lo - 1, -1)  # increasing column order
        cols = d - rows
        score = Vin[rows, cols] + Vout[rows, cols] - beta * sub[rows, cols]
        k = int(np.argmax(score))
        out[t] = (cols[k] - rows[k]) / smap.sigma_x
    return out


def _sample_worker(args):
    core, kind, params, seeds = args
    spec, smap, tilt = _rebuild(core)
    pb, n = spec.pad_before, spec.n
    rows = []
    for seed in seeds:
        W, _ = materialize_frame(spec, int(seed), tilt)
        if kind == "path-x":
            d_rels = params["d_rels"]
            if spec.zero_temperature:
                rows.append(_path_x_zero_temp(W, spec, smap, d_rels))
            else:
                rows.append(_path_x_backbone(W, spec, smap, d_rels))
        elif kind == "profile":
            offsets = params["offsets"]  # row offsets m from the sink corner
            sub = np.ascontiguousarray(W[pb:, pb:])
            if spec.zero_temperature:
                V = _fast.passage_field_from(sub)
            else:
                V = _fast.logz_field_from(sub, spec.beta)
            vals = [V[n - 1 + m, n - 1 - m] for m in offsets]
            rows.append(smap.to_rescaled(np.array(vals)))
        elif kind == "coalescence":
            ax = params["ax"]
            by = params["by"]
            src0 = smap.source_site
            snk0 = smap.terminal_site
            f1 = _fast.passage_field_from(np.ascontiguousarray(W[ax[0] :, ax[1] :]))
            f2 = _fast.passage_field_from(np.ascontiguousarray(W[src0[0] :, src0[1] :]))

            def at(F, origin, site):
                return F[site[0] - origin[0], site[1] - origin[1]]

            defect = (
                at(f1, ax, snk0)
                + at(f2, src0, by)
                - at(f1, ax, by)
                - at(f2, src0, snk0)
            )
            rows.append(np.array([defect / smap.sigma_h, defect]))
        elif kind == "localization":
            d_rel = params["d_rel"]
            delta_half = params["delta_half"]
            beta = spec.beta
            sub = np.ascontiguousarray(W[pb : pb + n, pb : pb + n])
            Vin = _fast.logz_field_from(sub, beta)
            Vout = _fast.logz_field_from(np.ascontiguousarray(sub[::-1, ::-1]), beta)[::-1, ::-1]
            lo, hi = max(0, d_rel - n + 1), min(n - 1, d_rel)
            rcols = np.arange(hi, lo - 1, -1)
            cols = d_rel - rcols
            score = Vin[rcols, cols] + Vout[rcols, cols] - beta * sub[rcols, cols]
            m = score.max()
            probs = np.exp(score - m)
            probs /= probs.sum()
            k = int(np.argmax(score))
            delta = cols - rcols
            outside = np.abs(delta - delta[k]) > delta_half
            rows.append(np.array([float(probs[outside].sum())]))
        else:
            raise ParameterError(f"unknown recompute kind {kind!r}")
    return np.array(rows)


def _per_sample(ens: ConditionedEnsemble, kind: str, params: dict, threads=None):
    """Recompute a per-sample statistic over the ensemble, in canonical
    (seed-sorted) order; returns (values, weights)."""
    threads = threads or default_threads()
    order = ens.canonical_order()
    seeds = ens.seeds[order]
    weights = ens.weights[order]
    core = _ensemble_core(ens)
    per = max(16, -(-seeds.size // (threads * 4)))
    tasks = []
    at = 0
    while at < seeds.size:
        tasks.append((core, kind, params, [int(s) for s in seeds[at : at + per]]))
        at += per
    vals = np.concatenate(run_chunked(_sample_worker, tasks, threads), axis=0)
    return vals, weights


# ----------------------------------------------------------------------------
# reports
# ----------------------------------------------------------------------------


@dataclass
class BridgeFddReport:
    times: List[float]
    sample_count: int
    effective_sample_size: float
    threshold_L: float
    mean: List[float]
    cov: List[List[float]]
    target_cov: List[List[float]]
    ks_stat: List[float]
    ks_pvalue: List[float]
    per_sample: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "times": self.times,
            "sample_count": self.sample_count,
            "effective_sample_size": self.effective_sample_size,
            "threshold_L": self.threshold_L,
            "mean": self.mean,
            "cov": self.cov,
            "target_cov": self.target_cov,
            "ks_stat": self.ks_stat,
            "ks_pvalue": self.ks_pvalue,
        }

    def csv_header(self):
        return ["sample"] + [f"y_{s:g}" for s in self.times] + ["weight"]

    def csv_rows(self):
        for k in range(self.per_sample.shape[0]):
            yield k, list(self.per_sample[k]) + [self.weights[k]]


def bridge_target_cov(times: Sequence[float]) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    return np.minimum.outer(t, t) * (1.0 - np.maximum.outer(t, t))


def bridge_fdd(ens: ConditionedEnsemble, times: Sequence[float], threads=None) -> BridgeFddReport:
    """Finite-dimensional statistics of the rescaled conditioned path
    y(s) = 2 L^(1/4) x(s) against the standard Brownian bridge."""
    times = list(times)
    if any(not 0.0 < s < 1.0 for s in times):
        raise ParameterError("times must lie strictly inside (0, 1)")
    if ens.size < 200:
        raise InsufficientDataError(f"need >= 200 conditioned samples, have {ens.size}")
    smap = ens.smap
    d_rels = [int(round(s * smap.dmax)) for s in times]
    xs, w = _per_sample(ens, "path-x", {"d_rels": d_rels}, threads)
    L = ens.threshold_L
    ys = 2.0 * L**0.25 * xs
    k = len(times)
    mean = [wmean(ys[:, i], w) for i in range(k)]
    cov = [[wcov(ys[:, i], ys[:, j], w) for j in range(k)] for i in range(k)]
    ks_stat, ks_p = [], []
    for i, s in enumerate(times):
        sd = math.sqrt(s * (1.0 - s))
        D, p = ks_one_sample(ys[:, i], w, lambda v: norm.cdf(v / sd))
        ks_stat.append(D)
        ks_p.append(p)
    return BridgeFddReport(
        times=times,
        sample_count=ens.size,
        effective_sample_size=ens.effective_sample_size,
        threshold_L=L,
        mean=mean,
        cov=cov,
        target_cov=bridge_target_cov(times).tolist(),
        ks_stat=ks_stat,
        ks_pvalue=ks_p,
        per_sample=ys,
        weights=w,
    )


@dataclass
class IncrementReport:
    s: float
    t: float
    variance: float
    target: float
    sample_count: int
    threshold_L: float

    def to_dict(self) -> dict:
        return self.__dict__.copy()


def two_point_increment(ens: ConditionedEnsemble, s: float, t: float, threads=None) -> IncrementReport:
    """Variance of 2 L^(1/4) (x(t) - x(s)) against the bridge increment
    variance (t-s)(1-(t-s))."""
    if s == t:
        return IncrementReport(s, t, 0.0, 0.0, ens.size, ens.threshold_L)
    rep = bridge_fdd(ens, [s, t], threads)
    ys = rep.per_sample
    inc = ys[:, 1] - ys[:, 0]
    return IncrementReport(
        s=s,
        t=t,
        variance=wvar(inc, rep.weights),
        target=(t - s) * (1.0 - (t - s)),
        sample_count=ens.size,
        threshold_L=ens.threshold_L,
    )


@dataclass
class TentReport:
    threshold_L: float
    xs: List[float]
    tent: List[float]
    residual_sup: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    quantiles: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "threshold_L": self.threshold_L,
            "xs": self.xs,
            "tent": self.tent,
            "quantiles": self.quantiles,
            "sample_count": int(self.residual_sup.size),
        }

    def csv_header(self):
        return ["sample", "residual_sup", "weight"]

    def csv_rows(self):
        for k in range(self.residual_sup.size):
            yield k, [self.residual_sup[k], self.weights[k]]


def tent_profile(L: float, x: np.ndarray) -> np.ndarray:
    return L - 2.0 * math.sqrt(L) * np.abs(x)


def tent_fit(ens: ConditionedEnsemble, xs: Sequence[float], threads=None) -> TentReport:
    """Sup-residual of the rescaled terminal profile against the tent
    L - 2 sqrt(L) |x|, normalized by L^(1/4)."""
    smap = ens.smap
    L = ens.threshold_L
    if L <= 0:
        raise ParameterError("tent fit needs a positive threshold")
    xs = list(xs)
    d_t = smap.dmax  # terminal antidiagonal, relative to the source anchor
    offsets = []
    side = smap.grid_shape[0]
    for x in xs:
        delta = smap.offset_of(x, d_t)
        m = -delta // 2  # site (n-1+m, n-1-m)
        if not (0 <= smap.n - 1 + m < side - smap.pad_before and 0 <= smap.n - 1 - m < side - smap.pad_before):
            raise RangeError(f"profile point x={x} maps outside the padded lattice")
        offsets.append(int(m))
    vals, w = _per_sample(ens, "profile", {"offsets": offsets}, threads)
    tent = tent_profile(L, np.asarray(xs))
    resid = np.abs(vals - tent[None, :]).max(axis=1) / L**0.25
    qs = wquantile(resid, w, [0.25, 0.5, 0.75, 0.9])
    return TentReport(
        threshold_L=L,
        xs=xs,
        tent=tent.tolist(),
        residual_sup=resid,
        weights=w,
        quantiles={"q25": float(qs[0]), "median": float(qs[1]), "q75": float(qs[2]), "q90": float(qs[3])},
    )


@dataclass
class CoalescenceReport:
    threshold_L: float
    window_halfwidth: float
    zero_defect_fraction: float
    defects: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    quantiles: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "threshold_L": self.threshold_L,
            "window_halfwidth": self.window_halfwidth,
            "zero_defect_fraction": self.zero_defect_fraction,
            "quantiles": self.quantiles,
            "sample_count": int(self.defects.size),
        }

    def csv_header(self):
        return ["sample", "defect", "weight"]

    def csv_rows(self):
        for k in range(self.defects.size):
            yield k, [self.defects[k], self.weights[k]]


def coalescence(
    ens: ConditionedEnsemble,
    window_fraction: float = 0.25,
    window_halfwidth: Optional[float] = None,
    zero_tol_raw: float = 1e-8,
    threads=None,
) -> CoalescenceReport:
    """Quadrangle defect of the window-corner quadruple
    (x=-h at time 0, 0) -> (0, y=+h at time 1) versus the conditioned center
    passage; zero defect certifies coalescence at zero temperature.

    The window is h = window_fraction * sqrt(threshold_L) unless an explicit
    halfwidth is given (required for unconditioned ensembles).
    """
    smap = ens.smap
    if window_halfwidth is None:
        if not ens.threshold_L > 0:
            raise ParameterError("unconditioned ensemble needs an explicit window")
        window_halfwidth = window_fraction * math.sqrt(ens.threshold_L)
    h = float(window_halfwidth)
    ax = smap.site_of(-h, 0.0)
    by = smap.site_of(+h, 1.0)
    vals, w = _per_sample(ens, "coalescence", {"ax": ax, "by": by}, threads)
    rescaled, raw = vals[:, 0], vals[:, 1]
    zero = raw <= zero_tol_raw
    frac = float((w * zero).sum() / w.sum())
    qs = wquantile(rescaled, w, [0.5, 0.9])
    return CoalescenceReport(
        threshold_L=ens.threshold_L,
        window_halfwidth=h,
        zero_defect_fraction=frac,
        defects=rescaled,
        weights=w,
        quantiles={"median": float(qs[0]), "q90": float(qs[1])},
    )


@dataclass
class LocalizationReport:
    threshold_L: float
    s: float
    M: float
    window_halfwidth: float
    outside_mass: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    quantiles: Dict[str, float] = field(default_factory=dict)
    fraction_below: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "threshold_L": self.threshold_L,
            "s": self.s,
            "M": self.M,
            "window_halfwidth": self.window_halfwidth,
            "quantiles": self.quantiles,
            "fraction_below": self.fraction_below,
            "sample_count": int(self.outside_mass.size),
        }

    def csv_header(self):
        return ["sample", "outside_mass", "weight"]

    def csv_rows(self):
        for k in range(self.outside_mass.size):
            yield k, [self.outside_mass[k], self.weights[k]]


def localization(ens: ConditionedEnsemble, s: float, M: float, threads=None) -> LocalizationReport:
    """Quenched polymer mass outside the window of rescaled halfwidth
    M L^(-1/2) log L around the backbone site at height s."""
    if ens.model.zero_temperature:
        raise ParameterError("localization needs a positive-temperature model")
    L = ens.threshold_L
    if L <= 1.0:
        raise ParameterError("localization window needs threshold_L > 1")
    lo_s = L ** (-5.0 / 8.0)
    if not lo_s <= s <= 1.0 - lo_s:
        raise RangeError(f"s={s} outside [L^(-5/8), 1 - L^(-5/8)]")
    smap = ens.smap
    halfwidth_x = M * L**-0.5 * math.log(L)
    delta_half = halfwidth_x * smap.sigma_x
    d_rel = int(round(s * smap.dmax))
    vals, w = _per_sample(
        ens, "localization", {"d_rel": d_rel, "delta_half": delta_half}, threads
    )
    outside = vals[:, 0]
    qs = wquantile(outside, w, [0.5, 0.9, 0.99])
    frac = {
        "0.01": float((w * (outside < 0.01)).sum() / w.sum()),
        "0.1": float((w * (outside < 0.1)).sum() / w.sum()),
    }
    return LocalizationReport(
        threshold_L=L,
        s=s,
        M=M,
        window_halfwidth=halfwidth_x,
        outside_mass=outside,
        weights=w,
        quantiles={"median": float(qs[0]), "q90": float(qs[1]), "q99": float(qs[2])},
        fraction_below=frac,
    )


@dataclass
class ProportionalityReport:
    threshold_L: float
    times: List[float]
    deviations: np.ndarray = field(repr=False)  # (samples, segments)
    weights: np.ndarray = field(repr=False)
    abs_q95: float = 0.0
    per_segment_q95: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "threshold_L": self.threshold_L,
            "times": self.times,
            "abs_q95": self.abs_q95,
            "per_segment_q95": self.per_segment_q95,
            "sample_count": int(self.deviations.shape[0]),
        }

    def csv_header(self):
        k = self.deviations.shape[1]
        return ["sample"] + [f"dev_{t}" for t in range(k)] + ["weight"]

    def csv_rows(self):
        for r in range(self.deviations.shape[0]):
            yield r, list(self.deviations[r]) + [self.weights[r]]


def proportionality(ens: ConditionedEnsemble) -> ProportionalityReport:
    """Per-segment deviations (E_j - ds_j L) / (sqrt(ds_j) L^(1/4)) for a
    segment-sum conditioned ensemble."""
    if ens.payload is None:
        raise ParameterError("ensemble lacks per-segment energies")
    times = list(ens.params["times"])
    if not times:
        return ProportionalityReport(ens.threshold_L, [], np.empty((ens.size, 0)), ens.weights)
    bounds = [0.0] + times + [1.0]
    ds = np.diff(np.asarray(bounds))
    L = ens.threshold_L
    order = ens.canonical_order()
    E = ens.payload[order]
    w = ens.weights[order]
    dev = (E - ds[None, :] * L) / (np.sqrt(ds)[None, :] * L**0.25)
    absq = wquantile(np.abs(dev).max(axis=1), w, 0.95)
    perseg = [float(wquantile(np.abs(dev[:, j]), w, 0.95)) for j in range(dev.shape[1])]
    return ProportionalityReport(
        threshold_L=L,
        times=times,
        deviations=dev,
        weights=w,
        abs_q95=float(absq),
        per_segment_q95=perseg,
    )


# ----------------------------------------------------------------------------
# unconditioned symmetry tests
# ----------------------------------------------------------------------------


@dataclass
class ShiftInvarianceReport:
    family_a: List[Tuple[float, float]]
    family_b: List[Tuple[float, float]]
    replicates: int
    per_pair_ks: List[Tuple[float, float]]
    joint_sum_ks: Tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "family_a": [list(p) for p in self.family_a],
            "family_b": [list(p) for p in self.family_b],
            "replicates": self.replicates,
            "per_pair_ks": [list(p) for p in self.per_pair_ks],
            "joint_sum_ks": list(self.joint_sum_ks),
        }


def _family_values(W, spec, smap, family):
    """Rescaled passage values for pairs (x at time 0) -> (y at time 1),
    sharing one field per distinct source."""
    by_source = {}
    out = np.empty(len(family))
    for t, (x, y) in enumerate(family):
        src = smap.site_of(x, 0.0)
        tgt = smap.site_of(y, 1.0)
        if src not in by_source:
            sub = np.ascontiguousarray(W[src[0] :, src[1] :])
            by_source[src] = (_fast.passage_field_from(sub), src)
        F, origin = by_source[src]
        out[t] = (F[tgt[0] - origin[0], tgt[1] - origin[1]] - smap.c) / smap.sigma_h
    return out


def _shift_worker(args):
    core, family_a, family_b, master, start, count, common = args
    spec, smap, _ = _rebuild(core)
    va = np.empty((count, len(family_a)))
    vb = np.empty((count, len(family_b)))
    for k in range(count):
        sa = derive_seed(master, 2 * (start + k))
        sb = sa if common else derive_seed(master, 2 * (start + k) + 1)
        Wa, _ = materialize_frame(spec, sa, None)
        va[k] = _family_values(Wa, spec, smap, family_a)
        Wb = Wa if common else materialize_frame(spec, sb, None)[0]
        vb[k] = _family_values(Wb, spec, smap, family_b)
    return va, vb


def validate_shift_family(family) -> None:
    xs = [p[0] for p in family]
    ys = [p[1] for p in family]
    if sorted(xs) != xs:
        raise ParameterError("sources must be nondecreasing")
    if sorted(ys, reverse=True) != ys:
        raise ParameterError("targets must be nonincreasing")


def shift_invariance(
    spec: ModelSpec,
    smap: ScalingMap,
    family_a,
    family_b,
    seed: int,
    replicates: int,
    common_randomness: bool = False,
    threads=None,
) -> ShiftInvarianceReport:
    """Compare the joint law of passage values over two point families that
    the shift-invariance property equates: sources nondecreasing, targets
    nonincreasing, per-pair differences x_i - y_i matching across families."""
    family_a = [tuple(p) for p in family_a]
    family_b = [tuple(p) for p in family_b]
    if len(family_a) != len(family_b):
        raise ParameterError("families must have equal size")
    validate_shift_family(family_a)
    validate_shift_family(family_b)
    for (xa, ya), (xb, yb) in zip(family_a, family_b):
        if not math.isclose(xa - ya, xb - yb, rel_tol=0, abs_tol=1e-12):
            raise ParameterError("pair differences x_i - y_i must match across families")
    threads = threads or default_threads()
    core = _ensemble_core_like(spec, smap)
    per = max(64, -(-replicates // (threads * 4)))
    tasks = []
    at = 0
    while at < replicates:
        c = min(per, replicates - at)
        tasks.append((core, family_a, family_b, seed, at, c, common_randomness))
        at += c
    parts = run_chunked(_shift_worker, tasks, threads)
    va = np.concatenate([p[0] for p in parts], axis=0)
    vb = np.concatenate([p[1] for p in parts], axis=0)
    per_pair = [ks_two_sample(va[:, t], vb[:, t]) for t in range(len(family_a))]
    joint = ks_two_sample(va.sum(axis=1), vb.sum(axis=1))
    return ShiftInvarianceReport(
        family_a=family_a,
        family_b=family_b,
        replicates=replicates,
        per_pair_ks=per_pair,
        joint_sum_ks=joint,
    )


def _ensemble_core_like(spec: ModelSpec, smap: ScalingMap) -> dict:
    return {
        "model": spec.to_dict(),
        "map": {
            "n": smap.n,
            "mode": smap.mode,
            "c": smap.c,
            "sigma_h": smap.sigma_h,
            "sigma_x": smap.sigma_x,
            "pad_before": smap.pad_before,
            "pad_after": smap.pad_after,
        },
        "tilt": None,
    }


# ----------------------------------------------------------------------------
# tail-ratio proof mechanism (pure numerics)
# ----------------------------------------------------------------------------


def gaussian_bridge_mechanism(L: float, delta: float, M: float) -> Tuple[float, float]:
    """Normal-tail ratio behind the tail-ratio law.

    The conditioned profile near its peak behaves like a Brownian bridge
    whose value at the origin is normal with mean -L + 2 sqrt(L) M and
    variance sqrt(L) - M; the exact upper-tail ratio at L+delta vs L then
    approaches exp(-2 delta sqrt(L)).
    """
    if not 0 < M < math.sqrt(L):
        raise ParameterError("need 0 < M < sqrt(L)")
    if delta < 0:
        raise ParameterError("delta must be >= 0")
    mu = -L + 2.0 * math.sqrt(L) * M
    sigma = math.sqrt(math.sqrt(L) - M)
    exact = math.exp(
        norm.logsf((L + delta - mu) / sigma) - norm.logsf((L - mu) / sigma)
    )
    leading = math.exp(-2.0 * delta * math.sqrt(L))
    return exact, leading
