"""Config-driven experiment runner with manifests and exact replay.

Usage:
    kpz <experiment> --config FILE [--key value ...]
    kpz replay MANIFEST [--output-dir DIR] [--threads N]
    kpz verify MANIFEST

Config files are flat `key = value` lines; command-line overrides win.
Every run writes its outputs plus manifest.json (config echo, artifact
version, timestamps, sha256 per output file).  Replaying a manifest
reproduces the outputs bit-for-bit at any thread count.

Exit codes: 0 ok, 2 parameter error, 3 insufficient data, 4 internal error.
"""

import argparse
import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import __version__, rare, scaling, stats
from .env import exponential, log_gamma
from .errors import (
    InsufficientDataError,
    KpzError,
    ParameterError,
    ReplayError,
)
from .parallel import default_threads
from .rare import ConditionedEnsemble, ModelSpec
from .scaling import CalibrationReport, ScalingMap

EXPERIMENTS = (
    "calibrate",
    "tail",
    "tailratio",
    "bridge",
    "tent",
    "coalesce",
    "localize",
    "proportion",
    "shiftinv",
    "exponent",
)


@dataclass
class ExperimentConfig:
    experiment: str = ""
    model: str = "exp-lpp"
    beta: float = math.inf
    n: int = 64
    seed: int = 1
    budget: int = 100000
    replicates: int = 10000
    method: str = "quantile"
    target_L: Optional[float] = None
    q: Optional[float] = None
    theta: Optional[float] = None
    corridor: float = 0.75
    times: List[float] = dataclasses.field(default_factory=lambda: [0.5])
    L: Optional[float] = None
    delta: Optional[float] = None
    levels: List[str] = dataclasses.field(default_factory=lambda: ["none", "1.5", "2.5"])
    s: float = 0.5
    M: float = 8.0
    window_fraction: float = 0.25
    window_halfwidth: Optional[float] = None
    x_count: int = 13
    study: str = "transversal"
    n_list: List[int] = dataclasses.field(default_factory=lambda: [64, 128, 256])
    x: float = 0.0
    y: float = 0.0
    shift: float = 0.5
    crossing: bool = False
    dist_shape: float = 2.0
    calibration: Optional[str] = None
    calib_replicates: int = 2000
    output_dir: str = "kpz-out"
    threads: Optional[int] = None


_LIST_FLOAT = "list_float"
_LIST_INT = "list_int"
_LIST_STR = "list_str"

_FIELD_TYPES = {
    "experiment": str,
    "model": str,
    "beta": float,
    "n": int,
    "seed": int,
    "budget": int,
    "replicates": int,
    "method": str,
    "target_L": float,
    "q": float,
    "theta": float,
    "corridor": float,
    "times": _LIST_FLOAT,
    "L": float,
    "delta": float,
    "levels": _LIST_STR,
    "s": float,
    "M": float,
    "window_fraction": float,
    "window_halfwidth": float,
    "x_count": int,
    "study": str,
    "n_list": _LIST_INT,
    "x": float,
    "y": float,
    "shift": float,
    "crossing": bool,
    "dist_shape": float,
    "calibration": str,
    "calib_replicates": int,
    "output_dir": str,
    "threads": int,
}


def _cast(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        return None
    if kind is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ParameterError(f"key {key!r}: cannot parse boolean from {raw!r}")
    if kind is float:
        return float(raw)
    if kind is int:
        return int(raw)
    if kind == _LIST_FLOAT:
        return [float(v) for v in raw.split(",") if v.strip()]
    if kind == _LIST_INT:
        return [int(v) for v in raw.split(",") if v.strip()]
    if kind == _LIST_STR:
        return [v.strip() for v in raw.split(",") if v.strip()]
    return raw


def parse_config(text: str, overrides=()) -> ExperimentConfig:
    """Flat key=value lines plus (key, value) overrides; later wins.
    Unknown keys are rejected by name."""
    values = {}
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line {ln}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ParameterError(f"unknown config key {key!r}")
        values[key] = _cast(key, raw)
    for key, raw in overrides:
        if key not in _FIELD_TYPES:
            raise ParameterError(f"unknown config key {key!r}")
        values[key] = _cast(key, raw) if isinstance(raw, str) else raw
    return ExperimentConfig(**values)


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in dataclasses.fields(ExperimentConfig):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if isinstance(v, list):
            v = ",".join(str(u) for u in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float) and math.isinf(v):
            v = "inf"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------
# output helpers
# ----------------------------------------------------------------------------


class OutputDir:
    """All experiment writes go through here; nothing escapes the directory."""

    def __init__(self, root):
        self.root = Path(root).resolve()
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: List[Path] = []

    def path(self, name: str) -> Path:
        p = (self.root / name).resolve()
        if self.root not in p.parents and p != self.root:
            raise ParameterError(f"output path {name!r} escapes the output directory")
        return p

    def write_text(self, name: str, text: str) -> None:
        p = self.path(name)
        p.write_text(text, encoding="utf-8")
        self.files.append(p)

    def write_json(self, name: str, obj) -> None:
        self.write_text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def write_csv(self, name: str, header, rows) -> None:
        out = [",".join(header)]
        for idx, vals in rows:
            cells = [str(idx)]
            for v in vals:
                if isinstance(v, float):
                    cells.append("%.17g" % v)
                elif isinstance(v, (np.floating,)):
                    cells.append("%.17g" % float(v))
                else:
                    cells.append(str(v))
            out.append(",".join(cells))
        self.write_text(name, "\n".join(out) + "\n")


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _config_dict(cfg: ExperimentConfig) -> dict:
    d = dataclasses.asdict(cfg)
    if isinstance(d.get("beta"), float) and math.isinf(d["beta"]):
        d["beta"] = "inf"
    return d


def _config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    if d.get("beta") == "inf":
        d["beta"] = math.inf
    return ExperimentConfig(**d)


# ----------------------------------------------------------------------------
# experiment drivers
# ----------------------------------------------------------------------------


def _model_spec(cfg: ExperimentConfig, pad_before=0, pad_after=0) -> ModelSpec:
    if cfg.model == "exp-lpp":
        beta = math.inf
        dist = exponential(1.0)
    elif cfg.model == "exp-polymer":
        beta = 1.0 if math.isinf(cfg.beta) else cfg.beta
        dist = exponential(1.0)
    elif cfg.model == "log-gamma":
        beta = 1.0 if math.isinf(cfg.beta) else cfg.beta
        dist = log_gamma(cfg.dist_shape)
    else:
        raise ParameterError(f"unknown model {cfg.model!r}")
    return ModelSpec(
        model=cfg.model,
        n=cfg.n,
        beta=beta,
        dist_kind=dist.kind,
        dist_param=dist.param,
        pad_before=pad_before,
        pad_after=pad_after,
    )


def _scaling_map(cfg: ExperimentConfig, spec: ModelSpec, threads: int) -> ScalingMap:
    """Exact constants for exponential LPP; calibrated otherwise."""
    if spec.model == "exp-lpp":
        return ScalingMap.exact_exponential(
            spec.n, pad_before=spec.pad_before, pad_after=spec.pad_after
        )
    if cfg.calibration:
        report = CalibrationReport.from_json(Path(cfg.calibration).read_text())
    else:
        report = scaling.calibrate(
            spec.model,
            [spec.n],
            cfg.calib_replicates,
            seed=cfg.seed + 777,
            beta=spec.beta,
            dist=spec.dist,
            threads=threads,
        )
    return report.map_for(spec.n, pad_before=spec.pad_before, pad_after=spec.pad_after)


def _write_ensemble(out: OutputDir, ens: ConditionedEnsemble, prefix="ensemble"):
    manifest = {
        "method": ens.method,
        "params": ens.params,
        "threshold_L": ens.threshold_L,
        "budget": ens.budget,
        "acceptance_rate": ens.acceptance_rate,
        "effective_sample_size": ens.effective_sample_size,
        "model": ens.model.to_dict(),
    }
    out.write_json(f"{prefix}.json", manifest)
    order = ens.canonical_order()
    rows = (
        (int(ens.seeds[i]), [float(ens.hhat[i]), float(ens.weights[i])]) for i in order
    )
    out.write_csv(f"{prefix}.csv", ["replicate_seed", "hhat", "weight"], rows)


def _condition_from_cfg(cfg, spec, smap, threads) -> ConditionedEnsemble:
    return rare.condition(
        spec,
        smap,
        cfg.method,
        cfg.budget,
        cfg.seed,
        target_L=cfg.target_L,
        q=cfg.q,
        theta=cfg.theta,
        corridor=cfg.corridor,
        threads=threads,
    )


def run_calibrate(cfg, out, threads):
    spec_model = cfg.model
    report = scaling.calibrate(
        spec_model,
        cfg.n_list,
        cfg.replicates,
        cfg.seed,
        beta=1.0 if math.isinf(cfg.beta) else cfg.beta,
        dist=log_gamma(cfg.dist_shape) if spec_model == "log-gamma" else exponential(1.0),
        threads=threads,
    )
    out.write_text("calibration.json", report.to_json() + "\n")
    rows = (
        (e.n, [e.c, e.sigma_h, e.sigma_x, e.c / e.n, e.sigma_h / e.n ** (1 / 3)])
        for e in report.entries
    )
    out.write_csv(
        "calibration.csv",
        ["n", "c", "sigma_h", "sigma_x", "c_over_n", "sigma_h_over_n13"],
        rows,
    )
    return {"exponent": report.exponent, "stderr": report.exponent_stderr}


def run_tail(cfg, out, threads):
    if cfg.L is None:
        raise ParameterError("tail experiment needs L")
    spec = _model_spec(cfg)
    smap = _scaling_map(cfg, spec, threads)
    est = rare.estimate_tail(
        spec, smap, cfg.L, cfg.method, cfg.budget, cfg.seed,
        theta=cfg.theta, corridor=cfg.corridor, threads=threads,
    )
    asym = None
    if cfg.L > 0:
        asym = (32 * math.pi) ** -1 * cfg.L**-1.5 * math.exp(-4.0 / 3.0 * cfg.L**1.5)
    payload = {
        "L": est.L,
        "prob": est.prob,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "method": est.method,
        "budget": est.budget,
        "effective_hits": est.effective_hits,
        "asymptotic_reference": asym,
    }
    out.write_json("tail.json", payload)
    out.write_csv(
        "tail.csv",
        ["row", "L", "prob", "ci_low", "ci_high", "effective_hits"],
        [(0, [est.L, est.prob, est.ci_low, est.ci_high, est.effective_hits])],
    )
    return {"prob": est.prob}


def run_tailratio(cfg, out, threads):
    if cfg.L is None or cfg.delta is None:
        raise ParameterError("tailratio needs L and delta")
    spec = _model_spec(cfg)
    smap = _scaling_map(cfg, spec, threads)
    est = rare.tail_ratio(
        spec, smap, cfg.L, cfg.delta, cfg.method, cfg.budget, cfg.seed,
        theta=cfg.theta, corridor=cfg.corridor, threads=threads,
    )
    payload = {
        "L": est.L,
        "delta": est.delta,
        "ratio": est.ratio,
        "ci_low": est.ci_low,
        "ci_high": est.ci_high,
        "prediction": est.prediction,
    }
    out.write_json("tailratio.json", payload)
    out.write_csv(
        "tailratio.csv",
        ["row", "L", "delta", "ratio", "ci_low", "ci_high", "prediction"],
        [(0, [est.L, est.delta, est.ratio, est.ci_low, est.ci_high, est.prediction])],
    )
    return {"ratio": est.ratio, "prediction": est.prediction}


def run_bridge(cfg, out, threads):
    spec = _model_spec(cfg)
    smap = _scaling_map(cfg, spec, threads)
    ens = _condition_from_cfg(cfg, spec, smap, threads)
    _write_ensemble(out, ens)
    rep = stats.bridge_fdd(ens, cfg.times, threads)
    payload = rep.to_dict()
    payload["target_variance"] = [row[i] for i, row in enumerate(payload["target_cov"])]
    out.write_json("bridge.json", payload)
    out.write_csv("bridge_samples.csv", rep.csv_header(), rep.csv_rows())
    return {"threshold_L": ens.threshold_L, "ks_pvalue": rep.ks_pvalue}


def run_tent(cfg, out, threads):
    if cfg.target_L is None and cfg.q is None:
        raise ParameterError("tent needs target_L or q")
    levels = [float(v) for v in cfg.levels if v != "none"] or [cfg.target_L or 2.0]
    Lmax = max(levels)
    pad = int(math.ceil(math.sqrt(Lmax) * 2 ** (5.0 / 3.0) * cfg.n ** (2.0 / 3.0) / 2.0)) + 2
    spec = _model_spec(cfg, pad_after=pad)
    smap = _scaling_map(cfg, spec, threads)
    verdict = {}
    for L in levels:
        c2 = dataclasses.replace(cfg, target_L=L)
        ens = _condition_from_cfg(c2, spec, smap, threads)
        xs = np.linspace(-math.sqrt(L), math.sqrt(L), cfg.x_count)
        rep = stats.tent_fit(ens, xs.tolist(), threads)
        tag = ("%g" % L).replace(".", "p")
        out.write_json(f"tent_L{tag}.json", rep.to_dict())
        out.write_csv(f"tent_L{tag}.csv", rep.csv_header(), rep.csv_rows())
        verdict[f"median_L{tag}"] = rep.quantiles["median"]
    return verdict


def run_coalesce(cfg, out, threads):
    pad = int(math.ceil(0.6 * 2 ** (5.0 / 3.0) * cfg.n ** (2.0 / 3.0))) + 2
    spec = _model_spec(cfg, pad_before=pad, pad_after=pad)
    smap = _scaling_map(cfg, spec, threads)
    fractions = {}
    base_h = None
    for lev in cfg.levels:
        if lev == "none":
            ens = rare.condition(
                spec, smap, "rejection", cfg.budget // 10, cfg.seed,
                target_L=-math.inf, threads=threads,
            )
            first = min(float(v) for v in cfg.levels if v != "none")
            h = cfg.window_halfwidth or cfg.window_fraction * math.sqrt(first)
            tag = "none"
        else:
            L = float(lev)
            c2 = dataclasses.replace(cfg, target_L=L)
            ens = _condition_from_cfg(c2, spec, smap, threads)
            h = cfg.window_halfwidth or cfg.window_fraction * math.sqrt(L)
            tag = ("%g" % L).replace(".", "p")
        rep = stats.coalescence(ens, window_halfwidth=h, threads=threads)
        out.write_json(f"coalesce_{tag}.json", rep.to_dict())
        out.write_csv(f"coalesce_{tag}.csv", rep.csv_header(), rep.csv_rows())
        fractions[tag] = rep.zero_defect_fraction
    return {"zero_defect_fraction": fractions}


def run_localize(cfg, out, threads):
    if cfg.model == "exp-lpp":
        raise ParameterError("localization needs a positive-temperature model")
    spec = _model_spec(cfg)
    smap = _scaling_map(cfg, spec, threads)
    ens = _condition_from_cfg(cfg, spec, smap, threads)
    _write_ensemble(out, ens)
    rep = stats.localization(ens, cfg.s, cfg.M, threads)
    out.write_json("localize.json", rep.to_dict())
    out.write_csv("localize.csv", rep.csv_header(), rep.csv_rows())
    return {
        "threshold_L": ens.threshold_L,
        "fraction_below_0.01": rep.fraction_below["0.01"],
    }


def run_proportion(cfg, out, threads):
    spec = _model_spec(cfg)
    smap = _scaling_map(cfg, spec, threads)
    ens = rare.condition_segments(
        spec, smap, cfg.times, cfg.method, cfg.budget, cfg.seed,
        target_L=cfg.target_L, q=cfg.q, theta=cfg.theta,
        corridor=cfg.corridor, threads=threads,
    )
    _write_ensemble(out, ens)
    rep = stats.proportionality(ens)
    out.write_json("proportion.json", rep.to_dict())
    out.write_csv("proportion.csv", rep.csv_header(), rep.csv_rows())
    return {"threshold_L": ens.threshold_L, "abs_q95": rep.abs_q95}


def run_shiftinv(cfg, out, threads):
    pad = int(math.ceil((abs(cfg.x) + abs(cfg.y) + abs(cfg.shift) + 0.5)
                        * 2 ** (5.0 / 3.0) * cfg.n ** (2.0 / 3.0))) + 2
    spec = _model_spec(cfg, pad_before=pad, pad_after=pad)
    smap = _scaling_map(cfg, spec, threads)
    a = cfg.shift
    if cfg.crossing:
        fam_a = [(-cfg.x, cfg.y), (cfg.x, -cfg.y)]
        fam_b = [(-cfg.x + a, cfg.y + a), (cfg.x + a, -cfg.y + a)]
    else:
        fam_a = [(cfg.x, cfg.y)]
        fam_b = [(cfg.x + a, cfg.y + a)]
    rep = stats.shift_invariance(
        spec, smap, fam_a, fam_b, cfg.seed, cfg.replicates, threads=threads
    )
    out.write_json("shiftinv.json", rep.to_dict())
    return {"joint_sum_ks_p": rep.joint_sum_ks[1]}


def run_exponent(cfg, out, threads):
    spec0 = _model_spec(cfg)
    if cfg.study == "transversal":
        pairs = []
        rows = []
        for n in cfg.n_list:
            spec = dataclasses.replace(spec0, n=n)
            smap = ScalingMap.exact_exponential(n)
            ens = rare.condition(
                spec, smap, "rejection", cfg.replicates, cfg.seed,
                target_L=-math.inf, threads=threads,
            )
            rep = stats.bridge_fdd(ens, [0.5], threads)
            # displacement in lattice sites: x * sigma_x / 2
            sd_sites = math.sqrt(rep.cov[0][0]) / (2.0 * 1.0) * smap.sigma_x / 2.0
            pairs.append((n, sd_sites))
            rows.append((n, [sd_sites]))
        slope, stderr = stats.exponent_fit(pairs)
        out.write_csv("exponent_transversal.csv", ["n", "sd_sites"], rows)
        out.write_json(
            "exponent_transversal.json",
            {"pairs": [[a, b] for a, b in pairs], "slope": slope, "stderr": stderr},
        )
        return {"slope": slope, "stderr": stderr}
    if cfg.study == "variance":
        levels = [float(v) for v in cfg.levels if v != "none"]
        smap = ScalingMap.exact_exponential(cfg.n)
        pairs = []
        rows = []
        for L in levels:
            ens = rare.condition(
                spec0, smap, "tilted", cfg.budget, cfg.seed,
                target_L=L, corridor=cfg.corridor, threads=threads,
            )
            rep = stats.bridge_fdd(ens, [0.5], threads)
            var_x = rep.cov[0][0] / (4.0 * math.sqrt(L))
            pairs.append((L, var_x))
            rows.append((0, [L, var_x, ens.effective_sample_size]))
        slope, stderr = stats.exponent_fit(pairs)
        out.write_csv("exponent_variance.csv", ["row", "L", "var_x", "ess"], rows)
        out.write_json(
            "exponent_variance.json",
            {"pairs": [[a, b] for a, b in pairs], "slope": slope, "stderr": stderr},
        )
        return {"slope": slope, "stderr": stderr}
    raise ParameterError(f"unknown exponent study {cfg.study!r}")


_DRIVERS = {
    "calibrate": run_calibrate,
    "tail": run_tail,
    "tailratio": run_tailratio,
    "bridge": run_bridge,
    "tent": run_tent,
    "coalesce": run_coalesce,
    "localize": run_localize,
    "proportion": run_proportion,
    "shiftinv": run_shiftinv,
    "exponent": run_exponent,
}


def run(cfg: ExperimentConfig) -> dict:
    """Execute one experiment; returns the manifest (also written to disk)."""
    if cfg.experiment not in _DRIVERS:
        raise ParameterError(f"unknown experiment {cfg.experiment!r}")
    threads = cfg.threads or default_threads()
    out = OutputDir(cfg.output_dir)
    started = datetime.now(timezone.utc).isoformat()
    verdicts = _DRIVERS[cfg.experiment](cfg, out, threads)
    finished = datetime.now(timezone.utc).isoformat()
    manifest = {
        "artifact": "kpzlab",
        "version": __version__,
        "experiment": cfg.experiment,
        "config": _config_dict(cfg),
        "started": started,
        "finished": finished,
        "verdicts": verdicts,
        "outputs": [
            {"path": p.name, "sha256": sha256_file(p)} for p in sorted(out.files)
        ],
    }
    (out.root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return manifest


def replay(manifest_path, output_dir=None, threads=None) -> dict:
    """Re-run a manifest's config and require identical output digests."""
    mpath = Path(manifest_path)
    manifest = json.loads(mpath.read_text())
    if manifest.get("version") != __version__:
        raise ReplayError(
            f"manifest version {manifest.get('version')} != artifact {__version__}"
        )
    cfg = _config_from_dict(manifest["config"])
    cfg.output_dir = str(output_dir or (mpath.parent / "replay"))
    if threads is not None:
        cfg.threads = threads
    new_manifest = run(cfg)
    old = {o["path"]: o["sha256"] for o in manifest["outputs"]}
    new = {o["path"]: o["sha256"] for o in new_manifest["outputs"]}
    if old != new:
        drift = sorted(set(old) ^ set(new)) + [
            p for p in old if p in new and old[p] != new[p]
        ]
        raise ReplayError(f"replay digests differ: {drift}")
    return new_manifest


def verify(manifest_path) -> None:
    """Recompute digests of the files a manifest points at."""
    mpath = Path(manifest_path)
    manifest = json.loads(mpath.read_text())
    bad = []
    for o in manifest["outputs"]:
        p = mpath.parent / o["path"]
        if not p.exists():
            bad.append(f"{o['path']}: missing")
        elif sha256_file(p) != o["sha256"]:
            bad.append(f"{o['path']}: digest mismatch")
    if bad:
        raise ReplayError("; ".join(bad))


def _build_parser():
    ap = argparse.ArgumentParser(prog="kpz", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--output-dir", dest="output_dir_flag")
        p.add_argument("--threads", type=int, dest="threads_flag")
        p.add_argument("overrides", nargs="*", help="key value pairs, later wins")
    pr = sub.add_parser("replay", help="re-run a manifest and compare digests")
    pr.add_argument("manifest")
    pr.add_argument("--output-dir")
    pr.add_argument("--threads", type=int)
    pv = sub.add_parser("verify", help="check manifest digests against files")
    pv.add_argument("manifest")
    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    ns = ap.parse_args(argv)
    try:
        if ns.command == "replay":
            replay(ns.manifest, output_dir=ns.output_dir, threads=ns.threads)
            print("replay ok: digests match")
            return 0
        if ns.command == "verify":
            verify(ns.manifest)
            print("verify ok: digests match")
            return 0
        text = Path(ns.config).read_text() if ns.config else ""
        raw = ns.overrides
        if len(raw) % 2 != 0:
            raise ParameterError("overrides must come in key value pairs")
        overrides = [("experiment", ns.command)]
        overrides += list(zip(raw[0::2], raw[1::2]))
        if ns.output_dir_flag:
            overrides.append(("output_dir", ns.output_dir_flag))
        if ns.threads_flag:
            overrides.append(("threads", str(ns.threads_flag)))
        cfg = parse_config(text, overrides)
        manifest = run(cfg)
        print(json.dumps(manifest["verdicts"], indent=2, sort_keys=True))
        return 0
    except (ParameterError,) as e:
        print(f"parameter error: {e}", file=sys.stderr)
        return 2
    except InsufficientDataError as e:
        print(f"insufficient data: {e}", file=sys.stderr)
        return 3
    except KpzError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
