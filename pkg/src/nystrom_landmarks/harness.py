"""Experiment driver behind the ``nystrom-landmarks`` command line.

Results are written as a tidy (long format) CSV plus a JSON summary; per-phase
wall-clock timings go to a separate sidecar CSV so that the results themselves
are byte-for-byte reproducible.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import datasets
from .christoffel import christoffel_inverse_all
from .errors import ConfigError
from .kernel_core import Dataset, KernelSource, KernelSpec, kernel_matrix, load_dataset, standardize
from .projector import (
    LandmarkSet,
    check_corollary1,
    check_lemma1,
    check_lemma3,
    effective_dimension,
    error_frobenius_subsets,
    error_max_norm,
    error_operator_norm,
    leverage_scores,
    nystrom,
    projector_kernel,
)
from .rff import ApproxProjector, approx_ras, featurize, rff_build
from .samplers import (
    check_lemma4,
    das_sample,
    oversampling_lower_bound,
    ras_effective_dimension,
    ras_guarantee_trial,
    ras_sample,
    rls_sample,
    uniform_sample,
)

METHODS = ("ras", "das", "uniform", "rls", "approx-ras")
METRICS = ("opnorm", "maxnorm", "frob-subsets")
FORMATS = ("csv",) + tuple(datasets.GENERATORS)
WORKERS_ENV = "NYSTROM_WORKERS"


@dataclass
class ExperimentConfig:
    data: str | None = None
    format: str = "blobs"
    n_points: int = 300
    data_seed: int = 0
    drop_column: int | None = None
    kernel: str = "gaussian"
    sigma: float = 1.0
    gammas: list = field(default_factory=lambda: [10.0**-p for p in range(7)])
    epsilon: float = 1e-10
    c: float = 100.0
    t: float = 0.5
    delta: float = 0.2
    methods: list = field(default_factory=lambda: ["das", "uniform", "rls"])
    k: list = field(default_factory=lambda: [10, 20, 40])
    seeds: list = field(default_factory=lambda: list(range(10)))
    metrics: list = field(default_factory=lambda: ["opnorm"])
    subset_size: int = 2000
    num_subsets: int = 50
    n_features: int = 4000
    mu: float = 1e-12
    max_exact_n: int = 5000
    trials: int = 200
    output: str = "results"
    workers: int = 1

    @property
    def from_ras(self) -> bool:
        return self.k == ["from-ras"]

    def validate(self) -> "ExperimentConfig":
        errors = []
        if self.format not in FORMATS:
            errors.append(f"format: expected one of {', '.join(FORMATS)}, got {self.format!r}")
        if self.format == "csv" and not self.data:
            errors.append("data: a CSV path is required when format=csv")
        if self.kernel not in ("gaussian", "laplace"):
            errors.append(f"kernel: expected gaussian or laplace, got {self.kernel!r}")
        for key in ("sigma", "c", "n_points", "subset_size", "num_subsets", "n_features",
                    "max_exact_n", "trials", "workers"):
            value = getattr(self, key)
            if not value > 0:
                errors.append(f"{key}: must be positive, got {value}")
        if not self.mu >= 0:
            errors.append(f"mu: must be >= 0, got {self.mu}")
        if not 0 < self.epsilon < 1:
            errors.append(f"epsilon: must lie in (0, 1), got {self.epsilon}")
        if not 0 < self.delta < 1:
            errors.append(f"delta: must lie in (0, 1), got {self.delta}")
        if not self.t > 0:
            errors.append(f"t: must be positive, got {self.t}")
        if not self.gammas or any(not g > 0 for g in self.gammas):
            errors.append(f"gammas: need a nonempty list of positive values, got {self.gammas}")
        bad = [m for m in self.methods if m not in METHODS]
        if not self.methods or bad:
            errors.append(f"methods: need a nonempty subset of {', '.join(METHODS)}, got {self.methods}")
        bad = [m for m in self.metrics if m not in METRICS]
        if not self.metrics or bad:
            errors.append(f"metrics: need a nonempty subset of {', '.join(METRICS)}, got {self.metrics}")
        if not self.seeds:
            errors.append("seeds: need at least one seed")
        if not self.from_ras and (not self.k or any(not isinstance(v, int) or v < 1 for v in self.k)):
            errors.append(f"k: need positive integers or 'from-ras', got {self.k}")
        if self.from_ras and "ras" not in self.methods:
            errors.append("k: 'from-ras' needs 'ras' among the methods")
        if errors:
            raise ConfigError("; ".join(errors))
        return self


_LIST_FIELDS = {"gammas": float, "methods": str, "k": None, "seeds": int, "metrics": str}


def _parse_k(tokens):
    if len(tokens) == 1 and tokens[0] == "from-ras":
        return ["from-ras"]
    try:
        return [int(v) for v in tokens]
    except ValueError as exc:
        raise ConfigError(f"k: expected integers or 'from-ras', got {tokens}") from exc


def coerce(name: str, value):
    """Convert a flag or config-file string to the type of ``ExperimentConfig.<name>``."""
    kinds = {f.name: f for f in fields(ExperimentConfig)}
    if name not in kinds:
        raise ConfigError(f"{name}: unknown configuration key")
    if name in _LIST_FIELDS:
        tokens = value if isinstance(value, list) else [v for v in str(value).replace(",", " ").split() if v]
        if name == "k":
            return _parse_k([str(v) for v in tokens])
        try:
            return [_LIST_FIELDS[name](v) for v in tokens]
        except ValueError as exc:
            raise ConfigError(f"{name}: cannot parse {value!r}") from exc
    default = getattr(ExperimentConfig(), name)
    if value is None or (name in ("data", "drop_column") and str(value).lower() in ("", "none")):
        return None
    try:
        if name == "drop_column" or isinstance(default, int) and not isinstance(default, bool):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError as exc:
        raise ConfigError(f"{name}: cannot parse {value!r}") from exc
    return str(value)


def read_config_file(path) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        values[key] = coerce(key, value)
    return values


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    values = dict(file_values or {})
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "workers" not in values and os.environ.get(WORKERS_ENV):
        values["workers"] = coerce("workers", os.environ[WORKERS_ENV])
    return ExperimentConfig(**values).validate()


def load_data(config: ExperimentConfig) -> Dataset:
    if config.format == "csv":
        return load_dataset(config.data, config.drop_column)
    X, labels = datasets.GENERATORS[config.format](config.n_points, config.data_seed)
    return standardize(X, labels)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class SweepResult:
    rows: list
    timings: list
    summary: dict

    def results_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "gamma", "k", "seed", "metric", "value"])
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def timings_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "gamma", "k", "seed", "phase", "wallclock_ms"])
        for r in self.timings:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary, indent=2, sort_keys=True) + "\n"

    def write(self, prefix) -> list[Path]:
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        paths = [Path(f"{prefix}.csv"), Path(f"{prefix}.json"), Path(f"{prefix}.timings.csv")]
        for path, text in zip(paths, (self.results_csv(), self.summary_json(), self.timings_csv())):
            path.write_text(text)
        return paths


class _Context:
    """Data, kernel and per-gamma projectors shared read-only by all sweep cells."""

    def __init__(self, config: ExperimentConfig, data: Dataset):
        self.config = config
        self.data = data
        self.spec = KernelSpec(config.kernel, config.sigma)
        self.source = KernelSource(self.spec, data)
        exact = [m for m in config.methods if m != "approx-ras"]
        dense_metrics = [m for m in config.metrics if m != "frob-subsets"]
        if data.n > config.max_exact_n and (exact or dense_metrics):
            raise ConfigError(
                f"max_exact_n: n={data.n} exceeds the desk-scale cap {config.max_exact_n} "
                f"for methods {exact} / metrics {dense_metrics}"
            )
        self.K = kernel_matrix(self.spec, data) if data.n <= config.max_exact_n else None
        self.projectors = {}
        if exact:
            for g in config.gammas:
                self.projectors[g] = projector_kernel(self.K, g)
        self.features = {}

    def approx_projector(self, gamma: float, seed: int) -> ApproxProjector:
        key = (gamma, seed)
        if key not in self.features:
            rff = rff_build(self.spec, self.data.d, self.config.n_features, seed)
            self.features[key] = ApproxProjector(featurize(rff, self.data), gamma)
        return self.features[key]


def _select(ctx: _Context, method: str, gamma: float, k: int | None, seed: int) -> LandmarkSet:
    cfg = ctx.config
    n = ctx.data.n
    if method == "ras":
        return ras_sample(ctx.projectors[gamma], cfg.epsilon, cfg.c, cfg.t, seed).landmarks
    if method == "approx-ras":
        return approx_ras(ctx.approx_projector(gamma, seed), gamma, cfg.epsilon, cfg.c, cfg.t, seed).landmarks
    k = min(k, n)
    if method == "das":
        return das_sample(ctx.projectors[gamma], k).landmarks
    if method == "uniform":
        return uniform_sample(n, k, seed)
    if method == "rls":
        return rls_sample(ctx.projectors[gamma], k, seed)
    raise ConfigError(f"methods: unknown method {method!r}")


def _evaluate(ctx: _Context, landmarks: LandmarkSet, seed: int) -> dict:
    cfg = ctx.config
    base = ctx.K if ctx.K is not None else ctx.source
    approx = nystrom(base, landmarks.unweighted(), cfg.mu)
    out = {}
    if "opnorm" in cfg.metrics:
        out["opnorm"] = error_operator_norm(ctx.K, approx)
    if "maxnorm" in cfg.metrics:
        out["maxnorm"] = error_max_norm(ctx.K, approx) / float(np.max(np.abs(ctx.K.entries)))
    if "frob-subsets" in cfg.metrics:
        size = min(cfg.subset_size, ctx.data.n)
        errs = error_frobenius_subsets(ctx.spec, ctx.data, approx, size, cfg.num_subsets, seed)
        out["frob-subsets"] = float(np.mean(errs))
    return out


def _run_cell(ctx: _Context, gamma: float, seed: int):
    """All methods for one (gamma, seed) pair; returns result rows and timing rows."""
    cfg = ctx.config
    rows, timings = [], []
    order = sorted(cfg.methods, key=lambda m: (m != "ras", METHODS.index(m)))
    ras_k = None
    for method in order:
        if method in ("ras", "approx-ras"):
            ks = [None]
        elif cfg.from_ras:
            ks = [max(ras_k, 1)]
        else:
            ks = cfg.k
        for k in ks:
            t0 = time.perf_counter()
            landmarks = _select(ctx, method, gamma, k, seed)
            t1 = time.perf_counter()
            if method == "ras":
                ras_k = len(landmarks)
            metrics = _evaluate(ctx, landmarks, seed)
            t2 = time.perf_counter()
            actual_k = len(landmarks)
            if method in ("ras", "approx-ras"):
                k_label = "adaptive"
            else:
                k_label = "from-ras" if cfg.from_ras else k
            for metric in cfg.metrics:
                rows.append((method, gamma, actual_k, seed, metric, metrics[metric], k_label))
            timings.append((method, gamma, actual_k, seed, "select", round(1e3 * (t1 - t0), 3)))
            timings.append((method, gamma, actual_k, seed, "evaluate", round(1e3 * (t2 - t1), 3)))
    return rows, timings


def _summarize(cfg: ExperimentConfig, data: Dataset, rows) -> dict:
    groups = {}
    for method, gamma, k, seed, metric, value, k_label in rows:
        groups.setdefault((method, str(k_label), metric, gamma), []).append((value, k))
    aggregates = []
    for (method, k_label, metric, gamma), vals in sorted(groups.items()):
        v = np.array([x for x, _ in vals])
        aggregates.append({
            "method": method, "k": k_label, "metric": metric, "gamma": gamma,
            "mean": float(v.mean()), "std": float(v.std()), "count": len(v),
            "mean_landmarks": float(np.mean([k for _, k in vals])),
            "best_gamma": False,
        })
    best = {}
    for i, a in enumerate(aggregates):
        key = (a["method"], a["k"], a["metric"])
        if key not in best or a["mean"] < aggregates[best[key]]["mean"]:
            best[key] = i
    for i in best.values():
        aggregates[i]["best_gamma"] = True
    config = asdict(cfg)
    # Output location and parallelism do not affect the results.
    config.pop("workers")
    config.pop("output")
    return {
        "config": config,
        "dataset": {"n": data.n, "d": data.d},
        "aggregates": aggregates,
    }


def _row_order(row):
    method, gamma, _, seed, metric, _, k_label = row
    k_key = (0, k_label, "") if isinstance(k_label, int) else (1, 0, k_label)
    return (METHODS.index(method), k_key, -gamma, seed, metric)


def run_sweep(config: ExperimentConfig, data: Dataset | None = None) -> SweepResult:
    data = load_data(config) if data is None else data
    ctx = _Context(config, data)
    cells = [(g, s) for g in config.gammas for s in config.seeds]
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outputs = list(pool.map(lambda gs: _run_cell(ctx, *gs), cells))
    else:
        outputs = [_run_cell(ctx, g, s) for g, s in cells]
    rows = sorted((r for out, _ in outputs for r in out), key=_row_order)
    timings = [t for _, out in outputs for t in out]
    summary = _summarize(config, data, rows)
    return SweepResult([r[:6] for r in rows], timings, summary)


# ---------------------------------------------------------------------------
# scores
# ---------------------------------------------------------------------------


def dump_scores(config: ExperimentConfig, kind: str = "points", data: Dataset | None = None) -> str:
    """CSV of per-point scores (``kind='points'``) or the DAS trace (``kind='das'``).

    Uses the first gamma of the configuration and the first k for the DAS trace.
    """
    data = load_data(config) if data is None else data
    if data.n > config.max_exact_n:
        raise ConfigError(f"max_exact_n: n={data.n} exceeds the desk-scale cap {config.max_exact_n}")
    spec = KernelSpec(config.kernel, config.sigma)
    gamma = config.gammas[0]
    P = projector_kernel(kernel_matrix(spec, data), gamma)
    k = data.n if config.from_ras else min(config.k[0], data.n)
    trace = das_sample(P, k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if kind == "points":
        buf.write(
            "# index; label: generator region (empty for CSV input); leverage: ridge leverage score; "
            "christoffel_inverse: n * leverage; christoffel: its reciprocal (large in dense regions); "
            "das_rank: DAS selection order (-1 if not selected)\n"
        )
        w.writerow(["index", "label", "leverage", "christoffel_inverse", "christoffel", "das_rank"])
        lev = leverage_scores(P)
        inv = christoffel_inverse_all(P)
        rank = np.full(data.n, -1)
        rank[trace.landmarks.indices] = np.arange(len(trace.landmarks))
        labels = data.labels if data.labels is not None else [""] * data.n
        for i in range(data.n):
            lab = labels[i]
            lab = "" if lab == "" else (int(lab) if float(lab).is_integer() else float(lab))
            w.writerow([i, lab, repr(float(lev[i])), repr(float(inv[i])), repr(1.0 / float(inv[i])), int(rank[i])])
    elif kind == "das":
        buf.write(
            "# m: landmarks selected so far; landmark: index chosen at step m (empty after the last step); "
            "residual_max: max residual diagonal given m landmarks; bound: convergence bound (empty if undefined)\n"
        )
        w.writerow(["m", "landmark", "residual_max", "bound"])
        idx = trace.landmarks.indices
        for m in range(len(trace.residual_max)):
            b = trace.bounds[m]
            w.writerow([m, int(idx[m]) if m < len(idx) else "", repr(float(trace.residual_max[m])),
                        "" if math.isnan(b) else repr(float(b))])
    else:
        raise ConfigError(f"kind: expected 'points' or 'das', got {kind!r}")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


def check_bounds(config: ExperimentConfig, data: Dataset | None = None) -> dict:
    """Run the guarantee and identity checks on the configured dataset at the first gamma."""
    data = load_data(config) if data is None else data
    if data.n > config.max_exact_n:
        raise ConfigError(f"max_exact_n: n={data.n} exceeds the desk-scale cap {config.max_exact_n}")
    spec = KernelSpec(config.kernel, config.sigma)
    K = kernel_matrix(spec, data)
    gamma = config.gammas[0]
    eps = config.epsilon
    P = projector_kernel(K, gamma)
    n = data.n
    report = {"dataset": {"n": n, "d": data.d}, "gamma": gamma, "epsilon": eps}

    d_eff = ras_effective_dimension(K, gamma, eps)
    c = oversampling_lower_bound(eps, config.delta, d_eff)
    trials = [ras_guarantee_trial(K, P, eps, c, 0.5, seed) for seed in range(config.trials)]
    frac = float(np.mean([tr.success for tr in trials]))
    report["theorem1"] = {
        "d_eff": d_eff, "c": c, "delta": config.delta, "trials": config.trials,
        "success_fraction": frac, "bound": trials[0].bound,
        "max_error": max(tr.error for tr in trials),
        "mean_landmarks": float(np.mean([tr.num_landmarks for tr in trials])),
        "passed": frac >= 1.0 - config.delta,
    }

    lemma1 = [check_lemma1(K, P, uniform_sample(n, max(1, n // 4), s), 1e-4) for s in config.seeds]
    report["lemma1"] = {
        "min_slack": min(r.min_eigenvalue for r in lemma1),
        "tolerance": lemma1[0].tolerance,
        "passed": all(r.passed for r in lemma1),
    }

    t = config.t if config.t < 1.0 / (1.0 + eps) else 0.5
    lemma4 = [check_lemma4(P, K, ras_sample(P, eps, c, t, s).landmarks, eps, t) for s in config.seeds]
    held = [r for r in lemma4 if r.premise]
    report["lemma4"] = {
        "premise_held": len(held), "runs": len(lemma4),
        "min_slack": min((r.min_eigenvalue for r in held), default=None),
        "tolerance": lemma4[0].tolerance,
        "passed": all(r.passed for r in lemma4),
    }

    trace = das_sample(P, n)
    ms = [m for m in range(2, n)]
    slack = [trace.bounds[m] - trace.residual_max[m] for m in ms]
    report["prop4"] = {
        "min_slack": min(slack) if slack else None,
        "monotone": bool(np.all(np.diff(trace.residual_max) <= 1e-12)),
        "passed": (min(slack) >= 0 if slack else True) and bool(np.all(np.diff(trace.residual_max) <= 1e-12)),
    }

    gap3 = check_lemma3(K, gamma, eps)
    report["lemma3"] = {"max_gap": gap3, "passed": gap3 <= 1e-10}

    sets = [trace.landmarks.indices[:m] for m in (1, max(1, n // 4), max(1, n // 2))]
    gap_c = max(check_corollary1(P, s) for s in sets)
    report["corollary1"] = {"max_gap": gap_c, "passed": gap_c <= 1e-10}
    report["effective_dimension"] = effective_dimension(P)
    report["passed"] = all(v["passed"] for v in report.values() if isinstance(v, dict) and "passed" in v)
    return report
