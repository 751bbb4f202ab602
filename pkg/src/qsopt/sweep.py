"""Experiment configuration, sweeps over (d, epsilon) grids and exponent fits."""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .acsa import run_acsa
from .errors import ConfigError
from .fixtures import FIXTURE_KINDS, make_fixture
from .ledger import CostModel, QueryLedger
from .mean_estimation import GradientSource, make_backend, mlmc_variance_reduce
from .nonconvex import run_qsgd, run_qspider, sgd_baseline
from .records import CSV_HEADER, RunRecord
from .rng import Rng, derive_seed
from .tournament import run_qscp

ALGORITHMS = ("qvr", "acsa", "qscp", "qsgd", "qspider", "sgd-baseline")

PREDICTED_EXPONENT = {
    "qvr": 1.0,
    "acsa": 1.5,
    "qscp": 1.0,
    "qsgd": 3.0,
    "qspider": 2.5,
    "sgd-baseline": 2.0,
}

DEFAULT_FIXTURE = {
    "qvr": ("quadratic-noisy", {}),
    "acsa": ("ball-distance", {}),
    "qscp": ("ball-distance", {"noise": 0.5}),
    "qsgd": ("quadratic-noisy", {}),
    "qspider": ("seeded-smooth-nonconvex", {}),
    "sgd-baseline": ("ball-distance", {"noise": 0.5}),
}


def _parse_value(text):
    text = text.strip()
    if text.startswith("["):
        return json.loads(text)
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _parse_list(text, conv):
    return [conv(t) for t in text.replace(",", " ").split()]


@dataclass
class ExperimentConfig:
    algorithm: str
    fixture: str = ""
    fixture_params: dict = field(default_factory=dict)
    dims: list = field(default_factory=lambda: [2])
    epsilons: list = field(default_factory=lambda: [0.2, 0.1])
    trials: int = 10
    seed: int = 0
    backend: str = "contract"
    c_qme: float = 1.0
    csv_path: str | None = None
    json_path: str | None = None
    record_wall_time: bool = False

    def __post_init__(self):
        if not self.fixture:
            kind, params = DEFAULT_FIXTURE.get(self.algorithm, ("", {}))
            self.fixture = kind
            self.fixture_params = {**params, **self.fixture_params}
        self.validate()

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.fixture not in FIXTURE_KINDS:
            raise ConfigError(f"unknown fixture {self.fixture!r}")
        if not self.epsilons or any(e <= 0 for e in self.epsilons):
            raise ConfigError("epsilon grid must be non-empty and positive")
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigError("epsilon grid must be strictly decreasing")
        if not self.dims or any(int(d) < 1 for d in self.dims):
            raise ConfigError("dimensions must be positive")
        if int(self.trials) < 1:
            raise ConfigError("trials must be at least 1")
        if self.backend not in ("contract", "sample"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if not self.c_qme > 0:
            raise ConfigError("c_qme must be positive")
        if not 0 <= int(self.seed) < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        # fixture keys such as R are case-sensitive
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        if not cp.has_section("experiment"):
            raise ConfigError("config needs an [experiment] section")
        exp = cp["experiment"]
        try:
            kw = {
                "algorithm": exp.get("algorithm", "").strip(),
                "fixture": exp.get("fixture", "").strip(),
                "dims": _parse_list(exp.get("d", "2"), int),
                "epsilons": _parse_list(exp.get("epsilons", "0.2 0.1"), float),
                "trials": exp.getint("trials", 10),
                "seed": int(exp.get("seed", "0"), 0),
                "backend": exp.get("backend", "contract").strip(),
                "c_qme": exp.getfloat("c_qme", 1.0),
                "record_wall_time": exp.getboolean("record_wall_time", False),
            }
            if cp.has_section("fixture"):
                kw["fixture_params"] = {k: _parse_value(v) for k, v in cp["fixture"].items()}
            if cp.has_section("output"):
                kw["csv_path"] = cp["output"].get("csv")
                kw["json_path"] = cp["output"].get("json")
        except (ValueError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad config value: {exc}") from exc
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text)


def check_writable(path):
    """Fail before any trial runs if ``path`` cannot be written."""
    if path is None:
        return
    if os.path.isdir(path):
        raise ConfigError(f"output path {path} is a directory")
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise ConfigError(f"output directory {parent} does not exist")
    if os.path.exists(path):
        ok = os.access(path, os.W_OK)
    else:
        ok = os.access(parent, os.W_OK)
    if not ok:
        raise ConfigError(f"output path {path} is not writable")


# ---------------------------------------------------------------------------
# trials


def run_qvr(problem, sigma_hat, backend, ledger=None, rng=None):
    """One de-biased estimate of the gradient at the origin; metric is the error norm."""
    ledger = ledger if ledger is not None else QueryLedger()
    x0 = np.zeros(problem.dim)
    src = GradientSource(problem.oracle, x0)
    with ledger.phase("qvr"):
        est = mlmc_variance_reduce(src, sigma_hat, backend, ledger, rng)
    err = float(np.linalg.norm(est - problem.gradient(x0)))
    return est, RunRecord.from_ledger("qvr", problem, sigma_hat, rng.seed, ledger, err)


def run_trial(algorithm, problem, epsilon, backend, ledger, rng) -> RunRecord:
    if algorithm == "qvr":
        return run_qvr(problem, epsilon, backend, ledger, rng)[1]
    if algorithm == "acsa":
        return run_acsa(problem, epsilon, backend, ledger, rng)[1]
    if algorithm == "qscp":
        return run_qscp(problem, epsilon, backend, ledger, rng)[1]
    if algorithm == "qsgd":
        return run_qsgd(problem, epsilon, backend, ledger, rng)[1]
    if algorithm == "qspider":
        return run_qspider(problem, epsilon, backend, ledger, rng)[1]
    if algorithm == "sgd-baseline":
        return sgd_baseline(problem, epsilon, ledger, rng)[1]
    raise ConfigError(f"unknown algorithm {algorithm!r}")


def cell_seed(seed, d, epsilon) -> int:
    return derive_seed(int(seed), int(d), float(epsilon))


def run_cell(config: ExperimentConfig, d: int, epsilon: float) -> list[RunRecord]:
    """All trials of one (d, epsilon) cell; deterministic given the config seed."""
    base = cell_seed(config.seed, d, epsilon)
    fixture_rng = Rng(int(config.seed), derive_seed("fixture", int(d)))
    problem = make_fixture(config.fixture, d, config.fixture_params, fixture_rng)
    backend = make_backend(config.backend)
    cost_model = CostModel(c_qme=config.c_qme)
    out = []
    for trial in range(int(config.trials)):
        ledger = QueryLedger(cost_model)
        rng = Rng(derive_seed(base, trial), 0)
        start = time.perf_counter()
        rec = run_trial(config.algorithm, problem, epsilon, backend, ledger, rng)
        if config.record_wall_time:
            rec.wall_ms = 1000.0 * (time.perf_counter() - start)
        # drop bulky per-run diagnostics before records cross process boundaries
        rec.extra = {}
        out.append(rec)
    return out


def _run_cell_args(args):
    return run_cell(*args)


# ---------------------------------------------------------------------------
# analysis


def fit_slope(epsilons, mean_queries):
    """OLS of ``ln(queries)`` on ``ln(1/eps)``; returns ``(slope, se)`` with ``None`` where undefined."""
    x = np.log(1.0 / np.asarray(epsilons, dtype=np.float64))
    y = np.log(np.asarray(mean_queries, dtype=np.float64))
    n = x.shape[0]
    if n < 2 or not np.all(np.isfinite(y)):
        return None, None
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        return None, None
    slope = float(xc @ (y - y.mean())) / sxx
    if n < 3:
        return slope, None
    resid = y - y.mean() - slope * xc
    se = math.sqrt(float(resid @ resid) / (n - 2) / sxx)
    return slope, se


def summarize(config: ExperimentConfig, records: list[RunRecord]) -> dict:
    cells = []
    fits = []
    for d in config.dims:
        means = []
        for eps in config.epsilons:
            rows = [r for r in records if r.d == d and r.epsilon == eps]
            q = np.array([r.quantum_queries_charged for r in rows], dtype=np.float64)
            m = np.array([r.achieved_metric for r in rows], dtype=np.float64)
            se = float(m.std(ddof=1) / math.sqrt(len(m))) if len(m) > 1 else None
            cells.append(
                {
                    "d": int(d),
                    "epsilon": float(eps),
                    "trials": len(rows),
                    "mean_queries": float(q.mean()),
                    "mean_classical_samples": float(np.mean([r.classical_samples_drawn for r in rows])),
                    "mean_metric": float(m.mean()),
                    "metric_se": se,
                    "degraded_trials": int(sum(r.degraded for r in rows)),
                }
            )
            means.append(float(q.mean()))
        slope, se = fit_slope(config.epsilons, means)
        fits.append({"d": int(d), "slope": slope, "slope_se": se})
    single = fits[0] if len(fits) == 1 else {"slope": None, "slope_se": None}
    return {
        "algorithm": config.algorithm,
        "fixture": config.fixture,
        "fixture_params": {k: v for k, v in config.fixture_params.items() if k != "instance"},
        "backend": config.backend,
        "c_qme": config.c_qme,
        "seed": int(config.seed),
        "trials": int(config.trials),
        "dims": [int(d) for d in config.dims],
        "epsilons": [float(e) for e in config.epsilons],
        "cells": cells,
        "fits": fits,
        "slope": single["slope"],
        "slope_se": single["slope_se"],
        "predicted_exponent": PREDICTED_EXPONENT[config.algorithm],
    }


def csv_text(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.csv_row())
    return buf.getvalue()


def json_text(summary) -> str:
    return json.dumps(summary, sort_keys=True, indent=2) + "\n"


def run_sweep(config: ExperimentConfig, jobs: int = 1):
    """Run every (d, epsilon) cell and return ``(records, summary)``.

    Output paths are checked before any trial; CSV and JSON are written when
    configured.  Records come back in (d, epsilon, trial) order regardless
    of ``jobs``.
    """
    config.validate()
    check_writable(config.csv_path)
    check_writable(config.json_path)
    cells = [(config, int(d), float(e)) for d in config.dims for e in config.epsilons]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell_args, cells))
    else:
        results = [run_cell(*c) for c in cells]
    records = [r for cell in results for r in cell]
    summary = summarize(config, records)
    if config.csv_path:
        with open(config.csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text(records))
    if config.json_path:
        with open(config.json_path, "w", encoding="utf-8") as fh:
            fh.write(json_text(summary))
    return records, summary
