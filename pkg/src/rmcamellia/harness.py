"""Monte-Carlo experiment engine.

Trial ``t`` draws all of its randomness (codeword, channel noise, petals)
from a generator seeded with ``(seed, t)``, and outcomes are reduced in
trial order, so results do not depend on how trials are split across
worker processes.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .camellia import correlation_rho, sample_petal_members
from .channel import SymmetricChannel, capacity, channel_from_descriptor, transmit
from .decoder import TIE, block_map_batch, boost_vote, map_decide, resolve_petal_dimension
from .errors import BudgetError, ConfigError
from .rm import RmCode, build_rm, code_dimension, codebook, rate

log = logging.getLogger(__name__)

TARGETS = ("P_bit", "P_loc", "P_glo", "E-mean", "covariance")
Z95 = 1.959963984540054
EXACT_MAX_DIMENSION = 20
CHUNK = 250


def fmt(x: float) -> str:
    return format(float(x), ".12g")


def code_from_descriptor(desc: dict) -> RmCode:
    try:
        if desc.get("family") != "rm":
            raise ConfigError(f"unsupported code family {desc.get('family')!r}")
        return build_rm(int(desc["m"]), int(desc["r"]))
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad code descriptor {desc!r}: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    code: dict
    channel: dict
    decoder: dict
    target: str
    trials: int
    seed: int
    coordinates: str | tuple[int, ...] = "all"
    random_codeword: bool = False

    def __post_init__(self):
        if self.target not in TARGETS:
            raise ConfigError(f"target must be one of {TARGETS}, got {self.target!r}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an integer in [0, 2^64)")
        kind = self.decoder.get("kind") if isinstance(self.decoder, dict) else None
        if kind not in ("exact", "boosted"):
            raise ConfigError(f"decoder kind must be 'exact' or 'boosted', got {kind!r}")
        if self.target in ("E-mean", "covariance") and kind != "boosted":
            raise ConfigError(f"target {self.target} needs a boosted decoder")
        if self.target == "P_glo" and kind != "exact":
            raise ConfigError("P_glo needs the exact decoder")
        code = self.build_code()
        self.build_channel()
        for i in self.coordinate_list(code):
            if not 0 <= i < code.n:
                raise ConfigError(f"coordinate {i} out of range")
        if kind == "boosted":
            K = self.decoder.get("K", 64)
            if not isinstance(K, int) or K < 1:
                raise ConfigError("boosted decoder needs integer K >= 1")
            try:
                d = resolve_petal_dimension(code, self.decoder.get("d"))
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            if not 1 <= d <= code.m:
                raise ConfigError(f"petal dimension {d} outside [1, {code.m}]")

    @classmethod
    def from_dict(cls, raw: dict) -> ExperimentConfig:
        try:
            coords = raw.get("coordinates", "all")
            if coords != "all":
                coords = tuple(int(c) for c in coords)
            return cls(
                code=dict(raw["code"]),
                channel=dict(raw["channel"]),
                decoder=dict(raw.get("decoder", {"kind": "exact"})),
                target=raw.get("target", "P_bit"),
                trials=raw["trials"],
                seed=raw.get("seed", 0),
                coordinates=coords,
                random_codeword=bool(raw.get("random_codeword", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> ExperimentConfig:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "channel": self.channel,
            "decoder": self.decoder,
            "target": self.target,
            "trials": self.trials,
            "seed": self.seed,
            "coordinates": self.coordinates if self.coordinates == "all" else list(self.coordinates),
            "random_codeword": self.random_codeword,
        }

    def replace(self, **changes) -> ExperimentConfig:
        raw = self.to_dict()
        raw.update(changes)
        return ExperimentConfig.from_dict(raw)

    def build_code(self) -> RmCode:
        return code_from_descriptor(self.code)

    def build_channel(self) -> SymmetricChannel:
        return channel_from_descriptor(self.channel)

    def coordinate_list(self, code: RmCode | None = None) -> list[int]:
        if self.coordinates == "all":
            code = code or self.build_code()
            return list(range(code.n))
        return list(self.coordinates)


def wilson_interval(errors: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    p = errors / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half))


@dataclass
class EstimateRow:
    coord: str
    metric: str
    estimate: float
    ci_lo: float
    ci_hi: float
    trials: int


@dataclass
class ErrorReport:
    """Per-coordinate estimates plus the max over coordinates."""

    rows: list[EstimateRow]
    trials: int
    seed: int
    wall_clock: float = field(default=0.0, compare=False)
    flags: dict = field(default_factory=dict)

    @property
    def max_estimate(self) -> float:
        return max(r.estimate for r in self.rows if r.coord != "max")

    def row(self, coord, metric: str | None = None) -> EstimateRow:
        for r in self.rows:
            if r.coord == str(coord) and (metric is None or r.metric == metric):
                return r
        raise KeyError(coord)

    def to_csv(self) -> str:
        lines = ["coord,metric,estimate,ci_lo,ci_hi,trials,seed"]
        for r in self.rows:
            lines.append(",".join([r.coord, r.metric, fmt(r.estimate), fmt(r.ci_lo), fmt(r.ci_hi),
                                   str(r.trials), str(self.seed)]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "seed": self.seed,
            "trials": self.trials,
            "flags": self.flags,
            "rows": [
                {"coord": r.coord, "metric": r.metric, "estimate": float(fmt(r.estimate)),
                 "ci_lo": float(fmt(r.ci_lo)), "ci_hi": float(fmt(r.ci_hi)), "trials": r.trials}
                for r in self.rows
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


@lru_cache(maxsize=16)
def _generator_array(code: RmCode) -> np.ndarray:
    return code.generator.to_array().astype(np.int64)


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def _sent_word(cfg: ExperimentConfig, code: RmCode, rng: np.random.Generator) -> np.ndarray:
    if not cfg.random_codeword:
        return np.zeros(code.n, dtype=np.uint8)
    msg = rng.integers(0, 2, size=code.k)
    return ((msg @ _generator_array(code)) & 1).astype(np.uint8)


def _check_feasible(cfg: ExperimentConfig, code: RmCode) -> None:
    if cfg.decoder["kind"] == "exact" and code.k > EXACT_MAX_DIMENSION:
        raise BudgetError(f"exact decoding of a dimension-{code.k} code exceeds 2^{EXACT_MAX_DIMENSION}")
    if cfg.decoder["kind"] == "boosted":
        d = resolve_petal_dimension(code, cfg.decoder.get("d"))
        if code_dimension(d, min(code.r, d)) > 24:
            raise BudgetError(f"petal code of dimension {code_dimension(d, min(code.r, d))} is too large")


def _run_chunk(cfg_dict: dict, start: int, stop: int) -> np.ndarray:
    """Raw per-trial outcomes for trials ``start..stop-1``.

    Shape ``(trials, coords)`` for error and E targets (error flag or E
    value), ``(trials, coords, 2)`` for covariance pairs and ``(trials, 1)``
    for block errors.
    """
    cfg = ExperimentConfig.from_dict(cfg_dict)
    code = cfg.build_code()
    channel = cfg.build_channel()
    coords = cfg.coordinate_list(code)
    kind = cfg.decoder["kind"]
    count = stop - start

    if kind == "exact":
        eps = np.empty((count, code.n))
        out = np.empty((count, code.n), dtype=np.uint8)
        sent = np.empty((count, code.n), dtype=np.uint8)
        for row, t in enumerate(range(start, stop)):
            rng = _trial_rng(cfg.seed, t)
            x = _sent_word(cfg, code, rng)
            y = transmit(channel, x, rng)
            eps[row], out[row], sent[row] = y.epsilon, y.output, x
        book = codebook(code.generator)
        if cfg.target == "P_glo":
            winner = block_map_batch(book, eps, out)
            wrong = (winner == TIE) | np.any(book[np.maximum(winner, 0)] != sent, axis=1)
            return wrong.astype(np.float64)[:, None]
        result = np.empty((count, len(coords)))
        for col, i in enumerate(coords):
            guess, _ = map_decide(book, i, eps, out, exclude_target=cfg.target == "P_loc")
            result[:, col] = (guess != sent[:, i])
        return result

    K = int(cfg.decoder.get("K", 64))
    d = resolve_petal_dimension(code, cfg.decoder.get("d"))
    book = codebook(build_rm(d, min(code.r, d)).generator)
    width = 2 if cfg.target == "covariance" else 1
    result = np.empty((count, len(coords), width))
    for row, t in enumerate(range(start, stop)):
        rng = _trial_rng(cfg.seed, t)
        x = _sent_word(cfg, code, rng)
        y = transmit(channel, x, rng)
        for col, i in enumerate(coords):
            if cfg.target in ("P_bit", "P_loc"):
                vote = boost_vote(code, i, y, K, d, rng)
                result[row, col, 0] = vote.is_tie or vote.bit != x[i]
                continue
            members = sample_petal_members(code.m, d, i, width, rng)
            guess, _ = map_decide(book, 0, y.epsilon[members], y.output[members], exclude_target=True)
            result[row, col] = np.where(guess == TIE, 0, np.where(guess == x[i], 1, -1))
    return result if width == 2 else result[:, :, 0]


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("CAMELLIA_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"CAMELLIA_THREADS must be an integer, got {env!r}") from None
    return 1


def run_trials(cfg: ExperimentConfig, workers: int | None = None) -> np.ndarray:
    code = cfg.build_code()
    _check_feasible(cfg, code)
    bounds = [(s, min(s + CHUNK, cfg.trials)) for s in range(0, cfg.trials, CHUNK)]
    raw = cfg.to_dict()
    n_workers = worker_count(workers)
    if n_workers == 1 or len(bounds) == 1:
        parts = [_run_chunk(raw, a, b) for a, b in bounds]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(_run_chunk, [raw] * len(bounds), *zip(*bounds)))
    return np.concatenate(parts, axis=0)


def _error_rows(outcomes: np.ndarray, labels: Sequence[str], metric: str) -> list[EstimateRow]:
    trials = outcomes.shape[0]
    rows = []
    for col, label in enumerate(labels):
        errors = int(outcomes[:, col].sum())
        lo, hi = wilson_interval(errors, trials)
        rows.append(EstimateRow(label, metric, errors / trials, lo, hi, trials))
    if len(rows) > 1:
        worst = max(rows, key=lambda r: r.estimate)
        rows.append(EstimateRow("max", metric, worst.estimate, worst.ci_lo, worst.ci_hi, trials))
    return rows


def estimate_bit_error(cfg: ExperimentConfig, workers: int | None = None) -> ErrorReport:
    """Error probability per coordinate (or per block); ties count as errors."""
    if cfg.target not in ("P_bit", "P_loc", "P_glo"):
        raise ConfigError(f"estimate_bit_error cannot estimate {cfg.target}")
    start = time.perf_counter()
    outcomes = run_trials(cfg, workers)
    labels = ["block"] if cfg.target == "P_glo" else [str(i) for i in cfg.coordinate_list()]
    rows = _error_rows(outcomes, labels, cfg.target)
    report = ErrorReport(rows, cfg.trials, cfg.seed, time.perf_counter() - start)
    log.info("%s: %d trials in %.2fs", cfg.target, cfg.trials, report.wall_clock)
    return report


def estimate_e_mean(cfg: ExperimentConfig, workers: int | None = None) -> ErrorReport:
    """Mean of E_{P,i} over random (petal, noise) samples, with normal 95% CIs."""
    if cfg.target != "E-mean":
        raise ConfigError("estimate_e_mean needs target 'E-mean'")
    start = time.perf_counter()
    values = run_trials(cfg, workers)
    n = values.shape[0]
    rows = []
    all_positive = True
    for col, i in enumerate(cfg.coordinate_list()):
        v = values[:, col]
        mean = float(v.mean())
        se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        lo, hi = mean - Z95 * se, mean + Z95 * se
        all_positive &= lo > 0
        rows.append(EstimateRow(str(i), "E-mean", mean, max(-1.0, lo), min(1.0, hi), n))
    below = rate(cfg.build_code()) < capacity(cfg.build_channel())
    if below and not all_positive:
        log.warning("E-mean not positive at 95%% confidence although the rate is below capacity")
    return ErrorReport(rows, n, cfg.seed, time.perf_counter() - start,
                       {"below_capacity": below, "positive": bool(all_positive)})


def jackknife_covariance(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Unbiased sample covariance and its delete-one jackknife standard error."""
    n = len(a)
    if n < 3:
        raise ValueError("need at least 3 samples")
    sa, sb, sab = a.sum(), b.sum(), (a * b).sum()
    est = (sab - sa * sb / n) / (n - 1)
    la, lb, lab = sa - a, sb - b, sab - a * b
    loo = (lab - la * lb / (n - 1)) / (n - 2)
    se = math.sqrt((n - 1) / n * float(np.sum((loo - loo.mean()) ** 2)))
    return float(est), se


def estimate_covariance(cfg: ExperimentConfig, workers: int | None = None) -> ErrorReport:
    """Empirical ``E Cov(E_P, E_P')`` from independent petal pairs sharing the noise."""
    if cfg.target != "covariance":
        raise ConfigError("estimate_covariance needs target 'covariance'")
    start = time.perf_counter()
    pairs = run_trials(cfg, workers)
    code = cfg.build_code()
    d = resolve_petal_dimension(code, cfg.decoder.get("d"))
    bound = math.sqrt(correlation_rho(code.m, d))
    rows = []
    within = True
    for col, i in enumerate(cfg.coordinate_list(code)):
        est, se = jackknife_covariance(pairs[:, col, 0], pairs[:, col, 1])
        within &= est - Z95 * se <= bound
        rows.append(EstimateRow(str(i), "covariance", est, est - Z95 * se, est + Z95 * se, cfg.trials))
    rows.append(EstimateRow("all", "sqrt_rho", bound, bound, bound, cfg.trials))
    return ErrorReport(rows, cfg.trials, cfg.seed, time.perf_counter() - start, {"within_bound": bool(within)})


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> ErrorReport:
    if cfg.target in ("P_bit", "P_loc", "P_glo"):
        return estimate_bit_error(cfg, workers)
    if cfg.target == "E-mean":
        return estimate_e_mean(cfg, workers)
    return estimate_covariance(cfg, workers)
