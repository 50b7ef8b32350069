"""Bounded genetic search over the pipeline parameter set.

Maximizes a black-box objective over the flat parameter dictionary:
uniform initial population inside the bounds (optionally seeded with an
incumbent), tournament selection, uniform gene-wise crossover, bounded
per-gene mutation, and elitism (the N best survive unchanged, carrying
their scores). The best member of the final population wins.

A candidate whose evaluation raises or times out scores -inf, is logged,
and the run continues. Candidate evaluations are independent and may run
on several threads; scores are gathered by candidate index, so the
result is identical however they are scheduled.
"""

from __future__ import annotations

import json
import logging
import math
import os
import shlex
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .audio import read_wav, write_wav
from .errors import ConfigError
from .metrics import segmental_snr_improvement
from .params import SCHEMA, build_pipeline_params, field
from .pipeline import process_stream
from .stft import StftConfig

log = logging.getLogger("echoforge.tuner")


@dataclass(frozen=True)
class GaConfig:
    population: int = 40
    elite: int = 10
    generations: int = 3
    mutation_rate: float = 0.15
    mutation_scale: float = 0.2
    crossover_rate: float = 0.8
    tournament: int = 3
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if not 1 <= self.elite < self.population:
            raise ConfigError(
                f"need 1 <= elite < population, got {self.elite}/{self.population}")
        if self.generations < 1:
            raise ConfigError(f"generations must be >= 1, got {self.generations}")
        for name in ("mutation_rate", "crossover_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.mutation_scale < 0.0:
            raise ConfigError(f"mutation_scale must be >= 0, got {self.mutation_scale}")
        if self.tournament < 1 or self.jobs < 1:
            raise ConfigError("tournament and jobs must be >= 1")


def default_bounds() -> dict:
    return {f.name: (f.low, f.high) for f in SCHEMA}


def validate_bounds(bounds: dict) -> None:
    """Bounds must cover every tunable and sit inside the schema box."""
    for f in SCHEMA:
        if f.name not in bounds:
            raise ConfigError(f"bounds missing parameter {f.name!r}")
    for name, (lo, hi) in bounds.items():
        f = field(name)
        if lo > hi:
            raise ConfigError(f"{name}: bound lo {lo} > hi {hi}")
        if lo < f.low or hi > f.high:
            raise ConfigError(
                f"{name}: bounds [{lo}, {hi}] exceed feasible [{f.low}, {f.high}]")


def _sample_gene(name: str, lo: float, hi: float, rng: np.random.Generator):
    kind = field(name).kind
    if kind == "real":
        return float(rng.uniform(lo, hi))
    if kind == "int":
        return int(rng.integers(int(lo), int(hi) + 1))
    if kind == "log":
        return float(10.0 ** rng.uniform(math.log10(lo), math.log10(hi)))
    if kind == "pow2":
        e_lo, e_hi = int(math.log2(lo)), int(math.log2(hi))
        return int(2 ** rng.integers(e_lo, e_hi + 1))
    raise ConfigError(f"unknown gene kind {kind!r}")


def sample_uniform(bounds: dict, rng: np.random.Generator) -> dict:
    return {f.name: _sample_gene(f.name, *bounds[f.name], rng) for f in SCHEMA}


def mutate(params: dict, bounds: dict, rate: float, scale: float,
           rng: np.random.Generator) -> dict:
    """Perturb each gene with probability `rate` by bounded uniform noise."""
    child = dict(params)
    for f in SCHEMA:
        lo, hi = bounds[f.name]
        if rng.uniform() >= rate:
            continue
        v = child[f.name]
        if f.kind == "real":
            v = float(np.clip(v + rng.uniform(-1, 1) * scale * (hi - lo), lo, hi))
        elif f.kind == "int":
            v = int(np.clip(round(v + rng.uniform(-1, 1) * scale * (hi - lo)),
                            int(lo), int(hi)))
        elif f.kind == "log":
            span = math.log10(hi) - math.log10(lo)
            v = float(np.clip(v * 10.0 ** (rng.uniform(-1, 1) * scale * span), lo, hi))
        elif f.kind == "pow2":
            e_lo, e_hi = int(math.log2(lo)), int(math.log2(hi))
            e = int(np.clip(round(math.log2(v) + rng.uniform(-1, 1) * scale
                                  * (e_hi - e_lo)), e_lo, e_hi))
            v = 2 ** e
        child[f.name] = v
    return child


def crossover(parent_a: dict, parent_b: dict, rng: np.random.Generator) -> dict:
    """Uniform gene-wise crossover; each gene comes from one parent."""
    return {f.name: (parent_a if rng.uniform() < 0.5 else parent_b)[f.name]
            for f in SCHEMA}


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best: float
    mean: float
    worst: float


@dataclass
class GaResult:
    best_params: dict
    best_score: float
    history: list

    def history_table(self) -> str:
        lines = [f"{'gen':>4} {'best':>12} {'mean':>12} {'worst':>12}"]
        for s in self.history:
            lines.append(f"{s.generation:>4} {s.best:>12.4f} {s.mean:>12.4f} "
                         f"{s.worst:>12.4f}")
        return "\n".join(lines)


def _evaluate(objective, population, scores, jobs: int):
    """Fill in missing scores; failures score -inf and the run continues."""
    todo = [i for i, s in enumerate(scores) if s is None]

    def run_one(i):
        try:
            return float(objective(population[i]))
        except Exception as exc:  # candidate failure must not kill the run
            log.warning("candidate %d failed: %s", i, exc)
            return float("-inf")

    if jobs > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, todo))
        for i, s in zip(todo, results):
            scores[i] = s
    else:
        for i in todo:
            scores[i] = run_one(i)
    return scores


def ga_run(cfg: GaConfig, bounds: dict, objective, incumbent: dict | None = None) -> GaResult:
    """Maximize `objective(params) -> float` inside `bounds`.

    The incumbent, when given, joins the initial population unchanged.
    Fixed (cfg, bounds, incumbent, objective) reproduce the same result.
    """
    validate_bounds(bounds)
    rng = np.random.default_rng(cfg.seed)
    population = [sample_uniform(bounds, rng) for _ in range(cfg.population)]
    if incumbent is not None:
        population[0] = dict(incumbent)
    scores: list = [None] * cfg.population

    history = []
    order = None
    for gen in range(cfg.generations):
        scores = _evaluate(objective, population, scores, cfg.jobs)
        order = sorted(range(cfg.population), key=lambda i: -scores[i])
        finite = [s for s in scores if math.isfinite(s)]
        history.append(GenerationStats(
            generation=gen,
            best=scores[order[0]],
            mean=float(np.mean(finite)) if finite else float("-inf"),
            worst=min(scores),
        ))
        if gen + 1 == cfg.generations:
            break

        def pick_parent():
            contenders = rng.integers(0, cfg.population, size=cfg.tournament)
            return population[max(contenders, key=lambda i: scores[i])]

        next_pop = [dict(population[i]) for i in order[: cfg.elite]]
        next_scores: list = [scores[i] for i in order[: cfg.elite]]
        while len(next_pop) < cfg.population:
            parent = pick_parent()
            if rng.uniform() < cfg.crossover_rate:
                child = crossover(parent, pick_parent(), rng)
            else:
                child = dict(parent)
            child = mutate(child, bounds, cfg.mutation_rate, cfg.mutation_scale, rng)
            next_pop.append(child)
            next_scores.append(None)
        population = next_pop
        scores = next_scores

    best = order[0]
    return GaResult(best_params=dict(population[best]), best_score=scores[best],
                    history=history)


# ---------------------------------------------------------------------------
# Objectives
# ---------------------------------------------------------------------------


def load_corpus_items(manifest: dict, base_dir: str) -> list:
    """Load (mix, clean target, far-end reference) triples into memory.

    Unreadable items are skipped with a warning; the objective averages
    over the rest.
    """
    items = []
    for entry in manifest["items"]:
        files = entry["files"]
        try:
            mix = read_wav(os.path.join(base_dir, files["mix"]))
            speech = read_wav(os.path.join(base_dir, files["speech"]))
            ref = read_wav(os.path.join(base_dir, files["reference"]))
        except (OSError, ValueError) as exc:
            log.warning("skipping item %s: %s", entry.get("item_id"), exc)
            continue
        items.append((mix, speech, ref))
    if not items:
        raise ConfigError("no readable corpus items")
    return items


def signal_fidelity_objective(items, stft_cfg: StftConfig | None = None):
    """Mean segmental-SNR improvement of enhanced over mixture, in dB."""

    def objective(params: dict) -> float:
        pipeline_params = build_pipeline_params(params)
        gains = []
        for mix, speech, ref in items:
            result = process_stream(mix, ref, pipeline_params, stft_cfg)
            gains.append(segmental_snr_improvement(
                speech.samples, result.enhanced.samples, mix.samples))
        return float(np.mean(gains))

    return objective


def external_objective(command_template: str, exchange_dir, timeout: float,
                       items, stft_cfg: StftConfig | None = None):
    """Attachment point for an external scorer (e.g. a speech recognizer).

    Per candidate: enhanced WAVs plus a candidate manifest go to a fresh
    work directory under `exchange_dir`; the command (with `{dir}`
    substituted) must print one decimal score on stdout.
    """
    if timeout <= 0:
        raise ConfigError(f"timeout must be positive, got {timeout}")
    os.makedirs(exchange_dir, exist_ok=True)

    def objective(params: dict) -> float:
        pipeline_params = build_pipeline_params(params)
        workdir = tempfile.mkdtemp(prefix="candidate_", dir=exchange_dir)
        entries = []
        for i, (mix, speech, ref) in enumerate(items):
            result = process_stream(mix, ref, pipeline_params, stft_cfg)
            enhanced_path = os.path.join(workdir, f"enhanced{i:04d}.wav")
            write_wav(enhanced_path, result.enhanced)
            entries.append({"enhanced": enhanced_path,
                            "segments": [list(s) for s in result.segments]})
        with open(os.path.join(workdir, "candidate.json"), "w", encoding="utf-8") as fh:
            json.dump({"params": params, "items": entries}, fh, indent=2)
        cmd = [part.format(dir=workdir) for part in shlex.split(command_template)]
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=timeout)
        if proc.returncode != 0:
            raise RuntimeError(
                f"external objective exited {proc.returncode}: {proc.stderr.strip()}")
        return float(proc.stdout.strip())

    return objective
