"""Mutation-only elitist genetic algorithm over rule chromosomes.

Each generation keeps the best ``elite_count`` members, adds
``mutants_per_operator`` children from each of three mutation operators
(flag flip, threshold resample, threshold halving) with parents drawn
from the elite, and tops up with ``random_injections`` fresh chromosomes.
:func:`grid_oracle` scores a regular threshold grid exhaustively and is
the reference the optimiser is checked against.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Union

import numpy as np

from . import metrics
from .errors import DataError
from .market_data import AlignedAssetSeries
from .metrics import MetricsReport
from .strategy import VALID_FLAGS, Chromosome, as_matrix, repair, strategy_returns_batch

log = logging.getLogger(__name__)

DEGENERATE = -math.inf
MAX_GRID_EVALUATIONS = 10**7


class Objective:
    """Weighted sum of report fields, maximised.

    ``Objective.parse("sharpe_like")`` or
    ``Objective.parse("cum_return:1,max_drawdown:-2")``.  Strategies with
    zero return dispersion score :data:`DEGENERATE` whatever the weights.
    """

    def __init__(self, weights: Mapping[str, float]):
        unknown = set(weights) - set(metrics.REPORT_FIELDS)
        if unknown or not weights:
            raise ValueError(f"unknown objective fields {sorted(unknown)}; choose from {metrics.REPORT_FIELDS}")
        self.weights = dict(weights)

    @classmethod
    def parse(cls, value: Union[str, Mapping[str, float], "Objective"]) -> "Objective":
        if isinstance(value, Objective):
            return value
        if isinstance(value, Mapping):
            return cls(value)
        weights = {}
        for term in value.split(","):
            name, _, w = term.strip().partition(":")
            weights[name.strip()] = float(w) if w else 1.0
        return cls(weights)

    @property
    def fields(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.weights) | {"std_dev"}))

    def score(self, cols: Mapping[str, np.ndarray]) -> np.ndarray:
        total = sum(w * cols[name] for name, w in self.weights.items())
        total = np.asarray(total, dtype=float)
        bad = (cols["std_dev"] == 0.0) | ~np.isfinite(total)
        return np.where(bad, DEGENERATE, total)

    def __str__(self):
        if self.weights == {"sharpe_like": 1.0}:
            return "sharpe_like"
        return ",".join(f"{k}:{v:g}" for k, v in sorted(self.weights.items()))

    def __eq__(self, other):
        return isinstance(other, Objective) and self.weights == other.weights


@dataclass(frozen=True)
class GAConfig:
    init_pop_size: int = 100
    elite_count: int = 10
    mutants_per_operator: int = 20
    random_injections: int = 10
    generations: int = 100
    stall_limit: int = 25
    seed: int = 0
    objective: Union[str, Objective] = "sharpe_like"
    alpha: float = metrics.DEFAULT_ALPHA

    def __post_init__(self):
        counts = ("init_pop_size", "elite_count", "mutants_per_operator",
                  "random_injections", "generations", "stall_limit")
        for name in counts:
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.elite_count > self.init_pop_size:
            raise ValueError("elite_count cannot exceed init_pop_size")
        object.__setattr__(self, "objective", Objective.parse(self.objective))

    @property
    def steady_size(self) -> int:
        return self.elite_count + 3 * self.mutants_per_operator + self.random_injections

    def to_json(self) -> dict:
        return {
            "init_pop_size": self.init_pop_size,
            "elite_count": self.elite_count,
            "mutants_per_operator": self.mutants_per_operator,
            "random_injections": self.random_injections,
            "generations": self.generations,
            "stall_limit": self.stall_limit,
            "seed": self.seed,
            "objective": str(self.objective),
            "alpha": self.alpha,
        }


@dataclass(frozen=True)
class FitnessRecord:
    chromosome: Chromosome
    fitness: float = math.nan  # NaN until evaluated
    metrics: Optional[MetricsReport] = None

    @property
    def evaluated(self) -> bool:
        return self.metrics is not None

    @property
    def degenerate(self) -> bool:
        return self.fitness == DEGENERATE

    def sort_key(self):
        return (-self.fitness, self.chromosome)


@dataclass(frozen=True)
class Population:
    generation: int
    members: tuple[FitnessRecord, ...]

    @property
    def evaluated(self) -> bool:
        return all(m.evaluated for m in self.members)

    @property
    def best(self) -> FitnessRecord:
        return self.members[0]

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float  # over non-degenerate members, NaN if none
    best_chromosome: Chromosome

    def csv_row(self) -> str:
        return f"{self.generation},{_fmt(self.best_fitness)},{_fmt(self.mean_fitness)},{self.best_chromosome}"


def _fmt(x: float) -> str:
    if x == DEGENERATE:
        return "degenerate"
    if math.isnan(x):
        return "nan"
    return f"{x:.6g}"


LOG_HEADER = "gen,best_fitness,mean_fitness,best_chromosome"


@dataclass
class GAResult:
    best: FitnessRecord
    history: list[GenerationStats] = field(default_factory=list)
    final: Optional[Population] = None

    def log_csv(self) -> str:
        return "\n".join([LOG_HEADER, *(h.csv_row() for h in self.history)]) + "\n"


def random_chromosome(rng: np.random.Generator) -> Chromosome:
    flags = VALID_FLAGS[int(rng.integers(len(VALID_FLAGS)))]
    return Chromosome.from_genes(flags, rng.random(4))


def init_population(cfg: GAConfig, rng: np.random.Generator) -> Population:
    members = tuple(FitnessRecord(random_chromosome(rng)) for _ in range(cfg.init_pop_size))
    return Population(0, members)


def score_chromosomes(chromosomes, series: AlignedAssetSeries, objective, alpha=metrics.DEFAULT_ALPHA):
    """Fitness array and full reports for a list of chromosomes."""
    objective = Objective.parse(objective)
    if series.T < max(2, metrics.min_length(alpha)):
        raise DataError(f"{series.ticker}: {series.T} returns are too few to evaluate")
    R = strategy_returns_batch(as_matrix(chromosomes), series)
    cols = metrics.report_columns(R, alpha)
    return objective.score(cols), metrics.reports_from_columns(cols, alpha)


def evaluate(pop: Population, series: AlignedAssetSeries, cfg: GAConfig) -> Population:
    """Score the unevaluated members and sort best first.

    Ties go to the lexicographically smaller chromosome.  Members carried
    over with a score keep it unchanged.
    """
    if series.T == 0:
        raise DataError("cannot evaluate on an empty series")
    todo = [k for k, m in enumerate(pop.members) if not m.evaluated]
    members = list(pop.members)
    if todo:
        fit, reports = score_chromosomes([members[k].chromosome for k in todo], series, cfg.objective, cfg.alpha)
        for k, f, rep in zip(todo, fit, reports):
            members[k] = FitnessRecord(members[k].chromosome, float(f), rep)
    members.sort(key=FitnessRecord.sort_key)
    return Population(pop.generation, tuple(members))


def _with_threshold(c: Chromosome, k: int, value: float) -> Chromosome:
    return replace(c, **{f"v{k + 1}": value})


def mutate_flag_flip(c: Chromosome, rng: np.random.Generator) -> Chromosome:
    k = int(rng.integers(4))
    flags = list(c.flags)
    flags[k] = 1 - flags[k]
    return repair(Chromosome.from_genes(flags, c.thresholds), rng)


def mutate_v_random(c: Chromosome, rng: np.random.Generator) -> Chromosome:
    k = int(rng.integers(4))
    return _with_threshold(c, k, float(rng.random()))


def mutate_v_halve(c: Chromosome, rng: np.random.Generator) -> Chromosome:
    k = int(rng.integers(4))
    return _with_threshold(c, k, c.thresholds[k] / 2.0)


MUTATIONS = (mutate_flag_flip, mutate_v_random, mutate_v_halve)


def next_generation(pop: Population, cfg: GAConfig, rng: np.random.Generator) -> Population:
    if not pop.evaluated:
        raise ValueError("population must be evaluated before breeding")
    if len(pop) < cfg.elite_count:
        raise ValueError(f"population of {len(pop)} is smaller than elite_count={cfg.elite_count}")
    elite = pop.members[: cfg.elite_count]
    children = list(elite)
    for op in MUTATIONS:
        for _ in range(cfg.mutants_per_operator):
            parent = elite[int(rng.integers(len(elite)))].chromosome
            children.append(FitnessRecord(op(parent, rng)))
    children.extend(FitnessRecord(random_chromosome(rng)) for _ in range(cfg.random_injections))
    return Population(pop.generation + 1, tuple(children))


def _stats(pop: Population) -> GenerationStats:
    finite = [m.fitness for m in pop.members if not m.degenerate]
    mean = float(np.mean(finite)) if finite else math.nan
    return GenerationStats(pop.generation, pop.best.fitness, mean, pop.best.chromosome)


def evolve(cfg: GAConfig, series: AlignedAssetSeries) -> GAResult:
    """Run the GA and keep the per-generation trajectory."""
    rng = np.random.default_rng(cfg.seed)
    pop = evaluate(init_population(cfg, rng), series, cfg)
    result = GAResult(best=pop.best, history=[_stats(pop)])
    stall = 0
    for _ in range(1, cfg.generations):
        pop = evaluate(next_generation(pop, cfg, rng), series, cfg)
        result.history.append(_stats(pop))
        if pop.best.sort_key() < result.best.sort_key():
            improved = pop.best.fitness > result.best.fitness
            result.best = pop.best
            stall = 0 if improved else stall + 1
        else:
            stall += 1
        if stall >= cfg.stall_limit:
            log.debug("%s: stalled after generation %d", series.ticker, pop.generation)
            break
    result.final = pop
    return result


def run(cfg: GAConfig, series: AlignedAssetSeries) -> FitnessRecord:
    return evolve(cfg, series).best


def grid_levels(step: float) -> np.ndarray:
    n = 1.0 / step
    if step <= 0 or abs(n - round(n)) > 1e-9 or round(n) + 1 > 21:
        raise ValueError(f"step {step} must divide 1 into at most 21 levels")
    return np.linspace(0.0, 1.0, int(round(n)) + 1)


def grid_size(step: float) -> int:
    L = len(grid_levels(step))
    return sum(L ** sum(f) for f in VALID_FLAGS)


def _grid_genes(levels: np.ndarray):
    for flags in VALID_FLAGS:
        axes = [levels if b else np.zeros(1) for b in flags]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)
        yield np.hstack([np.tile(np.array(flags, dtype=float), (len(mesh), 1)), mesh])


def grid_oracle(
    series: AlignedAssetSeries,
    step: float = 0.05,
    objective="sharpe_like",
    alpha: float = metrics.DEFAULT_ALPHA,
    chunk: int = 16384,
) -> FitnessRecord:
    """Best chromosome over all flag assignments and a regular threshold grid.

    Thresholds of excluded conditions stay at 0.  Ties resolve the same way
    as in :func:`evaluate`.
    """
    objective = Objective.parse(objective)
    total = grid_size(step)
    if total > MAX_GRID_EVALUATIONS:
        raise ValueError(f"grid of {total} evaluations exceeds {MAX_GRID_EVALUATIONS}")
    best_key, best_genes = None, None
    for block in _grid_genes(grid_levels(step)):
        for lo in range(0, len(block), chunk):
            genes = block[lo : lo + chunk]
            R = strategy_returns_batch(genes, series)
            fit = objective.score(metrics.report_columns(R, alpha, objective.fields))
            top = np.flatnonzero(fit == fit.max())
            cand = min((tuple(genes[k]) for k in top))
            key = (-float(fit.max()), cand)
            if best_key is None or key < best_key:
                best_key, best_genes = key, cand
    chrom = Chromosome.from_genes(best_genes[:4], best_genes[4:])
    fit, reports = score_chromosomes([chrom], series, objective, alpha)
    return FitnessRecord(chrom, float(fit[0]), reports[0])

