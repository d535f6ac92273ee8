"""Real-coded genetic algorithm.

Selection is rank based (fitness proportional to ``1/sqrt(rank)``) with
stochastic-uniform sampling, crossover is gene-wise scattered, mutation is
additive Gaussian with a scale that shrinks over the run.  Elites are copied
unchanged.  Every random draw comes from a stream keyed by
``(seed, generation, slot)`` so results are bit-identical no matter how the
objective evaluations are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


class OptimizationError(RuntimeError):
    """The search cannot proceed (e.g. no finite objective in sight)."""


class SelectionError(ValueError):
    """Selection was asked to sample from a degenerate fitness vector."""


@dataclass(frozen=True)
class GAConfig:
    """Knobs for :func:`run_ga`.

    ``bounds`` constrain every individual for the whole run.  ``init_ranges``
    (default: the bounds) control only the initial population and set the
    base width for the mutation scale; keeping them tighter than the bounds
    is the usual way to start a search near the origin while still letting
    it roam.  The mutation scale decays from ``mutation_scale_init`` to
    ``mutation_scale_final`` (fractions of the init-range width), linearly or
    geometrically.
    """

    bounds: tuple[tuple[float, float], ...]
    pop_size: int = 20
    elite_count: int = 2
    crossover_fraction: float = 0.8
    mutation_fraction: float = 0.2
    max_generations: int = 100
    stall_generations: int = 20
    objective_tolerance: float = 0.0
    mutation_scale_init: float = 0.1
    mutation_scale_final: float = 1e-5
    mutation_schedule: str = "geometric"
    init_ranges: tuple[tuple[float, float], ...] | None = None
    log_init: bool = False

    def __post_init__(self):
        object.__setattr__(
            self, "bounds", tuple((float(a), float(b)) for a, b in self.bounds)
        )
        if self.init_ranges is not None:
            object.__setattr__(
                self,
                "init_ranges",
                tuple((float(a), float(b)) for a, b in self.init_ranges),
            )
        if not self.bounds:
            raise ValueError("bounds must be non-empty")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"bad bound ({lo}, {hi})")
        if self.init_ranges is not None:
            if len(self.init_ranges) != len(self.bounds):
                raise ValueError("init_ranges length must match bounds")
            for lo, hi in self.init_ranges:
                if not lo < hi:
                    raise ValueError(f"bad init range ({lo}, {hi})")
        if not 0 <= self.elite_count < self.pop_size:
            raise ValueError("need 0 <= elite_count < pop_size")
        if not 0.0 <= self.crossover_fraction <= 1.0:
            raise ValueError("crossover_fraction must lie in [0, 1]")
        if not 0.0 <= self.mutation_fraction <= 1.0:
            raise ValueError("mutation_fraction must lie in [0, 1]")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if self.mutation_schedule not in ("geometric", "linear"):
            raise ValueError("mutation_schedule must be 'geometric' or 'linear'")
        if self.log_init:
            for lo, hi in self.init_ranges or self.bounds:
                if lo <= 0.0:
                    raise ValueError("log-uniform init needs positive ranges")

    @property
    def dim(self) -> int:
        return len(self.bounds)


@dataclass
class GAResult:
    best_genes: np.ndarray
    best_objective: float
    history: list[tuple[int, float, float]] = field(default_factory=list)
    generations_run: int = 0
    evaluations: int = 0


def _stream(seed: int, generation: int, slot: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(generation), int(slot)])


def rank_scale(objectives) -> np.ndarray:
    """Fitness proportional to 1/sqrt(rank), rank 1 = lowest objective.

    Ties share the average of their ranks, so equal objectives get equal
    fitness.  Non-finite objectives are ranked last.  The result is
    normalized to sum to one.
    """
    obj = np.asarray(objectives, dtype=float).copy()
    if obj.size == 0:
        raise SelectionError("empty objective vector")
    obj[~np.isfinite(obj)] = np.inf
    ranks = rankdata(obj, method="average")
    fitness = 1.0 / np.sqrt(ranks)
    return fitness / fitness.sum()


def select_stochastic_uniform(fitness, n: int, rng: np.random.Generator) -> np.ndarray:
    """Sample ``n`` indices by equal-stride roulette over cumulative fitness."""
    f = np.asarray(fitness, dtype=float)
    if np.any(f < 0.0) or not np.all(np.isfinite(f)):
        raise SelectionError("fitness must be finite and non-negative")
    total = f.sum()
    if total <= 0.0:
        raise SelectionError("total fitness is zero")
    stride = total / n
    pointers = rng.uniform(0.0, stride) + stride * np.arange(n)
    edges = np.cumsum(f)
    idx = np.searchsorted(edges, pointers, side="right")
    return np.minimum(idx, len(f) - 1)


def scattered_crossover(p1, p2, rng: np.random.Generator) -> np.ndarray:
    """Child takes each gene from either parent with probability 1/2."""
    a = np.asarray(p1, dtype=float)
    b = np.asarray(p2, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"parent length mismatch: {a.shape} vs {b.shape}")
    mask = rng.random(a.shape) < 0.5
    return np.where(mask, a, b)


def gaussian_mutate(genes, sigmas, bounds, rng: np.random.Generator) -> np.ndarray:
    """Add zero-mean Gaussian noise per gene, then clip into the box."""
    g = np.asarray(genes, dtype=float) + rng.normal(0.0, 1.0, len(genes)) * sigmas
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    return np.clip(g, lo, hi)


def _mutation_scale(cfg: GAConfig, generation: int) -> float:
    s0, s1 = cfg.mutation_scale_init, cfg.mutation_scale_final
    if cfg.max_generations == 1:
        return s0
    frac = (generation - 1) / (cfg.max_generations - 1)
    if cfg.mutation_schedule == "linear":
        return s0 + (s1 - s0) * frac
    return s0 * (s1 / s0) ** frac


def _initial_population(cfg: GAConfig, seed: int) -> np.ndarray:
    rng = _stream(seed, 0, 0)
    ranges = cfg.init_ranges or cfg.bounds
    cols = []
    for lo, hi in ranges:
        if cfg.log_init:
            cols.append(np.exp(rng.uniform(math.log(lo), math.log(hi), cfg.pop_size)))
        else:
            cols.append(rng.uniform(lo, hi, cfg.pop_size))
    pop = np.column_stack(cols)
    lo = np.array([b[0] for b in cfg.bounds])
    hi = np.array([b[1] for b in cfg.bounds])
    return np.clip(pop, lo, hi)


def run_ga(
    objective,
    cfg: GAConfig,
    seed: int,
    vectorized: bool = False,
    initial_guesses=None,
) -> GAResult:
    """Minimize ``objective`` over the box in ``cfg.bounds``.

    ``objective`` maps a gene vector to a float (or, with
    ``vectorized=True``, an ``(n, dim)`` matrix to an ``(n,)`` array).
    Non-finite objective values are treated as +inf.  ``initial_guesses``
    (sequence of gene vectors) overwrite the first rows of the seeded
    initial population, clipped to the bounds.

    Raises :class:`OptimizationError` when the entire initial population
    evaluates to +inf.
    """

    def evaluate(pop: np.ndarray) -> np.ndarray:
        if vectorized:
            vals = np.asarray(objective(pop), dtype=float)
        else:
            vals = np.array([float(objective(g)) for g in pop], dtype=float)
        vals[~np.isfinite(vals)] = np.inf
        return vals

    pop = _initial_population(cfg, seed)
    if initial_guesses is not None:
        lo = np.array([b[0] for b in cfg.bounds])
        hi = np.array([b[1] for b in cfg.bounds])
        for row, guess in enumerate(initial_guesses[: cfg.pop_size]):
            pop[row] = np.clip(np.asarray(guess, dtype=float), lo, hi)

    objs = evaluate(pop)
    evaluations = cfg.pop_size
    if not np.any(np.isfinite(objs)):
        raise OptimizationError("entire initial population evaluated to +inf")

    best_idx = int(np.argmin(objs))
    best_genes = pop[best_idx].copy()
    best_obj = float(objs[best_idx])
    history = [(0, best_obj, float(np.median(objs)))]
    last_improve = 0
    n_children = cfg.pop_size - cfg.elite_count
    n_xover = round(cfg.crossover_fraction * n_children)
    generation = 0

    for generation in range(1, cfg.max_generations + 1):
        fitness = rank_scale(objs)
        sel_rng = _stream(seed, generation, 0)
        n_mut = n_children - n_xover
        parents = select_stochastic_uniform(fitness, 2 * n_xover + n_mut, sel_rng)
        sel_rng.shuffle(parents)

        elite_idx = np.argsort(objs, kind="stable")[: cfg.elite_count]
        children = np.empty((n_children, cfg.dim))
        scale = _mutation_scale(cfg, generation)
        widths = np.array([hi - lo for lo, hi in (cfg.init_ranges or cfg.bounds)])
        sigmas = scale * widths
        for c in range(n_children):
            rng_c = _stream(seed, generation, c + 1)
            if c < n_xover:
                p1 = pop[parents[2 * c]]
                p2 = pop[parents[2 * c + 1]]
                child = scattered_crossover(p1, p2, rng_c)
            else:
                parent = pop[parents[2 * n_xover + (c - n_xover)]]
                child = gaussian_mutate(parent, sigmas, cfg.bounds, rng_c)
            children[c] = child

        pop = np.vstack([pop[elite_idx], children])
        child_objs = evaluate(children)
        evaluations += n_children
        objs = np.concatenate([objs[elite_idx], child_objs])

        gen_best = int(np.argmin(objs))
        if objs[gen_best] < best_obj - cfg.objective_tolerance:
            last_improve = generation
        if objs[gen_best] < best_obj:
            best_obj = float(objs[gen_best])
            best_genes = pop[gen_best].copy()
        history.append((generation, best_obj, float(np.median(objs))))
        if generation - last_improve >= cfg.stall_generations:
            break

    return GAResult(
        best_genes=best_genes,
        best_objective=best_obj,
        history=history,
        generations_run=generation,
        evaluations=evaluations,
    )
