"""Genetic search over the seven model parameters, scored by k-fold CV error.

Each generation keeps ``elite_count`` best genomes, fills a
``crossover_fraction`` share of the remaining slots with scattered-crossover
children of roulette-selected parents and the rest with mutated copies of
roulette-selected parents. Elite fitness is cached unless
``reevaluate_elites`` is set, so best-so-far error never increases.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import SampleSet
from .pipeline import MAPPING_MODES, NeuCube, PipelineConfig, stratified_folds, with_overrides


@dataclass(frozen=True)
class ParamSpec:
    name: str
    low: float
    high: float
    integer: bool = False

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"{self.name}: need low < high")

    def decode(self, gene: float):
        if self.integer:
            return int(np.clip(np.rint(gene), self.low, self.high))
        return float(np.clip(gene, self.low, self.high))


SEARCH_SPACE = (
    ParamSpec("spike_threshold", 0.1, 0.9),
    ParamSpec("firing_threshold", 0.01, 0.8),
    ParamSpec("stdp_rate", 0.001, 0.5),
    ParamSpec("refractory", 2, 9, integer=True),
    ParamSpec("mod", 0.00001, 0.5),
    ParamSpec("drift", 0.1, 0.95),
    ParamSpec("k", 1, 10, integer=True),
)

# where each searched parameter lives in PipelineConfig
_TARGETS = {
    "spike_threshold": "encoding__alpha",
    "firing_threshold": "lif__firing_threshold",
    "stdp_rate": "stdp_rate",
    "refractory": "lif__refractory_ticks",
    "mod": "desnn__mod",
    "drift": "desnn__drift",
    "k": "desnn__k",
}


@dataclass
class Genome:
    genes: np.ndarray
    fitness: float | None = None  # CV error, None until evaluated

    def decode(self, space=SEARCH_SPACE) -> dict:
        return {p.name: p.decode(g) for p, g in zip(space, self.genes)}


@dataclass(frozen=True)
class GaConfig:
    generations: int = 16
    population: int = 50
    crossover_fraction: float = 0.2
    elite_count: int = 5
    folds: int = 2
    mutation_rate: float = 1.0 / 7.0
    mapping_mode: str = "graph"
    reevaluate_elites: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.generations < 1 or self.population < 2:
            raise ValueError("need generations >= 1 and population >= 2")
        if not 0 <= self.elite_count < self.population:
            raise ValueError("elite_count must be in [0, population)")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if not 0.0 <= self.crossover_fraction <= 1.0 or not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("crossover_fraction and mutation_rate must be in [0, 1]")
        if self.mapping_mode not in MAPPING_MODES:
            raise ValueError(f"mapping_mode must be one of {MAPPING_MODES}")


@dataclass
class FitnessTrace:
    best_error: list[float] = field(default_factory=list)  # best-so-far per generation
    mean_error: list[float] = field(default_factory=list)

    def rows(self):
        return [(g, b, m) for g, (b, m) in enumerate(zip(self.best_error, self.mean_error))]

    def write_csv(self, path) -> None:
        tmp = f"{path}.tmp"
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["generation", "best_error", "mean_error"])
            for g, b, m in self.rows():
                w.writerow([g, repr(b), repr(m)])
        os.replace(tmp, path)


@dataclass
class GaResult:
    best: Genome
    params: dict
    trace: FitnessTrace
    evaluations: int


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def apply_params(base: PipelineConfig, params: dict) -> PipelineConfig:
    unknown = set(params) - set(_TARGETS)
    if unknown:
        raise ValueError(f"unknown parameters: {sorted(unknown)}")
    return with_overrides(base, **{_TARGETS[k]: v for k, v in params.items()})


def evaluate_fitness(
    genome,
    dataset: SampleSet,
    folds: int = 2,
    seed: int = 0,
    base: PipelineConfig | None = None,
    mapping_mode: str | None = None,
    space=SEARCH_SPACE,
) -> float:
    """Stratified k-fold error (1 - overall accuracy) of the pipeline.

    ``genome`` is a :class:`Genome` or a dict of decoded parameters. Fold
    membership and the cube and mapping seeds depend only on ``seed`` and
    the fold index.
    """
    params = genome.decode(space) if isinstance(genome, Genome) else dict(genome)
    cfg = apply_params(base or PipelineConfig(), params)
    if mapping_mode is not None:
        cfg = with_overrides(cfg, mapping_mode=mapping_mode)
    parts = stratified_folds(dataset.labels, folds, seed)
    correct = 0
    for f, test_idx in enumerate(parts):
        train_idx = np.setdiff1d(np.arange(dataset.s), test_idx)
        fs = derive_seed(seed, f)
        fold_cfg = with_overrides(cfg, cube__seed=fs, mapping__seed=fs)
        model = NeuCube(fold_cfg).fit(dataset.subset(train_idx))
        test = dataset.subset(test_idx)
        correct += int(np.sum(model.predict(test) == test.labels))
    return 1.0 - correct / dataset.s


def _roulette(rng: np.random.Generator, errors: np.ndarray, n: int) -> np.ndarray:
    score = 1.0 - errors
    total = score.sum()
    p = score / total if total > 0 else None
    return rng.choice(errors.size, size=n, p=p)


def _scattered(rng: np.random.Generator, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(rng.random(a.size) < 0.5, a, b)


def _mutate(rng: np.random.Generator, genes: np.ndarray, lows, highs, rate: float) -> np.ndarray:
    hit = rng.random(genes.size) < rate
    return np.where(hit, rng.uniform(lows, highs), genes)


def ga_optimize(
    dataset: SampleSet,
    space=SEARCH_SPACE,
    cfg: GaConfig | None = None,
    base: PipelineConfig | None = None,
    progress=None,
) -> GaResult:
    """Minimise CV error over ``space``; ``progress(gen, trace)`` is called per generation."""
    cfg = cfg or GaConfig()
    base = base or PipelineConfig()
    rng = np.random.default_rng(cfg.seed)
    lows = np.array([p.low for p in space], dtype=float)
    highs = np.array([p.high for p in space], dtype=float)
    pop = [Genome(rng.uniform(lows, highs)) for _ in range(cfg.population)]
    trace = FitnessTrace()
    best: Genome | None = None
    evaluations = 0
    n_cross = int(round(cfg.crossover_fraction * (cfg.population - cfg.elite_count)))
    n_mut = cfg.population - cfg.elite_count - n_cross

    for gen in range(cfg.generations):
        for i, g in enumerate(pop):
            if g.fitness is None or (cfg.reevaluate_elites and gen > 0):
                g.fitness = evaluate_fitness(
                    g, dataset, cfg.folds, derive_seed(cfg.seed, gen, i), base, cfg.mapping_mode, space
                )
                evaluations += 1
        errors = np.array([g.fitness for g in pop])
        order = np.argsort(errors, kind="stable")
        if best is None or errors[order[0]] < best.fitness:
            best = Genome(pop[order[0]].genes.copy(), float(errors[order[0]]))
        trace.best_error.append(best.fitness)
        trace.mean_error.append(float(errors.mean()))
        if progress is not None:
            progress(gen, trace)
        if gen == cfg.generations - 1:
            break

        nxt = [Genome(pop[i].genes.copy(), pop[i].fitness) for i in order[: cfg.elite_count]]
        parents = _roulette(rng, errors, 2 * n_cross + n_mut)
        for c in range(n_cross):
            a, b = pop[parents[2 * c]], pop[parents[2 * c + 1]]
            nxt.append(Genome(_scattered(rng, a.genes, b.genes)))
        for m in parents[2 * n_cross :]:
            nxt.append(Genome(_mutate(rng, pop[m].genes, lows, highs, cfg.mutation_rate)))
        pop = nxt

    return GaResult(best, best.decode(space), trace, evaluations)


def compare_mapping(dataset: SampleSet, space=SEARCH_SPACE, cfg: GaConfig | None = None, base=None) -> dict:
    """Run the search once per mapping mode with identical seeds."""
    cfg = cfg or GaConfig()
    out = {}
    for mode in MAPPING_MODES:
        out[mode] = ga_optimize(dataset, space, replace_mode(cfg, mode), base)
    return out


def replace_mode(cfg: GaConfig, mode: str) -> GaConfig:
    return replace(cfg, mapping_mode=mode)
