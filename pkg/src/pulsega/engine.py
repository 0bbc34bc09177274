"""Generational loop with an adaptive pool of mating operators.

Operators compete for the right to produce children. An operator earns
credit whenever a child it made, or a descendant within the credit horizon,
beats the previous generation's best; its selection weight then drifts
toward its share of recent credit while never dropping below a floor.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from pulsega.analysis import variation_map
from pulsega.field import GeneLayout, GeneString, SpectralField, gaussian_spectrum
from pulsega.operators import OPERATORS, OperatorParams, apply_operator, random_stream

log = logging.getLogger(__name__)

FitnessFn = Callable[[GeneString], float]

# sub-stream tags for random_stream(seed, generation, tag, slot)
_INIT, _MATING, _NOISE = 0, 1, 2


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class EmptyPopulationError(ValueError):
    pass


def default_operator_weights(names: Sequence[str]) -> dict[str, float]:
    """Traditional start: two-point crossover dominant, then mutation, the
    rest sharing what is left equally."""
    fixed = {"two_point_crossover": 0.50, "mutation": 0.20}
    weights = {n: fixed[n] for n in names if n in fixed}
    others = [n for n in names if n not in fixed]
    if others:
        share = (1.0 - sum(weights.values())) / len(others)
        weights.update({n: share for n in others})
    total = sum(weights.values())
    return {n: weights[n] / total for n in names}


@dataclass(frozen=True)
class EngineConfig:
    population_size: int = 60
    elite_count: int = 2
    generations: int = 200
    seed: int = 0
    layout: GeneLayout = GeneLayout()
    operators: tuple[str, ...] = tuple(OPERATORS)
    operator_weights: dict[str, float] | None = None
    params: OperatorParams = OperatorParams()
    min_operator_weight: float = 0.05
    base_fraction: float = 0.85
    credit_horizon: int = 3
    adapt_after: int = 3
    credit_mode: str = "previous"  # or "alltime"
    noise_sigma: float = 0.0
    threads: int = 1

    def initial_weights(self) -> dict[str, float]:
        if self.operator_weights is None:
            return default_operator_weights(self.operators)
        return dict(self.operator_weights)

    def validate(self) -> EngineConfig:
        if self.population_size < 2:
            raise ConfigError("population_size", "must be at least 2")
        if not 0 <= self.elite_count < self.population_size:
            raise ConfigError("elite_count", "must satisfy 0 <= elite_count < population_size")
        if self.generations < 0:
            raise ConfigError("generations", "must be nonnegative")
        if not self.operators:
            raise ConfigError("operators", "at least one operator is required")
        for name in self.operators:
            if name not in OPERATORS:
                raise ConfigError("operators", f"unknown operator {name!r}")
        if len(set(self.operators)) != len(self.operators):
            raise ConfigError("operators", "duplicate operator names")
        if "smooth" in self.operators and self.layout.num_phase_genes < 3:
            raise ConfigError("operators", "smooth needs at least three phase genes")
        w = self.initial_weights()
        if set(w) != set(self.operators):
            raise ConfigError("operator_weights", "must name exactly the enabled operators")
        if any(v < 0 for v in w.values()) or abs(sum(w.values()) - 1.0) > 1e-9:
            raise ConfigError("operator_weights", "must be nonnegative and sum to 1")
        if self.min_operator_weight * len(self.operators) > 1.0:
            raise ConfigError("min_operator_weight", "floor times operator count exceeds 1")
        if not 0.0 <= self.base_fraction <= 1.0:
            raise ConfigError("base_fraction", "must lie in [0, 1]")
        if self.credit_horizon < 0:
            raise ConfigError("credit_horizon", "must be nonnegative")
        if self.credit_mode not in ("previous", "alltime"):
            raise ConfigError("credit_mode", "must be 'previous' or 'alltime'")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma", "must be nonnegative")
        if self.threads < 1:
            raise ConfigError("threads", "must be at least 1")
        return self


@dataclass(frozen=True)
class Lineage:
    operator: str | None  # None for the random first generation
    parents: tuple[int, ...]
    birth: int


@dataclass(frozen=True)
class Individual:
    id: int
    genes: GeneString
    fitness: float
    lineage: Lineage


@dataclass(frozen=True)
class Population:
    generation: int
    members: tuple[Individual, ...]

    @property
    def fitness(self) -> np.ndarray:
        return np.array([m.fitness for m in self.members])

    def best(self) -> Individual:
        return self.members[int(np.argmax(self.fitness))]


def individual_id(generation: int, slot: int) -> int:
    return (generation << 32) | slot


# -- fitness scaling and selection ---------------------------------------

def scale_fitness(raw) -> np.ndarray:
    """Linear scaling: the best member maps to 2, a member at the mean to 1.

    ``(best - f) / (mean - best) + 2``, clamped at zero. Non-finite entries
    (failed evaluations) get zero and are left out of best and mean. If
    best equals the mean every finite member scores 1.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.size == 0:
        raise EmptyPopulationError("cannot scale an empty population")
    ok = np.isfinite(raw)
    scaled = np.zeros_like(raw)
    if not ok.any():
        return scaled
    best = raw[ok].max()
    avg = raw[ok].mean()
    if best <= avg:
        scaled[ok] = 1.0
        return scaled
    scaled[ok] = (best - raw[ok]) / (avg - best) + 2.0
    return np.maximum(scaled, 0.0)


def select_index(scaled, rng: np.random.Generator) -> int:
    """Roulette wheel over ``scaled``; uniform if nothing has positive weight."""
    s = np.asarray(scaled, dtype=float)
    total = s.sum()
    if not total > 0.0:
        log.warning("all scaled fitnesses are zero; selecting uniformly")
        return int(rng.integers(len(s)))
    return int(rng.choice(len(s), p=s / total))


def select_parent(pop: Population, scaled, rng: np.random.Generator) -> Individual:
    return pop.members[select_index(scaled, rng)]


# -- operator pool and credit -------------------------------------------

@dataclass(frozen=True)
class OperatorPool:
    names: tuple[str, ...]
    weights: np.ndarray  # effective fitness, sums to 1
    base: np.ndarray  # weights before the latest update
    adaptive: np.ndarray  # latest credit shares
    floor: float = 0.05

    @classmethod
    def create(cls, weights: dict[str, float], floor: float = 0.05) -> OperatorPool:
        names = tuple(weights)
        w = apply_floor(np.array([weights[n] for n in names], dtype=float), floor)
        return cls(names, w, w.copy(), np.zeros(len(names)), floor)

    def as_dict(self) -> dict[str, float]:
        return {n: float(w) for n, w in zip(self.names, self.weights)}


def apply_floor(w: np.ndarray, floor: float) -> np.ndarray:
    """Project nonnegative weights onto ``{sum = 1, each >= floor}``.

    Entries pinned at the floor stay there; the rest share the remaining
    mass in proportion to their current values.
    """
    w = np.asarray(w, dtype=float)
    n = len(w)
    if floor * n > 1.0 + 1e-12:
        raise ValueError("floor is infeasible for this many operators")
    pinned = np.zeros(n, dtype=bool)
    while True:
        free_mass = 1.0 - floor * pinned.sum()
        free = ~pinned
        sub = w[free]
        out = np.full(n, floor)
        if sub.sum() > 0:
            out[free] = sub / sub.sum() * free_mass
        else:
            out[free] = free_mass / free.sum()
        newly = free & (out < floor)
        if not newly.any():
            break
        pinned |= newly
    # tidy the last ulp so the sum is 1 to rounding
    out[free] += (1.0 - out.sum()) / max(free.sum(), 1)
    return out


def select_operator(pool: OperatorPool, rng: np.random.Generator) -> str:
    return pool.names[int(rng.choice(len(pool.names), p=pool.weights))]


@dataclass
class CreditLedger:
    """Genealogy of recent individuals and the credit their operators earned."""

    horizon: int = 3
    lineage: dict[int, Lineage] = field(default_factory=dict)
    credits: dict[int, Counter] = field(default_factory=dict)

    def register(self, members: Sequence[Individual]):
        for m in members:
            self.lineage.setdefault(m.id, m.lineage)

    def purge(self, generation: int):
        oldest = generation - self.horizon
        self.lineage = {i: l for i, l in self.lineage.items() if l.birth >= oldest}
        self.credits = {g: c for g, c in self.credits.items() if g > oldest}

    def ancestors(self, ind: Individual, generation: int) -> list[Lineage]:
        """Distinct ancestors born within the horizon of ``generation``."""
        oldest = generation - self.horizon
        seen: set[int] = set()
        out = []
        frontier = list(ind.lineage.parents)
        while frontier:
            pid = frontier.pop()
            if pid in seen:
                continue
            seen.add(pid)
            lin = self.lineage.get(pid)
            if lin is None or lin.birth < oldest:
                continue
            out.append(lin)
            frontier.extend(lin.parents)
        return out

    def share(self, names: Sequence[str]) -> np.ndarray:
        total = Counter()
        for c in self.credits.values():
            total.update(c)
        s = np.array([total.get(n, 0) for n in names], dtype=float)
        return s / s.sum() if s.sum() > 0 else s


def assign_credit(ledger: CreditLedger, newpop: Population, prev_best: float) -> CreditLedger:
    """Credit the makers of every member beating ``prev_best`` and of its
    ancestors within the horizon. Mutates and returns ``ledger``."""
    g = newpop.generation
    ledger.register(newpop.members)
    earned = ledger.credits.setdefault(g, Counter())
    for m in newpop.members:
        if not m.fitness > prev_best or m.lineage.birth != g:
            continue
        contributors = [m.lineage] + ledger.ancestors(m, g)
        for lin in contributors:
            if lin.operator is not None:
                earned[lin.operator] += 1
    ledger.purge(g)
    return ledger


def update_operator_weights(pool: OperatorPool, ledger: CreditLedger, generation: int,
                            base_fraction: float = 0.85, adapt_after: int = 3) -> OperatorPool:
    """Blend each weight with its credit share, then enforce the floor.

    Before ``adapt_after`` generations the pool is returned unchanged, as
    it is when no operator holds any credit.
    """
    if generation < adapt_after:
        return pool
    share = ledger.share(pool.names)
    if share.sum() == 0:
        return replace(pool, base=pool.weights, adaptive=share)
    blended = base_fraction * pool.weights + (1.0 - base_fraction) * share
    return OperatorPool(pool.names, apply_floor(blended, pool.floor), pool.weights, share,
                        pool.floor)


# -- evaluation and the generational step -------------------------------

def evaluate(genomes: Sequence[GeneString], fitness_fn: FitnessFn, threads: int = 1,
             noise_sigma: float = 0.0, seed: int = 0, generation: int = 0,
             slots: Sequence[int] | None = None) -> np.ndarray:
    """Fitness of each genome; failures and non-finite values become -inf.

    Multiplicative Gaussian noise, when enabled, is drawn from a stream keyed
    by slot so results do not depend on evaluation order.
    """
    def one(g: GeneString) -> float:
        try:
            v = float(fitness_fn(g))
        except Exception as exc:  # a failed measurement must not kill the run
            log.warning("fitness evaluation failed: %s", exc)
            return -math.inf
        if not math.isfinite(v):
            log.warning("non-finite fitness %r replaced by -inf", v)
            return -math.inf
        return v

    if threads > 1 and len(genomes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            values = np.array(list(ex.map(one, genomes)))
    else:
        values = np.array([one(g) for g in genomes])
    if noise_sigma > 0:
        slots = range(len(genomes)) if slots is None else slots
        factors = np.array([1.0 + noise_sigma * random_stream(seed, generation, _NOISE, s)
                            .standard_normal() for s in slots])
        values = np.where(np.isfinite(values), values * factors, values)
    return values


@dataclass(frozen=True)
class GenerationReport:
    generation: int
    best: float
    mean: float
    std: float
    best_id: int
    weights: dict[str, float]
    variation: np.ndarray
    credits: dict[str, int]
    operator_counts: dict[str, int]


def fitness_stats(fitness: np.ndarray) -> tuple[float, float, float]:
    ok = fitness[np.isfinite(fitness)]
    if ok.size == 0:
        return -math.inf, -math.inf, 0.0
    return float(ok.max()), float(ok.mean()), float(ok.std())


def make_report(pop: Population, pool: OperatorPool, ledger: CreditLedger) -> GenerationReport:
    best, mean, std = fitness_stats(pop.fitness)
    created = Counter(m.lineage.operator for m in pop.members
                      if m.lineage.birth == pop.generation and m.lineage.operator)
    credits = ledger.credits.get(pop.generation, Counter())
    return GenerationReport(
        generation=pop.generation,
        best=best, mean=mean, std=std,
        best_id=pop.best().id,
        weights=pool.as_dict(),
        variation=variation_map([m.genes for m in pop.members]),
        credits={n: int(credits.get(n, 0)) for n in pool.names},
        operator_counts={n: int(created.get(n, 0)) for n in pool.names},
    )


@dataclass
class EngineState:
    population: Population
    pool: OperatorPool
    ledger: CreditLedger
    best_ever: float


def step_generation(state: EngineState, fitness_fn: FitnessFn, config: EngineConfig,
                    carrier: SpectralField) -> tuple[EngineState, GenerationReport]:
    """Breed, evaluate and score the next generation.

    The ``elite_count`` fittest members pass through untouched; the other
    slots are filled by operators drawn from the pool acting on roulette
    selected parents.
    """
    pop = state.population
    g = pop.generation + 1
    p = config.population_size
    fitness = pop.fitness
    order = np.argsort(-np.where(np.isfinite(fitness), fitness, -np.inf), kind="stable")
    elites = [pop.members[i] for i in order[:config.elite_count]]
    scaled = scale_fitness(fitness)

    children: list[tuple[GeneString, Lineage]] = []
    event = 0
    while len(children) < p - len(elites):
        rng = random_stream(config.seed, g, _MATING, event)
        event += 1
        op = select_operator(state.pool, rng)
        parents = [select_parent(pop, scaled, rng) for _ in range(OPERATORS[op].arity)]
        kids = apply_operator(op, [x.genes for x in parents], rng, carrier, config.params)
        lin = Lineage(op, tuple(x.id for x in parents), g)
        children.extend((k, lin) for k in kids)
    children = children[:p - len(elites)]

    slots = range(len(elites), p)
    values = evaluate([c for c, _ in children], fitness_fn, config.threads,
                      config.noise_sigma, config.seed, g, slots)
    members = tuple(elites) + tuple(
        Individual(individual_id(g, s), genes, float(v), lin)
        for s, (genes, lin), v in zip(slots, children, values))
    newpop = Population(g, members)

    prev_best = state.best_ever if config.credit_mode == "alltime" else fitness_stats(fitness)[0]
    ledger = assign_credit(state.ledger, newpop, prev_best)
    pool = update_operator_weights(state.pool, ledger, g, config.base_fraction, config.adapt_after)
    best_ever = max(state.best_ever, fitness_stats(newpop.fitness)[0])
    new_state = EngineState(newpop, pool, ledger, best_ever)
    return new_state, make_report(newpop, pool, ledger)


def initial_state(config: EngineConfig, fitness_fn: FitnessFn) -> EngineState:
    rng = random_stream(config.seed, 0, _INIT, 0)
    genomes = [config.layout.random(rng) for _ in range(config.population_size)]
    values = evaluate(genomes, fitness_fn, config.threads, config.noise_sigma, config.seed, 0)
    members = tuple(Individual(individual_id(0, s), genes, float(v), Lineage(None, (), 0))
                    for s, (genes, v) in enumerate(zip(genomes, values)))
    pop = Population(0, members)
    ledger = CreditLedger(config.credit_horizon)
    ledger.register(members)
    pool = OperatorPool.create(config.initial_weights(), config.min_operator_weight)
    return EngineState(pop, pool, ledger, fitness_stats(pop.fitness)[0])


@dataclass
class RunLog:
    config: EngineConfig
    reports: list[GenerationReport]
    populations: list[Population]
    elites: list[Individual]

    @property
    def best_fitness(self) -> np.ndarray:
        return np.array([r.best for r in self.reports])


def run(config: EngineConfig, fitness_fn: FitnessFn, carrier: SpectralField | None = None,
        keep_populations: bool = True,
        on_generation: Callable[[Population, GenerationReport], None] | None = None) -> RunLog:
    """Evolve a random population for ``config.generations`` generations.

    ``carrier`` feeds the time-domain crossover; it defaults to the fitness
    function's ``carrier`` attribute, then to a Gaussian on the layout grid.
    """
    config.validate()
    if carrier is None:
        carrier = getattr(fitness_fn, "carrier", None)
    if carrier is None:
        carrier = gaussian_spectrum(config.layout.num_components)
    state = initial_state(config, fitness_fn)
    reports = [make_report(state.population, state.pool, state.ledger)]
    pops = [state.population] if keep_populations else []
    if on_generation:
        on_generation(state.population, reports[0])
    for _ in range(config.generations):
        state, report = step_generation(state, fitness_fn, config, carrier)
        reports.append(report)
        if keep_populations:
            pops.append(state.population)
        if on_generation:
            on_generation(state.population, report)
    fitness = state.population.fitness
    order = np.argsort(-fitness, kind="stable")
    k = max(config.elite_count, 1)
    elites = [state.population.members[i] for i in order[:k]]
    return RunLog(config, reports, pops, elites)
