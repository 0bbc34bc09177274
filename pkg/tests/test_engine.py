import math
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from pulsega.engine import (
    ConfigError,
    CreditLedger,
    EmptyPopulationError,
    EngineConfig,
    Individual,
    Lineage,
    OperatorPool,
    Population,
    apply_floor,
    assign_credit,
    default_operator_weights,
    evaluate,
    individual_id,
    initial_state,
    run,
    scale_fitness,
    select_index,
    select_operator,
    step_generation,
    update_operator_weights,
)
from pulsega.field import GeneLayout, gaussian_spectrum
from pulsega.physics import ShgLandscape

LAND = ShgLandscape(gaussian_spectrum(128))
SMALL = EngineConfig(population_size=20, generations=10, seed=3)


# -- scaling and selection ---------------------------------------------------

def test_scaling_example():
    raw = np.array([10.0, 8.0, 6.0, 0.0])  # best 10, mean 6
    s = scale_fitness(raw)
    assert s[0] == 2.0 and s[2] == 1.0
    assert s[3] == 0.0  # -0.5 before clamping
    assert s[1] == pytest.approx(1.5)


def test_scaling_degenerate_and_failed_members():
    assert np.all(scale_fitness([3.0, 3.0, 3.0]) == 1.0)
    s = scale_fitness([1.0, -math.inf, 3.0])
    assert s[1] == 0.0 and s[2] == 2.0
    with pytest.raises(EmptyPopulationError):
        scale_fitness([])


def test_roulette_edge_cases():
    rng = np.random.default_rng(0)
    assert {select_index([0, 0, 3, 0], rng) for _ in range(200)} == {2}
    picks = [select_index([0.0, 0.0, 0.0], rng) for _ in range(300)]
    assert set(picks) == {0, 1, 2}


def test_operator_choice_follows_weights():
    rng = np.random.default_rng(1)
    only = OperatorPool.create({"mutation": 1.0}, floor=0.0)
    assert all(select_operator(only, rng) == "mutation" for _ in range(100))
    pool = OperatorPool.create({"a": 0.85, "b": 0.15}, floor=0.05)
    n = 100_000
    hits = sum(select_operator(pool, rng) == "a" for _ in range(n))
    assert abs(hits - 0.85 * n) < 3 * math.sqrt(n * 0.85 * 0.15)


def test_floor_operator_drawn_about_five_percent():
    names = [f"op{i}" for i in range(5)]
    w = apply_floor(np.array([0.0, 0.3, 0.3, 0.2, 0.2]), 0.05)
    assert w[0] == pytest.approx(0.05)
    pool = OperatorPool(tuple(names), w, w, np.zeros(5), 0.05)
    rng = np.random.default_rng(2)
    n = 100_000
    hits = sum(select_operator(pool, rng) == "op0" for _ in range(n))
    assert abs(hits - 0.05 * n) < 3 * math.sqrt(n * 0.05 * 0.95)


@pytest.mark.parametrize("w", [[1.0, 0, 0, 0], [0.5, 0.5, 0, 0], [0.2, 0.3, 0.4, 0.1],
                               [0, 0, 0, 0]])
def test_apply_floor_projects_onto_simplex(w):
    out = apply_floor(np.array(w, dtype=float), 0.05)
    assert abs(out.sum() - 1.0) < 1e-12
    assert np.all(out >= 0.05 - 1e-15)


def test_default_weights_favour_two_point_crossover():
    w = default_operator_weights(EngineConfig().operators)
    assert w["two_point_crossover"] == pytest.approx(0.5)
    assert w["mutation"] == pytest.approx(0.2)
    assert w["smooth"] == pytest.approx(0.06)
    assert sum(w.values()) == pytest.approx(1.0)


# -- operator weights -------------------------------------------------------

def ledger_with_shares(names, shares, generation):
    ledger = CreditLedger()
    ledger.credits[generation] = Counter(dict(zip(names, shares)))
    return ledger


def test_weight_update_example():
    pool = OperatorPool.create({"a": 0.40, "b": 0.60})
    ledger = ledger_with_shares(["a", "b"], [1, 4], 5)  # shares 0.2 and 0.8
    new = update_operator_weights(pool, ledger, 5)
    assert new.weights[0] == pytest.approx(0.85 * 0.40 + 0.15 * 0.20, abs=1e-12)
    assert new.weights[0] == pytest.approx(0.37, abs=1e-12)
    assert new.weights.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(new.base, pool.weights)
    np.testing.assert_allclose(new.adaptive, [0.2, 0.8])


def test_weights_frozen_for_first_generations():
    pool = OperatorPool.create({"a": 0.40, "b": 0.60})
    ledger = ledger_with_shares(["a", "b"], [0, 5], 2)
    assert update_operator_weights(pool, ledger, 2) is pool


def test_uncredited_operator_decays_to_floor_and_stops():
    pool = OperatorPool.create({"a": 0.5, "b": 0.3, "c": 0.2})
    for g in range(3, 80):
        pool = update_operator_weights(pool, ledger_with_shares("abc", [0, 0, 1], g), g)
        assert pool.weights.min() >= 0.05 - 1e-15
    assert pool.weights[0] == pytest.approx(0.05)
    assert pool.weights[1] == pytest.approx(0.05)


def test_no_credit_anywhere_keeps_weights():
    pool = OperatorPool.create({"a": 0.4, "b": 0.6})
    new = update_operator_weights(pool, CreditLedger(), 10)
    np.testing.assert_array_equal(new.weights, pool.weights)


# -- credit assignment ------------------------------------------------------

def member(gen, slot, op, parents=(), fitness=0.0):
    return Individual(individual_id(gen, slot), None, fitness, Lineage(op, tuple(parents), gen))


def chain(ops):
    """One individual per generation, each the only parent of the next."""
    ledger = CreditLedger(horizon=3)
    people = []
    for g, op in enumerate(ops):
        parents = (people[-1].id,) if people else ()
        people.append(member(g, 0, op, parents))
        assign_credit(ledger, Population(g, (people[-1],)), prev_best=math.inf)
    return ledger, people


def test_no_record_breaker_no_credit():
    ledger, people = chain([None, "creep", "mutation"])
    assert all(sum(c.values()) == 0 for c in ledger.credits.values())


def test_record_breaker_credits_itself_and_its_parent_operator():
    ledger, people = chain([None, "two_point_crossover"])
    g = 2
    star = member(g, 0, "mutation", (people[-1].id,), fitness=5.0)
    assign_credit(ledger, Population(g, (star,)), prev_best=1.0)
    assert dict(ledger.credits[g]) == {"mutation": 1, "two_point_crossover": 1}


def test_credit_reaches_three_generations_back_but_not_four():
    ops = [None, "smooth", "average_crossover", "creep", "two_point_crossover"]
    ledger, people = chain(ops)
    g = len(ops)  # the record breaker is born here
    star = member(g, 0, "mutation", (people[-1].id,), fitness=5.0)
    assign_credit(ledger, Population(g, (star,)), prev_best=1.0)
    credited = dict(ledger.credits[g])
    # depth 1..3: two_point (g-1), creep (g-2), average (g-3); depth 4: smooth (g-4)
    assert credited == {"mutation": 1, "two_point_crossover": 1, "creep": 1,
                        "average_crossover": 1}
    assert all(l.birth >= g - 3 for l in ledger.lineage.values())


def test_shared_ancestor_counted_once():
    ledger = CreditLedger()
    root = member(1, 0, "creep")
    ledger.register([root])
    a = member(2, 0, "smooth", (root.id,))
    b = member(2, 1, "mutation", (root.id,))
    ledger.register([a, b])
    star = member(3, 0, "average_crossover", (a.id, b.id), fitness=9.0)
    assign_credit(ledger, Population(3, (star,)), prev_best=0.0)
    assert dict(ledger.credits[3]) == {"average_crossover": 1, "smooth": 1, "mutation": 1,
                                       "creep": 1}


def test_elites_do_not_earn_credit_again():
    ledger = CreditLedger()
    elite = member(1, 0, "creep", fitness=9.0)
    assign_credit(ledger, Population(2, (elite,)), prev_best=0.0)
    assert sum(ledger.credits[2].values()) == 0


# -- evaluation ---------------------------------------------------------------

def test_failed_evaluations_become_negative_infinity():
    layout = GeneLayout()
    genomes = [layout.flat(), layout.flat(phase=1.0), layout.flat(phase=2.0)]

    def fragile(g):
        if g.phases[0] == 1.0:
            raise RuntimeError("detector saturated")
        return math.nan if g.phases[0] == 2.0 else 1.0

    assert list(evaluate(genomes, fragile)) == [1.0, -math.inf, -math.inf]


def test_noise_is_keyed_by_slot_not_order():
    layout = GeneLayout()
    genomes = [layout.flat()] * 4
    a = evaluate(genomes, lambda g: 1.0, noise_sigma=0.1, seed=5, generation=2)
    b = evaluate(genomes, lambda g: 1.0, threads=4, noise_sigma=0.1, seed=5, generation=2)
    assert np.array_equal(a, b)
    assert len(set(a)) == 4


# -- the generational loop ---------------------------------------------------

def test_elites_survive_unchanged():
    state = initial_state(SMALL, LAND)
    order = np.argsort(-state.population.fitness)
    top = [state.population.members[i] for i in order[:SMALL.elite_count]]
    new, _ = step_generation(state, LAND, SMALL, LAND.carrier)
    for e in top:
        assert e in new.population.members


def test_population_size_constant_and_ids_unique():
    log = run(SMALL, LAND)
    for pop in log.populations:
        assert len(pop.members) == SMALL.population_size
        assert len({m.id for m in pop.members}) == SMALL.population_size
        for m in pop.members:
            assert m.lineage.birth <= pop.generation


def test_zero_generations_logs_initial_population():
    log = run(replace(SMALL, generations=0), LAND)
    assert len(log.reports) == 1 and len(log.populations) == 1
    assert log.reports[0].generation == 0
    assert log.elites[0].fitness == log.reports[0].best


def test_runs_are_reproducible_and_thread_independent():
    a = run(SMALL, LAND)
    b = run(replace(SMALL, threads=4), LAND)
    assert np.array_equal(a.best_fitness, b.best_fitness)
    for ra, rb in zip(a.reports, b.reports):
        assert ra.weights == rb.weights and ra.mean == rb.mean
        assert np.array_equal(ra.variation, rb.variation)
    assert np.array_equal(a.elites[0].genes.phases, b.elites[0].genes.phases)
    c = run(replace(SMALL, seed=4), LAND)
    assert not np.array_equal(a.best_fitness, c.best_fitness)


def test_best_fitness_never_drops():
    log = run(replace(SMALL, generations=40), LAND)
    assert np.all(np.diff(log.best_fitness) >= 0)


def test_failing_landscape_does_not_stop_the_run():
    calls = []

    def flaky(g):
        calls.append(1)
        if len(calls) % 7 == 0:
            raise ValueError("lost shot")
        return LAND(g)

    log = run(replace(SMALL, generations=5), flaky)
    assert len(log.reports) == 6
    assert np.isfinite(log.best_fitness).all()


def test_alltime_credit_mode_runs():
    log = run(replace(SMALL, credit_mode="alltime", generations=8), LAND)
    assert len(log.reports) == 9


@pytest.mark.parametrize("changes,field", [
    (dict(population_size=1), "population_size"),
    (dict(elite_count=20), "elite_count"),
    (dict(generations=-1), "generations"),
    (dict(operators=("mutation", "annealing")), "operators"),
    (dict(operators=()), "operators"),
    (dict(operator_weights={"mutation": 1.0}), "operator_weights"),
    (dict(credit_mode="sometimes"), "credit_mode"),
    (dict(min_operator_weight=0.2), "min_operator_weight"),
    (dict(noise_sigma=-0.1), "noise_sigma"),
])
def test_config_errors_name_the_field(changes, field):
    with pytest.raises(ConfigError) as info:
        replace(SMALL, **changes).validate()
    assert info.value.field == field
