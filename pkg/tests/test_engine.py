"""Seeded round-based simulation: traces, metrics, batches."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import spidersim as ss
from spidersim.engine import STALL_ROUNDS, scenario_digest, step_round
from spidersim.errors import InvalidScenario, InvalidStrategy, RoundLimitExceeded
from spidersim.exports import export_trace
from spidersim.rng import CountingRandom, substream
from spidersim.state import DefenseKind, fresh_state

from helpers import (
    builtin_reg,
    chain_topology,
    make_topology,
    make_vuln,
    random_topology,
    spec_around,
    sure_entry_reg,
)


def config(**kwargs):
    kwargs.setdefault("max_rounds", 15)
    kwargs.setdefault("seed", 1)
    return ss.SimulationConfig(**kwargs)


def marine_strategy(registry, topology):
    return ss.compose_strategy(
        registry,
        [("data_encryption", "ws-0"), ("honeypot", "maint-0"),
         ("shocktrap", "gateway-0")],
        topology,
    )


class TestRunSimulation:
    def test_deterministic_traces(self, marine_spec, marine_topology, registry):
        strategy = marine_strategy(registry, marine_topology)
        first = ss.run_simulation(marine_spec, strategy, registry, config())
        second = ss.run_simulation(marine_spec, strategy, registry, config())
        assert export_trace(first[0]) == export_trace(second[0])
        assert first[1] == second[1]

    def test_round_monotonicity(self, marine_spec, registry):
        trace, _ = ss.run_simulation(marine_spec, ss.DefenseStrategy(),
                                     registry, config(max_rounds=10))
        rounds = [e.round for e in trace.events]
        assert rounds == sorted(rounds)
        assert trace.final_state.round <= 10

    def test_one_step_win(self):
        topo = make_topology(nodes=[("w", ss.NodeClass.WORKSTATION)], edges=[])
        spec = spec_around(topo, objectives=(
            ss.Objective(ss.Actor.ATTACKER, ss.ObjectiveKind.COMPROMISE,
                         ss.TargetSelector(node_id="w"), 1.0),
        ))
        trace, metrics = ss.run_simulation(
            spec, ss.DefenseStrategy(), sure_entry_reg(), config())
        assert trace.final_state.round == 1
        assert metrics.objective_met(0)
        assert metrics.time_to_first_objective == 1
        assert metrics.compromised_fraction == 1.0

    def test_stall_rule_exactly_three_idle_rounds(self, registry):
        # sensors are not phishable and carry no vulnerabilities: the
        # attacker can never act
        topo = make_topology(nodes=[("s0", ss.NodeClass.SENSOR),
                                    ("s1", ss.NodeClass.SENSOR)],
                             edges=[("s0", "s1")])
        spec = spec_around(topo)
        trace, metrics = ss.run_simulation(spec, ss.DefenseStrategy(),
                                           registry, config(max_rounds=20))
        assert trace.events == ()
        assert trace.final_state.round == STALL_ROUNDS
        assert not metrics.any_attacker_objective_met(spec.objectives)

    def test_trap_soundness(self, marine_spec, marine_topology, registry):
        strategy = marine_strategy(registry, marine_topology)
        for seed in range(30):
            trace, _ = ss.run_simulation(marine_spec, strategy, registry,
                                         config(seed=seed))
            attacker_rounds = {e.round for e in trace.events
                               if e.actor == ss.Actor.ATTACKER}
            for event in trace.events:
                if event.trapped_for > 0:
                    # the round after a trap fires is fully skipped
                    assert event.round + 1 not in attacker_rounds

    def test_conservation_of_compromise(self, marine_spec, marine_topology,
                                        registry):
        state = fresh_state(marine_topology)
        rng = substream(3, "simulation")
        seen = frozenset()
        for _ in range(12):
            state, _ = step_round(state, marine_topology, registry,
                                  ss.DefenseStrategy(), config(seed=3), rng)
            assert seen <= state.compromised_nodes()
            seen = state.compromised_nodes()

    def test_invalid_scenario_rejected(self, marine_spec, registry):
        from dataclasses import replace
        elements = replace(marine_spec.elements, capability_refs=("ghost",))
        broken = replace(marine_spec, elements=elements)
        with pytest.raises(InvalidScenario):
            ss.run_simulation(broken, ss.DefenseStrategy(), registry, config())

    def test_invalid_strategy_rejected(self, marine_spec, registry):
        from spidersim.capabilities import DefenseStrategy, Placement
        bad = DefenseStrategy((Placement("phishing", "ws-0"),))
        with pytest.raises(InvalidStrategy):
            ss.run_simulation(marine_spec, bad, registry, config())
        missing = DefenseStrategy((Placement("honeypot", "ghost"),))
        with pytest.raises(InvalidStrategy):
            ss.run_simulation(marine_spec, missing, registry, config())


class TestStepRound:
    def test_round_limit(self, marine_topology, registry):
        state = fresh_state(marine_topology).with_round(5)
        with pytest.raises(RoundLimitExceeded):
            step_round(state, marine_topology, registry, ss.DefenseStrategy(),
                       config(max_rounds=5), random.Random(0))

    def test_uniform_random_uses_one_selection_draw(self, registry):
        topo = chain_topology()
        state = fresh_state(topo)
        rng = CountingRandom(0)
        cfg = config(attacker_policy=ss.AttackerPolicy.UNIFORM_RANDOM)
        _, events = step_round(state, topo, registry, ss.DefenseStrategy(),
                               cfg, rng)
        assert len(events) == 1
        assert rng.draws == 3  # selection + success + detection

    def test_greedy_value_prefers_high_asset_target(self, registry):
        topo = make_topology(
            nodes=[("w0", ss.NodeClass.WORKSTATION),
                   ("w1", ss.NodeClass.WORKSTATION)],
            edges=[], values={"w0": 10, "w1": 90})
        _, events = step_round(fresh_state(topo), topo, registry,
                               ss.DefenseStrategy(), config(), random.Random(0))
        assert events[0].target == "w1"

    def test_cheapest_step_follows_tie_break(self, registry):
        topo = make_topology(
            nodes=[("w0", ss.NodeClass.WORKSTATION),
                   ("w1", ss.NodeClass.WORKSTATION)],
            edges=[], values={"w0": 10, "w1": 90})
        cfg = config(attacker_policy=ss.AttackerPolicy.CHEAPEST_STEP)
        _, events = step_round(fresh_state(topo), topo, registry,
                               ss.DefenseStrategy(), cfg, random.Random(0))
        assert events[0].target == "w0"

    def test_reactive_defender_patches_after_alarm(self, registry):
        topo = chain_topology()
        state = fresh_state(topo).with_round(1).with_alarm("a")
        cfg = config(defender_policy=ss.DefenderPolicy.REACTIVE)
        new_state, events = step_round(state, topo, registry,
                                       ss.DefenseStrategy(), cfg,
                                       random.Random(0))
        defender_events = [e for e in events if e.actor == ss.Actor.DEFENDER]
        assert len(defender_events) == 1
        patched = defender_events[0].target
        assert DefenseKind.PATCH in new_state.defenses_on(patched)


class TestMetrics:
    def test_protect_objective_fraction(self, registry):
        topo = make_topology(
            nodes=[(f"c{i}", ss.NodeClass.CONTROLLER) for i in range(4)],
            edges=[])
        state = fresh_state(topo).with_compromise("c0", ss.Privilege.USER)
        trace = ss.SimulationTrace(
            config=config(), scenario_digest="x", events=(),
            final_state=state.with_round(3))
        protect = ss.Objective(ss.Actor.DEFENDER, ss.ObjectiveKind.PROTECT,
                               ss.TargetSelector(node_class=ss.NodeClass.CONTROLLER),
                               0.5)
        metrics = ss.compute_metrics(trace, (protect,))
        assert metrics.objective_met(0)  # 3 of 4 safe: 0.75 >= 0.5
        strict = ss.Objective(ss.Actor.DEFENDER, ss.ObjectiveKind.PROTECT,
                              ss.TargetSelector(node_class=ss.NodeClass.CONTROLLER),
                              0.9)
        assert not ss.compute_metrics(trace, (strict,)).objective_met(0)

    def test_compromise_threshold_uses_kth_round(self, registry):
        topo = make_topology(
            nodes=[("c0", ss.NodeClass.CONTROLLER),
                   ("c1", ss.NodeClass.CONTROLLER)],
            edges=[])
        state = (fresh_state(topo)
                 .with_compromise("c0", ss.Privilege.USER)
                 .with_compromise("c1", ss.Privilege.USER)
                 .with_round(5))
        events = (
            ss.SimEvent(2, ss.Actor.ATTACKER, "phishing", "c0",
                        success=True, detected=False, trapped_for=0),
            ss.SimEvent(4, ss.Actor.ATTACKER, "phishing", "c1",
                        success=True, detected=False, trapped_for=0),
        )
        trace = ss.SimulationTrace(config=config(), scenario_digest="x",
                                   events=events, final_state=state)
        half = ss.Objective(ss.Actor.ATTACKER, ss.ObjectiveKind.COMPROMISE,
                            ss.TargetSelector(node_class=ss.NodeClass.CONTROLLER),
                            0.5)
        full = ss.Objective(ss.Actor.ATTACKER, ss.ObjectiveKind.COMPROMISE,
                            ss.TargetSelector(node_class=ss.NodeClass.CONTROLLER),
                            1.0)
        assert ss.compute_metrics(trace, (half,)).time_to_first_objective == 2
        assert ss.compute_metrics(trace, (full,)).time_to_first_objective == 4

    def test_cost_needs_registry(self, marine_spec, registry):
        trace, metrics = ss.run_simulation(marine_spec, ss.DefenseStrategy(),
                                           registry, config())
        without = ss.compute_metrics(trace, marine_spec.objectives)
        assert without.attacker_cost_spent == 0
        if any(e.actor == ss.Actor.ATTACKER for e in trace.events):
            assert metrics.attacker_cost_spent > 0

    def test_detect_objective(self):
        topo = make_topology(nodes=[("w", ss.NodeClass.WORKSTATION)], edges=[])
        state = fresh_state(topo).with_round(1)
        event = ss.SimEvent(1, ss.Actor.ATTACKER, "phishing", "w",
                            success=True, detected=True, trapped_for=0)
        trace = ss.SimulationTrace(config=config(), scenario_digest="x",
                                   events=(event,), final_state=state)
        detect = ss.Objective(ss.Actor.DEFENDER, ss.ObjectiveKind.DETECT,
                              ss.TargetSelector(node_id="w"), 1.0)
        metrics = ss.compute_metrics(trace, (detect,))
        assert metrics.objective_met(0)
        assert metrics.detection_count == 1


class TestBatch:
    def test_singleton_equals_single_run(self, marine_spec, registry):
        cfg = config(seed=11)
        batch = ss.batch_run(marine_spec, ss.DefenseStrategy(), registry,
                             cfg, 1)
        _, metrics = ss.run_simulation(marine_spec, ss.DefenseStrategy(),
                                       registry, cfg)
        assert batch.per_seed == (metrics,)
        assert batch.mean_compromised_fraction == metrics.compromised_fraction

    def test_per_seed_matches_individual_runs(self, marine_spec, registry):
        batch = ss.batch_run(marine_spec, ss.DefenseStrategy(), registry,
                             config(seed=100), 5)
        for i in range(5):
            _, metrics = ss.run_simulation(marine_spec, ss.DefenseStrategy(),
                                           registry, config(seed=100 + i))
            assert batch.per_seed[i] == metrics

    def test_zero_probability_registry(self, marine_spec):
        from dataclasses import replace
        from spidersim.capabilities import CapabilityRegistry
        zeroed = CapabilityRegistry()
        for cap in builtin_reg().capabilities():
            if cap.kind == ss.CapabilityKind.ATTACK:
                cap = replace(cap, base_success_prob=0.0)
            zeroed = ss.register_capability(zeroed, cap)
        # zero out the vulnerability probabilities too
        spec = marine_spec
        topo = spec.scenario_parameters.explicit_topology
        vulns = tuple(replace(v, success_prob=0.0) for v in topo.vulnerabilities)
        from spidersim.model import ScenarioParameters
        spec = replace(
            spec,
            scenario_parameters=ScenarioParameters(
                explicit_topology=replace(topo, vulnerabilities=vulns)),
        )
        batch = ss.batch_run(spec, ss.DefenseStrategy(), zeroed,
                             config(max_rounds=8), 20)
        assert batch.attacker_success_rate == 0.0

    def test_batch_size_must_be_positive(self, marine_spec, registry):
        with pytest.raises(InvalidScenario):
            ss.batch_run(marine_spec, ss.DefenseStrategy(), registry,
                         config(), 0)


class TestDigest:
    def test_digest_is_stable_and_spec_sensitive(self, marine_spec):
        from dataclasses import replace
        assert scenario_digest(marine_spec) == scenario_digest(marine_spec)
        other = replace(marine_spec, domain_context=replace(
            marine_spec.domain_context, narrative="changed"))
        assert scenario_digest(other) != scenario_digest(marine_spec)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_random_scenarios_simulate_deterministically(seed):
    rng = random.Random(seed)
    topo = random_topology(rng)
    spec = spec_around(topo)
    cfg = ss.SimulationConfig(max_rounds=8, seed=rng.randint(0, 2**32),
                              attacker_policy=rng.choice(list(ss.AttackerPolicy)),
                              defender_policy=rng.choice(list(ss.DefenderPolicy)))
    first = ss.run_simulation(spec, ss.DefenseStrategy(), builtin_reg(), cfg)
    second = ss.run_simulation(spec, ss.DefenseStrategy(), builtin_reg(), cfg)
    assert export_trace(first[0]) == export_trace(second[0])
    rounds = [e.round for e in first[0].events]
    assert rounds == sorted(rounds)
    assert first[0].final_state.round <= 8
