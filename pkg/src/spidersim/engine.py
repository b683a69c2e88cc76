"""Seeded round-based attack-defense simulation.

Round order: reactive defender actions first, then one attacker action
(skipped while trapped). A run ends early when every attacker objective
is met or when no attack capability has been applicable for three
consecutive rounds.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .capabilities import (
    CapabilityKind,
    CapabilityOutcome,
    CapabilityRegistry,
    DefenseStrategy,
    EffectKind,
    apply_capability,
    applicable_capabilities,
)
from .errors import InvalidScenario, InvalidStrategy, RoundLimitExceeded
from .model import (
    Actor,
    NetworkTopology,
    Objective,
    ObjectiveKind,
    ScenarioSpec,
    build_topology,
    serialize_scenario,
    validate_spec,
)
from .rng import MASK64, substream
from .state import DefenseKind, SimulationState, fresh_state

STALL_ROUNDS = 3


class AttackerPolicy(str, Enum):
    GREEDY_VALUE = "greedy_value"
    CHEAPEST_STEP = "cheapest_step"
    UNIFORM_RANDOM = "uniform_random"


class DefenderPolicy(str, Enum):
    STATIC = "static"
    REACTIVE = "reactive"


@dataclass(frozen=True)
class SimulationConfig:
    max_rounds: int = 20
    seed: int = 0
    attacker_policy: AttackerPolicy = AttackerPolicy.GREEDY_VALUE
    defender_policy: DefenderPolicy = DefenderPolicy.STATIC

    def __post_init__(self):
        if self.max_rounds < 1:
            raise InvalidScenario("max_rounds must be >= 1")


@dataclass(frozen=True)
class SimEvent:
    round: int
    actor: Actor
    capability_id: str
    target: str
    success: bool
    detected: bool
    trapped_for: int


@dataclass(frozen=True)
class SimulationTrace:
    config: SimulationConfig
    scenario_digest: str
    events: Tuple[SimEvent, ...]
    final_state: SimulationState


@dataclass(frozen=True)
class Metrics:
    objectives_met: Tuple[Tuple[int, bool], ...]
    time_to_first_objective: Optional[int]
    compromised_fraction: float
    detection_count: int
    attacker_cost_spent: int

    def objective_met(self, index: int) -> bool:
        for i, met in self.objectives_met:
            if i == index:
                return met
        return False

    def any_attacker_objective_met(self, objectives: Tuple[Objective, ...]) -> bool:
        return any(
            met for (i, met) in self.objectives_met
            if objectives[i].actor == Actor.ATTACKER
        )


@dataclass(frozen=True)
class BatchResult:
    per_seed: Tuple[Metrics, ...]
    mean_compromised_fraction: float
    attacker_success_rate: float
    mean_detection_count: float


def scenario_digest(spec: ScenarioSpec) -> str:
    return hashlib.sha256(serialize_scenario(spec).encode("utf-8")).hexdigest()


def resolve_topology(spec: ScenarioSpec, registry: CapabilityRegistry,
                     seed: int) -> NetworkTopology:
    if spec.scenario_parameters.explicit_topology is not None:
        return spec.scenario_parameters.explicit_topology
    return build_topology(spec.scenario_parameters.recipe, registry, seed)


def _deploy_strategy(state: SimulationState, strategy: DefenseStrategy,
                     registry: CapabilityRegistry) -> SimulationState:
    # Round-0 deployment is unconditional: strategy composition already
    # checked validity, and deployment consumes no rng draws.
    from .capabilities import _apply_effect  # intra-package use
    for placement in strategy.capability_placements:
        cap = registry.get(placement.capability_id)
        binding = {"target": placement.target_node}
        for eff in cap.effects:
            state = _apply_effect(state, eff, binding, cap.id, None)
    return state


def _matching_nodes(topology: NetworkTopology, objective: Objective) -> List[str]:
    return [n.id for n in topology.nodes if objective.target.matches(n)]


def _objective_met_now(state: SimulationState, objective: Objective,
                       detected_any: bool) -> bool:
    matching = _matching_nodes(state.topology, objective)
    if objective.kind == ObjectiveKind.DETECT:
        return detected_any
    if not matching:
        return objective.kind == ObjectiveKind.PROTECT
    compromised = state.compromised_nodes()
    hit = sum(1 for nid in matching if nid in compromised)
    if objective.kind == ObjectiveKind.COMPROMISE:
        return hit / len(matching) >= objective.threshold
    # protect: the complement fraction must stay at or above the threshold
    return (len(matching) - hit) / len(matching) >= objective.threshold


def step_round(state: SimulationState, topology: NetworkTopology,
               registry: CapabilityRegistry, strategy: DefenseStrategy,
               config: SimulationConfig, rng) -> Tuple[SimulationState, List[SimEvent]]:
    """Advance the simulation by exactly one round.

    Order within the round: (1) reactive defender actions, (2) one
    attacker action chosen by the configured policy, skipped while
    trapped. The uniform_random policy consumes exactly one selection
    draw before the apply draws.
    """
    if state.round >= config.max_rounds:
        raise RoundLimitExceeded(f"round {state.round} is already at max_rounds")
    round_number = state.round + 1
    state = state.with_round(round_number)
    events: List[SimEvent] = []

    if config.defender_policy == DefenderPolicy.REACTIVE:
        alarmed = any(r == round_number - 1 for r, _ in state.alarms)
        if alarmed:
            compromised = state.compromised_nodes()
            candidates = [
                n for n in topology.nodes
                if n.id not in compromised
                and DefenseKind.PATCH not in state.defenses_on(n.id)
            ]
            candidates.sort(key=lambda n: (-n.asset_value, n.id))
            if candidates:
                node = candidates[0]
                state = state.with_defense(node.id, DefenseKind.PATCH)
                events.append(SimEvent(
                    round=round_number, actor=Actor.DEFENDER,
                    capability_id="patch", target=node.id,
                    success=True, detected=False, trapped_for=0,
                ))

    if state.trapped_until > round_number:
        return state, events

    domain = [n.id for n in topology.nodes]
    applicable = applicable_capabilities(registry, state, "attacker", domain)
    if not applicable:
        return state, events

    if config.attacker_policy == AttackerPolicy.GREEDY_VALUE:
        asset_value = {n.id: n.asset_value for n in topology.nodes}
        pick = applicable[0]
        best = asset_value[pick[1]["target"]]
        for entry in applicable[1:]:
            value = asset_value[entry[1]["target"]]
            if value > best:
                pick, best = entry, value
    elif config.attacker_policy == AttackerPolicy.CHEAPEST_STEP:
        pick = applicable[0]
    else:  # uniform_random
        draw = rng.random()
        pick = applicable[min(int(draw * len(applicable)), len(applicable) - 1)]

    cap, binding = pick
    state, outcome = apply_capability(state, cap, binding, rng)
    events.append(SimEvent(
        round=round_number, actor=Actor.ATTACKER,
        capability_id=cap.id, target=binding["target"],
        success=outcome.success, detected=outcome.detected,
        trapped_for=outcome.trapped_for,
    ))
    return state, events


def run_simulation(spec: ScenarioSpec, strategy: DefenseStrategy,
                   registry: CapabilityRegistry, config: SimulationConfig
                   ) -> Tuple[SimulationTrace, Metrics]:
    """Run one seeded simulation; identical inputs yield identical traces."""
    report = validate_spec(spec, registry)
    if report.errors:
        raise InvalidScenario(
            "; ".join(f"{f.code}: {f.message}" for f in report.errors)
        )
    topology = resolve_topology(spec, registry, config.seed)

    node_ids = {n.id for n in topology.nodes}
    for placement in strategy.capability_placements:
        if not registry.has(placement.capability_id):
            raise InvalidStrategy(f"unknown capability {placement.capability_id!r}")
        if registry.get(placement.capability_id).kind != CapabilityKind.DEFENSE:
            raise InvalidStrategy(f"{placement.capability_id!r} is not a defense")
        if placement.target_node not in node_ids:
            raise InvalidStrategy(f"no node {placement.target_node!r} in topology")

    state = _deploy_strategy(fresh_state(topology), strategy, registry)
    rng = substream(config.seed, "simulation")

    attacker_objectives = [
        o for o in spec.objectives if o.actor == Actor.ATTACKER
    ]
    events: List[SimEvent] = []
    idle_rounds = 0
    detected_any = False

    for _ in range(config.max_rounds):
        trapped = state.trapped_until > state.round + 1
        state, round_events = step_round(state, topology, registry, strategy, config, rng)
        events.extend(round_events)
        attacker_acted = any(e.actor == Actor.ATTACKER for e in round_events)
        detected_any = detected_any or any(
            e.actor == Actor.ATTACKER and e.success and e.detected
            for e in round_events
        )
        if attacker_acted or trapped:
            idle_rounds = 0
        else:
            idle_rounds += 1
            if idle_rounds >= STALL_ROUNDS:
                break
        if attacker_objectives and all(
            _objective_met_now(state, o, detected_any) for o in attacker_objectives
        ):
            break

    trace = SimulationTrace(
        config=config,
        scenario_digest=scenario_digest(spec),
        events=tuple(events),
        final_state=state,
    )
    return trace, compute_metrics(trace, spec.objectives, registry)


def _first_success_rounds(trace: SimulationTrace) -> Dict[str, int]:
    """First round each finally-compromised node saw a successful attack.

    Compromise never decreases under the shipped capability set, so the
    first successful attack event on a node that ends up compromised is
    the round it was compromised.
    """
    compromised = trace.final_state.compromised_nodes()
    rounds: Dict[str, int] = {}
    for event in trace.events:
        if event.actor != Actor.ATTACKER or not event.success:
            continue
        if event.target in compromised and event.target not in rounds:
            rounds[event.target] = event.round
    return rounds


def compute_metrics(trace: SimulationTrace, objectives: Tuple[Objective, ...],
                    registry: Optional[CapabilityRegistry] = None) -> Metrics:
    """Objective-level outcome measures for one trace.

    ``attacker_cost_spent`` needs capability costs; without a registry it
    is reported as 0.
    """
    topology = trace.final_state.topology
    total_nodes = len(topology.nodes)
    compromised = trace.final_state.compromised_nodes()
    compromised_fraction = len(compromised) / total_nodes if total_nodes else 0.0

    detected_any = any(
        e.actor == Actor.ATTACKER and e.success and e.detected for e in trace.events
    )
    first_rounds = _first_success_rounds(trace)

    met: List[Tuple[int, bool]] = []
    first_objective_round: Optional[int] = None
    final_round = trace.final_state.round

    for i, objective in enumerate(objectives):
        matching = _matching_nodes(topology, objective)
        if objective.kind == ObjectiveKind.DETECT:
            is_met = detected_any
            met_round = min(
                (e.round for e in trace.events
                 if e.actor == Actor.ATTACKER and e.success and e.detected),
                default=None,
            ) if is_met else None
        elif objective.kind == ObjectiveKind.COMPROMISE:
            if not matching:
                is_met, met_round = False, None
            else:
                needed = math.ceil(objective.threshold * len(matching))
                hit_rounds = sorted(
                    first_rounds[nid] for nid in matching if nid in compromised
                )
                if needed == 0:
                    is_met, met_round = True, 0
                elif len(hit_rounds) >= needed:
                    is_met, met_round = True, hit_rounds[needed - 1]
                else:
                    is_met, met_round = False, None
        else:  # protect: monotone, so the final-state check covers all rounds
            if not matching:
                is_met, met_round = True, 0
            else:
                safe = sum(1 for nid in matching if nid not in compromised)
                is_met = safe / len(matching) >= objective.threshold
                met_round = final_round if is_met else None
        met.append((i, is_met))
        if objective.actor == Actor.ATTACKER and is_met and met_round is not None:
            if first_objective_round is None or met_round < first_objective_round:
                first_objective_round = met_round

    detection_count = sum(
        1 for e in trace.events if e.actor == Actor.ATTACKER and e.detected
    )
    if registry is not None:
        cost = sum(
            registry.get(e.capability_id).cost_units
            for e in trace.events if e.actor == Actor.ATTACKER
        )
    else:
        cost = 0

    return Metrics(
        objectives_met=tuple(met),
        time_to_first_objective=first_objective_round,
        compromised_fraction=compromised_fraction,
        detection_count=detection_count,
        attacker_cost_spent=cost,
    )


def batch_run(spec: ScenarioSpec, strategy: DefenseStrategy,
              registry: CapabilityRegistry, config: SimulationConfig,
              n: int) -> BatchResult:
    """Run n independent simulations with seeds config.seed + i (mod 2^64)."""
    if n < 1:
        raise InvalidScenario("batch size must be >= 1")
    per_seed: List[Metrics] = []
    successes = 0
    for i in range(n):
        run_config = SimulationConfig(
            max_rounds=config.max_rounds,
            seed=(config.seed + i) & MASK64,
            attacker_policy=config.attacker_policy,
            defender_policy=config.defender_policy,
        )
        _, metrics = run_simulation(spec, strategy, registry, run_config)
        per_seed.append(metrics)
        if metrics.any_attacker_objective_met(spec.objectives):
            successes += 1
    return BatchResult(
        per_seed=tuple(per_seed),
        mean_compromised_fraction=sum(m.compromised_fraction for m in per_seed) / n,
        attacker_success_rate=successes / n,
        mean_detection_count=sum(m.detection_count for m in per_seed) / n,
    )
