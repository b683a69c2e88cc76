"""Attack path enumeration, scoring, reachability, and greedy placement.

Paths are a static, pre-simulation view: a hop is realizable when the
topology alone supports it (an edge plus either an exploitable
vulnerability on the hop target or a credential granting access to it).
Entry nodes reached from outside get a first step from the distinguished
EXTERNAL token when an entry-class capability (phishing) applies to them;
otherwise the entry node itself is treated as an assumed foothold and the
path starts there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .capabilities import (
    AtomicCapability,
    CapabilityKind,
    CapabilityRegistry,
    matching_vulnerabilities,
)
from .errors import NonContiguousPath, TargetSelectorEmpty, UnknownEntryNode
from .model import NetworkTopology, TargetSelector
from .state import DefenseKind

EXTERNAL = "EXTERNAL"


@dataclass(frozen=True)
class AttackStep:
    source: str  # node id or EXTERNAL
    capability_id: str
    target: str
    step_prob: float
    step_cost: int


@dataclass(frozen=True)
class AttackPath:
    steps: Tuple[AttackStep, ...]
    success_prob: float
    total_cost: int


@dataclass(frozen=True)
class PathQuery:
    entries: Tuple[str, ...]
    target: TargetSelector
    k: Optional[int] = None  # None means unbounded
    max_len: int = 8

    def __post_init__(self):
        if not self.entries:
            raise TargetSelectorEmpty("query needs at least one entry node")
        if self.k is not None and self.k < 1:
            raise TargetSelectorEmpty("k must be >= 1")


def _adjacency(topology: NetworkTopology) -> Dict[str, Set[str]]:
    adj: Dict[str, Set[str]] = {n.id: set() for n in topology.nodes}
    for edge in topology.edges:
        if edge.src in adj and edge.dst in adj:
            adj[edge.src].add(edge.dst)
            if edge.bidirectional:
                adj[edge.dst].add(edge.src)
    return adj


def _lateral_capability(registry: CapabilityRegistry) -> Optional[AtomicCapability]:
    from .capabilities import PredicateKind
    candidates = [
        cap for cap in registry.by_kind(CapabilityKind.ATTACK)
        if any(p.kind == PredicateKind.CREDENTIAL_HELD for p in cap.preconditions)
    ]
    candidates.sort(key=lambda c: (c.cost_units, c.id))
    return candidates[0] if candidates else None


def _exploit_capability(registry: CapabilityRegistry) -> Optional[AtomicCapability]:
    candidates = [
        cap for cap in registry.by_kind(CapabilityKind.ATTACK)
        if cap.vuln_access_requirement() is not None
    ]
    candidates.sort(key=lambda c: (c.cost_units, c.id))
    return candidates[0] if candidates else None


def _entry_capability(registry: CapabilityRegistry) -> Optional[AtomicCapability]:
    candidates = [
        cap for cap in registry.by_kind(CapabilityKind.ATTACK)
        if cap.is_entry_capability() and cap.entry_classes()
    ]
    candidates.sort(key=lambda c: (c.cost_units, c.id))
    return candidates[0] if candidates else None


def hop_option(topology: NetworkTopology, registry: CapabilityRegistry,
               target: str) -> Optional[Tuple[str, float, int]]:
    """Best (capability_id, prob, cost) realizing a hop onto ``target``
    from an adjacent foothold, or None. Ties between exploit and lateral
    movement go to the higher step probability, then lower cost, then
    capability id."""
    options: List[Tuple[float, int, str]] = []
    exploit = _exploit_capability(registry)
    if exploit is not None:
        matches = matching_vulnerabilities(topology, target, exploit.vuln_access_requirement())
        if matches:
            best = max(matches, key=lambda v: (v.success_prob, v.id))
            options.append((best.success_prob, exploit.cost_units, exploit.id))
    lateral = _lateral_capability(registry)
    if lateral is not None:
        if any(target in cred.grants_access_to for cred in topology.credentials):
            options.append((lateral.base_success_prob, lateral.cost_units, lateral.id))
    if not options:
        return None
    options.sort(key=lambda o: (-o[0], o[1], o[2]))
    prob, cost, cap_id = options[0]
    return cap_id, prob, cost


def entry_option(topology: NetworkTopology, registry: CapabilityRegistry,
                 entry: str) -> Optional[AttackStep]:
    cap = _entry_capability(registry)
    if cap is None:
        return None
    node = topology.node_by_id(entry)
    if node is None or node.node_class not in cap.entry_classes():
        return None
    return AttackStep(
        source=EXTERNAL, capability_id=cap.id, target=entry,
        step_prob=cap.base_success_prob, step_cost=cap.cost_units,
    )


def _resolve_targets(topology: NetworkTopology, selector: TargetSelector) -> Set[str]:
    matched = {n.id for n in topology.nodes if selector.matches(n)}
    if not matched:
        raise TargetSelectorEmpty("target selector matches no node")
    return matched


def enumerate_attack_paths(topology: NetworkTopology, registry: CapabilityRegistry,
                           query: PathQuery) -> List[AttackPath]:
    """All simple attack paths from the query entries to the target
    selector, sorted by success probability descending (ties: shorter
    path first, then lexicographic target-id sequence), truncated to k.
    """
    node_ids = {n.id for n in topology.nodes}
    for entry in query.entries:
        if entry not in node_ids:
            raise UnknownEntryNode(f"no node {entry!r} in topology")
    targets = _resolve_targets(topology, query.target)
    adjacency = _adjacency(topology)

    found: List[AttackPath] = []

    def record(steps: List[AttackStep]) -> None:
        prob = math.prod(s.step_prob for s in steps)
        cost = sum(s.step_cost for s in steps)
        found.append(AttackPath(steps=tuple(steps), success_prob=prob, total_cost=cost))

    def dfs(node: str, steps: List[AttackStep], visited: Set[str]) -> None:
        if steps and node in targets:
            record(steps)
        if len(steps) >= query.max_len:
            return
        for nbr in sorted(adjacency[node]):
            if nbr in visited:
                continue
            option = hop_option(topology, registry, nbr)
            if option is None:
                continue
            cap_id, prob, cost = option
            step = AttackStep(source=node, capability_id=cap_id, target=nbr,
                              step_prob=prob, step_cost=cost)
            dfs(nbr, steps + [step], visited | {nbr})

    for entry in sorted(query.entries):
        first = entry_option(topology, registry, entry)
        if first is not None:
            dfs(entry, [first], {entry})
        else:
            dfs(entry, [], {entry})

    found.sort(key=lambda p: (
        -p.success_prob,
        len(p.steps),
        tuple(s.target for s in p.steps),
    ))
    if query.k is not None:
        return found[:query.k]
    return found


def score_path(steps: Iterable[AttackStep], registry: CapabilityRegistry) -> Tuple[float, int]:
    """Recompute (success_prob, total_cost) for a step sequence."""
    steps = tuple(steps)
    if not steps:
        raise NonContiguousPath("a path needs at least one step")
    for prev, cur in zip(steps, steps[1:]):
        if cur.source != prev.target:
            raise NonContiguousPath(
                f"step source {cur.source!r} does not follow target {prev.target!r}"
            )
    return math.prod(s.step_prob for s in steps), sum(s.step_cost for s in steps)


def reachable_set(topology: NetworkTopology, registry: CapabilityRegistry,
                  entries: Iterable[str]) -> Set[str]:
    """All nodes reachable by realizable attack hops from the entries,
    including the entries themselves."""
    node_ids = {n.id for n in topology.nodes}
    entries = set(entries)
    for entry in entries:
        if entry not in node_ids:
            raise UnknownEntryNode(f"no node {entry!r} in topology")
    adjacency = _adjacency(topology)
    reached = set(entries)
    frontier = list(entries)
    while frontier:
        node = frontier.pop()
        for nbr in adjacency[node]:
            if nbr in reached:
                continue
            if hop_option(topology, registry, nbr) is not None:
                reached.add(nbr)
                frontier.append(nbr)
    return reached


def _path_entry_node(path: AttackPath) -> str:
    first = path.steps[0]
    return first.target if first.source == EXTERNAL else first.source


def _path_nodes(path: AttackPath) -> Set[str]:
    nodes = set()
    for step in path.steps:
        if step.source != EXTERNAL:
            nodes.add(step.source)
        nodes.add(step.target)
    return nodes


def suggest_defense_placements(topology: NetworkTopology, paths: List[AttackPath],
                               budget: int) -> List[Tuple[str, DefenseKind]]:
    """Greedy hitting set over the given paths: repeatedly place a
    shocktrap on the non-entry node covering the most not-yet-hit paths
    (ties: lexicographic node id), until the budget runs out or every
    path is hit."""
    remaining = list(range(len(paths)))
    candidates = [
        (_path_nodes(p) - {_path_entry_node(p)}) for p in paths
    ]
    placements: List[Tuple[str, DefenseKind]] = []
    while budget > 0 and remaining:
        counts: Dict[str, int] = {}
        for idx in remaining:
            for node in candidates[idx]:
                counts[node] = counts.get(node, 0) + 1
        if not counts:
            break
        # resolve ties lexicographically
        best_count = max(counts.values())
        best_node = min(node for node, c in counts.items() if c == best_count)
        placements.append((best_node, DefenseKind.SHOCKTRAP))
        remaining = [idx for idx in remaining if best_node not in candidates[idx]]
        budget -= 1
    return placements
