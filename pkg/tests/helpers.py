"""Shared builders and independent oracles for the test suite.

The oracles here deliberately re-derive expected results from first
principles (explicit enumeration, hand-coded hop rules) rather than
calling back into the library, so they can catch algorithmic mistakes.
"""

from __future__ import annotations

import math
import random
from dataclasses import replace
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Set, Tuple

from spidersim import (
    AccessRequirement,
    Actor,
    Credential,
    Edge,
    NetworkTopology,
    Node,
    NodeClass,
    Objective,
    ObjectiveKind,
    Privilege,
    ScenarioSpec,
    TargetSelector,
    Vulnerability,
    built_in_registry,
)
from spidersim.capabilities import CapabilityRegistry
from spidersim.model import DomainContext, Elements, ScenarioParameters, SubProblem

EXTERNAL = "EXTERNAL"
PHISHABLE = {NodeClass.WORKSTATION, NodeClass.MAINTENANCE_ENDPOINT}


@lru_cache(maxsize=1)
def builtin_reg() -> CapabilityRegistry:
    return built_in_registry()


@lru_cache(maxsize=1)
def sure_entry_reg() -> CapabilityRegistry:
    """The built-in set with a certain (p=1.0) phishing entry.

    Lets path-score examples be computed from vulnerability probabilities
    alone.
    """
    registry = CapabilityRegistry()
    for cap in builtin_reg().capabilities():
        if cap.id == "phishing":
            cap = replace(cap, base_success_prob=1.0)
        registry = CapabilityRegistry(_caps=registry._caps + (cap,))
    return registry


def make_vuln(node_id: str, prob: float, *, access=AccessRequirement.ADJACENT,
              privilege=Privilege.USER, detection=0.2) -> Vulnerability:
    return Vulnerability(
        id=f"vuln-{node_id}",
        technique_tag="T1190",
        access_requirement=access,
        success_prob=prob,
        detection_prob=detection,
        gained_privilege=privilege,
    )


def make_topology(nodes: Sequence[Tuple[str, NodeClass]],
                  edges: Sequence[Tuple[str, str]],
                  vulns: Sequence[Vulnerability] = (),
                  creds: Sequence[Credential] = (),
                  values: Optional[Dict[str, int]] = None) -> NetworkTopology:
    values = values or {}
    vuln_on: Dict[str, Tuple[str, ...]] = {}
    for v in vulns:
        owner = v.id.removeprefix("vuln-")
        vuln_on[owner] = vuln_on.get(owner, ()) + (v.id,)
    cred_on: Dict[str, Tuple[str, ...]] = {}
    for c in creds:
        cred_on[c.stored_on] = cred_on.get(c.stored_on, ()) + (c.id,)
    return NetworkTopology(
        nodes=tuple(
            Node(id=nid, node_class=cls, zone="z0",
                 vulnerability_ids=vuln_on.get(nid, ()),
                 credential_ids=cred_on.get(nid, ()),
                 asset_value=values.get(nid, 10))
            for nid, cls in nodes
        ),
        edges=tuple(Edge(src=a, dst=b) for a, b in edges),
        zones=("z0",),
        vulnerabilities=tuple(vulns),
        credentials=tuple(creds),
    )


def chain_topology() -> NetworkTopology:
    """ws-a -- srv-b -- srv-c with 0.5 vulns on b and c."""
    return make_topology(
        nodes=[("a", NodeClass.WORKSTATION), ("b", NodeClass.DATA_SERVER),
               ("c", NodeClass.CONTROLLER)],
        edges=[("a", "b"), ("b", "c")],
        vulns=[make_vuln("b", 0.5), make_vuln("c", 0.5)],
    )


def diamond_topology() -> NetworkTopology:
    """gateway entry g with two branches to controller t."""
    return make_topology(
        nodes=[("g", NodeClass.GATEWAY), ("m", NodeClass.DATA_SERVER),
               ("n", NodeClass.CAMERA_SERVER), ("t", NodeClass.CONTROLLER)],
        edges=[("g", "m"), ("g", "n"), ("m", "t"), ("n", "t")],
        vulns=[make_vuln("m", 0.9), make_vuln("n", 0.5), make_vuln("t", 0.9)],
    )


def random_topology(rng: random.Random, max_nodes: int = 8,
                    max_edges: int = 16) -> NetworkTopology:
    """A random small topology for oracle and property tests."""
    n = rng.randint(1, max_nodes)
    ids = [f"n{i}" for i in range(n)]
    classes = [rng.choice(list(NodeClass)) for _ in range(n)]
    pairs = [(ids[i], ids[j]) for i in range(n) for j in range(i + 1, n)]
    rng.shuffle(pairs)
    m = rng.randint(0, min(max_edges, len(pairs)))
    edges = tuple(Edge(src=a, dst=b) for a, b in sorted(pairs[:m]))

    vulns: List[Vulnerability] = []
    vuln_on: Dict[str, Tuple[str, ...]] = {}
    for nid in ids:
        if rng.random() < 0.6:
            v = make_vuln(
                nid,
                rng.choice([0.2, 0.35, 0.5, 0.65, 0.8, 0.95]),
                access=rng.choice(list(AccessRequirement)),
                privilege=rng.choice([Privilege.USER, Privilege.ADMIN]),
            )
            vulns.append(v)
            vuln_on[nid] = (v.id,)

    creds: List[Credential] = []
    cred_on: Dict[str, Tuple[str, ...]] = {}
    if n >= 2:
        for nid in ids:
            if rng.random() < 0.25:
                target = rng.choice([o for o in ids if o != nid])
                c = Credential(id=f"cred-{nid}", stored_on=nid,
                               grants_access_to=(target,))
                creds.append(c)
                cred_on[nid] = (c.id,)

    nodes = tuple(
        Node(id=nid, node_class=cls, zone="z0",
             vulnerability_ids=vuln_on.get(nid, ()),
             credential_ids=cred_on.get(nid, ()),
             asset_value=rng.randint(0, 100))
        for nid, cls in zip(ids, classes)
    )
    return NetworkTopology(nodes=nodes, edges=edges, zones=("z0",),
                           vulnerabilities=tuple(vulns), credentials=tuple(creds))


def spec_around(topology: NetworkTopology,
                objectives: Optional[Tuple[Objective, ...]] = None) -> ScenarioSpec:
    """Wrap a topology into a minimal valid scenario."""
    if objectives is None:
        target_class = topology.nodes[0].node_class
        objectives = (
            Objective(Actor.ATTACKER, ObjectiveKind.COMPROMISE,
                      TargetSelector(node_class=target_class), 0.5),
            Objective(Actor.DEFENDER, ObjectiveKind.DETECT,
                      TargetSelector(node_class=target_class), 1.0),
        )
    present = tuple(dict.fromkeys(n.node_class for n in topology.nodes))
    return ScenarioSpec(
        schema_version="1",
        domain_context=DomainContext(domain_tag="test-domain",
                                     narrative="Synthetic test scenario."),
        problem_decomposition=(
            SubProblem(id="keep-safe", description="Keep assets safe.",
                       related_asset_classes=present[:1]),
        ),
        scenario_parameters=ScenarioParameters(explicit_topology=topology),
        objectives=objectives,
        elements=Elements(
            asset_classes=present,
            threat_actors=("intruder",),
            capability_refs=tuple(sorted(builtin_reg().ids())),
        ),
    )


# ---------------------------------------------------------------------------
# independent attack-path oracle
# ---------------------------------------------------------------------------

OracleStep = Tuple[str, str, str, float, int]  # source, cap, target, prob, cost


def _oracle_hop(topology: NetworkTopology, target: str
                ) -> Optional[Tuple[str, float, int]]:
    """Hand-coded hop rule for the built-in capability set."""
    options: List[Tuple[float, int, str]] = []
    exploitable = [
        v for v in topology.vulnerabilities
        if v.id in (topology.node_by_id(target).vulnerability_ids or ())
        and v.access_requirement in (AccessRequirement.NETWORK,
                                     AccessRequirement.ADJACENT)
    ]
    if exploitable:
        best = max(exploitable, key=lambda v: (v.success_prob, v.id))
        options.append((best.success_prob, 2, "exploit_vuln"))
    if any(target in c.grants_access_to for c in topology.credentials):
        options.append((0.9, 1, "lateral_move_with_cred"))
    if not options:
        return None
    options.sort(key=lambda o: (-o[0], o[1], o[2]))
    prob, cost, cap = options[0]
    return cap, prob, cost


def oracle_paths(topology: NetworkTopology, entries: Sequence[str],
                 target_ids: Set[str], max_len: int = 8,
                 entry_prob: float = 0.4) -> List[Tuple[OracleStep, ...]]:
    """Brute-force simple-path enumeration, sorted by the documented order."""
    adj: Dict[str, Set[str]] = {n.id: set() for n in topology.nodes}
    for e in topology.edges:
        adj[e.src].add(e.dst)
        if e.bidirectional:
            adj[e.dst].add(e.src)

    results: List[Tuple[OracleStep, ...]] = []

    def walk(node: str, steps: List[OracleStep], visited: Set[str]) -> None:
        if steps and node in target_ids:
            results.append(tuple(steps))
        if len(steps) >= max_len:
            return
        for nbr in adj[node]:
            if nbr in visited:
                continue
            option = _oracle_hop(topology, nbr)
            if option is None:
                continue
            cap, prob, cost = option
            walk(nbr, steps + [(node, cap, nbr, prob, cost)], visited | {nbr})

    for entry in entries:
        node = topology.node_by_id(entry)
        if node.node_class in PHISHABLE:
            first = (EXTERNAL, "phishing", entry, entry_prob, 1)
            walk(entry, [first], {entry})
        else:
            walk(entry, [], {entry})

    def key(steps: Tuple[OracleStep, ...]):
        prob = math.prod(s[3] for s in steps)
        return (-prob, len(steps), tuple(s[2] for s in steps))

    results.sort(key=key)
    return results


def path_to_oracle_steps(path) -> Tuple[OracleStep, ...]:
    return tuple(
        (s.source, s.capability_id, s.target, s.step_prob, s.step_cost)
        for s in path.steps
    )
