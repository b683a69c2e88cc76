"""Atomic attack/defense capabilities and the registry that houses them.

A capability is the standardized unit of behavior: preconditions over the
simulation state, effects applied on success, a success probability, a
detection probability, and a cost. Third-party capability definitions use
interface version "cap-1" and the same closed predicate/effect vocabulary
as the built-ins.

Randomness contract for ``apply_capability`` (needed for seeded
reproducibility): exactly two uniform draws on the main path (success,
then detection), plus one draw per defense override present on the target
(honeypot first, then shocktrap), regardless of whether the draw changes
the outcome.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple

from .errors import (
    DuplicateId,
    DuplicatePlacement,
    KindEffectMismatch,
    KindMismatch,
    PreconditionViolated,
    UnboundSlot,
    UnknownCapability,
    UnknownNode,
    UnsupportedInterfaceVersion,
)
from .model import AccessRequirement, NetworkTopology, NodeClass, Privilege
from .state import DefenseKind, SimulationState

INTERFACE_VERSION = "cap-1"

HONEYPOT_ALARM_PROB = 0.9
SHOCKTRAP_TRAP_ROUNDS = 2

# Node classes attackable from outside the topology (phishing surface).
ENTRY_CLASSES = (NodeClass.WORKSTATION, NodeClass.MAINTENANCE_ENDPOINT)


class CapabilityKind(str, Enum):
    ATTACK = "attack"
    DEFENSE = "defense"


class PredicateKind(str, Enum):
    ACTOR_HAS_FOOTHOLD = "actor_has_foothold"
    EDGE_EXISTS = "edge_exists"
    NODE_HAS_VULN_WITH_ACCESS = "node_has_vuln_with_access"
    CREDENTIAL_HELD = "credential_held"
    DEFENSE_ABSENT = "defense_absent"
    DEFENSE_PRESENT = "defense_present"
    NODE_CLASS_IS = "node_class_is"
    NODE_NOT_COMPROMISED = "node_not_compromised"
    NODE_ASSET_VALUE_AT_LEAST = "node_asset_value_at_least"


class EffectKind(str, Enum):
    COMPROMISE = "compromise"
    GAIN_CREDENTIALS = "gain_credentials"
    DEPLOY = "deploy"
    RAISE_ALARM = "raise_alarm"
    TRAP_ACTOR = "trap_actor"
    NULLIFY_CREDENTIAL_THEFT = "nullify_credential_theft"
    REVEAL_VULNERABILITIES = "reveal_vulnerabilities"


@dataclass(frozen=True)
class Predicate:
    kind: PredicateKind
    slot: str = "target"
    src_slot: Optional[str] = None  # edge_exists only: the source side
    access: Optional[AccessRequirement] = None
    defense: Optional[DefenseKind] = None
    node_classes: Optional[Tuple[NodeClass, ...]] = None
    min_privilege: Privilege = Privilege.USER
    min_asset_value: int = 0


@dataclass(frozen=True)
class Effect:
    kind: EffectKind
    slot: str = "target"
    privilege: Optional[Privilege] = None
    defense: Optional[DefenseKind] = None
    duration_rounds: int = 1


@dataclass(frozen=True)
class AtomicCapability:
    id: str
    kind: CapabilityKind
    name: str
    technique_tag: str
    preconditions: Tuple[Predicate, ...]
    effects: Tuple[Effect, ...]
    base_success_prob: float
    detection_prob: float
    cost_units: int
    interface_version: str = INTERFACE_VERSION

    def slots(self) -> Tuple[str, ...]:
        """Parameter slots the capability binds, "target" always included."""
        names = {"target"}
        for pred in self.preconditions:
            names.add(pred.slot)
            if pred.src_slot is not None:
                names.add(pred.src_slot)
        for eff in self.effects:
            names.add(eff.slot)
        return tuple(sorted(names))

    def is_entry_capability(self) -> bool:
        """Launchable from outside: no foothold required, grants one."""
        needs_foothold = any(
            p.kind == PredicateKind.ACTOR_HAS_FOOTHOLD for p in self.preconditions
        )
        compromises = any(e.kind == EffectKind.COMPROMISE for e in self.effects)
        return self.kind == CapabilityKind.ATTACK and compromises and not needs_foothold

    def vuln_access_requirement(self) -> Optional[AccessRequirement]:
        for pred in self.preconditions:
            if pred.kind == PredicateKind.NODE_HAS_VULN_WITH_ACCESS:
                return pred.access
        return None

    def entry_classes(self) -> Tuple[NodeClass, ...]:
        for pred in self.preconditions:
            if pred.kind == PredicateKind.NODE_CLASS_IS and pred.node_classes:
                return pred.node_classes
        return ()


@dataclass(frozen=True)
class CapabilityOutcome:
    success: bool
    detected: bool
    trapped_for: int
    applied_effects: Tuple[Effect, ...]


@dataclass(frozen=True)
class Placement:
    capability_id: str
    target_node: str


@dataclass(frozen=True)
class DefenseStrategy:
    capability_placements: Tuple[Placement, ...] = ()


@dataclass(frozen=True)
class PreconditionResult:
    holds: bool
    first_failed: Optional[Predicate] = None


@dataclass(frozen=True)
class CapabilityRegistry:
    _caps: Tuple[AtomicCapability, ...] = ()

    def capabilities(self) -> Tuple[AtomicCapability, ...]:
        return self._caps

    def ids(self) -> Tuple[str, ...]:
        return tuple(cap.id for cap in self._caps)

    def get(self, cap_id: str) -> AtomicCapability:
        for cap in self._caps:
            if cap.id == cap_id:
                return cap
        raise UnknownCapability(f"no capability with id {cap_id!r}")

    def has(self, cap_id: str) -> bool:
        return any(cap.id == cap_id for cap in self._caps)

    def by_kind(self, kind: CapabilityKind) -> Tuple[AtomicCapability, ...]:
        return tuple(cap for cap in self._caps if cap.kind == kind)


def _check_capability(cap: AtomicCapability) -> None:
    if cap.interface_version != INTERFACE_VERSION:
        raise UnsupportedInterfaceVersion(
            f"capability {cap.id!r} declares {cap.interface_version!r}, "
            f"expected {INTERFACE_VERSION!r}"
        )
    if not 0.0 <= cap.base_success_prob <= 1.0 or not 0.0 <= cap.detection_prob <= 1.0:
        raise KindEffectMismatch(f"capability {cap.id!r}: probabilities must be in [0,1]")
    if cap.cost_units < 0:
        raise KindEffectMismatch(f"capability {cap.id!r}: cost must be >= 0")
    for pred in cap.preconditions:
        if not isinstance(pred.kind, PredicateKind):
            from .errors import UnknownPredicate
            raise UnknownPredicate(f"capability {cap.id!r}: {pred.kind!r}")
        if pred.kind == PredicateKind.EDGE_EXISTS and pred.src_slot is None:
            from .errors import UnknownPredicate
            raise UnknownPredicate(f"capability {cap.id!r}: edge_exists needs src_slot")
    for eff in cap.effects:
        if not isinstance(eff.kind, EffectKind):
            from .errors import UnknownEffect
            raise UnknownEffect(f"capability {cap.id!r}: {eff.kind!r}")
        if eff.kind == EffectKind.TRAP_ACTOR and eff.duration_rounds < 1:
            raise KindEffectMismatch(f"capability {cap.id!r}: trap duration must be >= 1")
        if cap.kind == CapabilityKind.ATTACK and eff.kind == EffectKind.DEPLOY:
            raise KindEffectMismatch(f"attack capability {cap.id!r} must not deploy defenses")
        if cap.kind == CapabilityKind.DEFENSE and eff.kind == EffectKind.COMPROMISE:
            raise KindEffectMismatch(f"defense capability {cap.id!r} must not compromise nodes")


def register_capability(registry: CapabilityRegistry, cap: AtomicCapability) -> CapabilityRegistry:
    """Return a new registry containing ``cap``; the input is unmodified."""
    if registry.has(cap.id):
        raise DuplicateId(f"capability id {cap.id!r} already registered")
    _check_capability(cap)
    return CapabilityRegistry(_caps=registry._caps + (cap,))


# ---------------------------------------------------------------------------
# built-in capability set
# ---------------------------------------------------------------------------

def built_in_registry() -> CapabilityRegistry:
    registry = CapabilityRegistry()
    for cap in _BUILT_INS:
        registry = register_capability(registry, cap)
    return registry


def _access_satisfied(vuln_access: AccessRequirement, level: AccessRequirement) -> bool:
    # A vuln requiring less access than the attacker has is exploitable:
    # network-exposed vulns are exploitable from adjacency, and everything
    # is exploitable locally.
    order = {
        AccessRequirement.NETWORK: 0,
        AccessRequirement.ADJACENT: 1,
        AccessRequirement.LOCAL: 2,
    }
    return order[vuln_access] <= order[level]


_BUILT_INS = (
    # defenses
    AtomicCapability(
        id="honeypot", kind=CapabilityKind.DEFENSE, name="Honeypot decoy",
        technique_tag="D3-DE",
        preconditions=(Predicate(PredicateKind.DEFENSE_ABSENT, defense=DefenseKind.HONEYPOT),),
        effects=(Effect(EffectKind.DEPLOY, defense=DefenseKind.HONEYPOT),),
        base_success_prob=1.0, detection_prob=0.0, cost_units=2,
    ),
    AtomicCapability(
        id="shocktrap", kind=CapabilityKind.DEFENSE, name="Shocktrap",
        technique_tag="D3-TRAP",
        preconditions=(Predicate(PredicateKind.DEFENSE_ABSENT, defense=DefenseKind.SHOCKTRAP),),
        effects=(Effect(EffectKind.DEPLOY, defense=DefenseKind.SHOCKTRAP),),
        base_success_prob=1.0, detection_prob=0.0, cost_units=2,
    ),
    AtomicCapability(
        id="vuln_scan", kind=CapabilityKind.DEFENSE, name="Vulnerability scan",
        technique_tag="D3-NVA",
        preconditions=(),
        effects=(Effect(EffectKind.REVEAL_VULNERABILITIES),),
        base_success_prob=1.0, detection_prob=0.0, cost_units=1,
    ),
    AtomicCapability(
        id="data_encryption", kind=CapabilityKind.DEFENSE, name="Data encryption",
        technique_tag="D3-ET",
        preconditions=(Predicate(PredicateKind.DEFENSE_ABSENT, defense=DefenseKind.ENCRYPTION),),
        effects=(Effect(EffectKind.NULLIFY_CREDENTIAL_THEFT),),
        base_success_prob=1.0, detection_prob=0.0, cost_units=2,
    ),
    AtomicCapability(
        id="patch", kind=CapabilityKind.DEFENSE, name="Patch",
        technique_tag="D3-SU",
        preconditions=(Predicate(PredicateKind.DEFENSE_ABSENT, defense=DefenseKind.PATCH),),
        effects=(Effect(EffectKind.DEPLOY, defense=DefenseKind.PATCH),),
        base_success_prob=1.0, detection_prob=0.0, cost_units=1,
    ),
    # attacks
    AtomicCapability(
        id="phishing", kind=CapabilityKind.ATTACK, name="Phishing",
        technique_tag="T1566",
        preconditions=(
            Predicate(PredicateKind.NODE_CLASS_IS, node_classes=ENTRY_CLASSES),
            Predicate(PredicateKind.NODE_NOT_COMPROMISED),
        ),
        effects=(Effect(EffectKind.COMPROMISE, privilege=Privilege.USER),),
        base_success_prob=0.4, detection_prob=0.3, cost_units=1,
    ),
    AtomicCapability(
        id="exploit_vuln", kind=CapabilityKind.ATTACK, name="Exploit vulnerability",
        technique_tag="T1190",
        preconditions=(
            Predicate(PredicateKind.ACTOR_HAS_FOOTHOLD, slot="source"),
            Predicate(PredicateKind.EDGE_EXISTS, slot="target", src_slot="source"),
            Predicate(PredicateKind.NODE_HAS_VULN_WITH_ACCESS, access=AccessRequirement.ADJACENT),
            Predicate(PredicateKind.NODE_NOT_COMPROMISED),
            Predicate(PredicateKind.DEFENSE_ABSENT, defense=DefenseKind.PATCH),
        ),
        effects=(Effect(EffectKind.COMPROMISE, privilege=Privilege.USER),),
        base_success_prob=0.5, detection_prob=0.3, cost_units=2,
    ),
    AtomicCapability(
        id="lateral_move_with_cred", kind=CapabilityKind.ATTACK, name="Lateral movement",
        technique_tag="T1021",
        preconditions=(
            Predicate(PredicateKind.ACTOR_HAS_FOOTHOLD, slot="source"),
            Predicate(PredicateKind.EDGE_EXISTS, slot="target", src_slot="source"),
            Predicate(PredicateKind.CREDENTIAL_HELD),
            Predicate(PredicateKind.NODE_NOT_COMPROMISED),
        ),
        effects=(Effect(EffectKind.COMPROMISE, privilege=Privilege.USER),),
        base_success_prob=0.9, detection_prob=0.2, cost_units=1,
    ),
    AtomicCapability(
        id="credential_theft", kind=CapabilityKind.ATTACK, name="Credential theft",
        technique_tag="T1555",
        preconditions=(
            Predicate(PredicateKind.ACTOR_HAS_FOOTHOLD, min_privilege=Privilege.ADMIN),
            Predicate(PredicateKind.DEFENSE_ABSENT, defense=DefenseKind.ENCRYPTION),
        ),
        effects=(Effect(EffectKind.GAIN_CREDENTIALS),),
        base_success_prob=0.8, detection_prob=0.2, cost_units=1,
    ),
    AtomicCapability(
        id="exfiltrate", kind=CapabilityKind.ATTACK, name="Exfiltration",
        technique_tag="T1041",
        preconditions=(
            Predicate(PredicateKind.ACTOR_HAS_FOOTHOLD),
            Predicate(PredicateKind.NODE_ASSET_VALUE_AT_LEAST, min_asset_value=1),
        ),
        effects=(),
        base_success_prob=0.7, detection_prob=0.4, cost_units=3,
    ),
)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _bound(binding: Dict[str, str], slot: str, cap_id: str) -> str:
    if slot not in binding:
        raise UnboundSlot(f"capability {cap_id!r}: slot {slot!r} not bound")
    return binding[slot]


def _edge_exists(topology: NetworkTopology, src: str, dst: str) -> bool:
    for edge in topology.edges:
        if edge.src == src and edge.dst == dst:
            return True
        if edge.bidirectional and edge.src == dst and edge.dst == src:
            return True
    return False


def matching_vulnerabilities(topology: NetworkTopology, node_id: str,
                             level: AccessRequirement):
    """Vulnerabilities on a node exploitable at the given access level,
    in lexicographic id order."""
    node = topology.node_by_id(node_id)
    if node is None:
        return []
    out = []
    for vid in sorted(node.vulnerability_ids):
        vuln = topology.vulnerability_by_id(vid)
        if vuln is not None and _access_satisfied(vuln.access_requirement, level):
            out.append(vuln)
    return out


def _eval_predicate(pred: Predicate, state: SimulationState,
                    binding: Dict[str, str], cap_id: str) -> bool:
    topo = state.topology
    node_id = _bound(binding, pred.slot, cap_id)
    if pred.kind == PredicateKind.ACTOR_HAS_FOOTHOLD:
        return node_id in state.footholds and state.has_privilege(node_id, pred.min_privilege)
    if pred.kind == PredicateKind.EDGE_EXISTS:
        src = _bound(binding, pred.src_slot, cap_id)
        return _edge_exists(topo, src, node_id)
    if pred.kind == PredicateKind.NODE_HAS_VULN_WITH_ACCESS:
        return bool(matching_vulnerabilities(topo, node_id, pred.access))
    if pred.kind == PredicateKind.CREDENTIAL_HELD:
        for cred_id in state.credentials_held:
            cred = topo.credential_by_id(cred_id)
            if cred is not None and node_id in cred.grants_access_to:
                return True
        return False
    if pred.kind == PredicateKind.DEFENSE_ABSENT:
        return pred.defense not in state.defenses_on(node_id)
    if pred.kind == PredicateKind.DEFENSE_PRESENT:
        return pred.defense in state.defenses_on(node_id)
    if pred.kind == PredicateKind.NODE_CLASS_IS:
        node = topo.node_by_id(node_id)
        return node is not None and node.node_class in (pred.node_classes or ())
    if pred.kind == PredicateKind.NODE_NOT_COMPROMISED:
        return state.privilege_on(node_id) is None
    if pred.kind == PredicateKind.NODE_ASSET_VALUE_AT_LEAST:
        node = topo.node_by_id(node_id)
        return node is not None and node.asset_value >= pred.min_asset_value
    raise AssertionError(f"unreachable predicate kind {pred.kind!r}")


def evaluate_preconditions(cap: AtomicCapability, state: SimulationState,
                           binding: Dict[str, str]) -> PreconditionResult:
    """Evaluate preconditions in declaration order; report the first failure."""
    for pred in cap.preconditions:
        if not _eval_predicate(pred, state, binding, cap.id):
            return PreconditionResult(holds=False, first_failed=pred)
    return PreconditionResult(holds=True)


def _apply_effect(state: SimulationState, eff: Effect, binding: Dict[str, str],
                  cap_id: str, privilege_override: Optional[Privilege]) -> SimulationState:
    node_id = _bound(binding, eff.slot, cap_id)
    if eff.kind == EffectKind.COMPROMISE:
        privilege = privilege_override or eff.privilege or Privilege.USER
        return state.with_compromise(node_id, privilege)
    if eff.kind == EffectKind.GAIN_CREDENTIALS:
        node = state.topology.node_by_id(node_id)
        if node is None:
            return state
        return state.with_credentials(node.credential_ids)
    if eff.kind == EffectKind.DEPLOY:
        return state.with_defense(node_id, eff.defense)
    if eff.kind == EffectKind.RAISE_ALARM:
        return state.with_alarm(node_id)
    if eff.kind == EffectKind.TRAP_ACTOR:
        return state.with_trap(eff.duration_rounds)
    if eff.kind == EffectKind.NULLIFY_CREDENTIAL_THEFT:
        return state.with_defense(node_id, DefenseKind.ENCRYPTION)
    if eff.kind == EffectKind.REVEAL_VULNERABILITIES:
        return state.with_defense(node_id, DefenseKind.SCANNER)
    raise AssertionError(f"unreachable effect kind {eff.kind!r}")


def effective_success_prob(cap: AtomicCapability, state: SimulationState,
                           binding: Dict[str, str]) -> float:
    """Vulnerability-backed capabilities take the vulnerability's own
    success probability (lexicographically first match); everything else
    uses the capability's base probability."""
    level = cap.vuln_access_requirement()
    if level is not None:
        target = _bound(binding, "target", cap.id)
        matches = matching_vulnerabilities(state.topology, target, level)
        if matches:
            return matches[0].success_prob
    return cap.base_success_prob


def _matched_privilege(cap: AtomicCapability, state: SimulationState,
                       binding: Dict[str, str]) -> Optional[Privilege]:
    level = cap.vuln_access_requirement()
    if level is None:
        return None
    target = _bound(binding, "target", cap.id)
    matches = matching_vulnerabilities(state.topology, target, level)
    return matches[0].gained_privilege if matches else None


def apply_capability(state: SimulationState, cap: AtomicCapability,
                     binding: Dict[str, str], rng) -> Tuple[SimulationState, CapabilityOutcome]:
    """Apply one capability; returns the new state and the outcome.

    Preconditions must already hold (caller-checked); a violation raises
    PreconditionViolated rather than counting as a failed roll. See the
    module docstring for the rng draw budget.
    """
    result = evaluate_preconditions(cap, state, binding)
    if not result.holds:
        raise PreconditionViolated(
            f"capability {cap.id!r}: {result.first_failed.kind.value} does not hold"
        )
    target = _bound(binding, "target", cap.id)

    success = rng.random() < effective_success_prob(cap, state, binding)
    detected = rng.random() < cap.detection_prob

    defenses = state.defenses_on(target)
    honeypot = cap.kind == CapabilityKind.ATTACK and DefenseKind.HONEYPOT in defenses
    shocktrap = cap.kind == CapabilityKind.ATTACK and DefenseKind.SHOCKTRAP in defenses

    applied: List[Effect] = []
    trapped_for = 0
    new_state = state

    if honeypot:
        # Deceptive success: the attacker sees success but gains nothing.
        alarm = rng.random() < HONEYPOT_ALARM_PROB
        success = True
        detected = detected or alarm
    if shocktrap:
        rng.random()  # fixed draw budget; the shocktrap alarm is certain
        detected = True
        trapped_for = SHOCKTRAP_TRAP_ROUNDS
        new_state = new_state.with_trap(SHOCKTRAP_TRAP_ROUNDS)
        applied.append(Effect(EffectKind.TRAP_ACTOR, duration_rounds=SHOCKTRAP_TRAP_ROUNDS))
        if not honeypot:
            success = False

    if success and not honeypot and not shocktrap:
        privilege_override = _matched_privilege(cap, new_state, binding)
        for eff in cap.effects:
            new_state = _apply_effect(new_state, eff, binding, cap.id, privilege_override)
            applied.append(eff)

    if cap.kind == CapabilityKind.ATTACK and detected:
        new_state = new_state.with_alarm(target)
        if not any(e.kind == EffectKind.RAISE_ALARM for e in applied):
            applied.append(Effect(EffectKind.RAISE_ALARM, slot="target"))

    return new_state, CapabilityOutcome(
        success=success,
        detected=detected,
        trapped_for=trapped_for,
        applied_effects=tuple(applied),
    )


def applicable_capabilities(registry: CapabilityRegistry, state: SimulationState,
                            actor: str, binding_domain: Iterable[str]
                            ) -> List[Tuple[AtomicCapability, Dict[str, str]]]:
    """Every (capability, binding) whose preconditions hold, in the
    engine-wide tie-break order: cost ascending, then capability id, then
    target id, then source id."""
    kind = CapabilityKind.ATTACK if actor == "attacker" else CapabilityKind.DEFENSE
    domain = sorted(set(binding_domain))
    out: List[Tuple[AtomicCapability, Dict[str, str]]] = []
    caps = sorted(registry.by_kind(kind), key=lambda c: (c.cost_units, c.id))
    for cap in caps:
        needs_source = "source" in cap.slots()
        for target in domain:
            if needs_source:
                for source in domain:
                    if source == target:
                        continue
                    binding = {"target": target, "source": source}
                    if evaluate_preconditions(cap, state, binding).holds:
                        out.append((cap, binding))
            else:
                binding = {"target": target}
                if evaluate_preconditions(cap, state, binding).holds:
                    out.append((cap, binding))
    out.sort(key=lambda item: (
        item[0].cost_units, item[0].id,
        item[1]["target"], item[1].get("source", ""),
    ))
    return out


def compose_strategy(registry: CapabilityRegistry,
                     placements: Iterable[Tuple[str, str]],
                     topology: Optional[NetworkTopology] = None) -> DefenseStrategy:
    """Build a defense strategy from (capability_id, node_id) placements."""
    seen = set()
    result: List[Placement] = []
    for cap_id, node_id in placements:
        if not registry.has(cap_id):
            raise UnknownCapability(f"no capability with id {cap_id!r}")
        cap = registry.get(cap_id)
        if cap.kind != CapabilityKind.DEFENSE:
            raise KindMismatch(f"capability {cap_id!r} is not a defense")
        if (cap_id, node_id) in seen:
            raise DuplicatePlacement(f"duplicate placement ({cap_id!r}, {node_id!r})")
        if topology is not None and topology.node_by_id(node_id) is None:
            raise UnknownNode(f"no node {node_id!r} in topology")
        seen.add((cap_id, node_id))
        result.append(Placement(capability_id=cap_id, target_node=node_id))
    return DefenseStrategy(capability_placements=tuple(result))
