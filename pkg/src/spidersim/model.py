"""Scenario schema, parsing, validation, and topology expansion.

A scenario document is canonical JSON (schema_version "1") with five
sections: domain_context, problem_decomposition, scenario_parameters,
objectives, and elements. ``scenario_parameters`` holds either a topology
recipe or an explicit topology, never both. Unknown fields are hard
errors: scenario files are security test fixtures and silent typos are
dangerous.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .errors import (
    EmptyRecipe,
    InsufficientGateways,
    InvariantViolation,
    MalformedDocument,
    MissingSection,
    UnknownField,
)
from .rng import substream

SCHEMA_VERSION = "1"


class NodeClass(str, Enum):
    SENSOR = "sensor"
    CONTROLLER = "controller"
    GATEWAY = "gateway"
    CAMERA_SERVER = "camera_server"
    MAINTENANCE_ENDPOINT = "maintenance_endpoint"
    WORKSTATION = "workstation"
    DATA_SERVER = "data_server"


class Actor(str, Enum):
    ATTACKER = "attacker"
    DEFENDER = "defender"


class ObjectiveKind(str, Enum):
    COMPROMISE = "compromise"
    PROTECT = "protect"
    DETECT = "detect"


class AccessRequirement(str, Enum):
    NETWORK = "network"
    ADJACENT = "adjacent"
    LOCAL = "local"


class Privilege(str, Enum):
    USER = "user"
    ADMIN = "admin"


# Default service and asset value per node class, used by build_topology.
_CLASS_SERVICES: Dict[NodeClass, Tuple[str, int]] = {
    NodeClass.SENSOR: ("telemetry", 9000),
    NodeClass.CONTROLLER: ("modbus", 502),
    NodeClass.GATEWAY: ("routing", 443),
    NodeClass.CAMERA_SERVER: ("rtsp", 554),
    NodeClass.MAINTENANCE_ENDPOINT: ("ssh", 22),
    NodeClass.WORKSTATION: ("smb", 445),
    NodeClass.DATA_SERVER: ("db", 5432),
}

_CLASS_ASSET_VALUE: Dict[NodeClass, int] = {
    NodeClass.SENSOR: 20,
    NodeClass.CONTROLLER: 90,
    NodeClass.GATEWAY: 50,
    NodeClass.CAMERA_SERVER: 60,
    NodeClass.MAINTENANCE_ENDPOINT: 40,
    NodeClass.WORKSTATION: 30,
    NodeClass.DATA_SERVER: 80,
}


@dataclass(frozen=True)
class Service:
    name: str
    port: int


@dataclass(frozen=True)
class Node:
    id: str
    node_class: NodeClass
    zone: str
    services: Tuple[Service, ...] = ()
    vulnerability_ids: Tuple[str, ...] = ()
    credential_ids: Tuple[str, ...] = ()
    asset_value: int = 0


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    protocol_tag: str = "tcp"
    bidirectional: bool = True


@dataclass(frozen=True)
class Vulnerability:
    id: str
    technique_tag: str
    access_requirement: AccessRequirement
    success_prob: float
    detection_prob: float
    gained_privilege: Privilege


@dataclass(frozen=True)
class Credential:
    id: str
    stored_on: str
    grants_access_to: Tuple[str, ...]


@dataclass(frozen=True)
class NetworkTopology:
    nodes: Tuple[Node, ...]
    edges: Tuple[Edge, ...]
    zones: Tuple[str, ...]
    # The spec types for vulnerabilities and credentials live alongside the
    # node list so predicates can resolve them without a second lookup table.
    vulnerabilities: Tuple[Vulnerability, ...] = ()
    credentials: Tuple[Credential, ...] = ()

    def node_by_id(self, node_id: str) -> Optional[Node]:
        for node in self.nodes:
            if node.id == node_id:
                return node
        return None

    def vulnerability_by_id(self, vuln_id: str) -> Optional[Vulnerability]:
        for vuln in self.vulnerabilities:
            if vuln.id == vuln_id:
                return vuln
        return None

    def credential_by_id(self, cred_id: str) -> Optional[Credential]:
        for cred in self.credentials:
            if cred.id == cred_id:
                return cred
        return None


@dataclass(frozen=True)
class TargetSelector:
    """Either a concrete node id or a whole node class."""

    node_id: Optional[str] = None
    node_class: Optional[NodeClass] = None

    def __post_init__(self):
        if (self.node_id is None) == (self.node_class is None):
            raise InvariantViolation(
                "target", "exactly one of node_id / node_class must be set"
            )

    def matches(self, node: Node) -> bool:
        if self.node_id is not None:
            return node.id == self.node_id
        return node.node_class == self.node_class


@dataclass(frozen=True)
class Objective:
    actor: Actor
    kind: ObjectiveKind
    target: TargetSelector
    threshold: float

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise InvariantViolation("objective.threshold", "must be in [0,1]")


@dataclass(frozen=True)
class TopologyRecipe:
    node_counts: Tuple[Tuple[NodeClass, int], ...]
    zone_count: int
    intra_zone_density: float
    inter_zone_gateways: int
    vuln_rate: float
    credential_rate: float

    def __post_init__(self):
        if self.zone_count < 1:
            raise InvariantViolation("recipe.zone_count", "must be >= 1")
        if self.inter_zone_gateways < 0:
            raise InvariantViolation("recipe.inter_zone_gateways", "must be >= 0")
        for name, value in (
            ("intra_zone_density", self.intra_zone_density),
            ("vuln_rate", self.vuln_rate),
            ("credential_rate", self.credential_rate),
        ):
            if not 0.0 <= value <= 1.0:
                raise InvariantViolation(f"recipe.{name}", "must be in [0,1]")
        for cls, count in self.node_counts:
            if count < 0:
                raise InvariantViolation(
                    f"recipe.node_counts[{cls.value}]", "must be >= 0"
                )

    def count(self, cls: NodeClass) -> int:
        for c, n in self.node_counts:
            if c == cls:
                return n
        return 0

    def total_nodes(self) -> int:
        return sum(n for _, n in self.node_counts)


@dataclass(frozen=True)
class SubProblem:
    id: str
    description: str
    related_asset_classes: Tuple[NodeClass, ...]


@dataclass(frozen=True)
class DomainContext:
    domain_tag: str
    narrative: str


@dataclass(frozen=True)
class ScenarioParameters:
    recipe: Optional[TopologyRecipe] = None
    explicit_topology: Optional[NetworkTopology] = None

    def __post_init__(self):
        if (self.recipe is None) == (self.explicit_topology is None):
            raise InvariantViolation(
                "scenario_parameters",
                "exactly one of recipe / explicit_topology must be set",
            )


@dataclass(frozen=True)
class Elements:
    asset_classes: Tuple[NodeClass, ...]
    threat_actors: Tuple[str, ...]
    capability_refs: Tuple[str, ...]


@dataclass(frozen=True)
class ScenarioSpec:
    schema_version: str
    domain_context: DomainContext
    problem_decomposition: Tuple[SubProblem, ...]
    scenario_parameters: ScenarioParameters
    objectives: Tuple[Objective, ...]
    elements: Elements

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise InvariantViolation("schema_version", f"must be {SCHEMA_VERSION!r}")
        if not self.objectives:
            raise InvariantViolation("objectives", "must be non-empty")
        seen = set()
        for sub in self.problem_decomposition:
            if sub.id in seen:
                raise InvariantViolation(
                    f"problem_decomposition[{sub.id}]", "duplicate subproblem id"
                )
            seen.add(sub.id)
        for ref in self.elements.capability_refs:
            _check_identifier(ref, "elements.capability_refs")


@dataclass(frozen=True)
class Finding:
    code: str
    message: str
    location: str


@dataclass(frozen=True)
class ValidationReport:
    """Validation outcome: empty ``errors`` means the spec is valid.

    Error codes: UnresolvedCapability, DuplicateNodeId, DanglingEdge,
    ObjectiveTargetUnknown, UnknownVulnerabilityRef, UnknownCredentialRef,
    BadCredentialHost, NoAttackPath (emitted by the generation pipeline).
    Warning codes: DisconnectedTopology.
    """

    errors: Tuple[Finding, ...] = ()
    warnings: Tuple[Finding, ...] = ()

    @property
    def valid(self) -> bool:
        return not self.errors


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------

def _check_identifier(value, path: str) -> str:
    if not isinstance(value, str) or not value or any(ch.isspace() for ch in value):
        raise InvariantViolation(path, "must be a non-empty identifier")
    return value


def _expect_dict(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise InvariantViolation(path, "must be an object")
    return value


def _expect_list(value, path: str) -> list:
    if not isinstance(value, list):
        raise InvariantViolation(path, "must be a list")
    return value


def _expect_text(value, path: str) -> str:
    if not isinstance(value, str):
        raise InvariantViolation(path, "must be a string")
    return value


def _expect_int(value, path: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise InvariantViolation(path, "must be an integer")
    return value


def _expect_fraction(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvariantViolation(path, "must be a number")
    value = float(value)
    if not 0.0 <= value <= 1.0 or math.isnan(value):
        raise InvariantViolation(path, "must be in [0,1]")
    return value


def _expect_bool(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise InvariantViolation(path, "must be a boolean")
    return value


def _reject_unknown(d: dict, allowed, path: str) -> None:
    for key in d:
        if key not in allowed:
            raise UnknownField(f"{path}.{key}" if path else key)


def _require(d: dict, key: str, path: str):
    if key not in d:
        if not path:
            raise MissingSection(key)
        raise InvariantViolation(f"{path}.{key}", "missing required field")
    return d[key]


def _parse_enum(enum_cls, value, path: str):
    try:
        return enum_cls(value)
    except (ValueError, TypeError):
        allowed = ", ".join(e.value for e in enum_cls)
        raise InvariantViolation(path, f"must be one of: {allowed}")


def _parse_selector(raw, path: str) -> TargetSelector:
    d = _expect_dict(raw, path)
    _reject_unknown(d, {"node_id", "node_class"}, path)
    if ("node_id" in d) == ("node_class" in d):
        raise InvariantViolation(path, "exactly one of node_id / node_class")
    if "node_id" in d:
        return TargetSelector(node_id=_check_identifier(d["node_id"], f"{path}.node_id"))
    return TargetSelector(node_class=_parse_enum(NodeClass, d["node_class"], f"{path}.node_class"))


def _parse_node(raw, path: str) -> Node:
    d = _expect_dict(raw, path)
    allowed = {"id", "class", "zone", "services", "vulnerability_ids",
               "credential_ids", "asset_value"}
    _reject_unknown(d, allowed, path)
    services = []
    for i, raw_svc in enumerate(_expect_list(d.get("services", []), f"{path}.services")):
        sd = _expect_dict(raw_svc, f"{path}.services[{i}]")
        _reject_unknown(sd, {"name", "port"}, f"{path}.services[{i}]")
        port = _expect_int(_require(sd, "port", f"{path}.services[{i}]"), f"{path}.services[{i}].port")
        if not 1 <= port <= 65535:
            raise InvariantViolation(f"{path}.services[{i}].port", "must be in 1..65535")
        services.append(Service(
            name=_check_identifier(_require(sd, "name", f"{path}.services[{i}]"), f"{path}.services[{i}].name"),
            port=port,
        ))
    asset_value = _expect_int(d.get("asset_value", 0), f"{path}.asset_value")
    if not 0 <= asset_value <= 100:
        raise InvariantViolation(f"{path}.asset_value", "must be in 0..100")
    return Node(
        id=_check_identifier(_require(d, "id", path), f"{path}.id"),
        node_class=_parse_enum(NodeClass, _require(d, "class", path), f"{path}.class"),
        zone=_check_identifier(_require(d, "zone", path), f"{path}.zone"),
        services=tuple(services),
        vulnerability_ids=tuple(
            _check_identifier(v, f"{path}.vulnerability_ids")
            for v in _expect_list(d.get("vulnerability_ids", []), f"{path}.vulnerability_ids")
        ),
        credential_ids=tuple(
            _check_identifier(c, f"{path}.credential_ids")
            for c in _expect_list(d.get("credential_ids", []), f"{path}.credential_ids")
        ),
        asset_value=asset_value,
    )


def _parse_topology(raw, path: str) -> NetworkTopology:
    d = _expect_dict(raw, path)
    _reject_unknown(d, {"nodes", "edges", "zones", "vulnerabilities", "credentials"}, path)
    nodes = tuple(
        _parse_node(n, f"{path}.nodes[{i}]")
        for i, n in enumerate(_expect_list(_require(d, "nodes", path), f"{path}.nodes"))
    )
    edges = []
    for i, raw_edge in enumerate(_expect_list(d.get("edges", []), f"{path}.edges")):
        ed = _expect_dict(raw_edge, f"{path}.edges[{i}]")
        _reject_unknown(ed, {"src", "dst", "protocol_tag", "bidirectional"}, f"{path}.edges[{i}]")
        src = _check_identifier(_require(ed, "src", f"{path}.edges[{i}]"), f"{path}.edges[{i}].src")
        dst = _check_identifier(_require(ed, "dst", f"{path}.edges[{i}]"), f"{path}.edges[{i}].dst")
        if src == dst:
            raise InvariantViolation(f"{path}.edges[{i}]", "self-loop edges are not allowed")
        edges.append(Edge(
            src=src,
            dst=dst,
            protocol_tag=_check_identifier(ed.get("protocol_tag", "tcp"), f"{path}.edges[{i}].protocol_tag"),
            bidirectional=_expect_bool(ed.get("bidirectional", True), f"{path}.edges[{i}].bidirectional"),
        ))
    vulns = []
    for i, raw_vuln in enumerate(_expect_list(d.get("vulnerabilities", []), f"{path}.vulnerabilities")):
        vp = f"{path}.vulnerabilities[{i}]"
        vd = _expect_dict(raw_vuln, vp)
        _reject_unknown(vd, {"id", "technique_tag", "access_requirement",
                             "success_prob", "detection_prob", "gained_privilege"}, vp)
        vulns.append(Vulnerability(
            id=_check_identifier(_require(vd, "id", vp), f"{vp}.id"),
            technique_tag=_check_identifier(_require(vd, "technique_tag", vp), f"{vp}.technique_tag"),
            access_requirement=_parse_enum(AccessRequirement, _require(vd, "access_requirement", vp), f"{vp}.access_requirement"),
            success_prob=_expect_fraction(_require(vd, "success_prob", vp), f"{vp}.success_prob"),
            detection_prob=_expect_fraction(_require(vd, "detection_prob", vp), f"{vp}.detection_prob"),
            gained_privilege=_parse_enum(Privilege, _require(vd, "gained_privilege", vp), f"{vp}.gained_privilege"),
        ))
    creds = []
    for i, raw_cred in enumerate(_expect_list(d.get("credentials", []), f"{path}.credentials")):
        cp = f"{path}.credentials[{i}]"
        cd = _expect_dict(raw_cred, cp)
        _reject_unknown(cd, {"id", "stored_on", "grants_access_to"}, cp)
        grants = tuple(
            _check_identifier(g, f"{cp}.grants_access_to")
            for g in _expect_list(_require(cd, "grants_access_to", cp), f"{cp}.grants_access_to")
        )
        if not grants:
            raise InvariantViolation(f"{cp}.grants_access_to", "must be non-empty")
        creds.append(Credential(
            id=_check_identifier(_require(cd, "id", cp), f"{cp}.id"),
            stored_on=_check_identifier(_require(cd, "stored_on", cp), f"{cp}.stored_on"),
            grants_access_to=grants,
        ))
    topo = NetworkTopology(
        nodes=nodes,
        edges=tuple(edges),
        zones=tuple(
            _check_identifier(z, f"{path}.zones")
            for z in _expect_list(_require(d, "zones", path), f"{path}.zones")
        ),
        vulnerabilities=tuple(vulns),
        credentials=tuple(creds),
    )
    return topo


def _parse_recipe(raw, path: str) -> TopologyRecipe:
    d = _expect_dict(raw, path)
    allowed = {"node_counts", "zone_count", "intra_zone_density",
               "inter_zone_gateways", "vuln_rate", "credential_rate"}
    _reject_unknown(d, allowed, path)
    counts_raw = _expect_dict(_require(d, "node_counts", path), f"{path}.node_counts")
    counts = []
    for key, value in counts_raw.items():
        cls = _parse_enum(NodeClass, key, f"{path}.node_counts")
        counts.append((cls, _expect_int(value, f"{path}.node_counts.{key}")))
    counts.sort(key=lambda pair: pair[0].value)
    return TopologyRecipe(
        node_counts=tuple(counts),
        zone_count=_expect_int(_require(d, "zone_count", path), f"{path}.zone_count"),
        intra_zone_density=_expect_fraction(_require(d, "intra_zone_density", path), f"{path}.intra_zone_density"),
        inter_zone_gateways=_expect_int(_require(d, "inter_zone_gateways", path), f"{path}.inter_zone_gateways"),
        vuln_rate=_expect_fraction(_require(d, "vuln_rate", path), f"{path}.vuln_rate"),
        credential_rate=_expect_fraction(_require(d, "credential_rate", path), f"{path}.credential_rate"),
    )


def parse_scenario(document: str) -> ScenarioSpec:
    """Parse a scenario document (canonical JSON, schema version "1").

    Unknown fields anywhere in the document are rejected with UnknownField.
    """
    try:
        raw = json.loads(document)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedDocument(f"not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise MalformedDocument("top level must be an object")
    sections = ("schema_version", "domain_context", "problem_decomposition",
                "scenario_parameters", "objectives", "elements")
    _reject_unknown(raw, set(sections), "")
    for section in sections:
        if section not in raw:
            raise MissingSection(section)

    version = _expect_text(raw["schema_version"], "schema_version")

    ctx_raw = _expect_dict(raw["domain_context"], "domain_context")
    _reject_unknown(ctx_raw, {"domain_tag", "narrative"}, "domain_context")
    context = DomainContext(
        domain_tag=_check_identifier(_require(ctx_raw, "domain_tag", "domain_context"), "domain_context.domain_tag"),
        narrative=_expect_text(_require(ctx_raw, "narrative", "domain_context"), "domain_context.narrative"),
    )

    subs = []
    for i, raw_sub in enumerate(_expect_list(raw["problem_decomposition"], "problem_decomposition")):
        sp = f"problem_decomposition[{i}]"
        sd = _expect_dict(raw_sub, sp)
        _reject_unknown(sd, {"id", "description", "related_asset_classes"}, sp)
        subs.append(SubProblem(
            id=_check_identifier(_require(sd, "id", sp), f"{sp}.id"),
            description=_expect_text(_require(sd, "description", sp), f"{sp}.description"),
            related_asset_classes=tuple(
                _parse_enum(NodeClass, c, f"{sp}.related_asset_classes")
                for c in _expect_list(_require(sd, "related_asset_classes", sp), f"{sp}.related_asset_classes")
            ),
        ))

    params_raw = _expect_dict(raw["scenario_parameters"], "scenario_parameters")
    _reject_unknown(params_raw, {"recipe", "explicit_topology"}, "scenario_parameters")
    if ("recipe" in params_raw) == ("explicit_topology" in params_raw):
        raise InvariantViolation(
            "scenario_parameters", "exactly one of recipe / explicit_topology"
        )
    if "recipe" in params_raw:
        params = ScenarioParameters(recipe=_parse_recipe(params_raw["recipe"], "scenario_parameters.recipe"))
    else:
        params = ScenarioParameters(
            explicit_topology=_parse_topology(params_raw["explicit_topology"], "scenario_parameters.explicit_topology")
        )

    objectives = []
    for i, raw_obj in enumerate(_expect_list(raw["objectives"], "objectives")):
        op = f"objectives[{i}]"
        od = _expect_dict(raw_obj, op)
        _reject_unknown(od, {"actor", "kind", "target", "threshold"}, op)
        objectives.append(Objective(
            actor=_parse_enum(Actor, _require(od, "actor", op), f"{op}.actor"),
            kind=_parse_enum(ObjectiveKind, _require(od, "kind", op), f"{op}.kind"),
            target=_parse_selector(_require(od, "target", op), f"{op}.target"),
            threshold=_expect_fraction(_require(od, "threshold", op), f"{op}.threshold"),
        ))
    if not objectives:
        raise InvariantViolation("objectives", "must be non-empty")

    el_raw = _expect_dict(raw["elements"], "elements")
    _reject_unknown(el_raw, {"asset_classes", "threat_actors", "capability_refs"}, "elements")
    elements = Elements(
        asset_classes=tuple(
            _parse_enum(NodeClass, c, "elements.asset_classes")
            for c in _expect_list(_require(el_raw, "asset_classes", "elements"), "elements.asset_classes")
        ),
        threat_actors=tuple(
            _check_identifier(a, "elements.threat_actors")
            for a in _expect_list(_require(el_raw, "threat_actors", "elements"), "elements.threat_actors")
        ),
        capability_refs=tuple(
            _check_identifier(r, "elements.capability_refs")
            for r in _expect_list(_require(el_raw, "capability_refs", "elements"), "elements.capability_refs")
        ),
    )

    return ScenarioSpec(
        schema_version=version,
        domain_context=context,
        problem_decomposition=tuple(subs),
        scenario_parameters=params,
        objectives=tuple(objectives),
        elements=elements,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _selector_to_dict(sel: TargetSelector) -> dict:
    if sel.node_id is not None:
        return {"node_id": sel.node_id}
    return {"node_class": sel.node_class.value}


def topology_to_dict(topo: NetworkTopology) -> dict:
    return {
        "nodes": [
            {
                "id": n.id,
                "class": n.node_class.value,
                "zone": n.zone,
                "services": [{"name": s.name, "port": s.port} for s in n.services],
                "vulnerability_ids": list(n.vulnerability_ids),
                "credential_ids": list(n.credential_ids),
                "asset_value": n.asset_value,
            }
            for n in topo.nodes
        ],
        "edges": [
            {"src": e.src, "dst": e.dst, "protocol_tag": e.protocol_tag,
             "bidirectional": e.bidirectional}
            for e in topo.edges
        ],
        "zones": list(topo.zones),
        "vulnerabilities": [
            {
                "id": v.id,
                "technique_tag": v.technique_tag,
                "access_requirement": v.access_requirement.value,
                "success_prob": v.success_prob,
                "detection_prob": v.detection_prob,
                "gained_privilege": v.gained_privilege.value,
            }
            for v in topo.vulnerabilities
        ],
        "credentials": [
            {"id": c.id, "stored_on": c.stored_on,
             "grants_access_to": list(c.grants_access_to)}
            for c in topo.credentials
        ],
    }


def _recipe_to_dict(recipe: TopologyRecipe) -> dict:
    return {
        "node_counts": {cls.value: n for cls, n in recipe.node_counts},
        "zone_count": recipe.zone_count,
        "intra_zone_density": recipe.intra_zone_density,
        "inter_zone_gateways": recipe.inter_zone_gateways,
        "vuln_rate": recipe.vuln_rate,
        "credential_rate": recipe.credential_rate,
    }


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    if spec.scenario_parameters.recipe is not None:
        params = {"recipe": _recipe_to_dict(spec.scenario_parameters.recipe)}
    else:
        params = {"explicit_topology": topology_to_dict(spec.scenario_parameters.explicit_topology)}
    return {
        "schema_version": spec.schema_version,
        "domain_context": {
            "domain_tag": spec.domain_context.domain_tag,
            "narrative": spec.domain_context.narrative,
        },
        "problem_decomposition": [
            {
                "id": s.id,
                "description": s.description,
                "related_asset_classes": [c.value for c in s.related_asset_classes],
            }
            for s in spec.problem_decomposition
        ],
        "scenario_parameters": params,
        "objectives": [
            {
                "actor": o.actor.value,
                "kind": o.kind.value,
                "target": _selector_to_dict(o.target),
                "threshold": o.threshold,
            }
            for o in spec.objectives
        ],
        "elements": {
            "asset_classes": [c.value for c in spec.elements.asset_classes],
            "threat_actors": list(spec.elements.threat_actors),
            "capability_refs": list(spec.elements.capability_refs),
        },
    }


def serialize_scenario(spec: ScenarioSpec) -> str:
    """Canonical text form: fixed key order, lists in input order, 2-space
    indentation, trailing newline. parse(serialize(s)) == s."""
    return json.dumps(scenario_to_dict(spec), indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def check_topology(topo: NetworkTopology):
    """Yield Finding objects for every structural problem in a topology."""
    node_ids = set()
    for node in topo.nodes:
        if node.id in node_ids:
            yield Finding("DuplicateNodeId", f"duplicate node id {node.id!r}", f"nodes.{node.id}")
        node_ids.add(node.id)
    zone_ids = set()
    for zone in topo.zones:
        if zone in zone_ids:
            yield Finding("DuplicateZoneId", f"duplicate zone id {zone!r}", f"zones.{zone}")
        zone_ids.add(zone)
    for node in topo.nodes:
        if node.zone not in zone_ids:
            yield Finding("UnknownZone", f"node {node.id!r} in undeclared zone {node.zone!r}", f"nodes.{node.id}")
    seen_edges = set()
    for edge in topo.edges:
        loc = f"edges.{edge.src}->{edge.dst}"
        if edge.src not in node_ids or edge.dst not in node_ids:
            yield Finding("DanglingEdge", f"edge {edge.src!r}->{edge.dst!r} references a missing node", loc)
        key = (edge.src, edge.dst, edge.protocol_tag)
        if key in seen_edges:
            yield Finding("DuplicateEdge", f"duplicate edge {key!r}", loc)
        seen_edges.add(key)
    vuln_ids = {v.id for v in topo.vulnerabilities}
    cred_ids = {c.id for c in topo.credentials}
    for node in topo.nodes:
        for vid in node.vulnerability_ids:
            if vid not in vuln_ids:
                yield Finding("UnknownVulnerabilityRef", f"node {node.id!r} references missing vulnerability {vid!r}", f"nodes.{node.id}")
        for cid in node.credential_ids:
            if cid not in cred_ids:
                yield Finding("UnknownCredentialRef", f"node {node.id!r} references missing credential {cid!r}", f"nodes.{node.id}")
    for cred in topo.credentials:
        if cred.stored_on not in node_ids:
            yield Finding("BadCredentialHost", f"credential {cred.id!r} stored on missing node {cred.stored_on!r}", f"credentials.{cred.id}")
        for target in cred.grants_access_to:
            if target not in node_ids:
                yield Finding("BadCredentialHost", f"credential {cred.id!r} grants access to missing node {target!r}", f"credentials.{cred.id}")


def assert_topology_valid(topo: NetworkTopology) -> None:
    """Raise InvariantViolation on the first structural problem found."""
    for finding in check_topology(topo):
        raise InvariantViolation(finding.location, finding.message)


def _is_connected(topo: NetworkTopology) -> bool:
    if len(topo.nodes) <= 1:
        return True
    adjacency: Dict[str, set] = {n.id: set() for n in topo.nodes}
    for edge in topo.edges:
        if edge.src in adjacency and edge.dst in adjacency:
            adjacency[edge.src].add(edge.dst)
            adjacency[edge.dst].add(edge.src)
    start = topo.nodes[0].id
    seen = {start}
    stack = [start]
    while stack:
        for nbr in adjacency[stack.pop()]:
            if nbr not in seen:
                seen.add(nbr)
                stack.append(nbr)
    return len(seen) == len(topo.nodes)


def _recipe_node_ids(recipe: TopologyRecipe):
    for cls in NodeClass:
        for i in range(recipe.count(cls)):
            yield f"{cls.value}-{i}", cls


def validate_spec(spec: ScenarioSpec, registry) -> ValidationReport:
    """Cross-check a spec against a capability registry.

    All findings are carried in the returned report; this never raises.
    """
    errors: List[Finding] = []
    warnings: List[Finding] = []

    known_ids = {cap.id for cap in registry.capabilities()}
    for ref in spec.elements.capability_refs:
        if ref not in known_ids:
            errors.append(Finding("UnresolvedCapability", f"capability {ref!r} not in registry", "elements.capability_refs"))

    topo = spec.scenario_parameters.explicit_topology
    recipe = spec.scenario_parameters.recipe
    if topo is not None:
        errors.extend(check_topology(topo))
        if not _is_connected(topo):
            warnings.append(Finding("DisconnectedTopology", "topology is not weakly connected", "scenario_parameters.explicit_topology"))
        node_ids = {n.id for n in topo.nodes}
        classes = {n.node_class for n in topo.nodes}
    else:
        node_ids = {nid for nid, _ in _recipe_node_ids(recipe)}
        classes = {cls for cls, n in recipe.node_counts if n > 0}

    for i, obj in enumerate(spec.objectives):
        loc = f"objectives[{i}]"
        if obj.target.node_id is not None and obj.target.node_id not in node_ids:
            errors.append(Finding("ObjectiveTargetUnknown", f"no node {obj.target.node_id!r}", loc))
        if obj.target.node_class is not None and obj.target.node_class not in classes:
            errors.append(Finding("ObjectiveTargetUnknown", f"no node of class {obj.target.node_class.value!r}", loc))

    return ValidationReport(errors=tuple(errors), warnings=tuple(warnings))


# ---------------------------------------------------------------------------
# topology expansion
# ---------------------------------------------------------------------------

def build_topology(recipe: TopologyRecipe, registry, seed: int) -> NetworkTopology:
    """Deterministically expand a recipe into a concrete topology.

    Expansion order (each stage draws from its own named substream of
    ``seed``, so later stages never perturb earlier ones):

    1. Nodes: for each class in NodeClass declaration order, ``count``
       nodes named ``<class>-<i>``; node k in creation order joins zone
       ``zone-(k mod zone_count)``.
    2. Intra-zone edges ("edges" substream): candidate unordered pairs in
       lexicographic (u, v) order, one uniform draw each; the edge exists
       iff draw < intra_zone_density.
    3. Inter-zone links (no draws): for zone pair number p (lexicographic)
       and link number t, gateway ``gateways[(p * inter_zone_gateways + t)
       mod len(gateways)]`` connects to node ``t mod len(peers)`` of the
       zone on the other side (both sides when the gateway sits in a third
       zone).
    4. Vulnerabilities ("vulns" substream): per non-gateway node in id
       order, draws: gate (< vuln_rate), technique-tag index, success
       probability (0.4 + 0.5*u, 2 decimals), privilege (admin iff u < 0.3).
    5. Credentials ("credentials" substream): per node in id order, draws:
       gate (< credential_rate), grant-target index over the other nodes.
    """
    if recipe.total_nodes() < 1:
        raise EmptyRecipe("recipe places no nodes")
    if (recipe.zone_count > 1 and recipe.inter_zone_gateways > 0
            and recipe.count(NodeClass.GATEWAY) == 0):
        raise InsufficientGateways(
            "inter-zone links requested but the recipe places no gateways"
        )

    zones = tuple(f"zone-{i}" for i in range(recipe.zone_count))
    placements: List[Tuple[str, NodeClass, str]] = []
    for k, (node_id, cls) in enumerate(_recipe_node_ids(recipe)):
        placements.append((node_id, cls, zones[k % recipe.zone_count]))

    zone_of = {nid: zone for nid, _, zone in placements}
    class_of = {nid: cls for nid, cls, _ in placements}
    all_ids = sorted(zone_of)

    edges: List[Edge] = []
    edge_keys = set()

    def add_edge(src: str, dst: str, protocol: str = "tcp") -> None:
        if (src, dst, protocol) in edge_keys or (dst, src, protocol) in edge_keys:
            return
        edge_keys.add((src, dst, protocol))
        edges.append(Edge(src=src, dst=dst, protocol_tag=protocol, bidirectional=True))

    edge_rng = substream(seed, "edges")
    for i, u in enumerate(all_ids):
        for v in all_ids[i + 1:]:
            if zone_of[u] != zone_of[v]:
                continue
            if edge_rng.random() < recipe.intra_zone_density:
                add_edge(u, v)

    gateways = sorted(nid for nid in all_ids if class_of[nid] == NodeClass.GATEWAY)
    if recipe.zone_count > 1 and recipe.inter_zone_gateways > 0 and gateways:
        pair_index = 0
        for i, za in enumerate(zones):
            for zb in zones[i + 1:]:
                for t in range(recipe.inter_zone_gateways):
                    g = gateways[(pair_index * recipe.inter_zone_gateways + t) % len(gateways)]
                    sides = []
                    if zone_of[g] != za:
                        sides.append(za)
                    if zone_of[g] != zb:
                        sides.append(zb)
                    for side in sides:
                        peers = sorted(nid for nid in all_ids if zone_of[nid] == side and nid != g)
                        if peers:
                            add_edge(g, peers[t % len(peers)])
                pair_index += 1

    tags = sorted({cap.technique_tag for cap in registry.capabilities()
                   if cap.kind.value == "attack"}) or ["T0000"]
    vulnerabilities: List[Vulnerability] = []
    vuln_on: Dict[str, Tuple[str, ...]] = {}
    vuln_rng = substream(seed, "vulns")
    for nid in all_ids:
        if class_of[nid] == NodeClass.GATEWAY:
            continue
        if vuln_rng.random() < recipe.vuln_rate:
            tag = tags[min(int(vuln_rng.random() * len(tags)), len(tags) - 1)]
            success = round(0.4 + 0.5 * vuln_rng.random(), 2)
            privilege = Privilege.ADMIN if vuln_rng.random() < 0.3 else Privilege.USER
            vuln = Vulnerability(
                id=f"vuln-{nid}",
                technique_tag=tag,
                access_requirement=AccessRequirement.ADJACENT,
                success_prob=success,
                detection_prob=0.2,
                gained_privilege=privilege,
            )
            vulnerabilities.append(vuln)
            vuln_on[nid] = (vuln.id,)

    credentials: List[Credential] = []
    cred_on: Dict[str, Tuple[str, ...]] = {}
    cred_rng = substream(seed, "credentials")
    for nid in all_ids:
        if cred_rng.random() < recipe.credential_rate:
            others = [o for o in all_ids if o != nid]
            if not others:
                continue
            target = others[min(int(cred_rng.random() * len(others)), len(others) - 1)]
            cred = Credential(id=f"cred-{nid}", stored_on=nid, grants_access_to=(target,))
            credentials.append(cred)
            cred_on[nid] = (cred.id,)

    nodes = tuple(
        Node(
            id=nid,
            node_class=cls,
            zone=zone,
            services=(Service(*_CLASS_SERVICES[cls]),),
            vulnerability_ids=vuln_on.get(nid, ()),
            credential_ids=cred_on.get(nid, ()),
            asset_value=_CLASS_ASSET_VALUE[cls],
        )
        for nid, cls, zone in placements
    )
    return NetworkTopology(
        nodes=nodes,
        edges=tuple(edges),
        zones=zones,
        vulnerabilities=tuple(vulnerabilities),
        credentials=tuple(credentials),
    )
