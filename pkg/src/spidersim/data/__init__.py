"""Bundled example fixtures: the marine-ranch monitoring scenario."""

from importlib import resources
from pathlib import Path


def _fixture_path(name: str) -> Path:
    return Path(resources.files(__package__) / name)


def marine_ranch_scenario_path() -> Path:
    return _fixture_path("marine_ranch.scenario.json")


def marine_ranch_requirement_path() -> Path:
    return _fixture_path("marine_ranch.requirement.json")


def marine_ranch_scenario_text() -> str:
    return marine_ranch_scenario_path().read_text(encoding="utf-8")


def marine_ranch_requirement_text() -> str:
    return marine_ranch_requirement_path().read_text(encoding="utf-8")
