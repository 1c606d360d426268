"""Scenario definition, serialization and the built-in structures."""

from tensekit.scenarios.builders import BUILTIN_NAMES, builtin
from tensekit.scenarios.drives import ActuationProfile, SeismicDrive
from tensekit.scenarios.io import (
    load_scenario_file,
    parse_scenario,
    serialize_scenario,
)
from tensekit.scenarios.model import (
    CompiledScenario,
    Scenario,
    ScenarioError,
    compile_scenario,
)

__all__ = [
    "BUILTIN_NAMES",
    "builtin",
    "ActuationProfile",
    "SeismicDrive",
    "Scenario",
    "ScenarioError",
    "CompiledScenario",
    "compile_scenario",
    "parse_scenario",
    "serialize_scenario",
    "load_scenario_file",
]
