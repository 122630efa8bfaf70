"""Scenario configs, orchestration, artifacts, plots and the command line."""
from complab.harness.compare import ComparisonTable, compare_controllers, run_suite
from complab.harness.config import (
    CompareConfig,
    CompensatorSpec,
    ConfigError,
    ControllerSpec,
    DesignSpec,
    ScenarioConfig,
    TargetSpec,
    load_compare,
    load_json,
    load_scenario,
    preset_names,
)
from complab.harness.plot import PlotStyle, Series, emit_plot, render_svg
from complab.harness.run import (
    TRAJ_COLUMNS,
    RunArtifact,
    ScenarioRunner,
    design,
    load_artifact,
    read_trajectory_csv,
    run_scenario,
    write_trajectory_csv,
)

__all__ = [
    "CompareConfig",
    "ComparisonTable",
    "CompensatorSpec",
    "ConfigError",
    "ControllerSpec",
    "DesignSpec",
    "PlotStyle",
    "RunArtifact",
    "ScenarioConfig",
    "ScenarioRunner",
    "Series",
    "TRAJ_COLUMNS",
    "TargetSpec",
    "compare_controllers",
    "design",
    "emit_plot",
    "load_artifact",
    "load_compare",
    "load_json",
    "load_scenario",
    "preset_names",
    "read_trajectory_csv",
    "render_svg",
    "run_scenario",
    "run_suite",
    "write_trajectory_csv",
]
