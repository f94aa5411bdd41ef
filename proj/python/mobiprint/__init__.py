"""Python face of the coupled navigation-printing control testbed."""

from _mobiprint import (
    DegenerateCalibrationError,
    InputParseError,
    InputValidationError,
    Scenario,
    analyze_gcode,
    calibrate_gains,
    compare_modes,
    load_scenario,
    run_episode,
    solve_qp,
)

__all__ = [
    "DegenerateCalibrationError",
    "InputParseError",
    "InputValidationError",
    "Scenario",
    "analyze_gcode",
    "calibrate_gains",
    "compare_modes",
    "load_scenario",
    "run_episode",
    "solve_qp",
]
