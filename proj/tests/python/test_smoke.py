import os
import textwrap

import numpy as np
import pytest

import mobiprint


def mini_gcode(layers=3):
    lines = ["G90", "G28", "G92 E0"]
    e = 0.0
    for layer in range(1, layers + 1):
        lines.append(f"G0 Z{layer * 0.2:.2f} F6000")
        lines.append("G0 X0 Y0")
        for x, y in [(10, 0), (10, 10), (0, 10), (0, 0)]:
            e += 0.5
            feed = " F1200" if (x, y) == (10, 0) else ""
            lines.append(f"G1 X{x} Y{y} E{e:.4f}{feed}")
    return "\n".join(lines) + "\n"


def write_scenario(tmp_path, seed=5):
    (tmp_path / "part.gcode").write_text(mini_gcode(8))
    yaml = textwrap.dedent(
        f"""\
        schema_version: 1
        map:
          bounds: [0.0, 0.0, 4.0, 2.0]
        start:
          position: [0.4, 1.0]
        reference_path:
          - [0.4, 1.0]
          - [2.4, 1.0]
        gcode: part.gcode
        mode: continuous
        seed: {seed}
        """
    )
    path = tmp_path / "scenario.yaml"
    path.write_text(yaml)
    return path


def test_solve_qp_box_clip():
    result = mobiprint.solve_qp(
        H=np.array([[2.0]]),
        g=np.array([-8.0]),
        A=np.array([[1.0]]),
        l=np.array([0.0]),
        u=np.array([3.0]),
    )
    assert result["status"] == "solved"
    assert result["x"][0] == pytest.approx(3.0, abs=1e-5)
    assert result["objective"] == pytest.approx(-15.0, abs=1e-4)


def test_analyze_gcode():
    info = mobiprint.analyze_gcode(mini_gcode(3), critical_layers=3)
    assert info["layer_count"] == 3
    assert info["segment_count"] == 1
    # Three layers and windows of three merge into one interval.
    assert len(info["critical_intervals"]) == 1
    assert info["total_duration"] == pytest.approx(3 * (0.2 / 100 + 40 / 20), rel=1e-9)
    assert info["nominal_dimensions_mm"] == pytest.approx([10.0, 10.0, 0.6])


def test_load_bundled_scenario():
    scenario_dir = os.environ["MOBIPRINT_SCENARIO_DIR"]
    sc = mobiprint.load_scenario(os.path.join(scenario_dir, "paper_case.yaml"))
    sc.validate()
    assert sc.mode == "continuous"
    assert sc.seed == 7
    sc.mode = "pause_resume"
    assert sc.mode == "pause_resume"
    with pytest.raises(ValueError):
        sc.mode = "warp"


def test_load_errors():
    with pytest.raises(mobiprint.InputValidationError):
        mobiprint.load_scenario("/nonexistent/scenario.yaml")


def test_run_episode_and_overrides(tmp_path):
    path = write_scenario(tmp_path)
    sc = mobiprint.load_scenario(str(path))
    result = mobiprint.run_episode(sc)
    assert not result["timed_out"]
    assert result["pause_count"] == 0
    assert result["completion_time"] > 10.0
    traj = result["trajectory"]
    assert traj.shape[1] == 7
    assert traj[-1, 1] == pytest.approx(2.4, abs=0.06)
    assert len(result["episode_hash"]) == 16

    again = mobiprint.run_episode(sc)
    assert again["episode_hash"] == result["episode_hash"]

    starved = mobiprint.load_scenario(str(path), overrides=["sim.t_max=2.0"])
    assert mobiprint.run_episode(starved)["timed_out"]


def test_calibration_validation(tmp_path):
    sc = mobiprint.load_scenario(str(write_scenario(tmp_path)))
    with pytest.raises(mobiprint.InputValidationError):
        mobiprint.calibrate_gains([], sc)
    # No bumps on the floor leaves the fit degenerate.
    with pytest.raises(mobiprint.DegenerateCalibrationError):
        mobiprint.calibrate_gains([(10.2, 10.1, 1.62)], sc)
