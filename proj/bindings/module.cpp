#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mobiprint/episode.hpp"
#include "mobiprint/gcode.hpp"
#include "mobiprint/qp.hpp"
#include "mobiprint/report.hpp"
#include "mobiprint/scenario.hpp"

namespace py = pybind11;
using namespace mobiprint;

namespace {

py::dict summary_dict(const sim::EpisodeResult& r) {
    py::dict d;
    d["mode"] = std::string(coupling::to_string(r.mode));
    d["seed"] = r.seed;
    d["nominal_dimensions_mm"] = r.nominal_dimensions;
    d["final_dimensions_mm"] = r.final_dimensions;
    d["deviations_mm"] = r.deviations;
    d["completion_time"] = r.completion_time;
    d["print_duration"] = r.print_duration;
    d["timed_out"] = r.timed_out;
    d["min_obstacle_clearance"] = r.min_obstacle_clearance;
    d["disturbance_integral"] = r.disturbance_integral;
    d["signed_integral"] = r.signed_integral;
    d["pause_count"] = r.pause_count;
    d["paused_duration"] = r.paused_duration;
    d["fallback_count"] = r.fallback_count;
    d["predicted_speed_violations"] = r.predicted_speed_violations;
    d["halfspace_violations"] = r.halfspace_violations;
    d["episode_hash"] = sim::episode_hash(r);

    Eigen::MatrixXd traj(static_cast<Eigen::Index>(r.trajectory.size()), 7);
    for (Eigen::Index i = 0; i < traj.rows(); ++i) {
        const sim::TrajectoryRow& row = r.trajectory[static_cast<std::size_t>(i)];
        traj.row(i) << row.t, row.x, row.y, row.heading, row.v, row.omega, row.a_z;
    }
    d["trajectory"] = traj;
    return d;
}

}  // namespace

PYBIND11_MODULE(_mobiprint, m) {
    m.doc() = "Coupled navigation-printing control testbed";

    py::register_exception<ParseError>(m, "InputParseError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "InputValidationError", PyExc_ValueError);
    py::register_exception<DegenerateCalibration>(m, "DegenerateCalibrationError",
                                                  PyExc_RuntimeError);

    py::class_<Scenario>(m, "Scenario")
        .def_readwrite("seed", &Scenario::seed)
        .def_readwrite("gcode_path", &Scenario::gcode_path)
        .def_property(
            "mode", [](const Scenario& sc) { return std::string(coupling::to_string(sc.mode)); },
            [](Scenario& sc, const std::string& mode) {
                if (mode == "continuous") {
                    sc.mode = coupling::PrintMotionMode::Continuous;
                } else if (mode == "pause_resume") {
                    sc.mode = coupling::PrintMotionMode::PauseResume;
                } else {
                    throw ValidationError("mode must be 'continuous' or 'pause_resume'");
                }
            })
        .def_property(
            "gains",
            [](const Scenario& sc) {
                return py::make_tuple(sc.gains.g_x, sc.gains.g_y, sc.gains.g_z);
            },
            [](Scenario& sc, std::tuple<double, double, double> g) {
                sc.gains.g_x = std::get<0>(g);
                sc.gains.g_y = std::get<1>(g);
                sc.gains.g_z = std::get<2>(g);
            })
        .def("validate", &Scenario::validate);

    m.def(
        "load_scenario",
        [](const std::string& path, const std::vector<std::string>& overrides) {
            return load_scenario(path, overrides);
        },
        py::arg("path"), py::arg("overrides") = std::vector<std::string>{});

    m.def(
        "run_episode", [](const Scenario& sc) { return summary_dict(sim::run_episode(sc)); },
        py::arg("scenario"));

    m.def(
        "compare_modes",
        [](const Scenario& sc, int repeats) {
            const report::RunReport rep = report::compare_modes(sc, repeats);
            py::dict d;
            d["design_target_mm"] = rep.nominal;
            d["case_a_avg_mm"] = rep.mean_dims_a;
            d["case_b_avg_mm"] = rep.mean_dims_b;
            d["deviation_a_mm"] = rep.mean_dev_a;
            d["deviation_b_mm"] = rep.mean_dev_b;
            d["improvement_pct"] = rep.improvement_pct;
            d["table"] = report::report_table(rep);
            return d;
        },
        py::arg("scenario"), py::arg("repeats") = 1);

    m.def(
        "calibrate_gains",
        [](const std::vector<std::tuple<double, double, double>>& measurements,
           const Scenario& sc) {
            std::vector<sim::Measurement> rows;
            rows.reserve(measurements.size());
            for (std::size_t i = 0; i < measurements.size(); ++i) {
                sim::Measurement m2;
                m2.sample = "S" + std::to_string(i + 1);
                m2.x_mm = std::get<0>(measurements[i]);
                m2.y_mm = std::get<1>(measurements[i]);
                m2.z_mm = std::get<2>(measurements[i]);
                rows.push_back(m2);
            }
            const sim::CalibrationResult cal = sim::calibrate_gains(rows, sc);
            py::dict d;
            d["gains"] = py::make_tuple(cal.gains.g_x, cal.gains.g_y, cal.gains.g_z);
            d["mean_deviations_mm"] = cal.mean_deviations;
            d["disturbance_integral"] = cal.disturbance_integral;
            d["signed_integral"] = cal.signed_integral;
            d["source_episode"] = cal.episode_hash;
            return d;
        },
        py::arg("measurements"), py::arg("scenario"));

    m.def(
        "analyze_gcode",
        [](const std::string& text, int critical_layers) {
            const gcode::GcodeProgram p = gcode::analyze(text, critical_layers);
            py::dict d;
            d["layer_count"] = p.layer_count;
            d["segment_count"] = p.segments.size();
            d["total_duration"] = p.total_duration();
            d["nominal_dimensions_mm"] = p.nominal_dimensions_mm();
            py::list intervals;
            for (const gcode::CriticalInterval& c : p.criticals)
                intervals.append(py::make_tuple(c.t_start, c.t_end));
            d["critical_intervals"] = intervals;
            return d;
        },
        py::arg("text"), py::arg("critical_layers") = 3);

    m.def(
        "solve_qp",
        [](const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::MatrixXd& A,
           const Eigen::VectorXd& l, const Eigen::VectorXd& u) {
            qp::QpProblem problem{H, g, A, l, u};
            const qp::QpSolution sol = qp::solve_qp(problem);
            py::dict d;
            d["x"] = sol.x;
            d["status"] = std::string(qp::to_string(sol.status));
            d["objective"] = sol.objective;
            d["iterations"] = sol.iterations;
            return d;
        },
        py::arg("H"), py::arg("g"), py::arg("A"), py::arg("l"), py::arg("u"));
}
