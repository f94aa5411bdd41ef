#pragma once

// Small, fast scenario fixtures for closed-loop tests: a ~30 s print of
// a 10 mm square column and a 2.8 m straight drive, optionally crossing
// one floor bump mid-print.

#include <filesystem>
#include <fstream>
#include <string>

namespace fixtures {

inline std::string mini_gcode(int layers = 15) {
    std::string g = "G90\nG28\nG92 E0\n";
    double e = 0.0;
    char buf[96];
    for (int layer = 1; layer <= layers; ++layer) {
        std::snprintf(buf, sizeof buf, "G0 Z%.2f F6000\n", layer * 0.2);
        g += buf;
        g += "G0 X0 Y0\n";
        const double side = 10.0;
        const double xs[4] = {side, side, 0.0, 0.0};
        const double ys[4] = {0.0, side, side, 0.0};
        for (int i = 0; i < 4; ++i) {
            e += side * 0.05;
            // Feed is modal; restate it after each rapid z hop.
            std::snprintf(buf, sizeof buf, "G1 X%.2f Y%.2f E%.4f%s\n", xs[i], ys[i], e,
                          i == 0 ? " F1200" : "");
            g += buf;
        }
    }
    return g;
}

inline std::string mini_scenario_yaml(const std::string& gcode_name, bool with_bump) {
    std::string y =
        "schema_version: 1\n"
        "map:\n"
        "  bounds: [0.0, 0.0, 4.0, 2.0]\n"
        "  obstacles:\n"
        "    - [[1.4, 1.6], [2.6, 1.6], [2.6, 1.9], [1.4, 1.9]]\n";
    if (with_bump) {
        y +=
            "  bumps:\n"
            "    - {center: [1.8, 1.0], half_length: 0.05, width: 0.6, height: 0.01}\n";
    }
    y +=
        "start:\n"
        "  position: [0.4, 1.0]\n"
        "  heading: 0.0\n"
        "reference_path:\n"
        "  - [0.4, 1.0]\n"
        "  - [3.2, 1.0]\n"
        "gcode: " +
        gcode_name +
        "\n"
        "mode: continuous\n"
        "seed: 11\n";
    return y;
}

/// Creates <dir>/mini.yaml + <dir>/mini.gcode under a fresh temp dir and
/// returns the yaml path. Caller may remove_all the parent when done.
inline std::filesystem::path write_mini_scenario(const std::string& tag, bool with_bump) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / ("mobiprint_test_" + tag);
    fs::create_directories(dir);
    std::ofstream(dir / "mini.gcode") << mini_gcode();
    std::ofstream(dir / "mini.yaml") << mini_scenario_yaml("mini.gcode", with_bump);
    return dir / "mini.yaml";
}

}  // namespace fixtures
