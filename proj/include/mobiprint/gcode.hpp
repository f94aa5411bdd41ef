#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mobiprint/errors.hpp"

namespace mobiprint::gcode {

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool operator==(const Point3&) const = default;
};

inline double distance(const Point3& a, const Point3& b) {
    const double dx = b.x - a.x, dy = b.y - a.y, dz = b.z - a.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

enum class CommandKind {
    Move,           // G0 / G1
    SetTempNoWait,  // M104
    SetTempWait,    // M109
    Home,           // G28
    AbsoluteMode,   // G90
    RelativeMode,   // G91
    SetPosition,    // G92
    Other,          // preserved verbatim
};

/// One G-code line. Move parameters are millimeters (E: mm of filament,
/// F: mm/min); absent words stay nullopt.
struct GcodeCommand {
    CommandKind kind = CommandKind::Other;
    bool rapid = false;  // G0
    std::optional<double> x, y, z, e, f;
    std::optional<double> s;  // temperature word on M104/M109
    std::string raw;          // original text (comments stripped)
    int source_line = 1;
};

/// M0 / M1 / M600 — programmed pause markers travel through parsing as
/// Other and are recognized here for segmentation.
bool is_pause_marker(const GcodeCommand& cmd);

/// One command per non-empty, non-comment line; `;` comments stripped;
/// words case-insensitive. Throws ParseError (with line number) on
/// malformed numerals, unsupported arcs (G2/G3), or unknown move words.
std::vector<GcodeCommand> parse_gcode(const std::string& text);

/// Canonical text for a Move command; parse_gcode(serialize_move(m))
/// reproduces m field for field.
std::string serialize_move(const GcodeCommand& move);

/// A motion (or dwell) with its place on the wall-clock timeline.
struct TimedMove {
    double start_time = 0.0;  // s
    double duration = 0.0;    // s
    Point3 from, to;          // mm
    double extrude_delta = 0.0;  // mm of filament, > 0 when depositing
    int layer_index = 0;
    int source_line = 1;
    bool pause_before = false;  // a pause marker immediately precedes this move
};

struct TimelineOptions {
    double m109_dwell = 0.0;  // s contributed by each temperature wait
};

/// Threads machine state (position, feedrate, G90/G91, G92 origins)
/// through the command list. Throws StateError when a motion occurs
/// before any feedrate is known.
std::vector<TimedMove> build_timeline(const std::vector<GcodeCommand>& commands,
                                      const TimelineOptions& opts = {});

/// Assigns layer_index in place and returns the layer count. A new layer
/// opens at each extruding move whose z exceeds the previous extruding
/// move's z by at least layer_epsilon; travel-only z hops do not.
int segment_layers(std::vector<TimedMove>& timeline, double layer_epsilon = 0.05);

/// Maximal run of layers uninterrupted by a programmed pause marker.
struct PrintSegment {
    int segment_index = 0;
    int first_layer = 0;
    int last_layer = 0;
    double start_time = 0.0;
    double end_time = 0.0;
};

/// Requires layer indices assigned. A program with no extruding move
/// yields an empty list.
std::vector<PrintSegment> extract_print_segments(const std::vector<TimedMove>& timeline);

enum class CriticalReason { FirstLayers, LastLayers };

/// Wall-clock window during which printing is motion-sensitive.
struct CriticalInterval {
    double t_start = 0.0;
    double t_end = 0.0;
    CriticalReason reason = CriticalReason::FirstLayers;
    int segment_index = 0;
};

/// Per segment: the time span of its first n_layers layers and of its
/// last n_layers layers, merged into one interval when the segment has
/// <= 2*n_layers layers. Sorted by t_start.
std::vector<CriticalInterval> critical_intervals(const std::vector<PrintSegment>& segments,
                                                 const std::vector<TimedMove>& timeline,
                                                 int n_layers);

bool in_any_interval(double t, std::span<const CriticalInterval> intervals);

/// Parsed program plus every derived view the controllers consume.
struct GcodeProgram {
    std::vector<GcodeCommand> commands;
    std::vector<TimedMove> timeline;
    int layer_count = 0;
    std::vector<PrintSegment> segments;
    std::vector<CriticalInterval> criticals;

    double total_duration() const;
    /// True iff t lies within a depositing move, print-timeline seconds.
    bool extruding_at(double t) const;
    /// Part dimensions implied by the toolpath: bounding box of depositing
    /// moves in X/Y and their top surface height in Z, millimeters.
    std::array<double, 3> nominal_dimensions_mm() const;
};

GcodeProgram analyze(const std::string& text, int critical_layers,
                     const TimelineOptions& opts = {}, double layer_epsilon = 0.05);

GcodeProgram load_program(const std::string& path, int critical_layers,
                          const TimelineOptions& opts = {}, double layer_epsilon = 0.05);

}  // namespace mobiprint::gcode
