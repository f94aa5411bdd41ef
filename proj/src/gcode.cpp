#include "mobiprint/gcode.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace mobiprint::gcode {

namespace {

std::string strip_comment(const std::string& line) {
    const auto pos = line.find(';');
    std::string out = (pos == std::string::npos) ? line : line.substr(0, pos);
    const auto first = out.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = out.find_last_not_of(" \t\r\n");
    return out.substr(first, last - first + 1);
}

struct Word {
    char letter;
    double value;
    std::string text;
};

double parse_number(const std::string& text, int line_no) {
    if (text.empty()) throw ParseError("empty numeral", line_no);
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        throw ParseError("malformed numeral '" + text + "'", line_no);
    if (!std::isfinite(value))
        throw ParseError("non-finite numeral '" + text + "'", line_no);
    return value;
}

std::vector<Word> split_words(const std::string& line, int line_no) {
    std::vector<Word> words;
    std::istringstream in(line);
    std::string token;
    while (in >> token) {
        const char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(token[0])));
        if (letter < 'A' || letter > 'Z')
            throw ParseError("expected a word starting with a letter, got '" + token + "'", line_no);
        std::string numeral = token.substr(1);
        words.push_back({letter, numeral.empty() ? 0.0 : parse_number(numeral, line_no),
                         std::move(numeral)});
    }
    return words;
}

int integer_code(const Word& word, int line_no) {
    const double rounded = std::round(word.value);
    if (std::abs(word.value - rounded) > 1e-9)
        throw ParseError("non-integer command code '" + std::string(1, word.letter) + word.text + "'",
                         line_no);
    return static_cast<int>(rounded);
}

void assign_axis_word(GcodeCommand& cmd, const Word& word, int line_no,
                      bool allow_f, bool allow_s) {
    switch (word.letter) {
        case 'X': cmd.x = word.value; return;
        case 'Y': cmd.y = word.value; return;
        case 'Z': cmd.z = word.value; return;
        case 'E': cmd.e = word.value; return;
        case 'F':
            if (allow_f) { cmd.f = word.value; return; }
            break;
        case 'S':
            if (allow_s) { cmd.s = word.value; return; }
            break;
        default: break;
    }
    throw ParseError(std::string("unsupported word '") + word.letter + word.text + "'", line_no);
}

GcodeCommand parse_line(const std::string& stripped, int line_no) {
    GcodeCommand cmd;
    cmd.raw = stripped;
    cmd.source_line = line_no;

    const std::vector<Word> words = split_words(stripped, line_no);
    const Word& head = words.front();

    if (head.letter == 'G') {
        switch (integer_code(head, line_no)) {
            case 0:
            case 1:
                cmd.kind = CommandKind::Move;
                cmd.rapid = integer_code(head, line_no) == 0;
                for (std::size_t i = 1; i < words.size(); ++i)
                    assign_axis_word(cmd, words[i], line_no, /*allow_f=*/true, /*allow_s=*/false);
                return cmd;
            case 2:
            case 3:
                throw ParseError("arc moves (G2/G3) are not supported", line_no);
            case 28:
                cmd.kind = CommandKind::Home;
                for (std::size_t i = 1; i < words.size(); ++i)
                    assign_axis_word(cmd, words[i], line_no, false, false);
                return cmd;
            case 90:
                cmd.kind = CommandKind::AbsoluteMode;
                return cmd;
            case 91:
                cmd.kind = CommandKind::RelativeMode;
                return cmd;
            case 92:
                cmd.kind = CommandKind::SetPosition;
                for (std::size_t i = 1; i < words.size(); ++i)
                    assign_axis_word(cmd, words[i], line_no, false, false);
                return cmd;
            default:
                cmd.kind = CommandKind::Other;
                return cmd;
        }
    }
    if (head.letter == 'M') {
        switch (integer_code(head, line_no)) {
            case 104:
                cmd.kind = CommandKind::SetTempNoWait;
                for (std::size_t i = 1; i < words.size(); ++i)
                    assign_axis_word(cmd, words[i], line_no, false, /*allow_s=*/true);
                return cmd;
            case 109:
                cmd.kind = CommandKind::SetTempWait;
                for (std::size_t i = 1; i < words.size(); ++i)
                    assign_axis_word(cmd, words[i], line_no, false, /*allow_s=*/true);
                return cmd;
            default:
                cmd.kind = CommandKind::Other;
                return cmd;
        }
    }
    cmd.kind = CommandKind::Other;
    return cmd;
}

int pause_marker_code(const GcodeCommand& cmd) {
    if (cmd.kind != CommandKind::Other || cmd.raw.empty()) return -1;
    std::istringstream in(cmd.raw);
    std::string token;
    if (!(in >> token) || token.size() < 2) return -1;
    const char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(token[0])));
    if (letter != 'M') return -1;
    int code = -1;
    const auto [ptr, ec] = std::from_chars(token.data() + 1, token.data() + token.size(), code);
    if (ec != std::errc{} || ptr != token.data() + token.size()) return -1;
    return code;
}

std::string format_word(char letter, double value) {
    std::ostringstream out;
    out.precision(std::numeric_limits<double>::max_digits10);
    out << ' ' << letter << value;
    return out.str();
}

}  // namespace

bool is_pause_marker(const GcodeCommand& cmd) {
    const int code = pause_marker_code(cmd);
    return code == 0 || code == 1 || code == 600;
}

std::vector<GcodeCommand> parse_gcode(const std::string& text) {
    std::vector<GcodeCommand> commands;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = strip_comment(line);
        if (stripped.empty()) continue;
        commands.push_back(parse_line(stripped, line_no));
    }
    return commands;
}

std::string serialize_move(const GcodeCommand& move) {
    if (move.kind != CommandKind::Move)
        throw StateError("serialize_move expects a Move command");
    std::string out = move.rapid ? "G0" : "G1";
    if (move.x) out += format_word('X', *move.x);
    if (move.y) out += format_word('Y', *move.y);
    if (move.z) out += format_word('Z', *move.z);
    if (move.e) out += format_word('E', *move.e);
    if (move.f) out += format_word('F', *move.f);
    return out;
}

std::vector<TimedMove> build_timeline(const std::vector<GcodeCommand>& commands,
                                      const TimelineOptions& opts) {
    std::vector<TimedMove> timeline;
    Point3 pos;
    double e_pos = 0.0;
    bool absolute = true;
    std::optional<double> feed_mm_s;
    double clock = 0.0;
    bool pause_pending = false;

    auto emit = [&](const TimedMove& proto) {
        TimedMove move = proto;
        move.start_time = clock;
        move.pause_before = pause_pending;
        pause_pending = false;
        clock += move.duration;
        timeline.push_back(move);
    };

    for (const GcodeCommand& cmd : commands) {
        switch (cmd.kind) {
            case CommandKind::Move: {
                if (cmd.f) feed_mm_s = *cmd.f / 60.0;
                Point3 target = pos;
                if (absolute) {
                    if (cmd.x) target.x = *cmd.x;
                    if (cmd.y) target.y = *cmd.y;
                    if (cmd.z) target.z = *cmd.z;
                } else {
                    if (cmd.x) target.x += *cmd.x;
                    if (cmd.y) target.y += *cmd.y;
                    if (cmd.z) target.z += *cmd.z;
                }
                double e_target = e_pos;
                if (cmd.e) e_target = absolute ? *cmd.e : e_pos + *cmd.e;

                const double length = distance(pos, target);
                const bool has_motion = length > 0.0 || e_target != e_pos;
                if (!has_motion) {
                    pos = target;
                    e_pos = e_target;
                    break;  // pure feedrate set, no timeline entry
                }
                if (length > 0.0) {
                    if (!feed_mm_s || *feed_mm_s <= 0.0)
                        throw StateError("move on line " + std::to_string(cmd.source_line) +
                                         " before any positive feedrate is known");
                }
                TimedMove move;
                move.from = pos;
                move.to = target;
                move.duration = length > 0.0 ? length / *feed_mm_s : 0.0;
                move.extrude_delta = e_target - e_pos;
                move.source_line = cmd.source_line;
                emit(move);
                pos = target;
                e_pos = e_target;
                break;
            }
            case CommandKind::SetTempWait: {
                if (opts.m109_dwell > 0.0) {
                    TimedMove dwell;
                    dwell.from = pos;
                    dwell.to = pos;
                    dwell.duration = opts.m109_dwell;
                    dwell.source_line = cmd.source_line;
                    emit(dwell);
                }
                break;
            }
            case CommandKind::Home:
                pos = Point3{};
                break;
            case CommandKind::AbsoluteMode:
                absolute = true;
                break;
            case CommandKind::RelativeMode:
                absolute = false;
                break;
            case CommandKind::SetPosition: {
                const bool any = cmd.x || cmd.y || cmd.z || cmd.e;
                if (!any) {
                    pos = Point3{};
                    e_pos = 0.0;
                } else {
                    if (cmd.x) pos.x = *cmd.x;
                    if (cmd.y) pos.y = *cmd.y;
                    if (cmd.z) pos.z = *cmd.z;
                    if (cmd.e) e_pos = *cmd.e;
                }
                break;
            }
            case CommandKind::SetTempNoWait:
                break;
            case CommandKind::Other:
                if (is_pause_marker(cmd)) pause_pending = true;
                break;
        }
    }
    return timeline;
}

int segment_layers(std::vector<TimedMove>& timeline, double layer_epsilon) {
    int current = 0;
    std::optional<double> last_print_z;
    bool any_extrusion = false;
    for (TimedMove& move : timeline) {
        if (move.extrude_delta > 0.0) {
            any_extrusion = true;
            if (last_print_z && move.to.z >= *last_print_z + layer_epsilon) ++current;
            if (!last_print_z || move.to.z > *last_print_z) last_print_z = move.to.z;
        }
        move.layer_index = current;
    }
    if (timeline.empty()) return 0;
    return any_extrusion ? current + 1 : 1;
}

std::vector<PrintSegment> extract_print_segments(const std::vector<TimedMove>& timeline) {
    const bool any_extrusion = std::any_of(timeline.begin(), timeline.end(),
                                           [](const TimedMove& m) { return m.extrude_delta > 0.0; });
    if (!any_extrusion) return {};

    std::vector<PrintSegment> segments;
    PrintSegment current;
    bool open = false;
    bool run_extrudes = false;
    // Layer bounds come from depositing moves only: the travel hop toward a
    // resumed layer still carries the previous layer's index.
    auto note_extrusion = [&](const TimedMove& move) {
        if (move.extrude_delta <= 0.0) return;
        if (!run_extrudes) current.first_layer = move.layer_index;
        current.last_layer = move.layer_index;
        run_extrudes = true;
    };
    auto close = [&](const TimedMove& last) {
        if (!run_extrudes) return;  // a pause-delimited run of pure travel
        current.end_time = last.start_time + last.duration;
        current.segment_index = static_cast<int>(segments.size());
        segments.push_back(current);
    };
    const TimedMove* prev = nullptr;
    for (const TimedMove& move : timeline) {
        if (open && move.pause_before) {
            close(*prev);
            open = false;
        }
        if (!open) {
            current = PrintSegment{};
            current.start_time = move.start_time;
            open = true;
            run_extrudes = false;
        }
        note_extrusion(move);
        prev = &move;
    }
    if (open) close(*prev);
    return segments;
}

std::vector<CriticalInterval> critical_intervals(const std::vector<PrintSegment>& segments,
                                                 const std::vector<TimedMove>& timeline,
                                                 int n_layers) {
    if (n_layers < 1) throw ValidationError("critical layer count must be >= 1");
    std::vector<CriticalInterval> out;
    for (const PrintSegment& seg : segments) {
        const int layer_count = seg.last_layer - seg.first_layer + 1;
        if (layer_count <= 2 * n_layers) {
            out.push_back({seg.start_time, seg.end_time, CriticalReason::FirstLayers,
                           seg.segment_index});
            continue;
        }
        const int head_last = seg.first_layer + n_layers - 1;
        const int tail_first = seg.last_layer - n_layers + 1;
        double head_end = seg.start_time;
        double tail_start = seg.end_time;
        bool tail_found = false;
        for (const TimedMove& move : timeline) {
            const double end = move.start_time + move.duration;
            if (move.start_time < seg.start_time || end > seg.end_time + 1e-12) continue;
            if (move.layer_index <= head_last) head_end = std::max(head_end, end);
            if (move.layer_index >= tail_first && !tail_found) {
                tail_start = move.start_time;
                tail_found = true;
            }
        }
        out.push_back({seg.start_time, head_end, CriticalReason::FirstLayers, seg.segment_index});
        out.push_back({tail_start, seg.end_time, CriticalReason::LastLayers, seg.segment_index});
    }
    std::sort(out.begin(), out.end(),
              [](const CriticalInterval& a, const CriticalInterval& b) { return a.t_start < b.t_start; });
    return out;
}

bool in_any_interval(double t, std::span<const CriticalInterval> intervals) {
    for (const CriticalInterval& iv : intervals)
        if (t >= iv.t_start && t <= iv.t_end) return true;
    return false;
}

double GcodeProgram::total_duration() const {
    if (timeline.empty()) return 0.0;
    const TimedMove& last = timeline.back();
    return last.start_time + last.duration;
}

bool GcodeProgram::extruding_at(double t) const {
    if (timeline.empty() || t < 0.0) return false;
    // Last move starting at or before t.
    auto it = std::upper_bound(timeline.begin(), timeline.end(), t,
                               [](double value, const TimedMove& m) { return value < m.start_time; });
    if (it == timeline.begin()) return false;
    --it;
    return it->extrude_delta > 0.0 && t < it->start_time + it->duration;
}

std::array<double, 3> GcodeProgram::nominal_dimensions_mm() const {
    double min_x = std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();
    double max_z = 0.0;
    bool any = false;
    for (const TimedMove& move : timeline) {
        if (move.extrude_delta <= 0.0) continue;
        any = true;
        for (const Point3& p : {move.from, move.to}) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
        max_z = std::max(max_z, move.to.z);
    }
    if (!any) return {0.0, 0.0, 0.0};
    return {max_x - min_x, max_y - min_y, max_z};
}

GcodeProgram analyze(const std::string& text, int critical_layers,
                     const TimelineOptions& opts, double layer_epsilon) {
    GcodeProgram program;
    program.commands = parse_gcode(text);
    program.timeline = build_timeline(program.commands, opts);
    program.layer_count = segment_layers(program.timeline, layer_epsilon);
    program.segments = extract_print_segments(program.timeline);
    program.criticals = critical_intervals(program.segments, program.timeline, critical_layers);
    return program;
}

GcodeProgram load_program(const std::string& path, int critical_layers,
                          const TimelineOptions& opts, double layer_epsilon) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open g-code file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return analyze(buffer.str(), critical_layers, opts, layer_epsilon);
}

}  // namespace mobiprint::gcode
