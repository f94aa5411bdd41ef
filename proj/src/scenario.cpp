#include "mobiprint/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <set>
#include <sstream>

namespace mobiprint {

namespace {

int node_line(const YAML::Node& node) {
    return node.Mark().line >= 0 ? node.Mark().line + 1 : 0;
}

[[noreturn]] void fail_parse(const YAML::Node& node, const std::string& message) {
    throw ParseError(message, node_line(node));
}

void expect_keys(const YAML::Node& node, const std::set<std::string>& allowed,
                 const std::string& where) {
    if (!node.IsMap()) fail_parse(node, where + " must be a mapping");
    for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed.count(key))
            fail_parse(kv.first, "unknown key '" + key + "' in " + where);
    }
}

double as_double(const YAML::Node& node, const std::string& what) {
    if (!node.IsScalar()) fail_parse(node, what + " must be a number");
    try {
        return node.as<double>();
    } catch (const YAML::Exception&) {
        fail_parse(node, what + " is not a valid number");
    }
}

int as_int(const YAML::Node& node, const std::string& what) {
    if (!node.IsScalar()) fail_parse(node, what + " must be an integer");
    try {
        return node.as<int>();
    } catch (const YAML::Exception&) {
        fail_parse(node, what + " is not a valid integer");
    }
}

Vec2 as_vec2(const YAML::Node& node, const std::string& what) {
    if (!node.IsSequence() || node.size() != 2)
        fail_parse(node, what + " must be a [x, y] pair");
    return Vec2{as_double(node[0], what + "[0]"), as_double(node[1], what + "[1]")};
}

std::vector<Vec2> as_vertex_list(const YAML::Node& node, const std::string& what) {
    if (!node.IsSequence()) fail_parse(node, what + " must be a list of [x, y] pairs");
    std::vector<Vec2> out;
    out.reserve(node.size());
    for (std::size_t i = 0; i < node.size(); ++i)
        out.push_back(as_vec2(node[i], what + "[" + std::to_string(i) + "]"));
    return out;
}

template <typename T, typename Fn>
void maybe(const YAML::Node& parent, const char* key, T& target, Fn convert) {
    const YAML::Node node = parent[key];
    if (node) target = convert(node, key);
}

void read_behavior(const YAML::Node& node, behavior::BehaviorThresholds& th) {
    expect_keys(node, {"d_slow", "d_turn", "d_side", "slow_speed", "turn_rate", "side_speed",
                       "hysteresis"},
                "controller.behavior");
    maybe(node, "d_slow", th.d_slow, as_double);
    maybe(node, "d_turn", th.d_turn, as_double);
    maybe(node, "d_side", th.d_side, as_double);
    maybe(node, "slow_speed", th.slow_speed, as_double);
    maybe(node, "turn_rate", th.turn_rate, as_double);
    maybe(node, "side_speed", th.side_speed, as_double);
    maybe(node, "hysteresis", th.hysteresis, as_double);
}

void read_controller(const YAML::Node& node, ControllerConfig& c) {
    expect_keys(node,
                {"horizon", "dt", "q_diag", "r_diag", "alpha_v", "alpha_u", "v_lim_critical",
                 "v_max", "u_max", "obstacle_margin", "eps", "max_iter", "v_cruise",
                 "critical_layers", "max_ref_lead", "d_pause", "settle_vibration",
                 "settle_time", "v_bump", "behavior"},
                "controller");
    maybe(node, "horizon", c.mpc.horizon, as_int);
    maybe(node, "dt", c.mpc.dt, as_double);
    if (const YAML::Node q = node["q_diag"]) {
        if (!q.IsSequence() || q.size() != 4)
            fail_parse(q, "controller.q_diag must have 4 entries");
        Eigen::Vector4d d;
        for (int i = 0; i < 4; ++i) d(i) = as_double(q[i], "controller.q_diag");
        c.mpc.Q = d.asDiagonal();
    }
    if (const YAML::Node r = node["r_diag"]) {
        if (!r.IsSequence() || r.size() != 2)
            fail_parse(r, "controller.r_diag must have 2 entries");
        Eigen::Vector2d d;
        for (int i = 0; i < 2; ++i) d(i) = as_double(r[i], "controller.r_diag");
        c.mpc.R = d.asDiagonal();
    }
    maybe(node, "alpha_v", c.mpc.alpha_v, as_double);
    maybe(node, "alpha_u", c.mpc.alpha_u, as_double);
    maybe(node, "v_lim_critical", c.mpc.v_lim_critical, as_double);
    maybe(node, "v_max", c.mpc.v_max, as_double);
    maybe(node, "u_max", c.mpc.u_max, as_double);
    maybe(node, "obstacle_margin", c.mpc.obstacle_margin, as_double);
    maybe(node, "eps", c.mpc.eps, as_double);
    maybe(node, "max_iter", c.mpc.max_iter, as_int);
    maybe(node, "v_cruise", c.v_cruise, as_double);
    maybe(node, "critical_layers", c.critical_layers, as_int);
    maybe(node, "max_ref_lead", c.max_ref_lead, as_double);
    maybe(node, "d_pause", c.d_pause, as_double);
    maybe(node, "settle_vibration", c.settle_vibration, as_double);
    maybe(node, "settle_time", c.settle_time, as_double);
    maybe(node, "v_bump", c.v_bump, as_double);
    if (const YAML::Node b = node["behavior"]) read_behavior(b, c.behavior);
}

void read_sim(const YAML::Node& node, sim::SimConfig& s) {
    expect_keys(node,
                {"dt_sim", "dt_ctrl", "t_max", "tau_v", "tau_omega", "v_max_plant", "omega_max",
                 "k_heading", "k_lateral", "min_speed_for_heading", "k_bump", "bump_decay_tau",
                 "n_beams", "max_range", "sigma_pos", "sigma_heading", "sigma_vel", "sigma_lidar",
                 "goal_tolerance"},
                "sim");
    maybe(node, "dt_sim", s.dt_sim, as_double);
    maybe(node, "dt_ctrl", s.dt_ctrl, as_double);
    maybe(node, "t_max", s.t_max, as_double);
    maybe(node, "tau_v", s.tau_v, as_double);
    maybe(node, "tau_omega", s.tau_omega, as_double);
    maybe(node, "v_max_plant", s.v_max_plant, as_double);
    maybe(node, "omega_max", s.omega_max, as_double);
    maybe(node, "k_heading", s.k_heading, as_double);
    maybe(node, "k_lateral", s.k_lateral, as_double);
    maybe(node, "min_speed_for_heading", s.min_speed_for_heading, as_double);
    maybe(node, "k_bump", s.k_bump, as_double);
    maybe(node, "bump_decay_tau", s.bump_decay_tau, as_double);
    maybe(node, "n_beams", s.n_beams, as_int);
    maybe(node, "max_range", s.max_range, as_double);
    maybe(node, "sigma_pos", s.sigma_pos, as_double);
    maybe(node, "sigma_heading", s.sigma_heading, as_double);
    maybe(node, "sigma_vel", s.sigma_vel, as_double);
    maybe(node, "sigma_lidar", s.sigma_lidar, as_double);
    maybe(node, "goal_tolerance", s.goal_tolerance, as_double);
}

FactoryMap read_map(const YAML::Node& node) {
    expect_keys(node, {"bounds", "obstacles", "zones", "bumps"}, "map");
    FactoryMap map;
    const YAML::Node bounds = node["bounds"];
    if (!bounds || !bounds.IsSequence() || bounds.size() != 4)
        fail_parse(node, "map.bounds must be [xmin, ymin, xmax, ymax]");
    map.bounds.min = Vec2{as_double(bounds[0], "bounds"), as_double(bounds[1], "bounds")};
    map.bounds.max = Vec2{as_double(bounds[2], "bounds"), as_double(bounds[3], "bounds")};

    if (const YAML::Node obs = node["obstacles"]) {
        if (!obs.IsSequence()) fail_parse(obs, "map.obstacles must be a list");
        for (std::size_t i = 0; i < obs.size(); ++i)
            map.obstacles.push_back(Polytope::from_vertices(
                as_vertex_list(obs[i], "obstacle[" + std::to_string(i) + "]"),
                RegionLabel::Obstacle));
    }
    if (const YAML::Node zones = node["zones"]) {
        if (!zones.IsSequence()) fail_parse(zones, "map.zones must be a list");
        for (std::size_t i = 0; i < zones.size(); ++i)
            map.zones.push_back(Polytope::from_vertices(
                as_vertex_list(zones[i], "zone[" + std::to_string(i) + "]"),
                RegionLabel::RestrictedZone));
    }
    if (const YAML::Node bumps = node["bumps"]) {
        if (!bumps.IsSequence()) fail_parse(bumps, "map.bumps must be a list");
        for (std::size_t i = 0; i < bumps.size(); ++i) {
            const YAML::Node b = bumps[i];
            expect_keys(b, {"center", "half_length", "width", "height"}, "bump");
            Bump bump;
            bump.center = as_vec2(b["center"], "bump.center");
            bump.half_length = as_double(b["half_length"], "bump.half_length");
            bump.width = as_double(b["width"], "bump.width");
            bump.height = as_double(b["height"], "bump.height");
            map.bumps.push_back(bump);
        }
    }
    return map;
}

RobotState read_start(const YAML::Node& node) {
    expect_keys(node, {"position", "heading", "velocity"}, "start");
    RobotState start;
    if (!node["position"]) fail_parse(node, "start.position is required");
    start.position = as_vec2(node["position"], "start.position");
    maybe(node, "heading", start.heading, as_double);
    if (const YAML::Node v = node["velocity"]) start.velocity = as_vec2(v, "start.velocity");
    start.heading = wrap_angle(start.heading);
    return start;
}

void apply_override_entry(YAML::Node root, const std::string& entry) {
    const auto eq = entry.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ValidationError("override must look like path.to.key=value: " + entry);
    const std::string path = entry.substr(0, eq);
    const std::string value = entry.substr(eq + 1);

    std::vector<std::string> parts;
    std::stringstream ss(path);
    std::string part;
    while (std::getline(ss, part, '.')) {
        if (part.empty()) throw ValidationError("empty path component in override: " + entry);
        parts.push_back(part);
    }
    // Node::operator= aliases the underlying tree node (it would graft the
    // root onto the subtree); reset() rebinds only this handle.
    YAML::Node cursor;
    cursor.reset(root);
    try {
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
            YAML::Node next = cursor[parts[i]];
            if (!next.IsDefined()) {
                cursor[parts[i]] = YAML::Node(YAML::NodeType::Map);
                next.reset(cursor[parts[i]]);
            }
            cursor.reset(next);
        }
        cursor[parts.back()] = YAML::Load(value);
    } catch (const YAML::Exception&) {
        throw ValidationError("cannot parse override value: " + entry);
    }
}

Scenario from_document(YAML::Node root, const std::filesystem::path& base_dir) {
    expect_keys(root,
                {"schema_version", "map", "start", "reference_path", "gcode", "mode", "seed",
                 "controller", "sim"},
                "scenario");
    const YAML::Node version = root["schema_version"];
    if (!version) throw ParseError("missing schema_version", node_line(root));
    if (as_int(version, "schema_version") != 1)
        fail_parse(version, "unsupported schema_version (expected 1)");

    Scenario sc;
    if (!root["map"]) throw ParseError("missing map", node_line(root));
    sc.map = read_map(root["map"]);
    if (!root["start"]) throw ParseError("missing start", node_line(root));
    sc.start = read_start(root["start"]);

    const YAML::Node path_node = root["reference_path"];
    if (!path_node) throw ParseError("missing reference_path", node_line(root));
    sc.reference_path = as_vertex_list(path_node, "reference_path");

    const YAML::Node gcode = root["gcode"];
    if (!gcode || !gcode.IsScalar()) throw ParseError("missing gcode path", node_line(root));
    std::filesystem::path gpath = gcode.as<std::string>();
    if (gpath.is_relative()) gpath = base_dir / gpath;
    sc.gcode_path = gpath.lexically_normal().string();

    const YAML::Node mode = root["mode"];
    if (!mode || !mode.IsScalar()) throw ParseError("missing mode", node_line(root));
    const std::string mode_str = mode.as<std::string>();
    if (mode_str == "continuous") {
        sc.mode = coupling::PrintMotionMode::Continuous;
    } else if (mode_str == "pause_resume") {
        sc.mode = coupling::PrintMotionMode::PauseResume;
    } else {
        fail_parse(mode, "mode must be 'continuous' or 'pause_resume'");
    }

    const YAML::Node seed = root["seed"];
    if (!seed || !seed.IsScalar()) throw ParseError("missing seed", node_line(root));
    try {
        sc.seed = seed.as<unsigned long long>();
    } catch (const YAML::Exception&) {
        fail_parse(seed, "seed must be an unsigned integer");
    }

    if (const YAML::Node c = root["controller"]) read_controller(c, sc.controller);
    if (const YAML::Node s = root["sim"]) read_sim(s, sc.sim);

    sc.validate();
    return sc;
}

}  // namespace

coupling::CouplingConfig ControllerConfig::coupling_config(coupling::PrintMotionMode mode) const {
    coupling::CouplingConfig cfg;
    cfg.mode = mode;
    cfg.d_pause = d_pause;
    cfg.settle_vibration = settle_vibration;
    cfg.settle_time = settle_time;
    cfg.v_bump = v_bump;
    cfg.v_lim_critical = mpc.v_lim_critical;
    return cfg;
}

void ControllerConfig::validate() const {
    mpc.validate();
    behavior.validate();
    if (!(v_cruise > 0.0)) throw ValidationError("controller.v_cruise must be positive");
    if (critical_layers < 1) throw ValidationError("controller.critical_layers must be >= 1");
    if (!(max_ref_lead > 0.0)) throw ValidationError("controller.max_ref_lead must be positive");
    coupling_config(coupling::PrintMotionMode::Continuous).validate();
}

void Scenario::validate() const {
    map.validate();
    controller.validate();
    sim.validate();
    start.validate(sim.v_max_plant);
    if (!map.bounds.contains(start.position))
        throw ValidationError("start position lies outside the map bounds");

    if (reference_path.size() < 2)
        throw ValidationError("reference_path needs at least 2 waypoints");
    for (std::size_t i = 0; i < reference_path.size(); ++i) {
        require_finite(reference_path[i], "reference waypoint");
        if (!map.bounds.contains(reference_path[i]))
            throw ValidationError("reference waypoint outside the map bounds");
        if (i > 0 && (reference_path[i] - reference_path[i - 1]).norm() <= 1e-12)
            throw ValidationError("consecutive reference waypoints must be distinct");
    }
    for (const Polytope& obs : map.obstacles) {
        if (obs.contains(start.position))
            throw ValidationError("start position lies inside an obstacle");
        if (obs.contains(reference_path.back()))
            throw ValidationError("goal waypoint lies inside an obstacle");
    }
    if (!std::filesystem::exists(gcode_path))
        throw ValidationError("g-code file not found: " + gcode_path);
    for (double g : {gains.g_x, gains.g_y, gains.g_z}) {
        if (!std::isfinite(g)) throw ValidationError("quality gains must be finite");
    }
}

Scenario load_scenario(const std::string& path) { return load_scenario(path, {}); }

Scenario load_scenario(const std::string& path, const std::vector<std::string>& overrides) {
    if (!std::filesystem::exists(path))
        throw ValidationError("scenario file not found: " + path);
    YAML::Node root;
    try {
        root = YAML::LoadFile(path);
    } catch (const YAML::ParserException& e) {
        throw ParseError(std::string("scenario parse failure: ") + e.msg, e.mark.line + 1);
    }
    for (const std::string& entry : overrides) apply_override_entry(root, entry);
    return from_document(root, std::filesystem::path(path).parent_path());
}

}  // namespace mobiprint
