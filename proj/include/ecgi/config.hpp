#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ecgi/error.hpp"
#include "ecgi/filter.hpp"
#include "ecgi/geodesic.hpp"
#include "ecgi/mesh.hpp"
#include "ecgi/synth.hpp"

namespace ecgi {

// Key/value configuration with [sections]; keys may repeat (e.g. several
// stim or mode lines). Values run to end of line; '#' starts a comment.

struct ConfigFile {
    std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
    std::string raw_text;

    bool has(const std::string& section, const std::string& key) const {
        const auto it = sections.find(section);
        if (it == sections.end()) return false;
        for (const auto& [k, v] : it->second)
            if (k == key) return true;
        return false;
    }

    std::string get(const std::string& section, const std::string& key) const {
        const auto it = sections.find(section);
        if (it != sections.end())
            for (const auto& [k, v] : it->second)
                if (k == key) return v;
        throw ConfigError("missing config field [" + section + "] " + key);
    }

    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const {
        return has(section, key) ? get(section, key) : fallback;
    }

    std::vector<std::string> get_all(const std::string& section, const std::string& key) const {
        std::vector<std::string> out;
        const auto it = sections.find(section);
        if (it != sections.end())
            for (const auto& [k, v] : it->second)
                if (k == key) out.push_back(v);
        return out;
    }

    double get_double(const std::string& section, const std::string& key) const {
        const std::string v = get(section, key);
        try {
            return std::stod(v);
        } catch (...) {
            throw ConfigError("config field [" + section + "] " + key + " is not a number: '" + v +
                              "'");
        }
    }

    double get_double_or(const std::string& section, const std::string& key, double fallback) const {
        return has(section, key) ? get_double(section, key) : fallback;
    }

    long get_int(const std::string& section, const std::string& key) const {
        const std::string v = get(section, key);
        try {
            return std::stol(v);
        } catch (...) {
            throw ConfigError("config field [" + section + "] " + key +
                              " is not an integer: '" + v + "'");
        }
    }

    long get_int_or(const std::string& section, const std::string& key, long fallback) const {
        return has(section, key) ? get_int(section, key) : fallback;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace detail

inline ConfigFile parse_config_text(const std::string& text) {
    ConfigFile cfg;
    cfg.raw_text = text;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) +
                                  ": unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            cfg.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        cfg.sections[section].emplace_back(detail::trim(line.substr(0, eq)),
                                           detail::trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline ConfigFile parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

inline std::uint64_t config_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Experiment description

struct MeshSpec {
    enum class Kind { sphere, ellipsoid, file } kind = Kind::sphere;
    double radius_mm = 30.0;
    int subdivisions = 3;
    Vec3 axis_scales{1.0, 0.7, 0.5};
    std::string path;
};

struct StimSpec {
    bool by_vertex = false;
    std::uint32_t vertex = 0;
    Vec3 point{};
    double delay_ms = 0.0;
};

/// Base conductivity plus any number of scaled regions.
struct ConductivityDesc {
    ConductivitySpec base = ConductivitySpec::uniform(1.0);
    std::vector<BlockSpec> blocks;
};

struct ModeSpec {
    std::string label;
    ConductivityDesc conductivity;
    std::string operator_path; // empty: dipole layer on the filter mesh
};

struct RunSpec {
    std::uint64_t seed = 0;
    int reps = 1;
    std::string direction = "both"; // fwd | bwd | both
    std::string out_dir = "out";
    unsigned workers = 0;
    double noise_level = 0.04;
};

struct ExperimentConfig {
    MeshSpec mesh;
    std::size_t electrode_count = 128;
    double electrode_radius_mm = 75.0;
    int truth_subdivisions = 4;
    ConductivityDesc truth_conductivity;
    std::vector<StimSpec> stims;
    double speed_mm_per_ms = 1.0;
    double duration_ms = 120.0;
    double dt_ms = 1.0;
    FilterConfig filter;
    DistanceBackend backend = DistanceBackend::dijkstra;
    std::vector<ModeSpec> modes;
    RunSpec run;
    std::uint64_t hash = 0;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

inline double tok_num(const std::vector<std::string>& toks, std::size_t i,
                      const std::string& what) {
    if (i >= toks.size()) throw ConfigError(what + ": missing value");
    try {
        return std::stod(toks[i]);
    } catch (...) {
        throw ConfigError(what + ": bad number '" + toks[i] + "'");
    }
}

/// "ball cx cy cz radius" | "geodesic vertex radius"; geodesic regions are
/// resolved against the given mesh when it is available.
inline Region parse_region(const std::vector<std::string>& toks, std::size_t& i,
                           const std::string& what) {
    if (i >= toks.size()) throw ConfigError(what + ": missing region");
    Region region;
    if (toks[i] == "ball") {
        region.kind = Region::Kind::euclidean_ball;
        region.center = {tok_num(toks, i + 1, what), tok_num(toks, i + 2, what),
                         tok_num(toks, i + 3, what)};
        region.radius_mm = tok_num(toks, i + 4, what);
        i += 5;
    } else if (toks[i] == "geodesic") {
        region.kind = Region::Kind::geodesic_ball;
        region.center_vertex = static_cast<std::uint32_t>(tok_num(toks, i + 1, what));
        region.radius_mm = tok_num(toks, i + 2, what);
        i += 3;
    } else {
        throw ConfigError(what + ": unknown region kind '" + toks[i] + "'");
    }
    return region;
}

inline ConductivityDesc parse_conductivity(const std::string& text, const std::string& what) {
    const auto toks = split_ws(text);
    if (toks.empty()) throw ConfigError(what + ": empty conductivity spec");
    ConductivityDesc desc;
    std::size_t i = 0;
    if (toks[0] == "uniform") {
        desc.base = ConductivitySpec::uniform(tok_num(toks, 1, what));
        i = 2;
    } else if (toks[0] == "aniso") {
        desc.base = ConductivitySpec::anisotropic(
            tok_num(toks, 1, what), tok_num(toks, 2, what),
            {tok_num(toks, 3, what), tok_num(toks, 4, what), tok_num(toks, 5, what)});
        i = 6;
    } else {
        throw ConfigError(what + ": conductivity must start with 'uniform' or 'aniso'");
    }
    while (i < toks.size()) {
        if (toks[i] != "block")
            throw ConfigError(what + ": unexpected token '" + toks[i] + "'");
        ++i;
        BlockSpec block;
        block.region = parse_region(toks, i, what);
        block.factor = tok_num(toks, i, what);
        ++i;
        if (i < toks.size() && toks[i] != "block") {
            block.label = toks[i];
            ++i;
        }
        desc.blocks.push_back(std::move(block));
    }
    return desc;
}

} // namespace detail

inline ExperimentConfig load_experiment(const ConfigFile& cfg) {
    ExperimentConfig exp;
    exp.hash = config_hash(cfg.raw_text);

    // [mesh]
    const std::string kind = cfg.get_or("mesh", "kind", "sphere");
    if (kind == "sphere") exp.mesh.kind = MeshSpec::Kind::sphere;
    else if (kind == "ellipsoid") exp.mesh.kind = MeshSpec::Kind::ellipsoid;
    else if (kind == "file") exp.mesh.kind = MeshSpec::Kind::file;
    else throw ConfigError("[mesh] kind must be sphere, ellipsoid or file");
    exp.mesh.radius_mm = cfg.get_double_or("mesh", "radius_mm", 30.0);
    exp.mesh.subdivisions = static_cast<int>(cfg.get_int_or("mesh", "subdivisions", 3));
    if (cfg.has("mesh", "axis_scales")) {
        const auto toks = detail::split_ws(cfg.get("mesh", "axis_scales"));
        if (toks.size() != 3) throw ConfigError("[mesh] axis_scales needs three values");
        exp.mesh.axis_scales = {std::stod(toks[0]), std::stod(toks[1]), std::stod(toks[2])};
    }
    if (exp.mesh.kind == MeshSpec::Kind::file) exp.mesh.path = cfg.get("mesh", "path");

    // [electrodes]
    exp.electrode_count = static_cast<std::size_t>(cfg.get_int_or("electrodes", "count", 128));
    exp.electrode_radius_mm = cfg.get_double_or("electrodes", "radius_mm", 75.0);

    // [truth]
    exp.truth_subdivisions =
        static_cast<int>(cfg.get_int_or("truth", "subdivisions", exp.mesh.subdivisions + 1));
    if (cfg.has("truth", "conductivity"))
        exp.truth_conductivity =
            detail::parse_conductivity(cfg.get("truth", "conductivity"), "[truth] conductivity");
    for (const std::string& spec : cfg.get_all("truth", "block")) {
        const auto toks = detail::split_ws(spec);
        std::size_t i = 0;
        BlockSpec block;
        block.region = detail::parse_region(toks, i, "[truth] block");
        block.factor = detail::tok_num(toks, i, "[truth] block");
        ++i;
        if (i < toks.size()) block.label = toks[i];
        exp.truth_conductivity.blocks.push_back(std::move(block));
    }
    const auto stim_lines = cfg.get_all("truth", "stim");
    if (stim_lines.empty()) throw ConfigError("missing config field [truth] stim");
    for (const std::string& line : stim_lines) {
        const auto toks = detail::split_ws(line);
        StimSpec stim;
        std::size_t i = 0;
        if (toks.empty()) throw ConfigError("[truth] stim: empty");
        if (toks[0] == "point") {
            stim.point = {detail::tok_num(toks, 1, "[truth] stim"),
                          detail::tok_num(toks, 2, "[truth] stim"),
                          detail::tok_num(toks, 3, "[truth] stim")};
            i = 4;
        } else if (toks[0] == "vertex") {
            stim.by_vertex = true;
            stim.vertex = static_cast<std::uint32_t>(detail::tok_num(toks, 1, "[truth] stim"));
            i = 2;
        } else {
            throw ConfigError("[truth] stim must start with 'point' or 'vertex'");
        }
        if (i < toks.size()) {
            if (toks[i] != "delay") throw ConfigError("[truth] stim: expected 'delay'");
            stim.delay_ms = detail::tok_num(toks, i + 1, "[truth] stim");
        }
        exp.stims.push_back(stim);
    }
    exp.speed_mm_per_ms = cfg.get_double_or("truth", "speed_mm_per_ms", 1.0);
    exp.duration_ms = cfg.get_double_or("truth", "duration_ms", 120.0);
    exp.dt_ms = cfg.get_double_or("truth", "dt_ms", 1.0);
    exp.run.noise_level = cfg.get_double_or("truth", "noise_level", 0.04);

    // [filter]
    exp.filter.N = static_cast<int>(cfg.get_int_or("filter", "N", 1000));
    exp.filter.l = static_cast<int>(cfg.get_int_or("filter", "l", 3));
    exp.filter.sigma_r = cfg.get_double_or("filter", "sigma_r", 10.0);
    exp.filter.lambda_mm = cfg.get_double_or("filter", "lambda", 5.0);
    exp.filter.sigma_w = cfg.get_double_or("filter", "sigma_w", 0.02);
    exp.filter.width_mm = cfg.get_double_or("filter", "width", 5.0);
    exp.filter.resample_fraction = cfg.get_double_or("filter", "resample_fraction", 1.0 / 3.0);
    exp.filter.mode_keep_prob = cfg.get_double_or("filter", "mode_keep_prob", 0.99);
    exp.filter.r_init_fwd = cfg.get_double_or("filter", "r_init_fwd", 1.0);
    exp.filter.r_init_bwd = cfg.get_double_or("filter", "r_init_bwd", 150.0);
    exp.filter.systematic_resampling =
        cfg.get_or("filter", "resampler", "multinomial") == "systematic";
    exp.backend = backend_from_string(cfg.get_or("filter", "backend", "dijkstra"));

    // [modes] — default: one homogeneous identity mode
    for (const std::string& line : cfg.get_all("modes", "mode")) {
        const auto colon = line.find(':');
        if (colon == std::string::npos)
            throw ConfigError("[modes] mode must be '<label> : <conductivity spec>'");
        ModeSpec mode;
        mode.label = detail::trim(line.substr(0, colon));
        std::string rest = detail::trim(line.substr(colon + 1));
        const auto op_pos = rest.find("operator ");
        if (op_pos != std::string::npos) {
            mode.operator_path = detail::trim(rest.substr(op_pos + 9));
            rest = detail::trim(rest.substr(0, op_pos));
        }
        mode.conductivity = detail::parse_conductivity(rest, "[modes] " + mode.label);
        exp.modes.push_back(std::move(mode));
    }
    if (exp.modes.empty()) {
        ModeSpec mode;
        mode.label = "homogeneous";
        exp.modes.push_back(std::move(mode));
    }

    // [run]
    exp.run.seed = static_cast<std::uint64_t>(cfg.get_int_or("run", "seed", 0));
    exp.run.reps = static_cast<int>(cfg.get_int_or("run", "reps", 1));
    if (exp.run.reps < 1) throw ConfigError("[run] reps must be >= 1");
    exp.run.direction = cfg.get_or("run", "direction", "both");
    if (exp.run.direction != "fwd" && exp.run.direction != "bwd" && exp.run.direction != "both")
        throw ConfigError("[run] direction must be fwd, bwd or both");
    exp.run.out_dir = cfg.get_or("run", "out", "out");
    exp.run.workers = static_cast<unsigned>(cfg.get_int_or("run", "workers", 0));
    exp.filter.workers = exp.run.workers;
    exp.filter.seed = exp.run.seed;
    exp.filter.validate();
    return exp;
}

inline ExperimentConfig load_experiment(const std::string& path) {
    return load_experiment(parse_config(path));
}

} // namespace ecgi
