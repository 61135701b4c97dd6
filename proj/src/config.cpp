#include "doaopt/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace doaopt {

namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct Entry {
    std::string value;
    int line = 0;
    mutable bool used = false;
};

struct Section {
    int line = 0;
    std::map<std::string, Entry> entries;
};

struct Ini {
    std::string path;
    std::map<std::string, Section> sections;

    bool has_section(const std::string& name) const {
        return sections.count(name) != 0;
    }

    int section_line(const std::string& name) const {
        auto it = sections.find(name);
        return it == sections.end() ? 0 : it->second.line;
    }

    const Entry* find(const std::string& section, const std::string& key) const {
        auto s = sections.find(section);
        if (s == sections.end()) return nullptr;
        auto e = s->second.entries.find(key);
        if (e == s->second.entries.end()) return nullptr;
        e->second.used = true;
        return &e->second;
    }

    const Entry& require(const std::string& section, const std::string& key) const {
        const Entry* e = find(section, key);
        if (!e) {
            if (!has_section(section)) {
                throw ConfigError(path, 0, "missing section [" + section + "]");
            }
            throw ConfigError(path, section_line(section),
                              "missing key '" + key + "' in [" + section + "]");
        }
        return *e;
    }

    double get_double(const std::string& section, const std::string& key) const {
        return parse_one_double(require(section, key));
    }

    std::optional<double> opt_double(const std::string& section,
                                     const std::string& key) const {
        const Entry* e = find(section, key);
        if (!e) return std::nullopt;
        return parse_one_double(*e);
    }

    long get_long(const std::string& section, const std::string& key) const {
        const Entry& e = require(section, key);
        return parse_long_value(e);
    }

    std::optional<long> opt_long(const std::string& section,
                                 const std::string& key) const {
        const Entry* e = find(section, key);
        if (!e) return std::nullopt;
        return parse_long_value(*e);
    }

    std::string get_string(const std::string& section,
                           const std::string& key) const {
        return require(section, key).value;
    }

    std::optional<std::string> opt_string(const std::string& section,
                                          const std::string& key) const {
        const Entry* e = find(section, key);
        if (!e) return std::nullopt;
        return e->value;
    }

    std::optional<bool> opt_bool(const std::string& section,
                                 const std::string& key) const {
        const Entry* e = find(section, key);
        if (!e) return std::nullopt;
        std::string v = e->value;
        std::transform(v.begin(), v.end(), v.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError(path, e->line, "expected a boolean, got '" + e->value + "'");
    }

    std::vector<double> get_doubles(const std::string& section,
                                    const std::string& key) const {
        const Entry& e = require(section, key);
        return parse_doubles(e);
    }

    std::optional<std::vector<double>> opt_doubles(const std::string& section,
                                                   const std::string& key) const {
        const Entry* e = find(section, key);
        if (!e) return std::nullopt;
        return parse_doubles(*e);
    }

    std::vector<int> get_ints(const std::string& section,
                              const std::string& key) const {
        const Entry& e = require(section, key);
        std::vector<int> out;
        std::istringstream ss(e.value);
        std::string tok;
        while (ss >> tok) {
            out.push_back(static_cast<int>(parse_long_token(tok, e.line)));
        }
        if (out.empty()) {
            throw ConfigError(path, e.line, "expected integers, got '" + e.value + "'");
        }
        return out;
    }

    void check_all_used(
        const std::vector<std::string>& known_sections) const {
        for (const auto& [name, section] : sections) {
            if (std::find(known_sections.begin(), known_sections.end(), name) ==
                known_sections.end()) {
                throw ConfigError(path, section.line,
                                  "unknown section [" + name + "]");
            }
            for (const auto& [key, entry] : section.entries) {
                if (!entry.used) {
                    throw ConfigError(path, entry.line,
                                      "unknown key '" + key + "' in [" + name + "]");
                }
            }
        }
    }

private:
    double parse_one_double(const Entry& e) const {
        const auto values = parse_doubles(e);
        if (values.size() != 1) {
            throw ConfigError(path, e.line,
                              "expected one number, got '" + e.value + "'");
        }
        return values[0];
    }

    std::vector<double> parse_doubles(const Entry& e) const {
        std::vector<double> out;
        std::istringstream ss(e.value);
        std::string tok;
        while (ss >> tok) {
            size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception&) {
                throw ConfigError(path, e.line, "malformed number '" + tok + "'");
            }
            if (used != tok.size()) {
                throw ConfigError(path, e.line, "malformed number '" + tok + "'");
            }
            out.push_back(v);
        }
        if (out.empty()) {
            throw ConfigError(path, e.line, "expected numbers, got '" + e.value + "'");
        }
        return out;
    }

    long parse_long_value(const Entry& e) const {
        std::istringstream ss(e.value);
        std::string tok;
        if (!(ss >> tok)) throw ConfigError(path, e.line, "expected an integer");
        const long v = parse_long_token(tok, e.line);
        std::string rest;
        if (ss >> rest) {
            throw ConfigError(path, e.line,
                              "expected one integer, got '" + e.value + "'");
        }
        return v;
    }

    long parse_long_token(const std::string& tok, int line) const {
        size_t used = 0;
        long v = 0;
        try {
            v = std::stol(tok, &used);
        } catch (const std::exception&) {
            throw ConfigError(path, line, "malformed integer '" + tok + "'");
        }
        if (used != tok.size()) {
            throw ConfigError(path, line, "malformed integer '" + tok + "'");
        }
        return v;
    }
};

Ini parse_ini(const std::string& text, const std::string& path) {
    Ini ini;
    ini.path = path;
    std::istringstream stream(text);
    std::string raw;
    std::string current;
    int line_no = 0;
    while (std::getline(stream, raw)) {
        ++line_no;
        const size_t comment = raw.find_first_of("#;");
        if (comment != std::string::npos) raw.erase(comment);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                throw ConfigError(path, line_no, "malformed section header");
            }
            current = trim(line.substr(1, line.size() - 2));
            if (current.empty()) {
                throw ConfigError(path, line_no, "empty section name");
            }
            auto [it, inserted] = ini.sections.try_emplace(current);
            if (!inserted) {
                throw ConfigError(path, line_no,
                                  "duplicate section [" + current + "]");
            }
            it->second.line = line_no;
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path, line_no, "expected 'key = value'");
        }
        if (current.empty()) {
            throw ConfigError(path, line_no, "key outside of any section");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(path, line_no, "empty key");
        if (value.empty()) {
            throw ConfigError(path, line_no, "empty value for key '" + key + "'");
        }
        auto [it, inserted] =
            ini.sections[current].entries.try_emplace(key, Entry{value, line_no});
        if (!inserted) {
            throw ConfigError(path, line_no,
                              "duplicate key '" + key + "' in [" + current + "]");
        }
    }
    return ini;
}

SelectRule parse_rule(const Ini& ini, const std::string& section,
                      const std::string& value, int line) {
    if (value == "contained") return SelectRule::Contained;
    if (value == "center_in") return SelectRule::CenterIn;
    if (value == "intersects") return SelectRule::Intersects;
    throw ConfigError(ini.path, line,
                      "unknown selection rule '" + value + "' in [" + section +
                          "] (use contained | center_in | intersects)");
}

Box read_box(const Ini& ini, const std::string& section, int expected_dim) {
    const auto lo = ini.get_doubles(section, "lo");
    const auto hi = ini.get_doubles(section, "hi");
    if (expected_dim > 0 && (static_cast<int>(lo.size()) != expected_dim ||
                             static_cast<int>(hi.size()) != expected_dim)) {
        throw ConfigError(ini.path, ini.section_line(section),
                          "[" + section + "] lo/hi must have " +
                              std::to_string(expected_dim) + " entries");
    }
    if (lo.size() != hi.size()) {
        throw ConfigError(ini.path, ini.section_line(section),
                          "[" + section + "] lo/hi lengths differ");
    }
    Box box{lo, hi};
    for (int k = 0; k < box.dim(); ++k) {
        if (!(box.lo[k] < box.hi[k])) {
            throw ConfigError(ini.path, ini.section_line(section),
                              "[" + section + "] needs lo < hi in every axis");
        }
    }
    return box;
}

void check_overlap(const Ini& ini, const std::string& section, const Box& region,
                   const Box& domain, int line) {
    for (int k = 0; k < domain.dim(); ++k) {
        const double over = std::min(region.hi[k], domain.hi[k]) -
                            std::max(region.lo[k], domain.lo[k]);
        if (!(over > 0.0)) {
            throw ConfigError(ini.path, line,
                              "[" + section + "] region does not overlap the "
                              "state-space box");
        }
    }
}

}  // namespace

CellSet select_region(const Grid& grid, const RegionSpec& region,
                      std::string label) {
    if (region.is_disk) {
        return select_cells_disk(grid, region.center, region.radius, region.rule,
                                 std::move(label));
    }
    return select_cells(grid, region.box, region.rule, std::move(label));
}

RunConfig parse_run_config(const std::string& text, const std::string& path) {
    const Ini ini = parse_ini(text, path);

    RunConfig cfg;
    cfg.path = path;
    cfg.text = text;

    // [space]
    cfg.space_box = read_box(ini, "space", 0);
    cfg.resolution = ini.get_ints("space", "resolution");
    if (static_cast<int>(cfg.resolution.size()) != cfg.space_box.dim()) {
        throw ConfigError(path, ini.section_line("space"),
                          "[space] resolution must have one entry per axis");
    }
    for (int r : cfg.resolution) {
        if (r < 1) {
            throw ConfigError(path, ini.require("space", "resolution").line,
                              "[space] resolution entries must be >= 1");
        }
    }
    const int dim = cfg.space_box.dim();

    // [field]
    cfg.benchmark = ini.get_string("field", "benchmark");
    if (const auto sat = ini.opt_string("field", "saturation")) {
        if (*sat == "none") {
            cfg.saturation = std::nullopt;
        } else {
            const Entry& e = ini.require("field", "saturation");
            std::istringstream ss(e.value);
            double bound = 0.0;
            if (!(ss >> bound) || !(bound > 0.0)) {
                throw ConfigError(path, e.line,
                                  "saturation must be a positive number or 'none'");
            }
            cfg.saturation = Saturation{bound};
        }
    } else if (cfg.benchmark == "systemE") {
        cfg.saturation = Saturation{0.3};  // benchmark's published setting
    }

    // [parameters]
    const auto b0 = ini.get_doubles("parameters", "b0");
    cfg.b0.resize(b0.size());
    for (size_t i = 0; i < b0.size(); ++i) cfg.b0[i] = b0[i];

    ParamField probe = [&]() -> ParamField {
        try {
            return make_benchmark(cfg.benchmark, cfg.saturation);
        } catch (const InvalidArgument& e) {
            throw ConfigError(path, ini.section_line("field"), e.what());
        }
    }();
    if (probe.dim() != dim) {
        throw ConfigError(path, ini.section_line("field"),
                          "benchmark '" + cfg.benchmark + "' is " +
                              std::to_string(probe.dim()) +
                              "-dimensional but [space] has " +
                              std::to_string(dim) + " axes");
    }
    if (probe.param_count() != cfg.b0.size()) {
        throw ConfigError(path, ini.require("parameters", "b0").line,
                          "b0 needs " + std::to_string(probe.param_count()) +
                              " entries for benchmark '" + cfg.benchmark + "'");
    }

    // [target]
    if (ini.has_section("target")) {
        RegionSpec target;
        target.is_disk = false;
        target.box = read_box(ini, "target", dim);
        check_overlap(ini, "target", target.box, cfg.space_box,
                      ini.section_line("target"));
        target.rule = SelectRule::CenterIn;
        if (const auto rule = ini.opt_string("target", "rule")) {
            target.rule = parse_rule(ini, "target", *rule,
                                     ini.require("target", "rule").line);
        }
        cfg.target = std::move(target);
    }

    // [d0]
    if (ini.has_section("d0")) {
        RegionSpec d0;
        const std::string shape = ini.opt_string("d0", "shape").value_or("box");
        if (shape == "disk") {
            d0.is_disk = true;
            d0.center = ini.get_doubles("d0", "center");
            if (static_cast<int>(d0.center.size()) != dim) {
                throw ConfigError(path, ini.require("d0", "center").line,
                                  "[d0] center must have one entry per axis");
            }
            d0.radius = ini.get_double("d0", "radius");
            if (!(d0.radius > 0.0)) {
                throw ConfigError(path, ini.require("d0", "radius").line,
                                  "[d0] radius must be positive");
            }
            Box bounding;
            for (int k = 0; k < dim; ++k) {
                bounding.lo.push_back(d0.center[k] - d0.radius);
                bounding.hi.push_back(d0.center[k] + d0.radius);
            }
            check_overlap(ini, "d0", bounding, cfg.space_box,
                          ini.section_line("d0"));
        } else if (shape == "box") {
            d0.is_disk = false;
            d0.box = read_box(ini, "d0", dim);
            check_overlap(ini, "d0", d0.box, cfg.space_box,
                          ini.section_line("d0"));
        } else {
            throw ConfigError(path, ini.require("d0", "shape").line,
                              "[d0] shape must be box or disk");
        }
        d0.rule = SelectRule::Intersects;
        if (const auto rule = ini.opt_string("d0", "rule")) {
            d0.rule = parse_rule(ini, "d0", *rule, ini.require("d0", "rule").line);
        }
        cfg.d0 = std::move(d0);
    }

    // [optimize]
    if (const auto mode = ini.opt_string("optimize", "mode")) {
        if (*mode == "maximize_doa") {
            cfg.mode = RunMode::MaximizeDoa;
        } else if (*mode == "minimize_time") {
            cfg.mode = RunMode::MinimizeTime;
        } else if (*mode == "maximize_coverage") {
            cfg.mode = RunMode::MaximizeCoverage;
        } else {
            throw ConfigError(path, ini.require("optimize", "mode").line,
                              "unknown mode '" + *mode +
                                  "' (use maximize_doa | minimize_time | "
                                  "maximize_coverage)");
        }
    }
    if (const auto v = ini.opt_double("optimize", "alpha")) cfg.opt.alpha = *v;
    if (const auto v = ini.opt_double("optimize", "gamma")) cfg.opt.gamma = *v;
    if (const auto v = ini.opt_doubles("optimize", "gamma_schedule")) {
        cfg.opt.gamma_schedule = *v;
    }
    if (const auto v = ini.opt_double("optimize", "tol")) cfg.opt.tol = *v;
    if (const auto v = ini.opt_long("optimize", "max_iters")) {
        cfg.opt.max_iters = static_cast<int>(*v);
    }
    if (const auto v = ini.opt_string("optimize", "path")) {
        if (*v == "standard") {
            cfg.opt.path = DiscretizationPath::Standard;
        } else if (*v == "affine") {
            cfg.opt.path = DiscretizationPath::Affine;
        } else {
            throw ConfigError(path, ini.require("optimize", "path").line,
                              "unknown path '" + *v + "' (use standard | affine)");
        }
    }
    if (const auto v = ini.opt_bool("optimize", "backtracking")) {
        cfg.opt.backtracking = *v;
    }
    if (const auto v = ini.opt_double("optimize", "coverage_slack")) {
        cfg.opt.coverage_slack = *v;
    }
    if (!(cfg.opt.alpha >= 0.0)) {
        throw ConfigError(path, ini.require("optimize", "alpha").line,
                          "alpha must be >= 0");
    }
    if (!(cfg.opt.gamma > 0.0)) {
        throw ConfigError(path, ini.require("optimize", "gamma").line,
                          "gamma must be positive");
    }
    if (!(cfg.opt.tol > 0.0)) {
        throw ConfigError(path, ini.require("optimize", "tol").line,
                          "tol must be positive");
    }
    if (cfg.opt.max_iters < 0) {
        throw ConfigError(path, ini.require("optimize", "max_iters").line,
                          "max_iters must be >= 0");
    }
    if (cfg.mode && *cfg.mode != RunMode::MaximizeDoa && !cfg.d0) {
        throw ConfigError(path, ini.section_line("optimize"),
                          "mode requires a [d0] section");
    }

    // [generator]
    if (const auto v = ini.opt_long("generator", "quadrature")) {
        cfg.quadrature_points = static_cast<int>(*v);
    }
    if (cfg.quadrature_points < 1 || cfg.quadrature_points > 5) {
        throw ConfigError(path, ini.require("generator", "quadrature").line,
                          "quadrature must be in [1, 5]");
    }

    // [solve]
    if (const auto v = ini.opt_double("solve", "epsilon")) cfg.solve_epsilon = *v;
    if (const auto v = ini.opt_double("solve", "floor")) cfg.solve_floor = *v;
    if (const auto v = ini.opt_string("solve", "solver")) cfg.solver = *v;
    if (cfg.solver != "lu") {
        throw ConfigError(path, ini.require("solve", "solver").line,
                          "unknown solver '" + cfg.solver + "' (use lu)");
    }
    if (!(cfg.solve_epsilon >= 0.0)) {
        throw ConfigError(path, ini.require("solve", "epsilon").line,
                          "epsilon must be >= 0");
    }
    if (!(cfg.solve_floor > 0.0)) {
        throw ConfigError(path, ini.require("solve", "floor").line,
                          "floor must be positive");
    }

    // [oracle]
    if (const auto v = ini.opt_double("oracle", "step")) cfg.oracle_step = *v;
    if (const auto v = ini.opt_double("oracle", "t_max")) cfg.oracle_t_max = *v;
    if (const auto v = ini.opt_long("oracle", "subsamples")) {
        cfg.oracle_subsamples = static_cast<int>(*v);
    }
    if (!(cfg.oracle_step > 0.0)) {
        throw ConfigError(path, ini.require("oracle", "step").line,
                          "step must be positive");
    }
    if (!(cfg.oracle_t_max > 0.0)) {
        throw ConfigError(path, ini.require("oracle", "t_max").line,
                          "t_max must be positive");
    }
    if (cfg.oracle_subsamples < 1) {
        throw ConfigError(path, ini.require("oracle", "subsamples").line,
                          "subsamples must be >= 1");
    }

    // [output]
    if (const auto v = ini.opt_string("output", "dir")) cfg.output_dir = *v;

    ini.check_all_used({"space", "field", "parameters", "target", "d0",
                        "optimize", "generator", "solve", "oracle", "output"});
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path, 0, "cannot open config file");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str(), path);
}

Grid RunConfig::make_grid() const {
    return build_grid(space_box, resolution);
}

ParamField RunConfig::make_field() const {
    return make_benchmark(benchmark, saturation);
}

QuadratureRule RunConfig::make_quadrature() const {
    return QuadratureRule::gauss_legendre(quadrature_points);
}

CellSet RunConfig::select_target(const Grid& grid) const {
    if (!target) {
        throw ConfigError(path, 0, "this command needs a [target] section");
    }
    CellSet set = select_region(grid, *target, "target");
    if (set.empty()) {
        throw ConfigError(path, 0,
                          "[target] selection is empty on the configured grid");
    }
    return set;
}

CellSet RunConfig::select_d0(const Grid& grid) const {
    if (!d0) throw ConfigError(path, 0, "this command needs a [d0] section");
    CellSet set = select_region(grid, *d0, "d0");
    if (set.empty()) {
        throw ConfigError(path, 0, "[d0] selection is empty on the configured grid");
    }
    return set;
}

SimConfig RunConfig::make_sim_config() const {
    if (!target) {
        throw ConfigError(path, 0, "this command needs a [target] section");
    }
    SimConfig sim;
    sim.step = oracle_step;
    sim.t_max = oracle_t_max;
    sim.subsamples = oracle_subsamples;
    sim.domain = space_box;
    sim.target = target->box;
    return sim;
}

RunMode RunConfig::require_mode() const {
    if (!mode) {
        throw ConfigError(path, 0, "this command needs mode in [optimize]");
    }
    return *mode;
}

}  // namespace doaopt
