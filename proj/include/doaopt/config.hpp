#pragma once

#include <optional>
#include <string>

#include "doaopt/field.hpp"
#include "doaopt/generator.hpp"
#include "doaopt/grid.hpp"
#include "doaopt/optimize.hpp"
#include "doaopt/oracle.hpp"

namespace doaopt {

enum class RunMode {
    MaximizeDoa,
    MinimizeTime,
    MaximizeCoverage,  // DOA ascent with the volume sum restricted to d0
};

// Disk- or box-shaped region selection.
struct RegionSpec {
    bool is_disk = false;
    Box box;                     // when !is_disk
    std::vector<double> center;  // when is_disk
    double radius = 0.0;
    SelectRule rule = SelectRule::Intersects;
};

// Parsed, validated run configuration. Sections that a subcommand does
// not need may be absent; the accessors that need them raise ConfigError
// pointing at the config file.
struct RunConfig {
    std::string path;         // config file location (for messages)
    std::string text;         // raw bytes (for the provenance hash)

    Box space_box;
    std::vector<int> resolution;

    std::string benchmark;
    std::optional<Saturation> saturation;
    Eigen::VectorXd b0;

    std::optional<RegionSpec> target;
    std::optional<RegionSpec> d0;

    std::optional<RunMode> mode;
    OptConfig opt;

    int quadrature_points = 2;
    std::string solver = "lu";
    double solve_epsilon = 1e-6;  // sure-absorption threshold for a
    double solve_floor = 1e-12;   // reliability floor for a*

    double oracle_step = 1e-3;
    double oracle_t_max = 100.0;
    int oracle_subsamples = 1;

    std::string output_dir = "out";

    Grid make_grid() const;
    ParamField make_field() const;
    QuadratureRule make_quadrature() const;
    CellSet select_target(const Grid& grid) const;   // requires [target]
    CellSet select_d0(const Grid& grid) const;       // requires [d0]
    SimConfig make_sim_config() const;               // requires [target] box
    RunMode require_mode() const;                    // requires [optimize] mode
};

CellSet select_region(const Grid& grid, const RegionSpec& region,
                      std::string label);

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& text, const std::string& path);

}  // namespace doaopt
