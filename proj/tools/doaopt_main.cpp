#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "doaopt/config.hpp"
#include "doaopt/io.hpp"
#include "doaopt/optimize.hpp"
#include "doaopt/oracle.hpp"
#include "doaopt/sens.hpp"
#include "doaopt/solve.hpp"
#include "doaopt/threading.hpp"
#include "doaopt/version.hpp"

namespace fs = std::filesystem;
using namespace doaopt;

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<size_t>(v.size())};
}

// Guards an output directory against concurrent writers for the duration
// of one command.
class DirLock {
public:
    explicit DirLock(const fs::path& dir) : path_(dir / ".doaopt.lock") {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) {
            if (errno == EEXIST) {
                throw IoError("output directory is locked (remove " +
                              path_.string() + " if no other run is active)");
            }
            throw IoError("cannot create lockfile " + path_.string());
        }
    }
    ~DirLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(path_.c_str());
        }
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    fs::path path_;
    int fd_ = -1;
};

template <typename WriteFn>
void write_file(const fs::path& path, WriteFn&& fn) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    fn(os);
    os.flush();
    if (!os) throw IoError("failed while writing " + path.string());
}

struct FieldStats {
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    double mean = std::numeric_limits<double>::quiet_NaN();
    long finite = 0;
    long infinite = 0;
};

FieldStats field_stats(const CellField& field) {
    FieldStats s;
    double sum = 0.0;
    for (long i = 0; i < field.values.size(); ++i) {
        const double v = field.values[i];
        if (std::isfinite(v)) {
            s.min = std::min(s.min, v);
            s.max = std::max(s.max, v);
            sum += v;
            ++s.finite;
        } else {
            ++s.infinite;
        }
    }
    if (s.finite > 0) s.mean = sum / static_cast<double>(s.finite);
    return s;
}

void print_stats(const std::string& name, const CellField& field) {
    const FieldStats s = field_stats(field);
    std::cout << name << ": min=" << s.min << " max=" << s.max
              << " mean=" << s.mean;
    if (s.infinite > 0) std::cout << " inf_cells=" << s.infinite;
    std::cout << '\n';
}

int cmd_assemble(const RunConfig& cfg, const fs::path& out,
                 const std::string& provenance) {
    const Grid grid = cfg.make_grid();
    const ParamField field = cfg.make_field();
    const Generator gen = assemble(grid, field, as_span(cfg.b0),
                                   cfg.make_quadrature());
    write_file(out / "generator.gen",
               [&](std::ostream& os) { write_generator(os, gen, provenance); });
    std::cout << "generator: n=" << gen.size() << " nnz=" << gen.nnz()
              << " max_leak=" << gen.leak.maxCoeff() << '\n';
    std::cout << "wrote " << (out / "generator.gen").string() << '\n';
    return 0;
}

int cmd_solve(const RunConfig& cfg, const fs::path& out,
              const std::string& provenance, const std::string& which) {
    const Grid grid = cfg.make_grid();
    const ParamField field = cfg.make_field();
    const Generator gen = assemble(grid, field, as_span(cfg.b0),
                                   cfg.make_quadrature());
    const CellSet target = cfg.select_target(grid);
    const AbsorptionProblem problem(gen, target);

    CellField result;
    if (which == "p") {
        result = absorption_probabilities(problem);
        const double coverage = grid.cell_volume() * result.values.sum();
        const double f = coverage - cfg.opt.alpha * cfg.b0.squaredNorm();
        std::cout << "sum_m_p=" << coverage << " f=" << f << '\n';
    } else if (which == "t") {
        result = termination_times(problem);
    } else if (which == "a") {
        const FactorizedRestriction fact(problem);
        const CellField p = absorption_probabilities(fact);
        result = absorption_times(fact, p, cfg.solve_epsilon);
        bool any_finite_off_target = false;
        for (long i = 0; i < result.values.size(); ++i) {
            if (std::isfinite(result.values[i]) && !target.contains(i)) {
                any_finite_off_target = true;
                break;
            }
        }
        if (!any_finite_off_target && grid.cell_count() > target.size()) {
            std::cerr << "warning: absorption time is infinite on every "
                         "non-target cell (no almost-sure absorption at "
                         "epsilon=" << cfg.solve_epsilon << ")\n";
        }
    } else if (which == "h") {
        result = kruzkov_values(problem);
    } else if (which == "astar") {
        const CellField p = absorption_probabilities(problem);
        bool ill = false;
        result = conditioned_times(problem, p, cfg.solve_floor, &ill);
        if (ill) {
            std::cerr << "warning: conditioned times are ill-conditioned "
                         "(absorption probability below 1e-8 inside the "
                         "reliable set)\n";
        }
    } else {
        throw InvalidArgument("unknown field selector: " + which);
    }

    print_stats(which, result);
    const fs::path path = out / (which + ".field");
    write_file(path,
               [&](std::ostream& os) { write_field(os, result, provenance); });
    std::cout << "wrote " << path.string() << '\n';
    return 0;
}

void write_opt_outputs(const fs::path& out, const std::string& provenance,
                       const OptTrace& trace, const Eigen::VectorXd& b,
                       const CellField* p, const CellField* t) {
    write_file(out / "trace.csv",
               [&](std::ostream& os) { write_trace(os, trace, provenance); });
    write_file(out / "b_final.txt",
               [&](std::ostream& os) { write_parameters(os, b, provenance); });
    if (p) {
        write_file(out / "p_final.field",
                   [&](std::ostream& os) { write_field(os, *p, provenance); });
    }
    if (t) {
        write_file(out / "t_final.field",
                   [&](std::ostream& os) { write_field(os, *t, provenance); });
    }
}

int cmd_optimize(const RunConfig& cfg, const fs::path& out,
                 const std::string& provenance) {
    const Grid grid = cfg.make_grid();
    const ParamField field = cfg.make_field();
    const CellSet target = cfg.select_target(grid);
    const RunMode mode = cfg.require_mode();

    OptResult result;
    try {
        switch (mode) {
        case RunMode::MaximizeDoa:
            result = maximize_doa(grid, field, target, cfg.opt, cfg.b0);
            break;
        case RunMode::MaximizeCoverage: {
            const CellSet d0 = cfg.select_d0(grid);
            result = maximize_doa(grid, field, target, cfg.opt, cfg.b0, &d0);
            break;
        }
        case RunMode::MinimizeTime: {
            const CellSet d0 = cfg.select_d0(grid);
            result = minimize_time(grid, field, target, d0, cfg.opt, cfg.b0);
            break;
        }
        }
    } catch (const OptInterrupted& e) {
        write_opt_outputs(out, provenance, e.trace,
                          e.trace.records.empty()
                              ? cfg.b0
                              : e.trace.records.back().b,
                          nullptr, nullptr);
        std::cerr << "error: " << e.what() << " (trace truncated after "
                  << e.trace.records.size() << " iterates)\n";
        return 3;
    }

    if (result.trace.doa_precondition_warning) {
        std::cerr << "warning: at b0 no cell outside the target is almost "
                     "surely absorbed; the volume functional may start "
                     "degenerate\n";
    }
    write_opt_outputs(out, provenance, result.trace, result.b, &result.p,
                      result.t ? &*result.t : nullptr);
    const OptRecord& last = result.trace.records.back();
    std::cout << "final: k=" << last.k << " f=" << last.f
              << " grad_norm=" << last.grad_norm;
    if (mode == RunMode::MinimizeTime) std::cout << " g=" << last.g;
    std::cout << " assemblies=" << result.trace.assemblies << '\n';
    std::cout << "b_final:";
    for (long i = 0; i < result.b.size(); ++i) std::cout << ' ' << result.b[i];
    std::cout << '\n';
    std::cout << "wrote " << (out / "trace.csv").string() << '\n';
    return 0;
}

int cmd_oracle(const RunConfig& cfg, const fs::path& out,
               const std::string& provenance) {
    const Grid grid = cfg.make_grid();
    const ParamField field = cfg.make_field();
    cfg.select_target(grid);  // reject selections that are empty on this grid
    const SimConfig sim = cfg.make_sim_config();
    const OracleFields fields = oracle_fields(grid, field, as_span(cfg.b0), sim);
    print_stats("indicator", fields.indicator);
    print_stats("tau", fields.tau);
    write_file(out / "indicator.field", [&](std::ostream& os) {
        write_field(os, fields.indicator, provenance);
    });
    write_file(out / "tau.field", [&](std::ostream& os) {
        write_field(os, fields.tau, provenance);
    });
    std::cout << "wrote " << (out / "indicator.field").string() << " and "
              << (out / "tau.field").string() << '\n';
    return 0;
}

bool bit_identical(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(),
                       sizeof(double) * static_cast<size_t>(a.size())) == 0;
}

int cmd_roundtrip(const RunConfig& cfg, const fs::path& out,
                  const std::string& provenance) {
    const Grid grid = cfg.make_grid();
    const ParamField field = cfg.make_field();
    const Generator gen = assemble(grid, field, as_span(cfg.b0),
                                   cfg.make_quadrature());
    const fs::path path = out / "roundtrip.gen";
    write_file(path,
               [&](std::ostream& os) { write_generator(os, gen, provenance); });
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot reopen " + path.string());
    const Generator reread = read_generator(is, grid);

    const CellSet target = cfg.select_target(grid);
    const AbsorptionProblem direct(gen, target);
    const AbsorptionProblem rounded(reread, target);
    const CellField p1 = absorption_probabilities(direct);
    const CellField p2 = absorption_probabilities(rounded);
    const CellField t1 = termination_times(direct);
    const CellField t2 = termination_times(rounded);

    std::ostringstream s1, s2;
    write_field(s1, p1, provenance);
    write_field(s1, t1, provenance);
    write_field(s2, p2, provenance);
    write_field(s2, t2, provenance);

    if (!bit_identical(p1.values, p2.values) ||
        !bit_identical(t1.values, t2.values) || s1.str() != s2.str()) {
        std::cerr << "roundtrip FAILED: fields differ after generator "
                     "write/read\n";
        return 1;
    }
    std::cout << "roundtrip OK: p and t bit-identical through " << path.string()
              << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kToolName) +
                 " - absorption statistics and parameter optimization for "
                 "grid-discretized flows"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::string which = "p";
    int threads = 1;
    long seed = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration file")
            ->required();
        cmd->add_option("--out", out_override,
                        "output directory (overrides [output] dir)");
        cmd->add_option("--threads", threads, "worker thread cap")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--seed", seed,
                        "seed for sampling-based diagnostics (unused by the "
                        "deterministic pipeline)");
        return cmd;
    };

    CLI::App* assemble_cmd =
        add_common(app.add_subcommand("assemble", "write the generator file"));
    CLI::App* solve_cmd = add_common(
        app.add_subcommand("solve", "solve one absorption quantity"));
    solve_cmd->add_option("--which", which, "field to compute")
        ->check(CLI::IsMember({"p", "t", "a", "h", "astar"}));
    CLI::App* optimize_cmd = add_common(
        app.add_subcommand("optimize", "run the configured gradient loop"));
    CLI::App* oracle_cmd = add_common(app.add_subcommand(
        "oracle", "integrate trajectories for reference fields"));
    CLI::App* roundtrip_cmd = add_common(app.add_subcommand(
        "roundtrip-check", "verify generator file round trip"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    (void)seed;

    try {
        set_max_threads(threads);
        const RunConfig cfg = load_run_config(config_path);
        const fs::path out =
            out_override.empty() ? fs::path(cfg.output_dir) : fs::path(out_override);
        std::error_code ec;
        fs::create_directories(out, ec);
        if (ec) throw IoError("cannot create output directory " + out.string());
        const DirLock lock(out);
        const std::string provenance = provenance_comment(cfg.text);

        if (assemble_cmd->parsed()) return cmd_assemble(cfg, out, provenance);
        if (solve_cmd->parsed()) return cmd_solve(cfg, out, provenance, which);
        if (optimize_cmd->parsed()) return cmd_optimize(cfg, out, provenance);
        if (oracle_cmd->parsed()) return cmd_oracle(cfg, out, provenance);
        if (roundtrip_cmd->parsed()) return cmd_roundtrip(cfg, out, provenance);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NotAffine& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ConstraintViolated& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const SingularSystem& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ResidualFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
