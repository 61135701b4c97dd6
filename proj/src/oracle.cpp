#include "doaopt/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "doaopt/threading.hpp"

namespace doaopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Cell index of x on the grid, or -1 when x is outside the grid box.
long locate_cell(const Grid& grid, std::span<const double> x) {
    long idx = 0;
    long stride = grid.cell_count();
    for (int k = 0; k < grid.dim(); ++k) {
        const double rel = (x[k] - grid.box().lo[k]) / grid.width(k);
        if (rel < 0.0 || x[k] > grid.box().hi[k]) return -1;
        long i = static_cast<long>(rel);
        if (i >= grid.resolution()[k]) i = grid.resolution()[k] - 1;
        stride /= grid.resolution()[k];
        idx += i * stride;
    }
    return idx;
}

struct TargetTest {
    const SimConfig* config;
    const Grid* grid;

    bool in_target(std::span<const double> x, Box* entered_box) const {
        if (config->target_cells) {
            const long cell = locate_cell(*grid, x);
            if (cell < 0 || !config->target_cells->contains(cell)) return false;
            if (entered_box) *entered_box = grid->cell_box(cell);
            return true;
        }
        if (!config->target.contains(x)) return false;
        if (entered_box) *entered_box = config->target;
        return true;
    }
};

// First parameter along the segment prev -> next at which the (closed)
// box is entered, clamped into [0, 1]. next is known to lie inside.
double entry_fraction(std::span<const double> prev,
                      std::span<const double> next, const Box& box) {
    double enter = 0.0;
    for (int k = 0; k < box.dim(); ++k) {
        const double d = next[k] - prev[k];
        if (d == 0.0) continue;
        const double a = (box.lo[k] - prev[k]) / d;
        const double b = (box.hi[k] - prev[k]) / d;
        enter = std::max(enter, std::min(a, b));
    }
    return std::clamp(enter, 0.0, 1.0);
}

struct Rk4 {
    const ParamField* field;
    std::span<const double> b;
    int d;
    std::vector<double> k1, k2, k3, k4, tmp;

    explicit Rk4(const ParamField& f, std::span<const double> b_)
        : field(&f), b(b_), d(f.dim()), k1(d), k2(d), k3(d), k4(d), tmp(d) {}

    // One step x -> x + h * rk4(x); returns false when any stage or the
    // result is non-finite.
    bool step(std::vector<double>& x, double h) {
        field->eval(x, b, k1);
        for (int i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
        field->eval(tmp, b, k2);
        for (int i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
        field->eval(tmp, b, k3);
        for (int i = 0; i < d; ++i) tmp[i] = x[i] + h * k3[i];
        field->eval(tmp, b, k4);
        bool finite = true;
        for (int i = 0; i < d; ++i) {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            finite = finite && std::isfinite(x[i]);
        }
        return finite;
    }
};

void validate_sim_config(const SimConfig& config, int dim) {
    if (!(config.step > 0.0)) throw InvalidArgument("simulation step must be positive");
    if (!(config.t_max > 0.0)) throw InvalidArgument("t_max must be positive");
    if (config.subsamples < 1) throw InvalidArgument("subsamples must be >= 1");
    validate_box(config.domain, "simulation domain");
    if (config.domain.dim() != dim) {
        throw InvalidArgument("simulation domain dimension mismatch");
    }
    if (!config.target_cells) {
        validate_box(config.target, "simulation target");
        if (config.target.dim() != dim) {
            throw InvalidArgument("simulation target dimension mismatch");
        }
    }
}

}  // namespace

SimOutcome simulate_point(const ParamField& field, std::span<const double> b,
                          std::span<const double> x0, const SimConfig& config,
                          const Grid* grid) {
    validate_sim_config(config, field.dim());
    if (config.target_cells && grid == nullptr) {
        throw InvalidArgument("cell-set targets require the grid");
    }
    if (static_cast<int>(x0.size()) != field.dim()) {
        throw InvalidArgument("start point dimension mismatch");
    }

    const TargetTest target{&config, grid};
    SimOutcome out;
    Box entered;
    if (target.in_target(x0, nullptr)) {
        out.status = SimStatus::Absorbed;
        out.tau = 0.0;
        return out;
    }

    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> prev(x);
    Rk4 stepper(field, b);
    const double h = config.step;
    for (double t = 0.0; t < config.t_max; t += h) {
        prev = x;
        if (!stepper.step(x, h)) {
            out.status = SimStatus::Escaped;
            out.tau = kInf;
            out.blew_up = true;
            return out;
        }
        if (target.in_target(x, &entered)) {
            out.status = SimStatus::Absorbed;
            out.tau = t + h * entry_fraction(prev, x, entered);
            return out;
        }
        if (!config.domain.contains(x)) {
            out.status = SimStatus::Escaped;
            out.tau = kInf;
            return out;
        }
    }
    out.status = SimStatus::Timeout;
    out.tau = kInf;
    return out;
}

OracleFields oracle_fields(const Grid& grid, const ParamField& field,
                           std::span<const double> b, const SimConfig& config) {
    validate_sim_config(config, field.dim());
    if (grid.dim() != field.dim()) {
        throw InvalidArgument("grid dimension does not match field");
    }

    const int d = grid.dim();
    const int s = config.subsamples;
    long starts_per_cell = 1;
    for (int k = 0; k < d; ++k) starts_per_cell *= s;

    OracleFields out;
    out.indicator.grid = grid;
    out.indicator.tag = FieldTag::Indicator;
    out.indicator.values = Eigen::VectorXd::Zero(grid.cell_count());
    out.tau.grid = grid;
    out.tau.tag = FieldTag::Time;
    out.tau.values = Eigen::VectorXd::Constant(grid.cell_count(), kInf);

    // Copy the parameters so worker threads never share caller memory.
    const std::vector<double> b_copy(b.begin(), b.end());

    parallel_for(grid.cell_count(), [&](long cell) {
        const Box cb = grid.cell_box(cell);
        std::vector<double> x0(d);
        std::vector<int> idx(d, 0);
        long absorbed = 0;
        double tau_sum = 0.0;
        for (long point = 0; point < starts_per_cell; ++point) {
            for (int k = 0; k < d; ++k) {
                x0[k] = cb.lo[k] +
                        (cb.hi[k] - cb.lo[k]) * (idx[k] + 0.5) / s;
            }
            const SimOutcome sim =
                simulate_point(field, b_copy, x0, config, &grid);
            if (sim.status == SimStatus::Absorbed) {
                ++absorbed;
                tau_sum += sim.tau;
            }
            for (int k = d - 1; k >= 0; --k) {
                if (++idx[k] < s) break;
                idx[k] = 0;
            }
        }
        out.indicator.values[cell] =
            static_cast<double>(absorbed) / static_cast<double>(starts_per_cell);
        if (absorbed > 0) out.tau.values[cell] = tau_sum / absorbed;
    }, field.thread_safe());

    return out;
}

}  // namespace doaopt
