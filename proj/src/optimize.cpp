#include "doaopt/optimize.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace doaopt {

namespace {

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start).count();
}

void validate_config(const OptConfig& config) {
    if (!(config.gamma > 0.0)) throw InvalidArgument("gamma must be positive");
    for (double g : config.gamma_schedule) {
        if (!(g > 0.0)) throw InvalidArgument("gamma schedule must be positive");
    }
    if (!(config.tol > 0.0)) throw InvalidArgument("tol must be positive");
    if (config.max_iters < 0) throw InvalidArgument("max_iters must be >= 0");
    if (!(config.alpha >= 0.0)) throw InvalidArgument("alpha must be >= 0");
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<size_t>(v.size())};
}

const GeneratorBundle* prepare_bundle(const Grid& grid, const ParamField& field,
                                      const QuadratureRule& quad,
                                      const OptConfig& config,
                                      std::optional<GeneratorBundle>& storage,
                                      OptTrace& trace) {
    if (config.path != DiscretizationPath::Affine) return nullptr;
    storage = assemble_bundle(grid, field, quad);
    trace.assemblies += storage->assembly_count();
    return &*storage;
}

}  // namespace

OptResult maximize_doa(const Grid& grid, const ParamField& field,
                       const CellSet& target, const OptConfig& config,
                       const Eigen::VectorXd& b0, const CellSet* mass_region) {
    validate_config(config);
    if (b0.size() != field.param_count()) {
        throw InvalidArgument("b0 length does not match field parameter count");
    }
    const QuadratureRule quad =
        QuadratureRule::gauss_legendre(config.quadrature_points);

    OptResult result;
    std::optional<GeneratorBundle> bundle_storage;
    const GeneratorBundle* bundle = prepare_bundle(grid, field, quad, config,
                                                   bundle_storage, result.trace);

    Eigen::VectorXd b = b0;
    for (int k = 0;; ++k) {
        const auto start = std::chrono::steady_clock::now();
        DoaEvaluation ev;
        try {
            ev = evaluate_doa_objective(grid, field, as_span(b), target,
                                        config.alpha, quad, bundle, mass_region);
        } catch (const Error& e) {
            throw OptInterrupted(e.what(), std::move(result.trace));
        }
        result.trace.assemblies += ev.assemblies;

        if (k == 0) {
            // The ascent only has something to grow from when some cell
            // outside the target is already almost surely absorbed.
            bool any_sure = false;
            for (long cell = 0; cell < ev.p.values.size() && !any_sure; ++cell) {
                if (!target.contains(cell) && ev.p.values[cell] >= 1.0 - 1e-6) {
                    any_sure = true;
                }
            }
            result.trace.doa_precondition_warning = !any_sure;
        }

        const double grad_norm = ev.gradient.norm();
        OptRecord rec;
        rec.k = k;
        rec.b = b;
        rec.f = ev.f;
        rec.grad_norm = grad_norm;
        rec.g = std::numeric_limits<double>::quiet_NaN();
        rec.deadband = ev.deadband;
        rec.seconds = elapsed_seconds(start);
        result.trace.records.push_back(std::move(rec));

        if (k == config.max_iters || grad_norm < config.tol) {
            result.b = b;
            result.p = std::move(ev.p);
            break;
        }

        double gamma = config.step_size(k);
        Eigen::VectorXd next = b + gamma * ev.gradient;
        if (config.backtracking) {
            for (int halvings = 0; halvings < 30; ++halvings) {
                DoaEvaluation trial = evaluate_doa_objective(
                    grid, field, as_span(next), target, config.alpha, quad,
                    bundle, mass_region);
                result.trace.assemblies += trial.assemblies;
                if (trial.f >= ev.f) break;
                gamma *= 0.5;
                next = b + gamma * ev.gradient;
            }
        }
        b = std::move(next);
    }
    return result;
}

OptResult minimize_time(const Grid& grid, const ParamField& field,
                        const CellSet& target, const CellSet& d0,
                        const OptConfig& config, const Eigen::VectorXd& b0) {
    validate_config(config);
    if (b0.size() != field.param_count()) {
        throw InvalidArgument("b0 length does not match field parameter count");
    }
    const QuadratureRule quad =
        QuadratureRule::gauss_legendre(config.quadrature_points);

    OptResult result;
    std::optional<GeneratorBundle> bundle_storage;
    const GeneratorBundle* bundle = prepare_bundle(grid, field, quad, config,
                                                   bundle_storage, result.trace);

    const double d0_mass = grid.cell_volume() * d0.size();

    Eigen::VectorXd b = b0;
    for (int k = 0;; ++k) {
        const auto start = std::chrono::steady_clock::now();
        TimeEvaluation ev;
        try {
            ev = evaluate_time_objective(grid, field, as_span(b), target, d0,
                                         config.alpha, quad, bundle);
        } catch (const ConstraintViolated&) {
            throw;
        } catch (const Error& e) {
            throw OptInterrupted(e.what(), std::move(result.trace));
        }
        result.trace.assemblies += ev.assemblies;

        if (k == 0 && ev.g < (1.0 - config.coverage_slack) * d0_mass) {
            throw ConstraintViolated(
                "initial coverage of the start region is below the feasibility "
                "threshold; the start parameters do not absorb d0");
        }

        // Descent increment is subtracted from b, so the step lowers the
        // coverage g exactly when Dg . increment > 0; project that
        // component out.
        Eigen::VectorXd increment = ev.gradient;
        const double raw_norm = increment.norm();
        bool projected = false;
        const double coverage_drop = ev.coverage_gradient.dot(increment);
        if (coverage_drop > 0.0) {
            const double denom = ev.coverage_gradient.squaredNorm();
            if (denom > 0.0) {
                increment -= (coverage_drop / denom) * ev.coverage_gradient;
                projected = true;
            }
        }

        OptRecord rec;
        rec.k = k;
        rec.b = b;
        rec.f = ev.f;
        rec.grad_norm = increment.norm();
        rec.g = ev.g;
        rec.projected = projected;
        rec.deadband = ev.deadband;
        rec.seconds = elapsed_seconds(start);
        result.trace.records.push_back(std::move(rec));

        if (k == config.max_iters || raw_norm < config.tol) {
            result.b = b;
            result.p = std::move(ev.p);
            result.t = std::move(ev.t);
            break;
        }

        double gamma = config.step_size(k);
        Eigen::VectorXd next = b - gamma * increment;
        if (config.backtracking) {
            for (int halvings = 0; halvings < 30; ++halvings) {
                TimeEvaluation trial = evaluate_time_objective(
                    grid, field, as_span(next), target, d0, config.alpha, quad,
                    bundle);
                result.trace.assemblies += trial.assemblies;
                if (trial.f <= ev.f) break;
                gamma *= 0.5;
                next = b - gamma * increment;
            }
        }
        b = std::move(next);
    }
    return result;
}

}  // namespace doaopt
