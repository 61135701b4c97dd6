#include "doaopt/field.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace doaopt {

ParamField::ParamField(int dim, int param_count, FieldFn eval,
                       FieldPartialFn partial,
                       std::optional<AffineParts> affine, bool thread_safe)
    : dim_(dim), param_count_(param_count), eval_(std::move(eval)),
      partial_(std::move(partial)), affine_(std::move(affine)),
      thread_safe_(thread_safe) {
    if (dim_ < 1) throw InvalidArgument("field dimension must be >= 1");
    if (param_count_ < 0) throw InvalidArgument("parameter count must be >= 0");
    if (!eval_ || !partial_) throw InvalidArgument("field callbacks must be set");
    if (affine_ && static_cast<int>(affine_->components.size()) != param_count_) {
        throw InvalidArgument("affine decomposition needs one component per parameter");
    }
}

void ParamField::eval(std::span<const double> x, std::span<const double> b,
                      std::span<double> out) const {
    if (static_cast<int>(x.size()) != dim_ || static_cast<int>(out.size()) != dim_) {
        throw InvalidArgument("field evaluation: state dimension mismatch");
    }
    if (static_cast<int>(b.size()) != param_count_) {
        throw InvalidArgument("field evaluation: parameter dimension mismatch");
    }
    eval_(x, b, out);
}

void ParamField::eval_partial(std::span<const double> x,
                              std::span<const double> b, int l,
                              std::span<double> out) const {
    if (static_cast<int>(x.size()) != dim_ || static_cast<int>(out.size()) != dim_) {
        throw InvalidArgument("field derivative: state dimension mismatch");
    }
    if (static_cast<int>(b.size()) != param_count_) {
        throw InvalidArgument("field derivative: parameter dimension mismatch");
    }
    if (l < 0 || l >= param_count_) {
        throw InvalidArgument("field derivative: parameter index out of range");
    }
    partial_(x, b, l, out);
}

namespace {

void drift(std::span<const double> x, std::span<double> out) {
    const double x1 = x[0];
    const double x2 = x[1];
    const double s = 3.0 * (x1 * x1 + x2 * x2);
    out[0] = s * (x1 + 2.0 * x2 + 3.0 * x2 * x2 - 50.0 * x2 * x2 * x2 * x2);
    out[1] = s * (2.0 * x1 + 3.0 * x1 * x1 + x2);
}

// Diagonal gain entries d(x) for the two benchmarks.
using DiagFn = std::array<double, 2> (*)(std::span<const double>);

std::array<double, 2> diag_state(std::span<const double> x) {
    return {-1.0, -1.0 - 2.0 * x[1]};
}

std::array<double, 2> diag_const(std::span<const double>) {
    return {-1.0, -0.1};
}

// v(x; B) = drift(x) + clamp(diag(d(x)) B x), b row-major in B.
ParamField make_matrix_gain_field(DiagFn diag,
                                  std::optional<Saturation> saturation) {
    if (saturation && !(saturation->bound > 0.0)) {
        throw InvalidArgument("saturation bound must be positive");
    }

    FieldFn eval = [diag, saturation](std::span<const double> x,
                                      std::span<const double> b,
                                      std::span<double> out) {
        drift(x, out);
        const auto d = diag(x);
        for (int i = 0; i < 2; ++i) {
            double vc = d[i] * (b[2 * i] * x[0] + b[2 * i + 1] * x[1]);
            if (saturation) {
                vc = std::clamp(vc, -saturation->bound, saturation->bound);
            }
            out[i] += vc;
        }
    };

    FieldPartialFn partial = [diag, saturation](std::span<const double> x,
                                                std::span<const double> b,
                                                int l, std::span<double> out) {
        out[0] = 0.0;
        out[1] = 0.0;
        const int row = l / 2;
        const int col = l % 2;
        const auto d = diag(x);
        if (saturation) {
            const double vc =
                d[row] * (b[2 * row] * x[0] + b[2 * row + 1] * x[1]);
            // Clamped components carry zero derivative; on the clamp
            // boundary the inner one-sided derivative is used.
            if (std::abs(vc) > saturation->bound) return;
        }
        out[row] = d[row] * x[col];
    };

    std::optional<AffineParts> affine;
    if (!saturation) {
        AffineParts parts;
        parts.base = [](std::span<const double> x, std::span<double> out) {
            drift(x, out);
        };
        for (int l = 0; l < 4; ++l) {
            const int row = l / 2;
            const int col = l % 2;
            parts.components.push_back(
                [diag, row, col](std::span<const double> x, std::span<double> out) {
                    out[0] = 0.0;
                    out[1] = 0.0;
                    out[row] = diag(x)[row] * x[col];
                });
        }
        affine = std::move(parts);
    }

    return ParamField(2, 4, std::move(eval), std::move(partial),
                      std::move(affine), /*thread_safe=*/true);
}

}  // namespace

ParamField make_system_e(std::optional<Saturation> saturation) {
    return make_matrix_gain_field(&diag_state, saturation);
}

ParamField make_system_e_mod(std::optional<Saturation> saturation) {
    return make_matrix_gain_field(&diag_const, saturation);
}

// 1D diagnostic field v(x; b) = b_0, affine in b.
ParamField make_uniform_1d() {
    FieldFn eval = [](std::span<const double>, std::span<const double> b,
                      std::span<double> out) { out[0] = b[0]; };
    FieldPartialFn partial = [](std::span<const double>, std::span<const double>,
                                int, std::span<double> out) { out[0] = 1.0; };
    AffineParts affine;
    affine.base = [](std::span<const double>, std::span<double> out) {
        out[0] = 0.0;
    };
    affine.components.push_back(
        [](std::span<const double>, std::span<double> out) { out[0] = 1.0; });
    return ParamField(1, 1, std::move(eval), std::move(partial),
                      std::move(affine), true);
}

ParamField make_benchmark(const std::string& name,
                          std::optional<Saturation> saturation) {
    if (name == "systemE") return make_system_e(saturation);
    if (name == "systemEmod") return make_system_e_mod(saturation);
    if (name == "uniform1d") {
        if (saturation) {
            throw InvalidArgument("uniform1d does not support saturation");
        }
        return make_uniform_1d();
    }
    throw InvalidArgument("unknown benchmark field: " + name);
}

}  // namespace doaopt
