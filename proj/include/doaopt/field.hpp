#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "doaopt/errors.hpp"

namespace doaopt {

// v(x; b): writes the d velocity components into out.
using FieldFn = std::function<void(std::span<const double> x,
                                   std::span<const double> b,
                                   std::span<double> out)>;

// dv/db_l (x; b): writes the d components of the partial derivative.
using FieldPartialFn = std::function<void(std::span<const double> x,
                                          std::span<const double> b, int l,
                                          std::span<double> out)>;

// Velocity field with all parameters fixed.
using VelocityFn = std::function<void(std::span<const double> x,
                                      std::span<double> out)>;

// Decomposition v(x; b) = base(x) + sum_l |b_l| * components_{sign(b_l)}[l](x)
// available when the control enters linearly in b and is not clamped.
// components[l] evaluates v_c(x; e_l); the mirrored piece -v_c(x; e_l) is
// derived by negation.
struct AffineParts {
    VelocityFn base;
    std::vector<VelocityFn> components;
};

// Componentwise clamp of the control part to [-bound, bound].
struct Saturation {
    double bound;
};

// Parameter-dependent velocity field v(x; b), x in R^d, b in R^r.
class ParamField {
public:
    ParamField(int dim, int param_count, FieldFn eval, FieldPartialFn partial,
               std::optional<AffineParts> affine = std::nullopt,
               bool thread_safe = true);

    int dim() const { return dim_; }
    int param_count() const { return param_count_; }
    bool thread_safe() const { return thread_safe_; }

    void eval(std::span<const double> x, std::span<const double> b,
              std::span<double> out) const;
    void eval_partial(std::span<const double> x, std::span<const double> b,
                      int l, std::span<double> out) const;

    const std::optional<AffineParts>& affine_parts() const { return affine_; }

private:
    int dim_;
    int param_count_;
    FieldFn eval_;
    FieldPartialFn partial_;
    std::optional<AffineParts> affine_;
    bool thread_safe_;
};

// Planar benchmark with cubic/quintic drift and a state-dependent matrix
// gain, v(x; B) = v_u(x) + clamp(diag(-1, -1 - 2 x_2) B x). b is the
// row-major flattening of B (r = 4). Pass std::nullopt to disable the
// clamp; only then is an affine decomposition available.
ParamField make_system_e(std::optional<Saturation> saturation = Saturation{0.3});

// Same drift with constant gain matrix diag(-1, -0.1); affine in b when
// unsaturated.
ParamField make_system_e_mod(std::optional<Saturation> saturation = std::nullopt);

// 1D diagnostic field v(x; b) = b_0 (r = 1), affine in b.
ParamField make_uniform_1d();

// Benchmark registry used by the CLI: "systemE" | "systemEmod" | "uniform1d".
ParamField make_benchmark(const std::string& name,
                          std::optional<Saturation> saturation);

}  // namespace doaopt
