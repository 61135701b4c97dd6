#include "doaopt/generator.hpp"

#include <array>
#include <cmath>
#include <cstdio>

#include "doaopt/threading.hpp"

namespace doaopt {

namespace {
constexpr int kMaxDim = 16;
}

QuadratureRule QuadratureRule::gauss_legendre(int points) {
    QuadratureRule rule;
    rule.points = points;
    switch (points) {
        case 1:
            rule.nodes = {0.0};
            rule.weights = {2.0};
            break;
        case 2:
            rule.nodes = {-0.5773502691896257, 0.5773502691896257};
            rule.weights = {1.0, 1.0};
            break;
        case 3:
            rule.nodes = {-0.7745966692414834, 0.0, 0.7745966692414834};
            rule.weights = {0.5555555555555556, 0.8888888888888889,
                            0.5555555555555556};
            break;
        case 4:
            rule.nodes = {-0.8611363115940526, -0.3399810435848563,
                          0.3399810435848563, 0.8611363115940526};
            rule.weights = {0.3478548451374538, 0.6521451548625461,
                            0.6521451548625461, 0.3478548451374538};
            break;
        case 5:
            rule.nodes = {-0.9061798459386640, -0.5384693101056831, 0.0,
                          0.5384693101056831, 0.9061798459386640};
            rule.weights = {0.2369268850561891, 0.4786286704993665,
                            0.5688888888888889, 0.4786286704993665,
                            0.2369268850561891};
            break;
        default:
            throw InvalidArgument("quadrature points must be in [1, 5]");
    }
    return rule;
}

namespace {

[[noreturn]] void throw_non_finite(std::span<const double> x, int axis) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "non-finite velocity component %d at quadrature node (%g",
                  axis, x.empty() ? 0.0 : x[0]);
    std::string msg(buf);
    for (size_t k = 1; k < x.size(); ++k) {
        std::snprintf(buf, sizeof(buf), ", %g", x[k]);
        msg += buf;
    }
    msg += ")";
    throw NonFiniteField(msg);
}

// Integrates the node functional over both faces of every axis of one
// cell. out holds 2*d values indexed axis*2 + side (side 0 = lower face,
// outer normal -e_axis; side 1 = upper face, +e_axis), each already
// divided by the cell volume.
template <typename NodeEval>
void cell_rates(const Grid& grid, const QuadratureRule& quad, long cell,
                NodeEval& ev, double* out) {
    const int d = grid.dim();
    const Box cb = grid.cell_box(cell);
    std::array<double, kMaxDim> x{};
    std::array<int, kMaxDim> idx{};
    const int q = quad.points;
    const int tangential = d - 1;

    for (int axis = 0; axis < d; ++axis) {
        double lo_total = 0.0;
        double hi_total = 0.0;
        idx.fill(0);
        while (true) {
            double w = 1.0;
            int t = 0;
            for (int k = 0; k < d; ++k) {
                if (k == axis) continue;
                const double mid = 0.5 * (cb.lo[k] + cb.hi[k]);
                const double half = 0.5 * (cb.hi[k] - cb.lo[k]);
                x[k] = mid + half * quad.nodes[idx[t]];
                w *= half * quad.weights[idx[t]];
                ++t;
            }
            const std::span<const double> xs(x.data(), d);
            x[axis] = cb.lo[axis];
            lo_total += w * ev(xs, axis, -1);
            x[axis] = cb.hi[axis];
            hi_total += w * ev(xs, axis, +1);

            if (tangential == 0) break;
            int p = 0;
            while (p < tangential) {
                if (++idx[p] < q) break;
                idx[p] = 0;
                ++p;
            }
            if (p == tangential) break;
        }
        out[axis * 2 + 0] = lo_total / grid.cell_volume();
        out[axis * 2 + 1] = hi_total / grid.cell_volume();
    }
}

template <typename Factory>
std::vector<double> compute_rates(const Grid& grid, const QuadratureRule& quad,
                                  bool threads_ok, Factory&& factory) {
    const int d = grid.dim();
    std::vector<double> rates(static_cast<size_t>(grid.cell_count()) * 2 * d);
    parallel_for(grid.cell_count(), [&](long cell) {
        auto ev = factory();
        cell_rates(grid, quad, cell, ev, &rates[static_cast<size_t>(cell) * 2 * d]);
    }, threads_ok);
    return rates;
}

// rates -> sparse matrix (+ leak when requested). The diagonal always
// carries minus the full outflow so column sums equal -leak exactly.
Eigen::SparseMatrix<double> build_matrix(const Grid& grid,
                                         const std::vector<double>& rates,
                                         Eigen::VectorXd* leak) {
    const int d = grid.dim();
    const long n = grid.cell_count();
    if (leak) *leak = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(n) * (2 * d + 1));
    for (long cell = 0; cell < n; ++cell) {
        double diag = 0.0;
        for (int axis = 0; axis < d; ++axis) {
            for (int s = 0; s < 2; ++s) {
                const double r = rates[static_cast<size_t>(cell) * 2 * d + axis * 2 + s];
                diag -= r;
                const long nb = grid.neighbor(cell, axis, s == 0 ? -1 : +1);
                if (nb == kBoundary) {
                    if (leak) (*leak)[cell] += r;
                } else if (r != 0.0) {
                    trips.emplace_back(static_cast<int>(nb), static_cast<int>(cell), r);
                }
            }
        }
        if (diag != 0.0) {
            trips.emplace_back(static_cast<int>(cell), static_cast<int>(cell), diag);
        }
    }
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(trips.begin(), trips.end());
    m.makeCompressed();
    return m;
}

void check_common(const Grid& grid, const QuadratureRule& quad) {
    if (grid.dim() > kMaxDim) throw InvalidArgument("grid dimension too large");
    if (quad.points < 1 ||
        static_cast<int>(quad.nodes.size()) != quad.points ||
        static_cast<int>(quad.weights.size()) != quad.points) {
        throw InvalidArgument("malformed quadrature rule");
    }
}

struct UpwindEval {
    const VelocityFn* vel;
    int d;
    std::array<double, kMaxDim> buf{};

    double operator()(std::span<const double> x, int axis, int sign) {
        (*vel)(x, std::span<double>(buf.data(), d));
        const double vn = sign > 0 ? buf[axis] : -buf[axis];
        if (!std::isfinite(vn)) throw_non_finite(x, axis);
        return vn > 0.0 ? vn : 0.0;
    }
};

struct DirectionalEval {
    const ParamField* field;
    std::span<const double> b;
    int l;
    int d;
    std::array<double, kMaxDim> v{};
    std::array<double, kMaxDim> dv{};

    double operator()(std::span<const double> x, int axis, int sign) {
        field->eval(x, b, std::span<double>(v.data(), d));
        field->eval_partial(x, b, l, std::span<double>(dv.data(), d));
        const double vn = sign > 0 ? v[axis] : -v[axis];
        const double dvn = sign > 0 ? dv[axis] : -dv[axis];
        if (!std::isfinite(vn) || !std::isfinite(dvn)) throw_non_finite(x, axis);
        return vn >= 0.0 ? dvn : 0.0;
    }
};

}  // namespace

Generator assemble_velocity(const Grid& grid, const VelocityFn& velocity,
                            const QuadratureRule& quad, bool thread_safe) {
    check_common(grid, quad);
    const int d = grid.dim();
    const auto rates = compute_rates(grid, quad, thread_safe, [&]() {
        return UpwindEval{&velocity, d};
    });
    Generator gen;
    gen.grid = grid;
    gen.matrix = build_matrix(grid, rates, &gen.leak);
    return gen;
}

Generator assemble(const Grid& grid, const ParamField& field,
                   std::span<const double> b, const QuadratureRule& quad) {
    if (field.dim() != grid.dim()) {
        throw InvalidArgument("field dimension does not match grid");
    }
    if (static_cast<int>(b.size()) != field.param_count()) {
        throw InvalidArgument("parameter vector length does not match field");
    }
    const VelocityFn velocity = [&field, b](std::span<const double> x,
                                            std::span<double> out) {
        field.eval(x, b, out);
    };
    return assemble_velocity(grid, velocity, quad, field.thread_safe());
}

Eigen::SparseMatrix<double> assemble_directional(const Grid& grid,
                                                 const ParamField& field,
                                                 std::span<const double> b,
                                                 int l,
                                                 const QuadratureRule& quad) {
    check_common(grid, quad);
    if (field.dim() != grid.dim()) {
        throw InvalidArgument("field dimension does not match grid");
    }
    if (static_cast<int>(b.size()) != field.param_count()) {
        throw InvalidArgument("parameter vector length does not match field");
    }
    if (l < 0 || l >= field.param_count()) {
        throw InvalidArgument("parameter index out of range");
    }
    const int d = grid.dim();
    const auto rates = compute_rates(grid, quad, field.thread_safe(), [&]() {
        return DirectionalEval{&field, b, l, d};
    });
    return build_matrix(grid, rates, nullptr);
}

GeneratorBundle assemble_bundle(const Grid& grid, const ParamField& field,
                                const QuadratureRule& quad) {
    const auto& parts = field.affine_parts();
    if (!parts) {
        throw NotAffine("field has no affine decomposition in b");
    }
    GeneratorBundle bundle;
    bundle.base = assemble_velocity(grid, parts->base, quad, field.thread_safe());
    bundle.plus.reserve(parts->components.size());
    bundle.minus.reserve(parts->components.size());
    for (const auto& component : parts->components) {
        bundle.plus.push_back(
            assemble_velocity(grid, component, quad, field.thread_safe()));
        const VelocityFn negated = [&component](std::span<const double> x,
                                                std::span<double> out) {
            component(x, out);
            for (auto& v : out) v = -v;
        };
        bundle.minus.push_back(
            assemble_velocity(grid, negated, quad, field.thread_safe()));
    }
    return bundle;
}

Generator combine_affine(const GeneratorBundle& bundle,
                         std::span<const double> b) {
    const int r = bundle.param_count();
    if (static_cast<int>(b.size()) != r) {
        throw InvalidArgument("parameter vector length does not match bundle");
    }
    Generator out;
    out.grid = bundle.base.grid;
    out.matrix = bundle.base.matrix;
    out.leak = bundle.base.leak;
    for (int l = 0; l < r; ++l) {
        const double c = std::abs(b[l]);
        if (c == 0.0) continue;
        const Generator& part = b[l] >= 0.0 ? bundle.plus[l] : bundle.minus[l];
        out.matrix = (out.matrix + c * part.matrix).eval();
        out.leak += c * part.leak;
    }
    out.matrix.makeCompressed();
    return out;
}

Eigen::SparseMatrix<double> combine_affine_directional(
    const GeneratorBundle& bundle, std::span<const double> b, int l,
    bool* deadband) {
    const int r = bundle.param_count();
    if (static_cast<int>(b.size()) != r || l < 0 || l >= r) {
        throw InvalidArgument("parameter index out of range");
    }
    if (deadband) *deadband = false;
    if (b[l] > kAffineDeadband) return bundle.plus[l].matrix;
    if (b[l] < -kAffineDeadband) {
        return (-bundle.minus[l].matrix).eval();
    }
    if (deadband) *deadband = true;
    return bundle.plus[l].matrix;
}

}  // namespace doaopt
