#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "doaopt/config.hpp"
#include "doaopt/errors.hpp"
#include "doaopt/field.hpp"
#include "doaopt/generator.hpp"
#include "doaopt/grid.hpp"
#include "doaopt/io.hpp"
#include "doaopt/optimize.hpp"
#include "doaopt/oracle.hpp"
#include "doaopt/sens.hpp"
#include "doaopt/solve.hpp"
#include "doaopt/threading.hpp"
#include "doaopt/version.hpp"

namespace py = pybind11;
using namespace doaopt;

namespace {

std::optional<Saturation> to_saturation(std::optional<double> bound) {
    if (!bound) return std::nullopt;
    return Saturation{*bound};
}

ParamField make_python_field(int dim, int param_count, py::function eval,
                             py::function partial) {
    FieldFn eval_fn = [eval, dim](std::span<const double> x,
                                  std::span<const double> b,
                                  std::span<double> out) {
        py::gil_scoped_acquire gil;
        const py::object res =
            eval(std::vector<double>(x.begin(), x.end()),
                 std::vector<double>(b.begin(), b.end()));
        const auto vals = res.cast<std::vector<double>>();
        if (static_cast<int>(vals.size()) != dim)
            throw InvalidArgument("field callback returned wrong dimension");
        std::copy(vals.begin(), vals.end(), out.begin());
    };
    FieldPartialFn partial_fn = [partial, dim](std::span<const double> x,
                                               std::span<const double> b, int l,
                                               std::span<double> out) {
        py::gil_scoped_acquire gil;
        const py::object res =
            partial(std::vector<double>(x.begin(), x.end()),
                    std::vector<double>(b.begin(), b.end()), l);
        const auto vals = res.cast<std::vector<double>>();
        if (static_cast<int>(vals.size()) != dim)
            throw InvalidArgument("field partial callback returned wrong dimension");
        std::copy(vals.begin(), vals.end(), out.begin());
    };
    return ParamField(dim, param_count, std::move(eval_fn), std::move(partial_fn),
                      std::nullopt, /*thread_safe=*/false);
}

template <typename Fn>
auto without_gil(Fn fn) {
    py::gil_scoped_release release;
    return fn();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Set-oriented stability analysis and parameter optimization for ODE fields";
    m.attr("__version__") = kVersion;
    m.attr("BOUNDARY") = kBoundary;

    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const InvalidArgument& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const NotAffine& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const NonFiniteField& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const IoError& e) {
            PyErr_SetString(PyExc_OSError, e.what());
        } catch (const Error& e) {
            PyErr_SetString(PyExc_RuntimeError, e.what());
        }
    });

    py::class_<Box>(m, "Box")
        .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("lo"),
             py::arg("hi"))
        .def_readwrite("lo", &Box::lo)
        .def_readwrite("hi", &Box::hi)
        .def_property_readonly("dim", &Box::dim)
        .def("volume", &Box::volume)
        .def("contains",
             [](const Box& box, const std::vector<double>& x) {
                 return box.contains(x);
             })
        .def("__repr__", [](const Box& box) {
            std::ostringstream os;
            os << "Box(lo=[";
            for (size_t i = 0; i < box.lo.size(); ++i)
                os << (i ? ", " : "") << box.lo[i];
            os << "], hi=[";
            for (size_t i = 0; i < box.hi.size(); ++i)
                os << (i ? ", " : "") << box.hi[i];
            os << "])";
            return os.str();
        });

    py::class_<Grid>(m, "Grid")
        .def(py::init([](const Box& box, const std::vector<int>& resolution) {
                 return build_grid(box, resolution);
             }),
             py::arg("box"), py::arg("resolution"))
        .def_property_readonly("dim", &Grid::dim)
        .def_property_readonly("cell_count", &Grid::cell_count)
        .def_property_readonly("box", &Grid::box)
        .def_property_readonly("resolution", &Grid::resolution)
        .def_property_readonly("widths", &Grid::widths)
        .def_property_readonly("cell_volume", &Grid::cell_volume)
        .def("width", &Grid::width, py::arg("axis"))
        .def("cell_center",
             [](const Grid& grid, long cell) { return grid.cell_center(cell); },
             py::arg("cell"))
        .def("cell_box", &Grid::cell_box, py::arg("cell"))
        .def("neighbor", &Grid::neighbor, py::arg("cell"), py::arg("axis"),
             py::arg("side"))
        .def("flat_index",
             [](const Grid& grid, const std::vector<int>& multi) {
                 return grid.flat_index(multi);
             },
             py::arg("multi"))
        .def("multi_index",
             [](const Grid& grid, long cell) {
                 std::vector<int> out(grid.dim());
                 grid.multi_index(cell, out);
                 return out;
             },
             py::arg("cell"))
        .def("__eq__", &Grid::operator==);

    py::enum_<SelectRule>(m, "SelectRule")
        .value("CONTAINED", SelectRule::Contained)
        .value("CENTER_IN", SelectRule::CenterIn)
        .value("INTERSECTS", SelectRule::Intersects);

    py::class_<CellSet>(m, "CellSet")
        .def(py::init([](std::vector<long> cells, std::string label) {
                 return CellSet{std::move(cells), std::move(label)};
             }),
             py::arg("cells"), py::arg("label") = std::string())
        .def_readwrite("cells", &CellSet::cells)
        .def_readwrite("label", &CellSet::label)
        .def_property_readonly("size", &CellSet::size)
        .def("contains", &CellSet::contains, py::arg("cell"))
        .def("__len__", &CellSet::size);

    m.def("select_cells", &select_cells, py::arg("grid"), py::arg("region"),
          py::arg("rule"), py::arg("label") = std::string());
    m.def("select_cells_disk",
          [](const Grid& grid, const std::vector<double>& center, double radius,
             SelectRule rule, const std::string& label) {
              return select_cells_disk(grid, center, radius, rule, label);
          },
          py::arg("grid"), py::arg("center"), py::arg("radius"), py::arg("rule"),
          py::arg("label") = std::string());

    py::class_<ParamField>(m, "ParamField")
        .def_property_readonly("dim", &ParamField::dim)
        .def_property_readonly("param_count", &ParamField::param_count)
        .def_property_readonly("thread_safe", &ParamField::thread_safe)
        .def_property_readonly("affine",
                               [](const ParamField& f) {
                                   return f.affine_parts().has_value();
                               })
        .def("__call__",
             [](const ParamField& f, const std::vector<double>& x,
                const std::vector<double>& b) {
                 std::vector<double> out(f.dim());
                 f.eval(x, b, out);
                 return out;
             },
             py::arg("x"), py::arg("b"))
        .def("partial",
             [](const ParamField& f, const std::vector<double>& x,
                const std::vector<double>& b, int l) {
                 std::vector<double> out(f.dim());
                 f.eval_partial(x, b, l, out);
                 return out;
             },
             py::arg("x"), py::arg("b"), py::arg("l"));

    m.def("system_e",
          [](std::optional<double> saturation) {
              return make_system_e(to_saturation(saturation));
          },
          py::arg("saturation") = 0.3);
    m.def("system_e_mod",
          [](std::optional<double> saturation) {
              return make_system_e_mod(to_saturation(saturation));
          },
          py::arg("saturation") = std::nullopt);
    m.def("uniform_1d", &make_uniform_1d);
    m.def("benchmark_field",
          [](const std::string& name, std::optional<double> saturation) {
              return make_benchmark(name, to_saturation(saturation));
          },
          py::arg("name"), py::arg("saturation") = std::nullopt);
    m.def("custom_field", &make_python_field, py::arg("dim"), py::arg("param_count"),
          py::arg("eval"), py::arg("partial"),
          "Field backed by python callables (x, b) -> velocity and "
          "(x, b, l) -> d velocity / d b_l; assembled serially.");

    py::class_<QuadratureRule>(m, "QuadratureRule")
        .def_static("gauss_legendre", &QuadratureRule::gauss_legendre,
                    py::arg("points"))
        .def_readonly("points", &QuadratureRule::points)
        .def_readonly("nodes", &QuadratureRule::nodes)
        .def_readonly("weights", &QuadratureRule::weights);

    py::class_<Generator>(m, "Generator")
        .def_property_readonly("grid",
                               [](const Generator& g) { return g.grid; })
        .def_property_readonly("leak",
                               [](const Generator& g) { return g.leak; })
        .def_property_readonly("size", &Generator::size)
        .def_property_readonly("nnz", &Generator::nnz)
        .def("matrix_triplets", [](const Generator& g) {
            std::vector<long> rows, cols;
            std::vector<double> vals;
            rows.reserve(g.nnz());
            cols.reserve(g.nnz());
            vals.reserve(g.nnz());
            for (int k = 0; k < g.matrix.outerSize(); ++k) {
                for (Eigen::SparseMatrix<double>::InnerIterator it(g.matrix, k); it;
                     ++it) {
                    rows.push_back(it.row());
                    cols.push_back(it.col());
                    vals.push_back(it.value());
                }
            }
            return py::make_tuple(rows, cols, vals);
        });

    m.def("assemble",
          [](const Grid& grid, const ParamField& field,
             const std::vector<double>& b, const QuadratureRule& quad) {
              if (field.thread_safe())
                  return without_gil([&] { return assemble(grid, field, b, quad); });
              return assemble(grid, field, b, quad);
          },
          py::arg("grid"), py::arg("field"), py::arg("b"),
          py::arg("quad") = QuadratureRule::gauss_legendre(2));

    py::enum_<FieldTag>(m, "FieldTag")
        .value("PROBABILITY", FieldTag::Probability)
        .value("TIME", FieldTag::Time)
        .value("KRUZKOV", FieldTag::Kruzkov)
        .value("COND_TIME", FieldTag::CondTime)
        .value("INDICATOR", FieldTag::Indicator);

    py::class_<CellField>(m, "CellField")
        .def_readonly("grid", &CellField::grid)
        .def_readonly("tag", &CellField::tag)
        .def_readonly("values", &CellField::values);

    py::class_<AbsorptionProblem>(m, "AbsorptionProblem")
        .def(py::init<const Generator&, CellSet>(), py::arg("generator"),
             py::arg("target"), py::keep_alive<1, 2>())
        .def_property_readonly("target", &AbsorptionProblem::target)
        .def_property_readonly("interior", &AbsorptionProblem::interior)
        .def_property_readonly("interior_size", &AbsorptionProblem::interior_size)
        .def_property_readonly("target_inflow", &AbsorptionProblem::target_inflow);

    m.def("absorption_probabilities",
          [](const AbsorptionProblem& problem) {
              return without_gil([&] { return absorption_probabilities(problem); });
          },
          py::arg("problem"));
    m.def("termination_times",
          [](const AbsorptionProblem& problem) {
              return without_gil([&] { return termination_times(problem); });
          },
          py::arg("problem"));
    m.def("absorption_times",
          [](const AbsorptionProblem& problem, const CellField& p, double epsilon) {
              return without_gil([&] { return absorption_times(problem, p, epsilon); });
          },
          py::arg("problem"), py::arg("p"), py::arg("epsilon") = 1e-6);
    m.def("kruzkov_values",
          [](const AbsorptionProblem& problem) {
              return without_gil([&] { return kruzkov_values(problem); });
          },
          py::arg("problem"));
    m.def("conditioned_times",
          [](const AbsorptionProblem& problem, const CellField& p, double floor) {
              bool ill = false;
              CellField out = without_gil(
                  [&] { return conditioned_times(problem, p, floor, &ill); });
              return py::make_tuple(out, ill);
          },
          py::arg("problem"), py::arg("p"), py::arg("floor") = 1e-12,
          "Returns (field, ill_conditioned).");

    py::class_<DoaEvaluation>(m, "DoaEvaluation")
        .def_readonly("f", &DoaEvaluation::f)
        .def_readonly("gradient", &DoaEvaluation::gradient)
        .def_readonly("p", &DoaEvaluation::p)
        .def_readonly("deadband", &DoaEvaluation::deadband)
        .def_readonly("assemblies", &DoaEvaluation::assemblies);

    py::class_<TimeEvaluation>(m, "TimeEvaluation")
        .def_readonly("f", &TimeEvaluation::f)
        .def_readonly("gradient", &TimeEvaluation::gradient)
        .def_readonly("g", &TimeEvaluation::g)
        .def_readonly("coverage_gradient", &TimeEvaluation::coverage_gradient)
        .def_readonly("t", &TimeEvaluation::t)
        .def_readonly("p", &TimeEvaluation::p)
        .def_readonly("deadband", &TimeEvaluation::deadband)
        .def_readonly("assemblies", &TimeEvaluation::assemblies);

    m.def("evaluate_doa_objective",
          [](const Grid& grid, const ParamField& field, const std::vector<double>& b,
             const CellSet& target, double alpha, const QuadratureRule& quad,
             std::optional<CellSet> mass_region) {
              auto run = [&] {
                  return evaluate_doa_objective(grid, field, b, target, alpha, quad,
                                                nullptr,
                                                mass_region ? &*mass_region : nullptr);
              };
              if (field.thread_safe()) return without_gil(run);
              return run();
          },
          py::arg("grid"), py::arg("field"), py::arg("b"), py::arg("target"),
          py::arg("alpha") = 0.02,
          py::arg("quad") = QuadratureRule::gauss_legendre(2),
          py::arg("mass_region") = std::nullopt);
    m.def("evaluate_time_objective",
          [](const Grid& grid, const ParamField& field, const std::vector<double>& b,
             const CellSet& target, const CellSet& d0, double alpha,
             const QuadratureRule& quad) {
              auto run = [&] {
                  return evaluate_time_objective(grid, field, b, target, d0, alpha,
                                                 quad);
              };
              if (field.thread_safe()) return without_gil(run);
              return run();
          },
          py::arg("grid"), py::arg("field"), py::arg("b"), py::arg("target"),
          py::arg("d0"), py::arg("alpha") = 0.02,
          py::arg("quad") = QuadratureRule::gauss_legendre(2));

    py::enum_<DiscretizationPath>(m, "DiscretizationPath")
        .value("STANDARD", DiscretizationPath::Standard)
        .value("AFFINE", DiscretizationPath::Affine);

    py::class_<OptConfig>(m, "OptConfig")
        .def(py::init<>())
        .def_readwrite("alpha", &OptConfig::alpha)
        .def_readwrite("gamma", &OptConfig::gamma)
        .def_readwrite("gamma_schedule", &OptConfig::gamma_schedule)
        .def_readwrite("tol", &OptConfig::tol)
        .def_readwrite("max_iters", &OptConfig::max_iters)
        .def_readwrite("quadrature_points", &OptConfig::quadrature_points)
        .def_readwrite("path", &OptConfig::path)
        .def_readwrite("backtracking", &OptConfig::backtracking)
        .def_readwrite("coverage_slack", &OptConfig::coverage_slack);

    py::class_<OptRecord>(m, "OptRecord")
        .def_readonly("k", &OptRecord::k)
        .def_readonly("b", &OptRecord::b)
        .def_readonly("f", &OptRecord::f)
        .def_readonly("grad_norm", &OptRecord::grad_norm)
        .def_readonly("g", &OptRecord::g)
        .def_readonly("projected", &OptRecord::projected)
        .def_readonly("deadband", &OptRecord::deadband)
        .def_readonly("seconds", &OptRecord::seconds);

    py::class_<OptTrace>(m, "OptTrace")
        .def_readonly("records", &OptTrace::records)
        .def_readonly("assemblies", &OptTrace::assemblies)
        .def_readonly("doa_precondition_warning",
                      &OptTrace::doa_precondition_warning);

    py::class_<OptResult>(m, "OptResult")
        .def_readonly("b", &OptResult::b)
        .def_readonly("trace", &OptResult::trace)
        .def_readonly("p", &OptResult::p)
        .def_readonly("t", &OptResult::t);

    m.def("maximize_doa",
          [](const Grid& grid, const ParamField& field, const CellSet& target,
             const OptConfig& config, const Eigen::VectorXd& b0,
             std::optional<CellSet> mass_region) {
              auto run = [&] {
                  return maximize_doa(grid, field, target, config, b0,
                                      mass_region ? &*mass_region : nullptr);
              };
              if (field.thread_safe()) return without_gil(run);
              return run();
          },
          py::arg("grid"), py::arg("field"), py::arg("target"), py::arg("config"),
          py::arg("b0"), py::arg("mass_region") = std::nullopt);
    m.def("minimize_time",
          [](const Grid& grid, const ParamField& field, const CellSet& target,
             const CellSet& d0, const OptConfig& config, const Eigen::VectorXd& b0) {
              auto run = [&] {
                  return minimize_time(grid, field, target, d0, config, b0);
              };
              if (field.thread_safe()) return without_gil(run);
              return run();
          },
          py::arg("grid"), py::arg("field"), py::arg("target"), py::arg("d0"),
          py::arg("config"), py::arg("b0"));

    py::enum_<SimStatus>(m, "SimStatus")
        .value("ABSORBED", SimStatus::Absorbed)
        .value("ESCAPED", SimStatus::Escaped)
        .value("TIMEOUT", SimStatus::Timeout);

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("step", &SimConfig::step)
        .def_readwrite("t_max", &SimConfig::t_max)
        .def_readwrite("domain", &SimConfig::domain)
        .def_readwrite("target", &SimConfig::target)
        .def_readwrite("target_cells", &SimConfig::target_cells)
        .def_readwrite("subsamples", &SimConfig::subsamples);

    py::class_<SimOutcome>(m, "SimOutcome")
        .def_readonly("status", &SimOutcome::status)
        .def_readonly("tau", &SimOutcome::tau)
        .def_readonly("blew_up", &SimOutcome::blew_up);

    m.def("simulate_point",
          [](const ParamField& field, const std::vector<double>& b,
             const std::vector<double>& x0, const SimConfig& config) {
              return simulate_point(field, b, x0, config);
          },
          py::arg("field"), py::arg("b"), py::arg("x0"), py::arg("config"));

    py::class_<OracleFields>(m, "OracleFields")
        .def_readonly("indicator", &OracleFields::indicator)
        .def_readonly("tau", &OracleFields::tau);

    m.def("oracle_fields",
          [](const Grid& grid, const ParamField& field, const std::vector<double>& b,
             const SimConfig& config) {
              auto run = [&] { return oracle_fields(grid, field, b, config); };
              if (field.thread_safe()) return without_gil(run);
              return run();
          },
          py::arg("grid"), py::arg("field"), py::arg("b"), py::arg("config"));

    m.def("save_generator",
          [](const std::string& path, const Generator& gen,
             const std::string& comment) {
              std::ofstream os(path);
              if (!os) throw IoError("cannot open " + path);
              write_generator(os, gen, comment);
          },
          py::arg("path"), py::arg("generator"), py::arg("comment") = std::string());
    m.def("load_generator",
          [](const std::string& path, const Grid& grid) {
              std::ifstream is(path);
              if (!is) throw IoError("cannot open " + path);
              return read_generator(is, grid);
          },
          py::arg("path"), py::arg("grid"));
    m.def("save_field",
          [](const std::string& path, const CellField& field,
             const std::string& comment) {
              std::ofstream os(path);
              if (!os) throw IoError("cannot open " + path);
              write_field(os, field, comment);
          },
          py::arg("path"), py::arg("field"), py::arg("comment") = std::string());
    m.def("load_field",
          [](const std::string& path) {
              std::ifstream is(path);
              if (!is) throw IoError("cannot open " + path);
              return read_field(is);
          },
          py::arg("path"));
    m.def("save_trace",
          [](const std::string& path, const OptTrace& trace,
             const std::string& comment) {
              std::ofstream os(path);
              if (!os) throw IoError("cannot open " + path);
              write_trace(os, trace, comment);
          },
          py::arg("path"), py::arg("trace"), py::arg("comment") = std::string());
    m.def("save_parameters",
          [](const std::string& path, const Eigen::VectorXd& b,
             const std::string& comment) {
              std::ofstream os(path);
              if (!os) throw IoError("cannot open " + path);
              write_parameters(os, b, comment);
          },
          py::arg("path"), py::arg("b"), py::arg("comment") = std::string());
    m.def("load_parameters",
          [](const std::string& path) {
              std::ifstream is(path);
              if (!is) throw IoError("cannot open " + path);
              return read_parameters(is);
          },
          py::arg("path"));
    m.def("provenance_comment", &provenance_comment, py::arg("config_text"));

    m.def("set_max_threads", &set_max_threads, py::arg("count"));
    m.def("max_threads", &max_threads);
}
