#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bifkit/bifurcation.hpp"
#include "bifkit/continuation.hpp"
#include "bifkit/error.hpp"
#include "bifkit/hb.hpp"
#include "bifkit/nlsolve.hpp"
#include "bifkit/snapshot.hpp"
#include "bifkit/stability.hpp"
#include "bifkit/systems.hpp"
#include "bifkit/version.hpp"
#include "cli.hpp"

namespace py = pybind11;
using namespace bifkit;

namespace {

// Settings structs are plain aggregates; expose their fields read/write.
template <class T>
py::class_<T> settings(py::module_& m, const char* name) {
  return py::class_<T>(m, name).def(py::init<>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.attr("__version__") = bifkit::version;

  static py::exception<Error> error(m, "BifkitError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object kind = py::str(std::string(to_string(e.kind())));
      PyErr_SetObject(error.ptr(), py::make_tuple(py::str(e.what()), kind).ptr());
    }
  });

  py::class_<Parameters>(m, "Parameters")
      .def(py::init<std::vector<std::string>, Vec, Index>(), py::arg("names"), py::arg("values"),
           py::arg("active") = 0)
      .def_property_readonly("names", &Parameters::names)
      .def_property_readonly("values", &Parameters::values)
      .def_property("active", &Parameters::active_name,
                    [](Parameters& p, const std::string& n) { p.set_active(n); })
      .def("__getitem__", &Parameters::get)
      .def("__setitem__", py::overload_cast<const std::string&, double>(&Parameters::set))
      .def("__contains__", &Parameters::contains)
      .def("__len__", &Parameters::size)
      .def("copy", [](const Parameters& p) { return p; })
      .def("as_dict",
           [](const Parameters& p) {
             py::dict d;
             for (Index i = 0; i < p.size(); ++i) d[py::str(p.names()[static_cast<std::size_t>(i)])] = p[i];
             return d;
           })
      .def("__repr__", [](const Parameters& p) {
        std::string s = "Parameters(";
        for (Index i = 0; i < p.size(); ++i) {
          if (i) s += ", ";
          s += p.names()[static_cast<std::size_t>(i)] + "=" + std::to_string(p[i]);
        }
        return s + ", active=" + p.active_name() + ")";
      });

  py::class_<Problem, std::shared_ptr<Problem>>(m, "Problem")
      .def_property_readonly("name", &Problem::name)
      .def_property_readonly("dim", &Problem::dim)
      .def_property_readonly("polynomial_degree", &Problem::polynomial_degree)
      .def("default_parameters", &Problem::default_parameters)
      .def("residual", &Problem::residual, py::arg("q"), py::arg("p"))
      .def("jacobian", &Problem::jacobian, py::arg("q"), py::arg("p"))
      .def("mass_matrix", &Problem::mass_matrix, py::arg("q"), py::arg("p"))
      .def("param_gradient", &Problem::param_gradient, py::arg("q"), py::arg("p"), py::arg("j"));

  m.def(
      "make_problem",
      [](const std::string& name, const std::map<std::string, double>& options) {
        return std::const_pointer_cast<Problem>(make_problem(name, options));
      },
      py::arg("name"), py::arg("options") = std::map<std::string, double>{});
  m.def("registered_problems", &registered_problems);
  m.def("initial_state", &initial_state, py::arg("problem"), py::arg("p"));

  // ---- nonlinear solves
  py::enum_<Damping>(m, "Damping").value("none", Damping::none).value("backtracking", Damping::backtracking);
  settings<NewtonSettings>(m, "NewtonSettings")
      .def_readwrite("abs_tol", &NewtonSettings::abs_tol)
      .def_readwrite("rel_tol", &NewtonSettings::rel_tol)
      .def_readwrite("max_iterations", &NewtonSettings::max_iterations)
      .def_readwrite("damping", &NewtonSettings::damping);
  settings<DeflationSettings>(m, "DeflationSettings")
      .def_readwrite("order_p", &DeflationSettings::order_p)
      .def_readwrite("shift_a", &DeflationSettings::shift_a)
      .def_readwrite("known_solutions", &DeflationSettings::known_solutions);
  py::class_<NewtonResult>(m, "NewtonResult")
      .def_readonly("q", &NewtonResult::q)
      .def_readonly("converged", &NewtonResult::converged)
      .def_readonly("iterations", &NewtonResult::iterations)
      .def_readonly("residual_norm", &NewtonResult::residual_norm)
      .def_readonly("residual_history", &NewtonResult::residual_history)
      .def_readonly("iterates", &NewtonResult::iterates)
      .def_readonly("message", &NewtonResult::message);
  m.def(
      "newton_solve",
      [](const Problem& pb, const Vec& q0, const Parameters& p, const NewtonSettings& s) {
        return newton_solve(pb, q0, p, s);
      },
      py::arg("problem"), py::arg("q0"), py::arg("p"), py::arg("settings") = NewtonSettings{});
  m.def("deflated_newton_solve", &deflated_newton_solve, py::arg("problem"), py::arg("q0"), py::arg("p"),
        py::arg("newton"), py::arg("deflation"));

  // ---- stability
  py::class_<EigenPair>(m, "EigenPair")
      .def_readonly("eigenvalue", &EigenPair::lambda)
      .def_readonly("mode", &EigenPair::direct_mode)
      .def_readonly("adjoint", &EigenPair::adjoint_mode)
      .def_readonly("residual_norm", &EigenPair::residual_norm);
  m.def(
      "eigs",
      [](const Problem& pb, const Vec& q, const Parameters& p, complex shift, Index nev, bool adjoint) {
        return eigs(pb, q, p, shift, nev, adjoint);
      },
      py::arg("problem"), py::arg("q"), py::arg("p"), py::arg("shift") = complex(0.0, 0.0), py::arg("nev") = 6,
      py::arg("adjoint") = false);

  // ---- continuation
  settings<StepControl>(m, "StepControl")
      .def_readwrite("h0", &StepControl::h0)
      .def_readwrite("h_min", &StepControl::h_min)
      .def_readwrite("h_max", &StepControl::h_max)
      .def_readwrite("target_iterations", &StepControl::target_iterations);
  settings<StopCriteria>(m, "StopCriteria")
      .def_readwrite("param_min", &StopCriteria::param_min)
      .def_readwrite("param_max", &StopCriteria::param_max)
      .def_readwrite("max_points", &StopCriteria::max_points);
  settings<MonitorSettings>(m, "MonitorSettings")
      .def_readwrite("enabled", &MonitorSettings::enabled)
      .def_readwrite("nev", &MonitorSettings::nev)
      .def_readwrite("shift", &MonitorSettings::shift)
      .def_readwrite("refine", &MonitorSettings::refine);
  py::class_<BranchPoint>(m, "BranchPoint")
      .def_readonly("q", &BranchPoint::q)
      .def_readonly("alpha", &BranchPoint::alpha)
      .def_readonly("step", &BranchPoint::step_used)
      .def_readonly("iterations", &BranchPoint::corrector_iterations)
      .def_readonly("eigenvalues", &BranchPoint::eigenvalues)
      .def_readonly("flags", &BranchPoint::flags);
  py::class_<BranchEvent>(m, "BranchEvent")
      .def_readonly("kind", &BranchEvent::kind)
      .def_readonly("before", &BranchEvent::before)
      .def_readonly("refined", &BranchEvent::refined)
      .def_readonly("point", &BranchEvent::point)
      .def_readonly("eigenvalue", &BranchEvent::lambda);
  py::enum_<TraceStatus>(m, "TraceStatus")
      .value("max_points", TraceStatus::max_points)
      .value("left_bounds", TraceStatus::left_bounds)
      .value("step_too_small", TraceStatus::step_too_small)
      .value("stopped", TraceStatus::stopped)
      .value("failed", TraceStatus::failed);
  py::class_<Branch>(m, "Branch")
      .def_readonly("points", &Branch::points)
      .def_readonly("events", &Branch::events)
      .def_readonly("active_parameter", &Branch::active_parameter)
      .def_readonly("status", &Branch::status)
      .def_readonly("message", &Branch::message);
  m.def("make_branch_point", &make_branch_point, py::arg("problem"), py::arg("q"), py::arg("p"));
  m.def(
      "trace_branch",
      [](const Problem& pb, const BranchPoint& start, const StepControl& c, const StopCriteria& s,
         const MonitorSettings& mon, const NewtonSettings& n) { return trace_branch(pb, start, c, s, mon, n); },
      py::arg("problem"), py::arg("start"), py::arg("control") = StepControl{}, py::arg("stop") = StopCriteria{},
      py::arg("monitor") = MonitorSettings{}, py::arg("corrector") = NewtonSettings{});

  // ---- bifurcations
  py::enum_<BifKind>(m, "BifKind")
      .value("fold", BifKind::fold)
      .value("pitchfork", BifKind::pitchfork)
      .value("hopf", BifKind::hopf);
  py::class_<NormalForm>(m, "NormalForm")
      .def_readonly("eigen_drift", &NormalForm::eigen_drift)
      .def_readonly("beta", &NormalForm::beta)
      .def_property_readonly("supercritical", &NormalForm::supercritical);
  py::class_<BifPoint>(m, "BifPoint")
      .def_readonly("kind", &BifPoint::kind)
      .def_readonly("q", &BifPoint::q)
      .def_readonly("alpha", &BifPoint::alpha)
      .def_readonly("omega", &BifPoint::omega)
      .def_readonly("direct_mode", &BifPoint::direct_mode)
      .def_readonly("adjoint_mode", &BifPoint::adjoint_mode)
      .def_readwrite("normal_form", &BifPoint::normal_form)
      .def_readonly("converged", &BifPoint::converged)
      .def_readonly("iterations", &BifPoint::iterations)
      .def_readonly("message", &BifPoint::message);
  m.def(
      "locate_from_guess",
      [](const Problem& pb, BifKind k, const Vec& q0, const Parameters& p0, double omega0) {
        return locate_from_guess(pb, k, q0, p0, omega0);
      },
      py::arg("problem"), py::arg("kind"), py::arg("q0"), py::arg("p0"), py::arg("omega0") = 0.0);
  m.def(
      "locate_branch_events", [](const Problem& pb, const Branch& b) { return locate_branch_events(pb, b); },
      py::arg("problem"), py::arg("branch"));
  m.def("normal_form", &normal_form, py::arg("problem"), py::arg("bifpoint"));
  py::class_<Codim2Event>(m, "Codim2Event")
      .def_readonly("index", &Codim2Event::index)
      .def_readonly("type", &Codim2Event::type);
  settings<CurveStop>(m, "CurveStop")
      .def_readwrite("second_min", &CurveStop::second_min)
      .def_readwrite("second_max", &CurveStop::second_max)
      .def_readwrite("max_points", &CurveStop::max_points);
  py::class_<BifCurve>(m, "BifCurve")
      .def_readonly("points", &BifCurve::points)
      .def_readonly("codim2_events", &BifCurve::codim2_events)
      .def_readonly("status", &BifCurve::status)
      .def_readonly("message", &BifCurve::message);
  m.def(
      "trace_bifurcation_curve",
      [](const Problem& pb, const BifPoint& b, const std::string& second, const StepControl& c, const CurveStop& s) {
        return trace_bifurcation_curve(pb, b, second, c, s);
      },
      py::arg("problem"), py::arg("bifpoint"), py::arg("second"), py::arg("control") = StepControl{},
      py::arg("stop") = CurveStop{});

  // ---- periodic orbits
  py::class_<FourierState>(m, "FourierState")
      .def(py::init<>())
      .def_readwrite("mean", &FourierState::mean)
      .def_readwrite("harmonics", &FourierState::harmonics)
      .def_readwrite("omega", &FourierState::omega)
      .def_property_readonly("order", &FourierState::order)
      .def_property_readonly("period", &FourierState::period)
      .def_static("zeros", &FourierState::zeros, py::arg("dim"), py::arg("order"), py::arg("omega"))
      .def("sample", [](const FourierState& fs, double t) { return sample_time(fs, t); }, py::arg("t"));
  py::class_<WeaklyNonlinear>(m, "WeaklyNonlinear")
      .def_readonly("amplitude", &WeaklyNonlinear::amplitude)
      .def_readonly("state", &WeaklyNonlinear::state)
      .def_readonly("orbit", &WeaklyNonlinear::orbit)
      .def_readonly("omega", &WeaklyNonlinear::omega);
  m.def("weakly_nonlinear_predict", &weakly_nonlinear_predict, py::arg("bifpoint"), py::arg("dalpha"),
        py::arg("harmonics") = 4);
  py::class_<HBResult>(m, "HBResult")
      .def_readonly("state", &HBResult::state)
      .def_readonly("converged", &HBResult::converged)
      .def_readonly("collapsed", &HBResult::collapsed)
      .def_readonly("iterations", &HBResult::iterations)
      .def_readonly("residual_history", &HBResult::residual_history)
      .def_readonly("message", &HBResult::message);
  m.def(
      "hb_solve",
      [](const Problem& pb, const FourierState& guess, const Parameters& p, Index order) {
        HBSettings s;
        s.order = order;
        return hb_solve(pb, guess, p, s);
      },
      py::arg("problem"), py::arg("guess"), py::arg("p"), py::arg("order") = 4);
  m.def(
      "hb_residual",
      [](const Problem& pb, const FourierState& fs, const Parameters& p) {
        const HarmonicResidual r = hb_residual(pb, fs, p);
        return py::make_tuple(r.mean, r.harmonics);
      },
      py::arg("problem"), py::arg("state"), py::arg("p"));
  py::class_<FloquetPair>(m, "FloquetPair")
      .def_readonly("exponent", &FloquetPair::exponent)
      .def_readonly("principal", &FloquetPair::principal)
      .def_readonly("phase_mode", &FloquetPair::phase_mode)
      .def_readonly("alignment", &FloquetPair::alignment)
      .def_readonly("residual_norm", &FloquetPair::residual_norm);
  m.def("floquet", &floquet, py::arg("problem"), py::arg("state"), py::arg("p"),
        py::arg("shift") = complex(0.0, 0.0), py::arg("nev") = 6);

  // ---- snapshots
  py::enum_<SnapshotKind>(m, "SnapshotKind")
      .value("steady", SnapshotKind::steady)
      .value("mode", SnapshotKind::mode)
      .value("fourier", SnapshotKind::fourier)
      .value("bifpoint", SnapshotKind::bifpoint);
  py::class_<Snapshot>(m, "Snapshot")
      .def_readonly("kind", &Snapshot::kind)
      .def_readonly("problem", &Snapshot::problem)
      .def_readonly("params", &Snapshot::params)
      .def_readonly("scalars", &Snapshot::scalars)
      .def_readonly("payload", &Snapshot::payload)
      .def("encode", [](const Snapshot& s) { return py::bytes(encode_snapshot(s)); });
  m.def("decode_snapshot", [](const py::bytes& b) { return decode_snapshot(std::string(b)); }, py::arg("data"));
  m.def("read_snapshot", &read_snapshot, py::arg("path"));
  m.def("write_snapshot", &write_snapshot, py::arg("path"), py::arg("snapshot"));
  m.def(
      "steady_snapshot", [](const Problem& pb, const Vec& q, const Parameters& p) { return steady_snapshot(pb, q, p); },
      py::arg("problem"), py::arg("q"), py::arg("p"));
  m.def("fourier_snapshot", &fourier_snapshot, py::arg("problem"), py::arg("state"), py::arg("p"));
  m.def("fourier_from", &fourier_from, py::arg("snapshot"));
  m.def("bifpoint_snapshot", &bifpoint_snapshot, py::arg("problem"), py::arg("bifpoint"));
  m.def("bifpoint_from", &bifpoint_from, py::arg("snapshot"));

  // ---- command line
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        py::gil_scoped_release release;
        return cli::run(args);
      },
      py::arg("args"));
}
