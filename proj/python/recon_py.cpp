#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "recon/analysis.hpp"
#include "recon/errors.hpp"
#include "recon/strategy.hpp"

namespace py = pybind11;
using namespace recon;

namespace {

const char* kind_name(CritKind k) {
    switch (k) {
        case CritKind::Min: return "min";
        case CritKind::Saddle: return "saddle";
        case CritKind::Max: return "max";
    }
    return "";
}

py::dict report_dict(const EntropyReport& r) {
    py::dict d;
    d["k"] = r.k;
    d["H_data"] = r.H_data;
    d["H_cond"] = r.H_cond;
    d["H_bar"] = r.H_bar;
    d["R_k"] = r.R_k;
    d["log2_cells"] = r.log2_cells;
    return d;
}

}  // namespace

PYBIND11_MODULE(pyrecon, m) {
    m.doc() = "Topology-guided reconnaissance of random scalar fields";

    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ConsistencyError>(m, "ConsistencyError", PyExc_RuntimeError);

    py::class_<MorseField>(m, "Field")
        .def(py::init(&make_morse_field), py::arg("n") = 129, py::arg("d") = 0.25, py::arg("seed") = 1)
        .def_property_readonly("n", [](const MorseField& f) { return f.field.n(); })
        .def_property_readonly("d", [](const MorseField& f) { return f.field.corr_length(); })
        .def_property_readonly("seed", [](const MorseField& f) { return f.field.seed(); })
        .def_property_readonly("values",
                               [](const MorseField& f) {
                                   const int n = f.field.n();
                                   py::array_t<double> a({n, n});
                                   std::copy(f.field.values().begin(), f.field.values().end(), a.mutable_data());
                                   return a;
                               })
        .def_property_readonly("critical_points",
                               [](const MorseField& f) {
                                   py::list out;
                                   for (const auto& c : f.topology.critical_points)
                                       out.append(py::make_tuple(c.location.x, c.location.y, c.value,
                                                                 kind_name(c.index)));
                                   return out;
                               })
        .def_property_readonly("cell_count", [](const MorseField& f) { return f.topology.cell_count(); })
        .def("__call__", [](const MorseField& f, double x, double y) { return eval(f.field, {x, y}); });

    m.def(
        "run",
        [](const MorseField& f, const std::string& strategy, double T, int n, int budget, std::uint64_t seed) {
            StrategyConfig cfg;
            cfg.kind = strategy_kind_from_string(strategy);
            cfg.T = T;
            cfg.n = n;
            cfg.budget = budget;
            cfg.seed = seed;
            validate(cfg);
            const auto t = run_strategy(f, cfg);
            py::dict d;
            py::list reps;
            for (const auto& r : t.reports) reps.append(report_dict(r));
            d["reports"] = reps;
            d["h_topology"] = t.h_topology;
            d["trace"] = trace_to_jsonl(t);
            d["error"] = t.error;
            return d;
        },
        py::arg("field"), py::arg("strategy") = "topo", py::arg("T") = 0.5, py::arg("n") = 5,
        py::arg("budget") = 200, py::arg("seed") = 1, "Run a mapping strategy; returns reports and the JSONL trace");

    m.def(
        "verify",
        [](const MorseField& f, const std::string& trace) { return verify_trace(f, trace_from_jsonl(trace)).failures; },
        py::arg("field"), py::arg("trace"), "Replay a JSONL trace; returns the list of failures");

    m.def(
        "fit_beta",
        [](const std::vector<double>& p, const std::vector<bool>& in) {
            if (p.size() != in.size()) throw ParameterError("p and in differ in length");
            std::vector<std::pair<double, bool>> clicks;
            for (std::size_t i = 0; i < p.size(); ++i) clicks.emplace_back(p[i], in[i]);
            const auto r = fit_beta(clicks);
            py::dict d;
            d["defined"] = r.defined;
            d["beta"] = r.beta;
            d["loglik"] = r.loglik;
            d["clicks"] = r.clicks;
            d["boundary"] = r.boundary;
            return d;
        },
        py::arg("p"), py::arg("inside"));

    m.def(
        "ks_two_sample",
        [](const std::vector<double>& a, const std::vector<double>& b, bool one_sided) {
            const auto r = ks_two_sample(a, b, one_sided ? KsTail::OneSided : KsTail::TwoSided);
            return py::make_tuple(r.d, r.p);
        },
        py::arg("a"), py::arg("b"), py::arg("one_sided") = false, "Returns (D, p)");
}
