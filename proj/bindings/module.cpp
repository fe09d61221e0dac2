#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "iavm/diagnostics.hpp"
#include "iavm/errors.hpp"
#include "iavm/gp.hpp"
#include "iavm/lattice.hpp"
#include "iavm/model.hpp"
#include "iavm/network.hpp"
#include "iavm/precompute.hpp"
#include "iavm/pseudolik.hpp"
#include "iavm/samplers.hpp"

namespace py = pybind11;
using namespace iavm;

namespace {

LatticeState lattice_from_array(const py::array_t<int, py::array::c_style>& spins) {
  const auto buf = spins.unchecked<2>();
  LatticeState lattice(static_cast<int>(buf.shape(0)), static_cast<int>(buf.shape(1)));
  for (py::ssize_t i = 0; i < buf.shape(0); ++i)
    for (py::ssize_t j = 0; j < buf.shape(1); ++j) {
      const int v = buf(i, j);
      if (v != 1 && v != -1) throw py::value_error("spins must be -1 or +1");
      lattice.set(static_cast<int>(i), static_cast<int>(j), static_cast<std::int8_t>(v));
    }
  return lattice;
}

py::array_t<int> lattice_to_array(const LatticeState& lattice) {
  py::array_t<int> out({lattice.rows(), lattice.cols()});
  auto buf = out.mutable_unchecked<2>();
  for (int i = 0; i < lattice.rows(); ++i)
    for (int j = 0; j < lattice.cols(); ++j) buf(i, j) = lattice.at(i, j);
  return out;
}

NetworkState network_from_edges(int n_nodes,
                                const std::vector<std::pair<int, int>>& edges,
                                const std::optional<std::vector<int>>& grade,
                                const std::optional<std::vector<std::string>>& sex) {
  NodeAttributes attrs;
  if (grade) attrs.grade = *grade;
  if (sex) {
    attrs.sex.reserve(sex->size());
    for (const auto& s : *sex) attrs.sex.push_back(sex_code(s));
  }
  NetworkState net(n_nodes, std::move(attrs));
  for (auto [i, j] : edges) net.set_edge(i, j, true);
  return net;
}

ModelState to_state(const py::object& data) {
  if (py::isinstance<LatticeState>(data)) return data.cast<LatticeState>();
  return data.cast<NetworkState>();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Indirect auxiliary-variable MCMC for models with intractable "
            "normalizing functions: model simulators, pseudolikelihood, "
            "GP-surrogate precomputation, and the DMH/IAVM/exchange samplers.";

  py::register_exception<SeparationError>(m, "SeparationError");
  py::register_exception<CoalescenceError>(m, "CoalescenceError");
  py::register_exception<DigestMismatchError>(m, "DigestMismatchError");
  py::register_exception<ConstantSeriesError>(m, "ConstantSeriesError");

  py::class_<LatticeState>(m, "LatticeState")
      .def(py::init(&lattice_from_array), py::arg("spins"))
      .def_property_readonly("rows", &LatticeState::rows)
      .def_property_readonly("cols", &LatticeState::cols)
      .def("to_numpy", &lattice_to_array);

  py::class_<NetworkState>(m, "NetworkState")
      .def(py::init(&network_from_edges), py::arg("n_nodes"), py::arg("edges"),
           py::arg("grade") = std::nullopt, py::arg("sex") = std::nullopt)
      .def_property_readonly("n_nodes", &NetworkState::n_nodes)
      .def("has_edge", &NetworkState::has_edge)
      .def("degree", &NetworkState::degree)
      .def_property_readonly("edge_count", &NetworkState::edge_count)
      .def("edges", &NetworkState::edges);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def(py::init([](const std::string& kind, const std::string& terms,
                       bool edges_as_edge_count) {
             return parse_model_spec(kind, terms, edges_as_edge_count);
           }),
           py::arg("kind"), py::arg("terms") = "",
           py::arg("edges_as_edge_count") = false)
      .def_property_readonly("dim", &ModelSpec::dim)
      .def("canonical", &ModelSpec::canonical);

  py::class_<SimSettings>(m, "SimSettings")
      .def(py::init([](long long burnin, long long spacing, std::uint64_t seed) {
             SimSettings s{burnin, spacing, seed};
             s.validate();
             return s;
           }),
           py::arg("burnin") = 0, py::arg("spacing") = 1, py::arg("seed") = 0)
      .def_readwrite("burnin_cycles", &SimSettings::burnin_cycles)
      .def_readwrite("spacing_cycles", &SimSettings::spacing_cycles)
      .def_readwrite("rng_seed", &SimSettings::rng_seed);

  m.def("ising_suff_stat", &ising_suff_stat);
  m.def("ergm_suff_stats", &ergm_suff_stats);
  m.def("ising_full_conditional", &ising_full_conditional, py::arg("lattice"),
        py::arg("i"), py::arg("j"), py::arg("theta"));
  m.def("cftp_ising", &cftp_ising, py::arg("theta"), py::arg("rows"),
        py::arg("cols"), py::arg("seed"), py::arg("max_sweeps_log2") = 20);
  m.def(
      "exact_log_z",
      [](const ModelSpec& spec, const py::object& shape, const Vector& theta) {
        return exact_log_z(spec, to_state(shape), theta);
      },
      py::arg("spec"), py::arg("shape"), py::arg("theta"));
  m.def(
      "simulate_suff_stats",
      [](const ModelSpec& spec, const Vector& theta, int M,
         const SimSettings& settings, const py::object& init) {
        return simulate_suff_stats(spec, theta, M, settings, to_state(init)).draws;
      },
      py::arg("spec"), py::arg("theta"), py::arg("M"), py::arg("settings"),
      py::arg("init"));

  py::class_<MPLEResult>(m, "MPLEResult")
      .def_readonly("theta_hat", &MPLEResult::theta_hat)
      .def_readonly("neg_hessian_inv", &MPLEResult::neg_hessian_inv)
      .def_readonly("converged", &MPLEResult::converged)
      .def_readonly("iterations", &MPLEResult::iterations);

  py::class_<PriorBox>(m, "PriorBox")
      .def(py::init([](const Vector& lower, const Vector& upper) {
             PriorBox box{lower, upper};
             box.validate();
             return box;
           }),
           py::arg("lower"), py::arg("upper"))
      .def_readonly("lower", &PriorBox::lower)
      .def_readonly("upper", &PriorBox::upper)
      .def("contains", &PriorBox::contains);

  py::class_<DesignSet>(m, "DesignSet")
      .def_property_readonly("points", [](const DesignSet& d) { return d.points; })
      .def_property_readonly("d", &DesignSet::d)
      .def_property_readonly("p", &DesignSet::p);

  m.def(
      "mple",
      [](const py::object& data, const ModelSpec& spec, double tol, int max_iter) {
        return mple(to_state(data), spec, tol, max_iter);
      },
      py::arg("data"), py::arg("spec"), py::arg("tol") = 1e-8,
      py::arg("max_iter") = 100);
  m.def("prior_box", &prior_box, py::arg("result"), py::arg("width_sd") = 10.0);
  m.def(
      "sample_design_points",
      [](const MPLEResult& result, int d, double nu, std::uint64_t seed,
         const PriorBox& box) {
        Rng rng(seed);
        return sample_design_points(result, d, nu, rng, box);
      },
      py::arg("result"), py::arg("d"), py::arg("nu"), py::arg("seed"),
      py::arg("box"));
  m.def("uniform_grid_design", &uniform_grid_design, py::arg("box"), py::arg("d"));

  py::class_<PrecomputeStore>(m, "PrecomputeStore")
      .def_property_readonly("design", [](const PrecomputeStore& s) { return s.design; })
      .def_property_readonly("means", [](const PrecomputeStore& s) { return s.means; })
      .def_property_readonly("covariances",
                             [](const PrecomputeStore& s) { return s.covariances; })
      .def_property_readonly("M", [](const PrecomputeStore& s) { return s.M; })
      .def_property_readonly("has_gp",
                             [](const PrecomputeStore& s) { return s.gp.has_value(); })
      .def("fit_gp", [](PrecomputeStore& s) { s.gp = fit_gp(s.design.points, s.means); })
      .def("predict_mean",
           [](const PrecomputeStore& s, const Vector& theta) {
             if (!s.gp) throw py::value_error("store has no fitted GP");
             return predict_mean(*s.gp, theta);
           })
      .def("predict_variance",
           [](const PrecomputeStore& s, const Vector& theta) {
             if (!s.gp) throw py::value_error("store has no fitted GP");
             return predict_variance(*s.gp, theta);
           })
      .def("nearest_design", [](const PrecomputeStore& s, const Vector& theta) {
        return nearest_design(s, theta).first;
      });

  m.def(
      "harvest",
      [](const ModelSpec& spec, const py::object& data, const DesignSet& design,
         int M, const SimSettings& settings, int workers) {
        return harvest(spec, to_state(data), design, M, settings, workers);
      },
      py::arg("spec"), py::arg("data"), py::arg("design"), py::arg("M"),
      py::arg("settings"), py::arg("workers") = 1);
  m.def("save_store", &save_store, py::arg("store"), py::arg("path"));
  m.def("load_store", &load_store, py::arg("path"));

  py::class_<ProposalSpec>(m, "ProposalSpec")
      .def(py::init([](const Matrix& covariance, double scale) {
             ProposalSpec p{covariance, scale};
             p.validate();
             return p;
           }),
           py::arg("covariance"), py::arg("scale") = 1.0);

  py::class_<Chain>(m, "Chain")
      .def_property_readonly("samples", [](const Chain& c) { return c.samples; })
      .def_readonly("accepted", &Chain::accepted)
      .def_readonly("wall_seconds", &Chain::wall_seconds)
      .def_readonly("seed", &Chain::seed)
      .def_readonly("algorithm", &Chain::algorithm)
      .def_readonly("aux_updates", &Chain::aux_updates)
      .def_readonly("aux_seconds", &Chain::aux_seconds)
      .def_property_readonly("acceptance_rate", &Chain::acceptance_rate);

  m.def("log_accept_ratio", &log_accept_ratio, py::arg("theta_n"),
        py::arg("theta_star"), py::arg("s_x"), py::arg("s_y"), py::arg("prior"),
        py::arg("proposal"));
  m.def(
      "run_dmh",
      [](const py::object& data, const ModelSpec& spec, const PriorBox& prior,
         const ProposalSpec& proposal, long long inner_cycles, long long n_samples,
         std::uint64_t seed) {
        RunOptions options;
        options.n_samples = n_samples;
        return run_dmh(to_state(data), spec, prior, proposal, inner_cycles,
                       options, seed);
      },
      py::arg("data"), py::arg("spec"), py::arg("prior"), py::arg("proposal"),
      py::arg("inner_cycles"), py::arg("n_samples"), py::arg("seed"));
  m.def(
      "run_iavm",
      [](const py::object& data, const ModelSpec& spec, const PriorBox& prior,
         const ProposalSpec& proposal, const PrecomputeStore& store,
         long long n_samples, std::uint64_t seed) {
        RunOptions options;
        options.n_samples = n_samples;
        return run_iavm(to_state(data), spec, prior, proposal, store, options, seed);
      },
      py::arg("data"), py::arg("spec"), py::arg("prior"), py::arg("proposal"),
      py::arg("store"), py::arg("n_samples"), py::arg("seed"));
  m.def(
      "run_exchange",
      [](const py::object& data, const ModelSpec& spec, const PriorBox& prior,
         const ProposalSpec& proposal, long long n_samples, std::uint64_t seed) {
        RunOptions options;
        options.n_samples = n_samples;
        return run_exchange(to_state(data), spec, prior, proposal, options, seed);
      },
      py::arg("data"), py::arg("spec"), py::arg("prior"), py::arg("proposal"),
      py::arg("n_samples"), py::arg("seed"));

  m.def("ess", &ess);
  m.def("hpd", &hpd, py::arg("series"), py::arg("level") = 0.95);
  m.def("mcse", &mcse);
  m.def(
      "summarize",
      [](const Chain& chain) {
        const SummaryTable t = summarize(chain);
        py::list params;
        for (const auto& s : t.params) {
          py::dict d;
          d["mean"] = s.mean;
          d["hpd_lower"] = s.hpd_lower;
          d["hpd_upper"] = s.hpd_upper;
          d["ess"] = s.ess;
          d["mcse"] = s.mcse;
          params.append(d);
        }
        py::dict out;
        out["params"] = params;
        out["wall_seconds"] = t.wall_seconds;
        out["min_ess_per_second"] = t.min_ess_per_second;
        return out;
      },
      py::arg("chain"));

  m.attr("__version__") = "0.1.0";
}
