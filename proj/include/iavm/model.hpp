#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "iavm/lattice.hpp"
#include "iavm/network.hpp"
#include "iavm/rng.hpp"

namespace iavm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Sufficient/summary statistic vector S_x; length equals the model dimension.
using SuffStats = Vector;

enum class ModelKind { Ising, Ergm };

enum class TermKind {
  IsingInteraction,  // nearest-neighbor spin products
  Edges,             // sum_i C(x_{i+}, 1), i.e. the degree sum (see ModelSpec)
  NodeFactor,        // sum_{i<j} x_ij (1{a_i = level} + 1{a_j = level})
  Gwd,               // geometrically weighted degree, decay tau_d
  Gwesp,             // geometrically weighted edgewise shared partners, tau_s
};

struct Term {
  TermKind kind;
  std::string attribute;  // NodeFactor: "grade" or "sex"
  int level = 0;          // NodeFactor: grade value or sex code
  double decay = 0.25;    // Gwd / Gwesp
};

struct ModelSpec {
  ModelKind kind = ModelKind::Ising;
  std::vector<Term> terms = {Term{TermKind::IsingInteraction, "", 0, 0.25}};
  // The edges statistic is the degree sum by the printed formula; set this to
  // divide it by two (the conventional edge count).
  bool edges_as_edge_count = false;

  int dim() const { return static_cast<int>(terms.size()); }
  void validate() const;

  // Canonical one-line description; input to the content digest.
  std::string canonical() const;
};

// Parses a comma-separated term list such as
// "edges, nodefactor(grade,7), gwd(0.25), gwesp(0.25)" or "ising".
ModelSpec parse_model_spec(const std::string& kind,
                           const std::string& term_list,
                           bool edges_as_edge_count = false);

struct SimSettings {
  long long burnin_cycles = 0;
  long long spacing_cycles = 1;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

using ModelState = std::variant<LatticeState, NetworkState>;

// Statistic vector computed from scratch.
SuffStats ergm_suff_stats(const NetworkState& net, const ModelSpec& spec);
SuffStats compute_stats(const ModelState& state, const ModelSpec& spec);

// Gibbs driver over dyads with incremental statistics. One cycle performs
// n(n-1)/2 updates of uniformly random dyads, each resampled from its full
// conditional via the change-statistic vector.
class ErgmSampler {
 public:
  ErgmSampler(NetworkState net, const ModelSpec& spec);

  // Change statistics Delta(i,j) = stats(edge on) - stats(edge off), with all
  // other dyads held at their current values.
  Vector change_stats(int i, int j);

  void cycle(const Vector& theta, Rng& rng);

  const Vector& stats() const { return stats_; }
  const NetworkState& state() const { return net_; }
  long long updates_done() const { return updates_; }

 private:
  Vector change_stats_off(int i, int j) const;  // requires edge (i,j) absent

  NetworkState net_;
  ModelSpec spec_;
  Vector stats_;
  std::vector<double> gw_deg_;   // e^tau * (1 - (1 - e^-tau)^k), k = 0..n
  std::vector<double> gw_esp_;
  long long updates_ = 0;
};

// One cycle of the matching sampler (n(n-1)/2 random-dyad updates).
void gibbs_cycle_ergm(NetworkState& net, const Vector& theta,
                      const ModelSpec& spec, Rng& rng);

struct SimulatedStats {
  Matrix draws;           // M x p
  long long cycles = 0;   // total Gibbs cycles spent
  long long updates = 0;  // total site/dyad updates spent
};

// Runs burnin_cycles from init, then records statistics every spacing_cycles,
// M times. Statistics are maintained incrementally alongside state updates.
SimulatedStats simulate_suff_stats(const ModelSpec& spec, const Vector& theta,
                                   int M, const SimSettings& settings,
                                   const ModelState& init);

// log Z(theta) by exhaustive enumeration (log-sum-exp); the shape argument
// supplies dimensions and node attributes. State spaces above 2^20 error out.
double exact_log_z(const ModelSpec& spec, const ModelState& shape,
                   const Vector& theta);

// FNV-1a content hash of the model spec and data dimensions; stamped into
// derived artifacts so stale stores are detected.
std::uint64_t model_digest(const ModelSpec& spec, const ModelState& data);

std::string format_digest(std::uint64_t digest);

}  // namespace iavm
