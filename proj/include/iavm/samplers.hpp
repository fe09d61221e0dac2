#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>

#include "iavm/model.hpp"
#include "iavm/precompute.hpp"
#include "iavm/pseudolik.hpp"

namespace iavm {

// Random-walk normal proposal; symmetric, so the q-ratio vanishes.
struct ProposalSpec {
  Matrix covariance;
  double scale = 1.0;

  void validate() const;
};

struct Chain {
  Matrix samples;  // N x p
  long long accepted = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::string algorithm;
  // Cost of producing auxiliary statistics, split out so per-iteration
  // auxiliary-draw cost ratios can be reported.
  long long aux_updates = 0;  // model site/dyad updates spent on S_y
  double aux_seconds = 0.0;

  long long n() const { return samples.rows(); }
  int p() const { return static_cast<int>(samples.cols()); }
  double acceptance_rate() const {
    return n() ? static_cast<double>(accepted) / static_cast<double>(n()) : 0.0;
  }
};

struct RunOptions {
  long long n_samples = 10000;
  // When set, sampling continues past n_samples (in blocks) until every
  // parameter's batch-means MCSE is at or below this target.
  std::optional<double> mcse_target;
  long long max_samples = 1000000;
  std::optional<Vector> init;  // default: prior box center
};

// Log acceptance ratio of the auxiliary-variable MH step:
//   log p(theta*)/p(theta_n) + (theta* - theta_n)' S_x + (theta_n - theta*)' S_y
// plus the (zero, symmetric) proposal term. -inf outside the prior box;
// Z(theta) never appears.
double log_accept_ratio(const Vector& theta_n, const Vector& theta_star,
                        const SuffStats& s_x, const SuffStats& s_y,
                        const PriorBox& prior, const ProposalSpec& proposal);

// Double Metropolis-Hastings: the auxiliary statistic comes from a short
// inner Gibbs run (inner_cycles, started at the observed data) at theta*.
Chain run_dmh(const ModelState& data, const ModelSpec& spec,
              const PriorBox& prior, const ProposalSpec& proposal,
              long long inner_cycles, const RunOptions& options,
              std::uint64_t seed);

// Indirect auxiliary-variable MCMC: S_y ~ N(mu_hat(theta*), Sigma(theta_l))
// with the GP-interpolated mean and nearest-design-point covariance.
Chain run_iavm(const ModelState& data, const ModelSpec& spec,
               const PriorBox& prior, const ProposalSpec& proposal,
               const PrecomputeStore& store, const RunOptions& options,
               std::uint64_t seed);

// Exchange algorithm (Ising only): S_y from a perfect CFTP draw at theta*.
// The prior is truncated at zero, where the monotone coupling holds.
Chain run_exchange(const ModelState& data, const ModelSpec& spec,
                   const PriorBox& prior, const ProposalSpec& proposal,
                   const RunOptions& options, std::uint64_t seed,
                   int cftp_max_sweeps_log2 = 20);

// Chain CSV (header theta_1..theta_p) and the JSON run manifest.
void save_chain_csv(const Chain& chain, const std::string& path);
Matrix load_chain_csv(const std::string& path);
void save_chain_manifest(const Chain& chain, const std::string& path);

}  // namespace iavm
