#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iavm/gp.hpp"
#include "iavm/model.hpp"
#include "iavm/pseudolik.hpp"

namespace iavm {

// Per-design-point sample moments of the simulated summary statistics, plus
// the factored covariances the surrogate sampler draws from.
struct PrecomputeStore {
  DesignSet design;
  Matrix means;                        // d x p
  std::vector<Matrix> covariances;     // d matrices, p x p
  std::vector<Matrix> chol_cache;      // lower factors of (Sigma + jitter I)
  int M = 0;
  SimSettings sim_settings;
  std::uint64_t model_digest = 0;
  std::optional<GPModel> gp;

  int d() const { return design.d(); }
  int p() const { return design.p(); }
};

// Simulates M statistics at every design row (seed_i = hash(base_seed, i),
// so the result is independent of the worker count) and records unbiased
// sample means and covariances.
PrecomputeStore harvest(const ModelSpec& spec, const ModelState& data,
                        const DesignSet& design, int M,
                        const SimSettings& settings, int workers = 1);

// Index of the design row closest to theta in Euclidean norm (ties to the
// smallest index) along with its cached Cholesky factor.
std::pair<int, const Matrix*> nearest_design(const PrecomputeStore& store,
                                             const Vector& theta);

struct SurrogateCheck {
  Matrix true_draws;    // M x p from the probability model
  Matrix normal_draws;  // M x p from N(sample mean, sample covariance)
  Vector ks_distance;   // per-dimension two-sample KS statistic
};

// Paired samples behind the model-vs-surrogate overlay plots.
SurrogateCheck surrogate_check(const ModelSpec& spec, const ModelState& data,
                               const Vector& theta, int M,
                               const SimSettings& settings);

// Two-sample Kolmogorov-Smirnov distance.
double ks_distance(const Vector& a, const Vector& b);

// Binary container (magic "IAVM1", little-endian doubles, explicit dims)
// plus a JSON metadata sidecar at path + ".json". CSV export for the means.
void save_store(const PrecomputeStore& store, const std::string& path);
PrecomputeStore load_store(const std::string& path);
void export_means_csv(const PrecomputeStore& store, const std::string& path);

}  // namespace iavm
