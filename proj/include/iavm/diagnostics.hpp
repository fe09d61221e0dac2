#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "iavm/model.hpp"
#include "iavm/samplers.hpp"

namespace iavm {

// Effective sample size N / (1 + 2 sum rho_k) with autocovariances from
// direct sums, truncated at the first non-positive autocorrelation, clamped
// to (0, N].
double ess(const Vector& series);

// Shortest contiguous interval covering ceil(level * N) sorted samples.
std::pair<double, double> hpd(const Vector& series, double level = 0.95);

// Batch-means Monte Carlo standard error with floor(sqrt(N)) batches.
double mcse(const Vector& series);

struct ParameterSummary {
  double mean;
  double hpd_lower;
  double hpd_upper;
  double ess;
  double mcse;
};

struct SummaryTable {
  std::vector<ParameterSummary> params;
  double wall_seconds = 0.0;
  double min_ess_per_second = 0.0;
};

// Per-parameter summaries over the entire sample (no thinning or burn-in).
SummaryTable summarize(const Chain& chain);
SummaryTable summarize(const Matrix& samples, double wall_seconds);

std::string render_summary_text(const SummaryTable& table);
void save_summary_csv(const SummaryTable& table, const std::string& path);

}  // namespace iavm
