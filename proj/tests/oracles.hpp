// Independent reference implementations used only by tests. Everything here
// is deliberately naive (dense matrices, double loops, textbook recursions)
// so it shares no code path with the library.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include "iavm/lattice.hpp"
#include "iavm/model.hpp"
#include "iavm/network.hpp"

namespace oracle {

using iavm::Matrix;
using iavm::Vector;

// Pair-by-pair hand sum over the lattice.
inline long long ising_stat_naive(const iavm::LatticeState& lat) {
  long long s = 0;
  for (int i = 0; i < lat.rows(); ++i)
    for (int j = 0; j < lat.cols(); ++j) {
      if (j + 1 < lat.cols()) s += lat.at(i, j) * lat.at(i, j + 1);
      if (i + 1 < lat.rows()) s += lat.at(i, j) * lat.at(i + 1, j);
    }
  return s;
}

// Dense adjacency snapshot.
inline std::vector<std::vector<int>> dense_adj(const iavm::NetworkState& net) {
  const int n = net.n_nodes();
  std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && net.has_edge(i, j)) a[i][j] = 1;
  return a;
}

// ERGM statistics from a dense matrix with cubic loops.
inline Vector ergm_stats_naive(const std::vector<std::vector<int>>& a,
                               const iavm::ModelSpec& spec,
                               const iavm::NodeAttributes& attrs) {
  const int n = static_cast<int>(a.size());
  Vector out = Vector::Zero(spec.dim());
  for (int t = 0; t < spec.dim(); ++t) {
    const auto& term = spec.terms[static_cast<size_t>(t)];
    double s = 0.0;
    switch (term.kind) {
      case iavm::TermKind::Edges: {
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) s += a[i][j];
        if (spec.edges_as_edge_count) s /= 2.0;
        break;
      }
      case iavm::TermKind::NodeFactor: {
        const auto& col = term.attribute == "grade" ? attrs.grade : attrs.sex;
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j)
            if (a[i][j])
              s += (col[static_cast<size_t>(i)] == term.level) +
                   (col[static_cast<size_t>(j)] == term.level);
        break;
      }
      case iavm::TermKind::Gwd: {
        for (int i = 0; i < n; ++i) {
          int deg = 0;
          for (int j = 0; j < n; ++j) deg += a[i][j];
          if (deg > 0)
            s += std::exp(term.decay) *
                 (1.0 - std::pow(1.0 - std::exp(-term.decay), deg));
        }
        break;
      }
      case iavm::TermKind::Gwesp: {
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j) {
            if (!a[i][j]) continue;
            int common = 0;
            for (int k = 0; k < n; ++k) common += a[i][k] * a[j][k];
            if (common > 0)
              s += std::exp(term.decay) *
                   (1.0 - std::pow(1.0 - std::exp(-term.decay), common));
          }
        break;
      }
      case iavm::TermKind::IsingInteraction:
        throw std::logic_error("not an ERGM term");
    }
    out[t] = s;
  }
  return out;
}

inline Vector ergm_stats_naive(const iavm::NetworkState& net,
                               const iavm::ModelSpec& spec) {
  return ergm_stats_naive(dense_adj(net), spec, net.attrs());
}

// Regularized lower incomplete gamma P(a, x) by series / continued fraction.
inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p domain");
  if (x == 0.0) return 0.0;
  const double log_gamma_a = std::lgamma(a);
  if (x < a + 1.0) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < 500; ++n) {
      term *= x / (a + n);
      sum += term;
      if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - log_gamma_a);
  }
  // Lentz continued fraction for Q(a, x).
  double b = x + 1.0 - a;
  double c = 1e300;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-15) break;
  }
  const double q = std::exp(-x + a * std::log(x) - log_gamma_a) * h;
  return 1.0 - q;
}

// Upper-tail p-value of a chi-square statistic.
inline double chisq_pvalue(double stat, int dof) {
  return 1.0 - gamma_p(dof / 2.0, stat / 2.0);
}

// chi-square goodness of fit of observed counts against probabilities.
inline double chisq_gof_pvalue(const std::vector<long long>& counts,
                               const std::vector<double>& probs) {
  if (counts.size() != probs.size()) throw std::invalid_argument("size mismatch");
  long long total = 0;
  for (auto c : counts) total += c;
  double stat = 0.0;
  int dof = -1;
  for (size_t i = 0; i < counts.size(); ++i) {
    const double expected = probs[i] * static_cast<double>(total);
    if (expected < 1e-12) continue;
    const double diff = static_cast<double>(counts[i]) - expected;
    stat += diff * diff / expected;
    ++dof;
  }
  return chisq_pvalue(stat, dof);
}

// Exact Boltzmann probabilities of every spin configuration of a tiny
// lattice, keyed by the bit mask of +1 spins.
inline std::vector<double> ising_enumeration_probs(int rows, int cols, double theta) {
  const int bits = rows * cols;
  const std::uint32_t total = 1u << bits;
  std::vector<double> logw(total);
  double max_logw = -1e300;
  iavm::LatticeState work(rows, cols);
  for (std::uint32_t mask = 0; mask < total; ++mask) {
    for (int b = 0; b < bits; ++b)
      work.set(b / cols, b % cols,
               (mask >> b) & 1u ? std::int8_t{1} : std::int8_t{-1});
    logw[mask] = theta * static_cast<double>(ising_stat_naive(work));
    max_logw = std::max(max_logw, logw[mask]);
  }
  double z = 0.0;
  for (auto& w : logw) {
    w = std::exp(w - max_logw);
    z += w;
  }
  for (auto& w : logw) w /= z;
  return logw;
}

inline std::uint32_t lattice_mask(const iavm::LatticeState& lat) {
  std::uint32_t mask = 0;
  for (int i = 0; i < lat.rows(); ++i)
    for (int j = 0; j < lat.cols(); ++j)
      if (lat.at(i, j) > 0) mask |= 1u << (i * lat.cols() + j);
  return mask;
}

// Posterior mean and sd over a box prior by trapezoid quadrature on a grid,
// with log Z evaluated by exhaustive enumeration.
struct QuadraturePosterior {
  double mean;
  double sd;
};

inline QuadraturePosterior posterior_quadrature_1d(
    const iavm::ModelSpec& spec, const iavm::ModelState& shape, double s_obs,
    double lo, double hi, int grid_points = 2001) {
  std::vector<double> theta(grid_points), logpost(grid_points);
  double max_lp = -1e300;
  for (int g = 0; g < grid_points; ++g) {
    theta[static_cast<size_t>(g)] = lo + (hi - lo) * g / (grid_points - 1);
    Vector th(1);
    th[0] = theta[static_cast<size_t>(g)];
    logpost[static_cast<size_t>(g)] =
        th[0] * s_obs - iavm::exact_log_z(spec, shape, th);
    max_lp = std::max(max_lp, logpost[static_cast<size_t>(g)]);
  }
  // Trapezoid weights on the uniform grid.
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (int g = 0; g < grid_points; ++g) {
    const double w = (g == 0 || g == grid_points - 1) ? 0.5 : 1.0;
    const double dens = w * std::exp(logpost[static_cast<size_t>(g)] - max_lp);
    z += dens;
    m1 += dens * theta[static_cast<size_t>(g)];
    m2 += dens * theta[static_cast<size_t>(g)] * theta[static_cast<size_t>(g)];
  }
  m1 /= z;
  m2 /= z;
  return {m1, std::sqrt(std::max(0.0, m2 - m1 * m1))};
}

// Streaming (Welford) mean and covariance.
struct StreamingMoments {
  Vector mean;
  Matrix m2;
  long long count = 0;

  explicit StreamingMoments(int p) : mean(Vector::Zero(p)), m2(Matrix::Zero(p, p)) {}

  void add(const Vector& x) {
    ++count;
    const Vector d1 = x - mean;
    mean += d1 / static_cast<double>(count);
    const Vector d2 = x - mean;
    m2 += d1 * d2.transpose();
  }
  Matrix covariance() const { return m2 / static_cast<double>(count - 1); }
};

}  // namespace oracle
