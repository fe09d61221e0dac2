#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "iavm/model.hpp"
#include "iavm/rng.hpp"

namespace iavm {

struct MPLEResult {
  Vector theta_hat;
  Matrix neg_hessian_inv;  // proposal/design covariance
  bool converged = false;
  int iterations = 0;
};

struct PriorBox {
  Vector lower;
  Vector upper;

  bool contains(const Vector& theta) const {
    return (theta.array() >= lower.array()).all() &&
           (theta.array() <= upper.array()).all();
  }
  void validate() const;
};

enum class DesignSource { UniformGrid, MultivariateT };

struct DesignSet {
  Matrix points;  // d x p
  DesignSource source = DesignSource::MultivariateT;
  double nu = 5.0;

  int d() const { return static_cast<int>(points.rows()); }
  int p() const { return static_cast<int>(points.cols()); }
  void validate() const;
};

struct PseudoLik {
  double loglik;
  Vector grad;
  Matrix hess;
};

// Log pseudolikelihood sum over sites (Ising) / dyads (ERGM) of the log full
// conditional, with analytic gradient and Hessian in logistic-regression form.
PseudoLik pseudo_loglik_grad_hess(const ModelState& data, const ModelSpec& spec,
                                  const Vector& theta);

// Newton iterations with step halving until the gradient infinity-norm drops
// below tol. Errors: SeparationError when the pseudolikelihood is unbounded,
// ConvergenceError after max_iter.
MPLEResult mple(const ModelState& data, const ModelSpec& spec,
                double tol = 1e-8, int max_iter = 100);

// lower/upper = theta_hat -/+ width_sd * sqrt(diag(neg_hessian_inv)).
PriorBox prior_box(const MPLEResult& result, double width_sd = 10.0);

// d i.i.d. multivariate-t draws centered at the MPLE; draws outside the box
// are rejected and redrawn; duplicate rows (within 1e-12) redrawn too.
DesignSet sample_design_points(const MPLEResult& result, int d, double nu,
                               Rng& rng, const PriorBox& box);

// Evenly spaced points over the box; 1-D models only.
DesignSet uniform_grid_design(const PriorBox& box, int d);

// JSON persistence for the MPLE artifact.
void save_mple_json(const MPLEResult& result, std::uint64_t digest,
                    const std::string& path);
MPLEResult load_mple_json(const std::string& path, std::uint64_t* digest = nullptr);

void save_design_json(const DesignSet& design, std::uint64_t digest,
                      const std::string& path);
DesignSet load_design_json(const std::string& path, std::uint64_t* digest = nullptr);

}  // namespace iavm
