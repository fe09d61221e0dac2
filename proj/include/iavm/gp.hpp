#pragma once

#include <Eigen/Dense>
#include <vector>

#include "iavm/model.hpp"

namespace iavm {

struct GPHyper {
  double sigma2 = 1.0;  // partial sill
  double phi = 1.0;     // range
  double tau2 = 0.0;    // nugget
  Vector beta;          // intercept + linear trend, length p + 1
};

// Matern-3/2 covariance between two parameter points. The nugget enters only
// on exact self-pairs (the diagonal of C).
double matern32(const Vector& a, const Vector& b, const GPHyper& hyper,
                bool self_pair = false);

// Per-output-dimension kriging state in standardized units.
struct GPDimension {
  GPHyper hyper;
  Matrix chol_c;       // lower factor of C = K(psi, psi) + tau2 I
  Vector weights;      // C^{-1} (mu - X beta_hat)
  double out_center = 0.0;
  double out_scale = 1.0;
};

struct GPModel {
  Matrix design_std;  // d x p standardized inputs
  Vector in_center;
  Vector in_scale;
  std::vector<GPDimension> dims;

  int d() const { return static_cast<int>(design_std.rows()); }
  int p() const { return static_cast<int>(design_std.cols()); }
};

struct FitOptions {
  int starts = 8;
  double tau2_floor = 1e-8;
  double phi_min = 1e-3;  // standardized input units
  double phi_max = 1e3;
  double sigma2_min = 1e-8;
  double sigma2_max = 1e4;
};

// Independent Matern-3/2 emulators per statistic dimension. Inputs and
// outputs are standardized internally; the trend is intercept + linear in
// theta with the coefficients profiled out by GLS. Hyperparameters maximize
// the profile log marginal likelihood (multi-start search plus a
// projected-gradient polish using the analytic gradient).
GPModel fit_gp(const Matrix& design, const Matrix& means,
               const FitOptions& options = {});

// Builds the model at fixed hyperparameters (no optimization): standardize,
// GLS trend, factorization, weights. hypers are in standardized units and are
// recycled across output dimensions when a single one is given.
GPModel gp_model_at(const Matrix& design, const Matrix& means,
                    const std::vector<GPHyper>& hypers);

Vector predict_mean(const GPModel& model, const Vector& theta);
Vector predict_variance(const GPModel& model, const Vector& theta);

// Profile log marginal likelihood of one output dimension at the given
// hyperparameters (standardized units); exposed for tests.
double gp_profile_loglik(const Matrix& design_std, const Vector& y_std,
                         const GPHyper& hyper);

}  // namespace iavm
