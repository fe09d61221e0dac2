#include "iavm/gp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "iavm/errors.hpp"

namespace iavm {

double matern32(const Vector& a, const Vector& b, const GPHyper& hyper,
                bool self_pair) {
  if (a.size() != b.size()) throw std::invalid_argument("matern32 dimension mismatch");
  const double r = (a - b).norm();
  const double u = std::sqrt(3.0) * r / hyper.phi;
  double v = hyper.sigma2 * (1.0 + u) * std::exp(-u);
  if (self_pair) v += hyper.tau2;
  return v;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

struct KernelWork {
  Matrix dist;  // pairwise distances of standardized design rows

  explicit KernelWork(const Matrix& design) {
    const int d = static_cast<int>(design.rows());
    dist.resize(d, d);
    for (int i = 0; i < d; ++i) {
      dist(i, i) = 0.0;
      for (int j = i + 1; j < d; ++j) {
        const double r = (design.row(i) - design.row(j)).norm();
        dist(i, j) = dist(j, i) = r;
      }
    }
  }

  Matrix covariance(double sigma2, double phi, double tau2) const {
    const double s3 = std::sqrt(3.0) / phi;
    Matrix c = (sigma2 * (1.0 + s3 * dist.array()) * (-s3 * dist.array()).exp()).matrix();
    c.diagonal().array() += tau2;
    return c;
  }

  // d C / d log phi
  Matrix dcov_dlogphi(double sigma2, double phi) const {
    const double s3 = std::sqrt(3.0) / phi;
    const auto u = (s3 * dist.array()).eval();
    return (sigma2 * u.square() * (-u).exp()).matrix();
  }
};

struct ProfileEval {
  double loglik = -std::numeric_limits<double>::infinity();
  Vector beta;
  Vector resid;
  Vector alpha;  // C^{-1} resid
  Eigen::LLT<Matrix> llt;
  bool ok = false;
};

ProfileEval profile_eval(const KernelWork& kw, const Matrix& x, const Vector& y,
                         double sigma2, double phi, double tau2) {
  ProfileEval ev;
  const Matrix c = kw.covariance(sigma2, phi, tau2);
  ev.llt.compute(c);
  if (ev.llt.info() != Eigen::Success) return ev;
  const Matrix ci_x = ev.llt.solve(x);
  const Matrix a = x.transpose() * ci_x;
  Eigen::LDLT<Matrix> ldlt(a);
  if (ldlt.info() != Eigen::Success) return ev;
  ev.beta = ldlt.solve(x.transpose() * ev.llt.solve(y));
  ev.resid = y - x * ev.beta;
  ev.alpha = ev.llt.solve(ev.resid);
  const double quad = ev.resid.dot(ev.alpha);
  const double logdet = 2.0 * ev.llt.matrixLLT().diagonal().array().log().sum();
  const double n = static_cast<double>(y.size());
  ev.loglik = -0.5 * (quad + logdet + n * kLog2Pi);
  ev.ok = std::isfinite(ev.loglik);
  return ev;
}

struct Bounds {
  std::array<double, 3> lo, hi;
  std::array<double, 3> clamp(std::array<double, 3> v) const {
    for (int k = 0; k < 3; ++k) v[k] = std::min(std::max(v[k], lo[k]), hi[k]);
    return v;
  }
};

// Objective over eta = (log sigma2, log phi, log tau2); higher is better.
struct Objective {
  const KernelWork& kw;
  const Matrix& x;
  const Vector& y;
  const Bounds& bounds;

  double operator()(const std::array<double, 3>& eta_raw) const {
    const auto eta = bounds.clamp(eta_raw);
    double penalty = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double excess = eta_raw[k] - eta[k];
      penalty += excess * excess;
    }
    const auto ev = profile_eval(kw, x, y, std::exp(eta[0]), std::exp(eta[1]),
                                 std::exp(eta[2]));
    if (!ev.ok) return -std::numeric_limits<double>::infinity();
    return ev.loglik - 1e3 * penalty;
  }
};

// Analytic gradient of the profile loglik w.r.t. eta; the GLS beta-hat makes
// the envelope identity exact.
std::array<double, 3> profile_grad(const KernelWork& kw, const Matrix& x,
                                   const Vector& y,
                                   const std::array<double, 3>& eta) {
  const double sigma2 = std::exp(eta[0]);
  const double phi = std::exp(eta[1]);
  const double tau2 = std::exp(eta[2]);
  const auto ev = profile_eval(kw, x, y, sigma2, phi, tau2);
  if (!ev.ok) return {0.0, 0.0, 0.0};
  const int d = static_cast<int>(y.size());
  const Matrix cinv = ev.llt.solve(Matrix::Identity(d, d));

  auto dir = [&](const Matrix& dc) {
    return 0.5 * (ev.alpha.dot(dc * ev.alpha) - cinv.cwiseProduct(dc).sum());
  };
  Matrix k_sigma = kw.covariance(sigma2, phi, 0.0);
  std::array<double, 3> g;
  g[0] = dir(k_sigma);
  g[1] = dir(kw.dcov_dlogphi(sigma2, phi));
  g[2] = 0.5 * (tau2 * ev.alpha.squaredNorm() - tau2 * cinv.trace());
  return g;
}

// Nelder-Mead over 3 log-parameters.
std::array<double, 3> nelder_mead(const Objective& obj, std::array<double, 3> start,
                                  int max_iter) {
  constexpr int n = 3;
  std::array<std::array<double, 3>, n + 1> simplex;
  std::array<double, n + 1> f;
  simplex[0] = start;
  for (int k = 1; k <= n; ++k) {
    simplex[k] = start;
    simplex[k][k - 1] += 0.5;
  }
  for (int k = 0; k <= n; ++k) f[k] = -obj(simplex[k]);

  auto order = [&]() {
    for (int a = 0; a <= n; ++a)
      for (int b = a + 1; b <= n; ++b)
        if (f[b] < f[a]) {
          std::swap(f[a], f[b]);
          std::swap(simplex[a], simplex[b]);
        }
  };

  for (int it = 0; it < max_iter; ++it) {
    order();
    if (std::abs(f[n] - f[0]) < 1e-12 * (1.0 + std::abs(f[0]))) break;
    std::array<double, 3> centroid{};
    for (int k = 0; k < n; ++k)
      for (int c = 0; c < 3; ++c) centroid[c] += simplex[k][c] / n;

    auto move = [&](double coef) {
      std::array<double, 3> p;
      for (int c = 0; c < 3; ++c)
        p[c] = centroid[c] + coef * (simplex[n][c] - centroid[c]);
      return p;
    };

    const auto refl = move(-1.0);
    const double frefl = -obj(refl);
    if (frefl < f[0]) {
      const auto expd = move(-2.0);
      const double fexpd = -obj(expd);
      if (fexpd < frefl) {
        simplex[n] = expd;
        f[n] = fexpd;
      } else {
        simplex[n] = refl;
        f[n] = frefl;
      }
    } else if (frefl < f[n - 1]) {
      simplex[n] = refl;
      f[n] = frefl;
    } else {
      const auto contr = move(0.5);
      const double fcontr = -obj(contr);
      if (fcontr < f[n]) {
        simplex[n] = contr;
        f[n] = fcontr;
      } else {
        for (int k = 1; k <= n; ++k) {
          for (int c = 0; c < 3; ++c)
            simplex[k][c] = simplex[0][c] + 0.5 * (simplex[k][c] - simplex[0][c]);
          f[k] = -obj(simplex[k]);
        }
      }
    }
  }
  order();
  return simplex[0];
}

// Projected-gradient ascent polish; drives the interior gradient components
// toward zero so the optimum passes finite-difference checks.
std::array<double, 3> polish(const KernelWork& kw, const Matrix& x, const Vector& y,
                             const Bounds& bounds, std::array<double, 3> eta) {
  eta = bounds.clamp(eta);
  auto value = [&](const std::array<double, 3>& e) {
    const auto ev = profile_eval(kw, x, y, std::exp(e[0]), std::exp(e[1]), std::exp(e[2]));
    return ev.ok ? ev.loglik : -std::numeric_limits<double>::infinity();
  };
  double cur = value(eta);
  double step = 0.1;
  for (int it = 0; it < 300; ++it) {
    auto g = profile_grad(kw, x, y, eta);
    // Project: zero out components pushing past an active bound.
    double gnorm = 0.0;
    for (int k = 0; k < 3; ++k) {
      if ((eta[k] <= bounds.lo[k] + 1e-12 && g[k] < 0.0) ||
          (eta[k] >= bounds.hi[k] - 1e-12 && g[k] > 0.0))
        g[k] = 0.0;
      gnorm = std::max(gnorm, std::abs(g[k]));
    }
    if (gnorm < 1e-7) break;
    bool moved = false;
    while (step > 1e-14) {
      std::array<double, 3> cand;
      for (int k = 0; k < 3; ++k) cand[k] = eta[k] + step * g[k];
      cand = bounds.clamp(cand);
      const double v = value(cand);
      if (v > cur) {
        eta = cand;
        cur = v;
        step *= 1.6;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return eta;
}

void check_no_duplicates(const Matrix& design) {
  for (int a = 0; a < design.rows(); ++a)
    for (int b = a + 1; b < design.rows(); ++b)
      if ((design.row(a) - design.row(b)).lpNorm<Eigen::Infinity>() < 1e-12)
        throw std::invalid_argument("fit_gp: duplicate design rows");
}

}  // namespace

GPModel fit_gp(const Matrix& design, const Matrix& means, const FitOptions& options) {
  const int d = static_cast<int>(design.rows());
  const int p = static_cast<int>(design.cols());
  if (means.rows() != d) throw std::invalid_argument("fit_gp: row mismatch");
  if (d < p + 2) throw std::invalid_argument("fit_gp: needs d >= p + 2");
  check_no_duplicates(design);

  GPModel model;
  model.in_center = design.colwise().mean();
  model.in_scale.resize(p);
  for (int j = 0; j < p; ++j) {
    const double sd = std::sqrt((design.col(j).array() - model.in_center[j]).square().sum() /
                                std::max(1, d - 1));
    model.in_scale[j] = sd > 0.0 ? sd : 1.0;
  }
  model.design_std = (design.rowwise() - model.in_center.transpose()).array().rowwise() /
                     model.in_scale.transpose().array();

  const KernelWork kw(model.design_std);
  Matrix x(d, p + 1);
  x.col(0).setOnes();
  x.rightCols(p) = model.design_std;

  const Bounds bounds{
      {std::log(options.sigma2_min), std::log(options.phi_min), std::log(options.tau2_floor)},
      {std::log(options.sigma2_max), std::log(options.phi_max), std::log(10.0)}};

  const int q = static_cast<int>(means.cols());
  model.dims.resize(static_cast<size_t>(q));
  for (int out = 0; out < q; ++out) {
    GPDimension& dim = model.dims[static_cast<size_t>(out)];
    dim.out_center = means.col(out).mean();
    const double sd = std::sqrt((means.col(out).array() - dim.out_center).square().sum() /
                                std::max(1, d - 1));
    if (!(sd > 0.0))
      throw std::invalid_argument("fit_gp: constant output dimension " + std::to_string(out));
    dim.out_scale = sd;
    const Vector y = (means.col(out).array() - dim.out_center) / dim.out_scale;

    const Objective obj{kw, x, y, bounds};
    double best = -std::numeric_limits<double>::infinity();
    std::array<double, 3> best_eta{0.0, 0.0, std::log(options.tau2_floor)};
    bool any = false;
    for (double ls : {std::log(0.5), std::log(2.0)}) {
      for (double lp : {std::log(0.5), std::log(2.0)}) {
        for (double lt : {std::log(1e-6), std::log(1e-2)}) {
          auto eta = nelder_mead(obj, {ls, lp, lt}, 400);
          eta = polish(kw, x, y, bounds, eta);
          const double v = obj(eta);
          if (v > best) {
            best = v;
            best_eta = eta;
            any = true;
          }
        }
      }
    }
    if (!any)
      throw ConvergenceError("fit_gp: every optimizer start failed for dimension " +
                             std::to_string(out));
    const auto eta = bounds.clamp(best_eta);
    dim.hyper.sigma2 = std::exp(eta[0]);
    dim.hyper.phi = std::exp(eta[1]);
    dim.hyper.tau2 = std::exp(eta[2]);
    const auto ev = profile_eval(kw, x, y, dim.hyper.sigma2, dim.hyper.phi, dim.hyper.tau2);
    dim.hyper.beta = ev.beta;
    dim.chol_c = ev.llt.matrixL();
    dim.weights = ev.alpha;
  }
  return model;
}

Vector predict_mean(const GPModel& model, const Vector& theta) {
  if (theta.size() != model.p()) throw std::invalid_argument("predict: dimension mismatch");
  if (!theta.allFinite()) throw std::invalid_argument("predict: non-finite theta");
  const Vector t = (theta - model.in_center).cwiseQuotient(model.in_scale);
  Vector out(static_cast<long>(model.dims.size()));
  const int d = model.d();
  Vector c(d);
  for (size_t k = 0; k < model.dims.size(); ++k) {
    const GPDimension& dim = model.dims[k];
    for (int i = 0; i < d; ++i)
      c[i] = matern32(model.design_std.row(i).transpose(), t, dim.hyper, false);
    double m = dim.hyper.beta[0] + dim.hyper.beta.tail(model.p()).dot(t) +
               c.dot(dim.weights);
    out[static_cast<long>(k)] = dim.out_center + dim.out_scale * m;
  }
  return out;
}

Vector predict_variance(const GPModel& model, const Vector& theta) {
  if (theta.size() != model.p()) throw std::invalid_argument("predict: dimension mismatch");
  const Vector t = (theta - model.in_center).cwiseQuotient(model.in_scale);
  Vector out(static_cast<long>(model.dims.size()));
  const int d = model.d();
  Vector c(d);
  for (size_t k = 0; k < model.dims.size(); ++k) {
    const GPDimension& dim = model.dims[k];
    for (int i = 0; i < d; ++i)
      c[i] = matern32(model.design_std.row(i).transpose(), t, dim.hyper, false);
    const Vector sol = dim.chol_c.triangularView<Eigen::Lower>().solve(c);
    double v = dim.hyper.sigma2 + dim.hyper.tau2 - sol.squaredNorm();
    out[static_cast<long>(k)] = std::max(v, 0.0) * dim.out_scale * dim.out_scale;
  }
  return out;
}

double gp_profile_loglik(const Matrix& design_std, const Vector& y_std,
                         const GPHyper& hyper) {
  const KernelWork kw(design_std);
  const int d = static_cast<int>(design_std.rows());
  const int p = static_cast<int>(design_std.cols());
  Matrix x(d, p + 1);
  x.col(0).setOnes();
  x.rightCols(p) = design_std;
  const auto ev = profile_eval(kw, x, y_std, hyper.sigma2, hyper.phi, hyper.tau2);
  return ev.loglik;
}

}  // namespace iavm
