#include "iavm/pseudolik.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "iavm/errors.hpp"

namespace iavm {

void PriorBox::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw std::invalid_argument("prior box dimension mismatch");
  if (!(lower.array() < upper.array()).all())
    throw std::invalid_argument("prior box needs lower < upper componentwise");
}

void DesignSet::validate() const {
  if (d() < 2) throw std::invalid_argument("design needs d >= 2");
  if (!points.allFinite()) throw std::invalid_argument("design has non-finite rows");
  for (int a = 0; a < d(); ++a)
    for (int b = a + 1; b < d(); ++b)
      if ((points.row(a) - points.row(b)).lpNorm<Eigen::Infinity>() < 1e-12)
        throw std::invalid_argument("duplicate design rows");
}

namespace {

// log(1 + e^x) without overflow.
double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

// Accumulates the logistic pseudolikelihood terms: response in {0,1} with
// linear predictor theta . delta.
struct LogisticAccum {
  double ll = 0.0;
  Vector grad;
  Matrix hess;

  explicit LogisticAccum(int p) : grad(Vector::Zero(p)), hess(Matrix::Zero(p, p)) {}

  void add(const Vector& delta, int y, const Vector& theta) {
    const double eta = theta.dot(delta);
    const double sigma = 1.0 / (1.0 + std::exp(-eta));
    ll += y * eta - log1pexp(eta);
    grad += (y - sigma) * delta;
    hess.noalias() -= sigma * (1.0 - sigma) * delta * delta.transpose();
  }
};

}  // namespace

PseudoLik pseudo_loglik_grad_hess(const ModelState& data, const ModelSpec& spec,
                                  const Vector& theta) {
  spec.validate();
  if (theta.size() != spec.dim())
    throw std::invalid_argument("theta dimension mismatch");
  LogisticAccum acc(spec.dim());

  if (spec.kind == ModelKind::Ising) {
    const auto& lattice = std::get<LatticeState>(data);
    Vector delta(1);
    for (int i = 0; i < lattice.rows(); ++i) {
      for (int j = 0; j < lattice.cols(); ++j) {
        delta[0] = 2.0 * lattice.neighbor_sum(i, j);
        acc.add(delta, lattice.at(i, j) > 0 ? 1 : 0, theta);
      }
    }
  } else {
    ErgmSampler sampler(std::get<NetworkState>(data), spec);
    const int n = sampler.state().n_nodes();
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const Vector delta = sampler.change_stats(i, j);
        acc.add(delta, sampler.state().has_edge(i, j) ? 1 : 0, theta);
      }
    }
  }
  return PseudoLik{acc.ll, std::move(acc.grad), std::move(acc.hess)};
}

MPLEResult mple(const ModelState& data, const ModelSpec& spec, double tol,
                int max_iter) {
  const int p = spec.dim();
  Vector theta = Vector::Zero(p);
  PseudoLik cur = pseudo_loglik_grad_hess(data, spec, theta);

  for (int iter = 1; iter <= max_iter; ++iter) {
    if (cur.grad.lpNorm<Eigen::Infinity>() < tol) {
      const Matrix neg_hess = -cur.hess;
      Eigen::LLT<Matrix> llt(neg_hess);
      if (llt.info() != Eigen::Success)
        throw SeparationError("mple: negative Hessian not positive definite at optimum");
      Matrix inv = llt.solve(Matrix::Identity(p, p));
      inv = ((inv + inv.transpose()) / 2.0).eval();
      return MPLEResult{theta, inv, true, iter - 1};
    }

    Eigen::LDLT<Matrix> ldlt(-cur.hess);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw SeparationError("mple: singular curvature (separated data)");
    const Vector step = ldlt.solve(cur.grad);

    double lambda = 1.0;
    Vector cand;
    PseudoLik next;
    bool improved = false;
    while (lambda > 1e-10) {
      cand = theta + lambda * step;
      next = pseudo_loglik_grad_hess(data, spec, cand);
      if (std::isfinite(next.loglik) && next.loglik >= cur.loglik) {
        improved = true;
        break;
      }
      lambda /= 2.0;
    }
    if (!improved)
      throw ConvergenceError("mple: line search failed to improve");
    theta = cand;
    cur = next;
    if (theta.lpNorm<Eigen::Infinity>() > 50.0)
      throw SeparationError("mple: estimate diverging (pseudolikelihood unbounded)");
  }
  throw ConvergenceError("mple: no convergence after max_iter iterations");
}

PriorBox prior_box(const MPLEResult& result, double width_sd) {
  if (width_sd <= 0.0) throw std::invalid_argument("width_sd must be > 0");
  const Vector sd = result.neg_hessian_inv.diagonal().array().sqrt();
  PriorBox box{result.theta_hat - width_sd * sd, result.theta_hat + width_sd * sd};
  box.validate();
  return box;
}

DesignSet sample_design_points(const MPLEResult& result, int d, double nu,
                               Rng& rng, const PriorBox& box) {
  if (d < 2) throw std::invalid_argument("design needs d >= 2");
  if (nu <= 2.0) throw std::invalid_argument("nu > 2 required (finite covariance)");
  box.validate();
  const int p = static_cast<int>(result.theta_hat.size());
  Eigen::LLT<Matrix> llt(result.neg_hessian_inv);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("design covariance not positive definite");
  const Matrix L = llt.matrixL();

  DesignSet design;
  design.points.resize(d, p);
  design.source = DesignSource::MultivariateT;
  design.nu = nu;

  long long attempts = 0;
  const long long max_attempts = 1000000LL + 10000LL * d;
  int row = 0;
  Vector z(p);
  while (row < d) {
    if (++attempts > max_attempts)
      throw ConvergenceError("sample_design_points: box rejection rate too high");
    for (int k = 0; k < p; ++k) z[k] = rng.normal();
    const double w = rng.chisq(nu);
    const Vector point = result.theta_hat + (L * z) * std::sqrt(nu / w);
    if (!box.contains(point)) continue;
    bool dup = false;
    for (int r = 0; r < row && !dup; ++r)
      if ((design.points.row(r).transpose() - point).lpNorm<Eigen::Infinity>() < 1e-12)
        dup = true;
    if (dup) continue;
    design.points.row(row++) = point.transpose();
  }
  design.validate();
  return design;
}

DesignSet uniform_grid_design(const PriorBox& box, int d) {
  box.validate();
  if (box.lower.size() != 1)
    throw std::invalid_argument("uniform-grid design is 1-D only; use mvt");
  if (d < 2) throw std::invalid_argument("design needs d >= 2");
  DesignSet design;
  design.points.resize(d, 1);
  design.source = DesignSource::UniformGrid;
  for (int i = 0; i < d; ++i)
    design.points(i, 0) =
        box.lower[0] + (box.upper[0] - box.lower[0]) * i / (d - 1);
  design.validate();
  return design;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const int r = static_cast<int>(j.size());
  const int c = r ? static_cast<int>(j[0].size()) : 0;
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k) m(i, k) = j[static_cast<size_t>(i)][static_cast<size_t>(k)];
  return m;
}

}  // namespace

void save_mple_json(const MPLEResult& result, std::uint64_t digest,
                    const std::string& path) {
  nlohmann::json j;
  j["theta_hat"] = std::vector<double>(result.theta_hat.begin(), result.theta_hat.end());
  j["neg_hessian_inv"] = matrix_to_json(result.neg_hessian_inv);
  j["converged"] = result.converged;
  j["iterations"] = result.iterations;
  j["model_digest"] = format_digest(digest);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

MPLEResult load_mple_json(const std::string& path, std::uint64_t* digest) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  MPLEResult r;
  const auto th = j.at("theta_hat").get<std::vector<double>>();
  r.theta_hat = Eigen::Map<const Vector>(th.data(), static_cast<long>(th.size()));
  r.neg_hessian_inv = matrix_from_json(j.at("neg_hessian_inv"));
  r.converged = j.at("converged");
  r.iterations = j.at("iterations");
  if (digest) *digest = std::stoull(j.at("model_digest").get<std::string>(), nullptr, 16);
  return r;
}

void save_design_json(const DesignSet& design, std::uint64_t digest,
                      const std::string& path) {
  nlohmann::json j;
  j["points"] = matrix_to_json(design.points);
  j["source"] = design.source == DesignSource::UniformGrid ? "uniform-grid" : "mvt";
  j["nu"] = design.nu;
  j["model_digest"] = format_digest(digest);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

DesignSet load_design_json(const std::string& path, std::uint64_t* digest) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  DesignSet d;
  d.points = matrix_from_json(j.at("points"));
  d.source = j.at("source") == "uniform-grid" ? DesignSource::UniformGrid
                                              : DesignSource::MultivariateT;
  d.nu = j.at("nu");
  if (digest) *digest = std::stoull(j.at("model_digest").get<std::string>(), nullptr, 16);
  return d;
}

}  // namespace iavm
