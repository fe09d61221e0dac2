#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>

#include "iavm/errors.hpp"
#include "iavm/pseudolik.hpp"
#include "oracles.hpp"

using namespace iavm;

namespace {

NetworkState random_attr_network(int n, double density, Rng& rng) {
  NetworkState net(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < density) net.set_edge(i, j, true);
  net.attrs().grade.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    net.attrs().grade[static_cast<size_t>(i)] = 7 + static_cast<int>(rng.uniform_int(6));
  return net;
}

// Plain Newton logistic regression over explicit rows; the reference the
// MPLE must agree with.
Vector logistic_regression_oracle(const Matrix& x, const std::vector<int>& y) {
  Vector beta = Vector::Zero(x.cols());
  for (int it = 0; it < 200; ++it) {
    Vector grad = Vector::Zero(x.cols());
    Matrix hess = Matrix::Zero(x.cols(), x.cols());
    for (int r = 0; r < x.rows(); ++r) {
      const double eta = x.row(r).dot(beta);
      const double sigma = 1.0 / (1.0 + std::exp(-eta));
      grad += (y[static_cast<size_t>(r)] - sigma) * x.row(r).transpose();
      hess -= sigma * (1.0 - sigma) * x.row(r).transpose() * x.row(r);
    }
    if (grad.lpNorm<Eigen::Infinity>() < 1e-10) break;
    beta -= hess.ldlt().solve(grad);
  }
  return beta;
}

}  // namespace

TEST_SUITE("pseudolik") {

TEST_CASE("zero theta gives -#dyads * log 2 for ERGMs") {
  Rng rng(201);
  const auto spec = parse_model_spec("ergm", "edges, gwesp(0.25)");
  const NetworkState net = random_attr_network(9, 0.3, rng);
  const auto pl = pseudo_loglik_grad_hess(net, spec, Vector::Zero(2));
  CHECK(pl.loglik == doctest::Approx(-36.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences on 10-node graphs") {
  Rng rng(203);
  const auto spec = parse_model_spec(
      "ergm", "edges, nodefactor(grade,9), gwd(0.25), gwesp(0.25)");
  const double h = 1e-5;
  for (int rep = 0; rep < 4; ++rep) {
    const NetworkState net = random_attr_network(10, 0.35, rng);
    Vector theta(4);
    for (int k = 0; k < 4; ++k) theta[k] = -0.5 + rng.uniform();
    const auto pl = pseudo_loglik_grad_hess(net, spec, theta);
    for (int k = 0; k < 4; ++k) {
      Vector up = theta, dn = theta;
      up[k] += h;
      dn[k] -= h;
      const double fd = (pseudo_loglik_grad_hess(net, spec, up).loglik -
                         pseudo_loglik_grad_hess(net, spec, dn).loglik) /
                        (2.0 * h);
      CHECK(std::abs(pl.grad[k] - fd) < 1e-6);
    }
  }
}

TEST_CASE("gradient matches finite differences for the Ising model") {
  Rng rng(205);
  LatticeState lat(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      lat.set(i, j, rng.uniform() < 0.5 ? std::int8_t{1} : std::int8_t{-1});
  const auto spec = parse_model_spec("ising", "");
  Vector theta(1);
  theta[0] = 0.2;
  const auto pl = pseudo_loglik_grad_hess(lat, spec, theta);
  const double h = 1e-5;
  Vector up = theta, dn = theta;
  up[0] += h;
  dn[0] -= h;
  const double fd = (pseudo_loglik_grad_hess(lat, spec, up).loglik -
                     pseudo_loglik_grad_hess(lat, spec, dn).loglik) /
                    (2.0 * h);
  CHECK(std::abs(pl.grad[0] - fd) < 1e-6);
}

TEST_CASE("hessian is negative semidefinite at any theta") {
  Rng rng(207);
  const auto spec = parse_model_spec("ergm", "edges, gwd(0.25), gwesp(0.25)");
  const NetworkState net = random_attr_network(8, 0.4, rng);
  for (int rep = 0; rep < 5; ++rep) {
    Vector theta(3);
    for (int k = 0; k < 3; ++k) theta[k] = -2.0 + 4.0 * rng.uniform();
    const auto pl = pseudo_loglik_grad_hess(net, spec, theta);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(pl.hess);
    CHECK(eig.eigenvalues().maxCoeff() < 1e-9);
  }
}

TEST_CASE("mple satisfies the Newton fixed point") {
  Rng rng(209);
  const auto spec = parse_model_spec("ergm", "edges, gwesp(0.25)");
  const NetworkState net = random_attr_network(12, 0.3, rng);
  const MPLEResult result = mple(net, spec, 1e-8);
  CHECK(result.converged);
  const auto pl = pseudo_loglik_grad_hess(net, spec, result.theta_hat);
  CHECK(pl.grad.lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK((result.neg_hessian_inv - result.neg_hessian_inv.transpose())
            .lpNorm<Eigen::Infinity>() < 1e-10);
  Eigen::LLT<Matrix> llt(result.neg_hessian_inv);
  CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("mple equals the generic logistic-regression oracle") {
  Rng rng(211);
  const auto spec = parse_model_spec("ergm", "edges, nodefactor(grade,9), gwesp(0.25)");
  const NetworkState net = random_attr_network(10, 0.35, rng);

  // Assemble the logistic rows independently: covariates are from-scratch
  // statistic differences, responses the observed dyads.
  const int n = net.n_nodes();
  std::vector<Vector> rows;
  std::vector<int> ys;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      NetworkState off = net;
      off.set_edge(i, j, false);
      NetworkState on = off;
      on.set_edge(i, j, true);
      rows.push_back(oracle::ergm_stats_naive(on, spec) -
                     oracle::ergm_stats_naive(off, spec));
      ys.push_back(net.has_edge(i, j) ? 1 : 0);
    }
  }
  Matrix x(static_cast<long>(rows.size()), spec.dim());
  for (size_t r = 0; r < rows.size(); ++r) x.row(static_cast<long>(r)) = rows[r];
  const Vector want = logistic_regression_oracle(x, ys);
  const MPLEResult got = mple(net, spec);
  CHECK((got.theta_hat - want).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("mple recovers the CFTP-generating coupling on a 100x100 lattice") {
  const LatticeState data = cftp_ising(0.3, 100, 100, 424242);
  const auto spec = parse_model_spec("ising", "");
  const MPLEResult result = mple(data, spec);
  CHECK(result.converged);
  CHECK(result.theta_hat[0] > 0.25);
  CHECK(result.theta_hat[0] < 0.35);
}

TEST_CASE("separation errors") {
  const auto ispec = parse_model_spec("ising", "");
  CHECK_THROWS_AS(mple(LatticeState(2, 2, +1), ispec), SeparationError);

  const auto espec = parse_model_spec("ergm", "edges");
  CHECK_THROWS_AS(mple(NetworkState(6), espec), SeparationError);
}

TEST_CASE("prior box arithmetic") {
  MPLEResult r;
  r.theta_hat = Vector::Constant(1, 0.3);
  r.neg_hessian_inv = Matrix::Constant(1, 1, 0.02 * 0.02);
  r.converged = true;

  const PriorBox box = prior_box(r, 10.0);
  CHECK(box.lower[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(box.upper[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(box.contains(r.theta_hat));

  const PriorBox wider = prior_box(r, 12.0);
  CHECK(wider.lower[0] < box.lower[0]);
  CHECK(wider.upper[0] > box.upper[0]);
  CHECK_THROWS(prior_box(r, 0.0));
}

TEST_CASE("multivariate t design sampling moments") {
  MPLEResult r;
  r.theta_hat = Vector::Zero(2);
  r.neg_hessian_inv = Matrix::Zero(2, 2);
  r.neg_hessian_inv << 0.04, 0.01, 0.01, 0.09;
  r.converged = true;
  PriorBox box{Vector::Constant(2, -100.0), Vector::Constant(2, 100.0)};

  SUBCASE("nu -> infinity reduces to the normal scale matrix") {
    Rng rng(301);
    const DesignSet design = sample_design_points(r, 100000, 1e6, rng, box);
    const Eigen::RowVectorXd mean = design.points.colwise().mean();
    const Matrix centered = design.points.rowwise() - mean;
    const Matrix cov = centered.transpose() * centered / (design.d() - 1);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        CHECK(std::abs(cov(a, b) - r.neg_hessian_inv(a, b)) <
              0.05 * r.neg_hessian_inv.diagonal().maxCoeff());
  }
  SUBCASE("sample mean within 3 standard errors of the center") {
    Rng rng(303);
    const DesignSet design = sample_design_points(r, 100000, 5.0, rng, box);
    // t(5) inflates the scale variance by nu/(nu-2).
    for (int k = 0; k < 2; ++k) {
      const double se = std::sqrt(r.neg_hessian_inv(k, k) * (5.0 / 3.0) / design.d());
      CHECK(std::abs(design.points.col(k).mean()) < 3.0 * se);
    }
  }
  SUBCASE("draws respect the prior box and avoid duplicates") {
    Rng rng(305);
    PriorBox tight{Vector::Constant(2, -0.1), Vector::Constant(2, 0.1)};
    const DesignSet design = sample_design_points(r, 200, 5.0, rng, tight);
    for (int i = 0; i < design.d(); ++i)
      CHECK(tight.contains(design.points.row(i).transpose()));
    CHECK_NOTHROW(design.validate());
  }
}

TEST_CASE("uniform grid design covers [0,1] with d=20") {
  PriorBox box{Vector::Zero(1), Vector::Ones(1)};
  const DesignSet design = uniform_grid_design(box, 20);
  CHECK(design.d() == 20);
  CHECK(design.points(0, 0) == 0.0);
  CHECK(design.points(19, 0) == 1.0);
  for (int i = 0; i < 20; ++i) {
    CHECK(design.points(i, 0) >= 0.0);
    CHECK(design.points(i, 0) <= 1.0);
  }
  PriorBox box2{Vector::Zero(2), Vector::Ones(2)};
  CHECK_THROWS(uniform_grid_design(box2, 20));
}

TEST_CASE("mple json round trip") {
  Rng rng(307);
  const auto spec = parse_model_spec("ergm", "edges, gwesp(0.25)");
  const NetworkState net = random_attr_network(10, 0.3, rng);
  const MPLEResult result = mple(net, spec);
  const auto dir = std::filesystem::temp_directory_path() / "iavm_mple_io";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "mple.json").string();
  save_mple_json(result, 0xabcdef12u, path);
  std::uint64_t digest = 0;
  const MPLEResult loaded = load_mple_json(path, &digest);
  CHECK(digest == 0xabcdef12u);
  CHECK((loaded.theta_hat - result.theta_hat).norm() == 0.0);
  CHECK((loaded.neg_hessian_inv - result.neg_hessian_inv).norm() == 0.0);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
