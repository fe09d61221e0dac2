#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "iavm/errors.hpp"
#include "iavm/lattice.hpp"
#include "iavm/model.hpp"
#include "iavm/network.hpp"
#include "oracles.hpp"

using namespace iavm;

namespace {

LatticeState random_lattice(int rows, int cols, Rng& rng) {
  LatticeState lat(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      lat.set(i, j, rng.uniform() < 0.5 ? std::int8_t{1} : std::int8_t{-1});
  return lat;
}

NetworkState random_network(int n, double density, Rng& rng) {
  NetworkState net(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < density) net.set_edge(i, j, true);
  return net;
}

NetworkState triangle() {
  NetworkState net(3);
  net.set_edge(0, 1, true);
  net.set_edge(1, 2, true);
  net.set_edge(0, 2, true);
  return net;
}

}  // namespace

TEST_SUITE("model_core") {

TEST_CASE("ising statistic on 2x2 configurations") {
  LatticeState all(2, 2, +1);
  CHECK(ising_suff_stat(all) == 4);

  LatticeState checker(2, 2, +1);
  checker.set(0, 1, -1);
  checker.set(1, 0, -1);
  CHECK(ising_suff_stat(checker) == -4);
}

TEST_CASE("ising statistic matches the double-loop oracle on random 3x3") {
  Rng rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const LatticeState lat = random_lattice(3, 3, rng);
    CHECK(ising_suff_stat(lat) == oracle::ising_stat_naive(lat));
  }
}

TEST_CASE("ising statistic bounds") {
  Rng rng(12);
  const int m = 4, n = 5;
  const long long bound = 2LL * m * n - m - n;
  for (int rep = 0; rep < 50; ++rep) {
    const long long s = ising_suff_stat(random_lattice(m, n, rng));
    CHECK(s >= -bound);
    CHECK(s <= bound);
  }
}

TEST_CASE("ergm statistics on the triangle") {
  const NetworkState tri = triangle();

  SUBCASE("edges term is the degree sum") {
    const auto spec = parse_model_spec("ergm", "edges");
    CHECK(ergm_suff_stats(tri, spec)[0] == doctest::Approx(6.0));
  }
  SUBCASE("edge-count convention halves it") {
    const auto spec = parse_model_spec("ergm", "edges", true);
    CHECK(ergm_suff_stats(tri, spec)[0] == doctest::Approx(3.0));
  }
  SUBCASE("gwesp equals 3 for any decay") {
    for (double tau : {0.1, 0.25, 0.9, 2.0}) {
      const auto spec = parse_model_spec("ergm", "gwesp(" + std::to_string(tau) + ")");
      CHECK(ergm_suff_stats(tri, spec)[0] == doctest::Approx(3.0).epsilon(1e-12));
    }
  }
  SUBCASE("gwd(0.25) equals 3(2 - e^-0.25)") {
    const auto spec = parse_model_spec("ergm", "gwd(0.25)");
    const double expected = 3.0 * (2.0 - std::exp(-0.25));
    CHECK(std::abs(ergm_suff_stats(tri, spec)[0] - expected) < 1e-12);
  }
}

TEST_CASE("ergm statistics on the empty graph are zero") {
  NetworkState net(5);
  net.attrs().grade = {7, 7, 8, 9, 10};
  const auto spec =
      parse_model_spec("ergm", "edges, nodefactor(grade,7), gwd(0.25), gwesp(0.25)");
  CHECK(ergm_suff_stats(net, spec).norm() == 0.0);
}

TEST_CASE("ergm statistics match the dense oracle on random graphs") {
  Rng rng(21);
  const auto spec = parse_model_spec(
      "ergm", "edges, nodefactor(grade,8), nodefactor(sex,male), gwd(0.25), gwesp(0.25)");
  for (int rep = 0; rep < 20; ++rep) {
    NetworkState net = random_network(12, 0.3, rng);
    net.attrs().grade.resize(12);
    net.attrs().sex.resize(12);
    for (int i = 0; i < 12; ++i) {
      net.attrs().grade[static_cast<size_t>(i)] = 7 + static_cast<int>(rng.uniform_int(6));
      net.attrs().sex[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(2));
    }
    const Vector got = ergm_suff_stats(net, spec);
    const Vector want = oracle::ergm_stats_naive(net, spec);
    CHECK((got - want).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("nodefactor on a missing attribute errors") {
  const NetworkState net = triangle();
  const auto spec = parse_model_spec("ergm", "edges, nodefactor(grade,7)");
  CHECK_THROWS_AS(ergm_suff_stats(net, spec), MissingAttributeError);
}

TEST_CASE("ising full conditional") {
  LatticeState lat(3, 3, +1);
  SUBCASE("theta = 0 gives a fair coin anywhere") {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(ising_full_conditional(lat, i, j, 0.0) == doctest::Approx(0.5));
  }
  SUBCASE("interior site with four +1 neighbors at theta 0.3") {
    CHECK(ising_full_conditional(lat, 1, 1, 0.3) ==
          doctest::Approx(1.0 / (1.0 + std::exp(-2.4))).epsilon(1e-12));
  }
  SUBCASE("large theta saturates") {
    CHECK(ising_full_conditional(lat, 1, 1, 40.0) == doctest::Approx(1.0));
  }
  SUBCASE("out of bounds") {
    CHECK_THROWS(ising_full_conditional(lat, 3, 0, 0.1));
  }
}

TEST_CASE("ising gibbs cycle: theta 0 produces fair independent spins") {
  Rng rng(31);
  LatticeState lat(8, 8, +1);
  long long plus = 0, total = 0;
  for (int rep = 0; rep < 400; ++rep) {
    gibbs_cycle_ising(lat, 0.0, rng);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        plus += lat.at(i, j) > 0;
        ++total;
      }
  }
  const double freq = static_cast<double>(plus) / static_cast<double>(total);
  CHECK(freq == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("ising gibbs stationarity on 2x2 matches enumeration (chi-square)") {
  const double theta = 0.3;
  const auto probs = oracle::ising_enumeration_probs(2, 2, theta);
  Rng rng(37);
  IsingSampler sampler(LatticeState(2, 2, +1), theta);
  for (int b = 0; b < 200; ++b) sampler.cycle(rng);
  std::vector<long long> counts(16, 0);
  const int draws = 120000;
  for (int d = 0; d < draws; ++d) {
    sampler.cycle(rng);
    sampler.cycle(rng);
    ++counts[oracle::lattice_mask(sampler.state())];
  }
  CHECK(oracle::chisq_gof_pvalue(counts, probs) > 0.01);
}

TEST_CASE("ising gibbs is seed-deterministic") {
  LatticeState a(6, 7, +1), b(6, 7, +1);
  Rng r1(99), r2(99);
  for (int c = 0; c < 10; ++c) {
    gibbs_cycle_ising(a, 0.25, r1);
    gibbs_cycle_ising(b, 0.25, r2);
  }
  CHECK(a == b);
}

TEST_CASE("ising incremental statistic stays exact over many cycles") {
  Rng rng(41);
  IsingSampler sampler(random_lattice(9, 7, rng), 0.2);
  for (int c = 0; c < 200; ++c) {
    sampler.cycle(rng);
    CHECK(sampler.stat() ==
          doctest::Approx(static_cast<double>(ising_suff_stat(sampler.state())))
              .epsilon(1e-12));
  }
}

TEST_CASE("ergm gibbs: zero theta gives Bernoulli(1/2) dyads") {
  Rng rng(51);
  const auto spec = parse_model_spec("ergm", "edges, gwesp(0.25)");
  ErgmSampler sampler(random_network(8, 0.3, rng), spec);
  const Vector theta = Vector::Zero(2);
  double density = 0.0;
  const int reps = 600;
  for (int r = 0; r < reps; ++r) {
    sampler.cycle(theta, rng);
    density += static_cast<double>(sampler.state().edge_count()) / 28.0;
  }
  CHECK(density / reps == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("ergm gibbs: edges-only dyad density matches the logistic closed form") {
  // Degree-sum convention doubles the coefficient: density = sigma(2 theta).
  Rng rng(52);
  const auto spec = parse_model_spec("ergm", "edges");
  Vector theta(1);
  theta[0] = -0.4;
  ErgmSampler sampler(random_network(4, 0.5, rng), spec);
  for (int b = 0; b < 100; ++b) sampler.cycle(theta, rng);
  double density = 0.0;
  const int reps = 30000;
  for (int r = 0; r < reps; ++r) {
    sampler.cycle(theta, rng);
    density += static_cast<double>(sampler.state().edge_count()) / 6.0;
  }
  const double expected = 1.0 / (1.0 + std::exp(-2.0 * theta[0]));
  CHECK(density / reps == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("ergm change statistics equal from-scratch differences") {
  Rng rng(61);
  const auto spec = parse_model_spec(
      "ergm", "edges, nodefactor(grade,9), gwd(0.25), gwesp(0.25)");
  for (int rep = 0; rep < 5; ++rep) {
    NetworkState net = random_network(10, 0.35, rng);
    net.attrs().grade.resize(10);
    for (int i = 0; i < 10; ++i)
      net.attrs().grade[static_cast<size_t>(i)] = 7 + static_cast<int>(rng.uniform_int(6));
    ErgmSampler sampler(net, spec);
    for (int i = 0; i < 10; ++i) {
      for (int j = i + 1; j < 10; ++j) {
        NetworkState off = sampler.state();
        off.set_edge(i, j, false);
        NetworkState on = off;
        on.set_edge(i, j, true);
        const Vector want = ergm_suff_stats(on, spec) - ergm_suff_stats(off, spec);
        const Vector got = sampler.change_stats(i, j);
        CHECK((got - want).lpNorm<Eigen::Infinity>() < 1e-9);
      }
    }
  }
}

TEST_CASE("gwesp change statistic carries the direct shared-partner term") {
  // Path 0-2-1 plus isolated extras: toggling (0,1) finds c = 1 common
  // neighbor; the direct term is e^tau (1 - (1 - e^-tau)^1) = 1.
  const double tau = 0.25;
  const auto spec = parse_model_spec("ergm", "gwesp(0.25)");
  NetworkState net(5);
  net.set_edge(0, 2, true);
  net.set_edge(1, 2, true);
  ErgmSampler sampler(net, spec);
  const Vector delta = sampler.change_stats(0, 1);
  // Both (0,2) and (1,2) gain their first shared partner, each adding
  // e^tau (1 - (1 - e^-tau)) = 1, so the total is 3.
  const double w1 = std::exp(tau) * (1.0 - (1.0 - std::exp(-tau)));
  CHECK(w1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(delta[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("ergm incremental statistics survive 1e4 random updates") {
  Rng rng(71);
  const auto spec = parse_model_spec(
      "ergm", "edges, nodefactor(sex,female), gwd(0.25), gwesp(0.25)");
  NetworkState net = random_network(14, 0.25, rng);
  net.attrs().sex.resize(14);
  for (int i = 0; i < 14; ++i)
    net.attrs().sex[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(2));
  ErgmSampler sampler(net, spec);
  Vector theta(4);
  theta << -0.5, 0.2, 0.1, 0.3;
  // 14 nodes -> 91 updates per cycle; 110 cycles > 1e4 updates.
  for (int c = 0; c < 110; ++c) sampler.cycle(theta, rng);
  const Vector fresh = ergm_suff_stats(sampler.state(), spec);
  CHECK((sampler.stats() - fresh).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("ergm cycle preserves symmetry and the zero diagonal") {
  Rng rng(81);
  const auto spec = parse_model_spec("ergm", "edges, gwesp(0.25)");
  ErgmSampler sampler(random_network(9, 0.3, rng), spec);
  Vector theta(2);
  theta << -0.3, 0.2;
  for (int c = 0; c < 20; ++c) sampler.cycle(theta, rng);
  const auto& net = sampler.state();
  for (int i = 0; i < 9; ++i) {
    CHECK(!net.has_edge(i, i));
    for (int j = 0; j < 9; ++j) CHECK(net.has_edge(i, j) == net.has_edge(j, i));
  }
}

TEST_CASE("simulate_suff_stats composition and determinism") {
  const auto spec = parse_model_spec("ergm", "edges, gwesp(0.25)");
  Rng rng(91);
  const NetworkState net = random_network(8, 0.3, rng);
  Vector theta(2);
  theta << -0.4, 0.15;

  SUBCASE("M=1, no burnin, spacing 1 equals one cycle") {
    SimSettings settings{0, 1, 12345};
    const Matrix draws = simulate_suff_stats(spec, theta, 1, settings, net).draws;
    ErgmSampler sampler(net, spec);
    Rng direct(12345);
    sampler.cycle(theta, direct);
    CHECK((draws.row(0).transpose() - sampler.stats()).norm() == 0.0);
  }
  SUBCASE("same seed, same M-vector") {
    SimSettings settings{5, 2, 777};
    const Matrix a = simulate_suff_stats(spec, theta, 20, settings, net).draws;
    const Matrix b = simulate_suff_stats(spec, theta, 20, settings, net).draws;
    CHECK(a == b);
  }
}

TEST_CASE("cftp at theta 0 coalesces immediately into fair spins") {
  long long plus = 0, total = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const LatticeState draw = cftp_ising(0.0, 4, 4, 1000 + static_cast<std::uint64_t>(rep));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        plus += draw.at(i, j) > 0;
        ++total;
      }
  }
  CHECK(static_cast<double>(plus) / static_cast<double>(total) ==
        doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("cftp draws follow the exact Boltzmann law on 2x2 (chi-square)") {
  const double theta = 0.3;
  const auto probs = oracle::ising_enumeration_probs(2, 2, theta);
  std::vector<long long> counts(16, 0);
  const int draws = 20000;
  for (int d = 0; d < draws; ++d)
    ++counts[oracle::lattice_mask(cftp_ising(theta, 2, 2, 42 + static_cast<std::uint64_t>(d)))];
  CHECK(oracle::chisq_gof_pvalue(counts, probs) > 0.01);
}

TEST_CASE("cftp is seed-deterministic and subcritical lattices terminate") {
  const LatticeState a = cftp_ising(0.3, 16, 16, 7);
  const LatticeState b = cftp_ising(0.3, 16, 16, 7);
  CHECK(a == b);
}

TEST_CASE("cftp rejects negative coupling and reports budget exhaustion") {
  CHECK_THROWS(cftp_ising(-0.1, 4, 4, 1));
  CHECK_THROWS_AS(cftp_ising(2.0, 24, 24, 1, 4), CoalescenceError);
}

TEST_CASE("exact_log_z closed forms") {
  const auto spec = parse_model_spec("ising", "");
  SUBCASE("1x2 lattice") {
    const LatticeState shape(1, 2);
    for (double theta : {0.0, 0.3, 1.1}) {
      Vector th(1);
      th[0] = theta;
      const double want = std::log(2.0 * std::exp(theta) + 2.0 * std::exp(-theta));
      CHECK(exact_log_z(spec, shape, th) == doctest::Approx(want).epsilon(1e-12));
    }
  }
  SUBCASE("theta 0 counts configurations") {
    const LatticeState shape(3, 3);
    Vector th(1);
    th[0] = 0.0;
    CHECK(exact_log_z(spec, shape, th) == doctest::Approx(9.0 * std::log(2.0)));
    const auto espec = parse_model_spec("ergm", "edges, gwesp(0.25)");
    const NetworkState nshape(4);
    CHECK(exact_log_z(espec, nshape, Vector::Zero(2)) ==
          doctest::Approx(6.0 * std::log(2.0)));
  }
  SUBCASE("3x3 at 0.3 is finite") {
    const LatticeState shape(3, 3);
    Vector th(1);
    th[0] = 0.3;
    CHECK(std::isfinite(exact_log_z(spec, shape, th)));
  }
  SUBCASE("size limit") {
    const LatticeState shape(5, 5);
    Vector th(1);
    th[0] = 0.1;
    CHECK_THROWS_AS(exact_log_z(spec, shape, th), EnumerationLimitError);
  }
}

TEST_CASE("lattice file format round trip") {
  Rng rng(101);
  const LatticeState lat = random_lattice(5, 7, rng);
  std::stringstream ss;
  write_lattice(lat, ss);
  CHECK(read_lattice(ss) == lat);
}

TEST_CASE("network and attribute files round trip") {
  Rng rng(103);
  NetworkState net = random_network(9, 0.3, rng);
  net.attrs().grade = {7, 8, 9, 10, 11, 12, 7, 8, 9};
  net.attrs().sex = {0, 1, 0, 1, 0, 1, 0, 1, 0};
  const auto dir = std::filesystem::temp_directory_path() / "iavm_net_io";
  std::filesystem::create_directories(dir);
  save_network(net, (dir / "edges.csv").string());
  save_attributes(net, (dir / "attrs.csv").string());
  NetworkState loaded = load_network((dir / "edges.csv").string(), 9);
  loaded.attrs() = load_attributes((dir / "attrs.csv").string(), 9);
  CHECK(loaded == net);
  CHECK(loaded.attrs().grade == net.attrs().grade);
  CHECK(loaded.attrs().sex == net.attrs().sex);
  std::filesystem::remove_all(dir);
}

TEST_CASE("model digest separates models and dimensions") {
  const auto spec1 = parse_model_spec("ergm", "edges, gwesp(0.25)");
  const auto spec2 = parse_model_spec("ergm", "edges, gwesp(0.5)");
  const NetworkState small(10), big(11);
  CHECK(model_digest(spec1, small) != model_digest(spec2, small));
  CHECK(model_digest(spec1, small) != model_digest(spec1, big));
  CHECK(model_digest(spec1, small) == model_digest(spec1, NetworkState(10)));
}

}  // TEST_SUITE
