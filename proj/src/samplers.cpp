#include "iavm/samplers.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>

#include "iavm/diagnostics.hpp"
#include "iavm/errors.hpp"

namespace iavm {

void ProposalSpec::validate() const {
  if (covariance.rows() != covariance.cols() || covariance.rows() == 0)
    throw std::invalid_argument("proposal covariance must be square");
  if (scale <= 0.0) throw std::invalid_argument("proposal scale must be > 0");
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("proposal covariance not positive definite");
}

double log_accept_ratio(const Vector& theta_n, const Vector& theta_star,
                        const SuffStats& s_x, const SuffStats& s_y,
                        const PriorBox& prior, const ProposalSpec& proposal) {
  (void)proposal;  // symmetric random walk: q-ratio is identically zero
  if (!prior.contains(theta_star))
    return -std::numeric_limits<double>::infinity();
  // Uniform prior inside the box: the prior ratio is zero in log space.
  return (theta_star - theta_n).dot(s_x) + (theta_n - theta_star).dot(s_y);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Metropolis-Hastings driver shared by the three samplers. `aux` draws the
// auxiliary statistic at theta* and reports model updates it spent.
template <class Aux>
Chain run_engine(const std::string& algorithm, const SuffStats& s_x,
                 const PriorBox& prior, const ProposalSpec& proposal,
                 const RunOptions& options, std::uint64_t seed, Aux&& aux) {
  prior.validate();
  proposal.validate();
  const int p = static_cast<int>(prior.lower.size());
  if (proposal.covariance.rows() != p)
    throw std::invalid_argument("proposal dimension does not match prior");
  if (options.n_samples < 1) throw std::invalid_argument("n_samples >= 1");

  Eigen::LLT<Matrix> llt(proposal.covariance);
  const Matrix chol = llt.matrixL();
  Rng rng(seed);

  Vector theta = options.init ? *options.init
                              : Vector((prior.lower + prior.upper) / 2.0);
  if (!prior.contains(theta))
    throw std::invalid_argument("chain init lies outside the prior box");

  Chain chain;
  chain.seed = seed;
  chain.algorithm = algorithm;

  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(options.n_samples) * static_cast<size_t>(p));
  const auto t0 = Clock::now();

  long long target = options.n_samples;
  long long done = 0;
  Vector z(p), theta_star(p);
  const long long block = std::max<long long>(1000, options.n_samples / 4);

  while (done < target) {
    for (int k = 0; k < p; ++k) z[k] = rng.normal();
    theta_star = theta + proposal.scale * (chol * z);
    if (prior.contains(theta_star)) {
      const auto a0 = Clock::now();
      const long long before = aux.updates();
      const SuffStats s_y = aux.draw(theta_star, rng);
      chain.aux_seconds += seconds_since(a0);
      chain.aux_updates += aux.updates() - before;
      const double logr =
          log_accept_ratio(theta, theta_star, s_x, s_y, prior, proposal);
      if (std::log(rng.uniform_pos()) < logr) {
        theta = theta_star;
        ++chain.accepted;
      }
    }
    for (int k = 0; k < p; ++k) flat.push_back(theta[k]);
    ++done;

    if (done == target && options.mcse_target && target < options.max_samples &&
        done >= 100) {
      double worst = 0.0;
      Vector series(done);
      for (int k = 0; k < p; ++k) {
        for (long long i = 0; i < done; ++i)
          series[i] = flat[static_cast<size_t>(i) * p + k];
        worst = std::max(worst, mcse(series));
      }
      if (worst > *options.mcse_target)
        target = std::min(options.max_samples, target + block);
    }
  }

  chain.wall_seconds = seconds_since(t0);
  chain.samples.resize(done, p);
  for (long long i = 0; i < done; ++i)
    for (int k = 0; k < p; ++k)
      chain.samples(i, k) = flat[static_cast<size_t>(i) * p + k];
  return chain;
}

struct DmhIsingAux {
  IsingSampler proto;
  IsingSampler work;
  long long inner_cycles;

  DmhIsingAux(const LatticeState& data, long long cycles)
      : proto(data, 0.0), work(data, 0.0), inner_cycles(cycles) {}

  long long updates() const { return total_updates; }
  SuffStats draw(const Vector& theta, Rng& rng) {
    work = proto;
    work.set_theta(theta[0]);
    for (long long c = 0; c < inner_cycles; ++c) work.cycle(rng);
    total_updates += work.updates_done();
    SuffStats s(1);
    s[0] = work.stat();
    return s;
  }
  long long total_updates = 0;
};

struct DmhErgmAux {
  ErgmSampler proto;
  ErgmSampler work;
  long long inner_cycles;

  DmhErgmAux(const NetworkState& data, const ModelSpec& spec, long long cycles)
      : proto(data, spec), work(data, spec), inner_cycles(cycles) {}

  long long updates() const { return total_updates; }
  SuffStats draw(const Vector& theta, Rng& rng) {
    work = proto;
    for (long long c = 0; c < inner_cycles; ++c) work.cycle(theta, rng);
    total_updates += work.updates_done() - proto.updates_done();
    return work.stats();
  }
  long long total_updates = 0;
};

struct IavmAux {
  const PrecomputeStore& store;
  const GPModel& gp;
  Vector z;

  IavmAux(const PrecomputeStore& s, const GPModel& g)
      : store(s), gp(g), z(s.p()) {}

  long long updates() const { return 0; }
  SuffStats draw(const Vector& theta, Rng& rng) {
    Vector mu = predict_mean(gp, theta);
    const auto [index, chol] = nearest_design(store, theta);
    (void)index;
    for (long long k = 0; k < z.size(); ++k) z[k] = rng.normal();
    mu.noalias() += (*chol) * z;
    return mu;
  }
};

struct ExchangeAux {
  int rows, cols;
  int max_sweeps_log2;

  long long updates() const { return total_updates; }
  SuffStats draw(const Vector& theta, Rng& rng) {
    const LatticeState y =
        cftp_ising(theta[0], rows, cols, rng.next_u64(), max_sweeps_log2);
    // CFTP cost is dominated by sweeps; counted in wall time only.
    SuffStats s(1);
    s[0] = static_cast<double>(ising_suff_stat(y));
    return s;
  }
  long long total_updates = 0;
};

}  // namespace

Chain run_dmh(const ModelState& data, const ModelSpec& spec,
              const PriorBox& prior, const ProposalSpec& proposal,
              long long inner_cycles, const RunOptions& options,
              std::uint64_t seed) {
  spec.validate();
  if (inner_cycles < 1) throw std::invalid_argument("inner_cycles >= 1");
  const SuffStats s_x = compute_stats(data, spec);
  if (spec.kind == ModelKind::Ising) {
    DmhIsingAux aux(std::get<LatticeState>(data), inner_cycles);
    return run_engine("dmh", s_x, prior, proposal, options, seed, aux);
  }
  DmhErgmAux aux(std::get<NetworkState>(data), spec, inner_cycles);
  return run_engine("dmh", s_x, prior, proposal, options, seed, aux);
}

Chain run_iavm(const ModelState& data, const ModelSpec& spec,
               const PriorBox& prior, const ProposalSpec& proposal,
               const PrecomputeStore& store, const RunOptions& options,
               std::uint64_t seed) {
  spec.validate();
  const std::uint64_t digest = model_digest(spec, data);
  if (store.model_digest != digest)
    throw DigestMismatchError(
        "precompute store digest " + format_digest(store.model_digest) +
        " does not match model/data digest " + format_digest(digest));
  if (!store.gp)
    throw std::invalid_argument("store has no fitted GP (run fit-gp first)");
  const SuffStats s_x = compute_stats(data, spec);
  IavmAux aux(store, *store.gp);
  return run_engine("iavm", s_x, prior, proposal, options, seed, aux);
}

Chain run_exchange(const ModelState& data, const ModelSpec& spec,
                   const PriorBox& prior, const ProposalSpec& proposal,
                   const RunOptions& options, std::uint64_t seed,
                   int cftp_max_sweeps_log2) {
  spec.validate();
  if (spec.kind != ModelKind::Ising)
    throw std::invalid_argument("exchange sampler supports the Ising model only");
  const auto& lattice = std::get<LatticeState>(data);
  // Monotone CFTP needs theta >= 0: truncate the prior there.
  PriorBox truncated = prior;
  truncated.lower = prior.lower.cwiseMax(0.0);
  truncated.validate();
  const SuffStats s_x = compute_stats(data, spec);
  ExchangeAux aux{lattice.rows(), lattice.cols(), cftp_max_sweeps_log2};
  return run_engine("exchange", s_x, truncated, proposal, options, seed, aux);
}

void save_chain_csv(const Chain& chain, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  for (int k = 0; k < chain.p(); ++k)
    out << "theta_" << (k + 1) << (k + 1 < chain.p() ? "," : "\n");
  for (long long i = 0; i < chain.n(); ++i)
    for (int k = 0; k < chain.p(); ++k)
      out << chain.samples(i, k) << (k + 1 < chain.p() ? "," : "\n");
}

Matrix load_chain_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("theta_1", 0) != 0)
    throw std::runtime_error("chain CSV must start with theta_1.. header");
  int p = 1;
  for (char ch : line) p += ch == ',';
  std::vector<double> flat;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int got = 0;
    while (std::getline(ss, cell, ',')) {
      flat.push_back(std::stod(cell));
      ++got;
    }
    if (got != p) throw std::runtime_error("ragged chain CSV row");
  }
  const long long n = static_cast<long long>(flat.size()) / p;
  Matrix m(n, p);
  for (long long i = 0; i < n; ++i)
    for (int k = 0; k < p; ++k) m(i, k) = flat[static_cast<size_t>(i) * p + k];
  return m;
}

void save_chain_manifest(const Chain& chain, const std::string& path) {
  nlohmann::json j;
  j["algorithm"] = chain.algorithm;
  j["seed"] = chain.seed;
  j["n_samples"] = chain.n();
  j["accepted"] = chain.accepted;
  j["acceptance_rate"] = chain.acceptance_rate();
  j["wall_seconds"] = chain.wall_seconds;
  j["aux_updates"] = chain.aux_updates;
  j["aux_seconds"] = chain.aux_seconds;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace iavm
