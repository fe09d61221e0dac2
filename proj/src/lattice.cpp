#include "iavm/lattice.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "iavm/errors.hpp"

namespace iavm {

LatticeState::LatticeState(int rows, int cols, std::int8_t fill)
    : rows_(rows), cols_(cols), spins_(static_cast<size_t>(rows) * cols, fill) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("lattice dims must be >= 1");
  if (fill != 1 && fill != -1) throw std::invalid_argument("spins must be +-1");
}

int LatticeState::neighbor_sum(int i, int j) const {
  int s = 0;
  if (i > 0) s += spins_[idx(i - 1, j)];
  if (i + 1 < rows_) s += spins_[idx(i + 1, j)];
  if (j > 0) s += spins_[idx(i, j - 1)];
  if (j + 1 < cols_) s += spins_[idx(i, j + 1)];
  return s;
}

long long ising_suff_stat(const LatticeState& lattice) {
  const int m = lattice.rows(), n = lattice.cols();
  long long s = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j + 1 < n; ++j)
      s += lattice.at(i, j) * lattice.at(i, j + 1);
  for (int i = 0; i + 1 < m; ++i)
    for (int j = 0; j < n; ++j)
      s += lattice.at(i, j) * lattice.at(i + 1, j);
  return s;
}

double ising_full_conditional(const LatticeState& lattice, int i, int j,
                              double theta) {
  if (i < 0 || i >= lattice.rows() || j < 0 || j >= lattice.cols())
    throw std::out_of_range("lattice site out of bounds");
  const int s = lattice.neighbor_sum(i, j);
  return 1.0 / (1.0 + std::exp(-2.0 * theta * s));
}

void gibbs_cycle_ising(LatticeState& lattice, double theta, Rng& rng) {
  const int m = lattice.rows(), n = lattice.cols();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      const double p = 1.0 / (1.0 + std::exp(-2.0 * theta * lattice.neighbor_sum(i, j)));
      lattice.set(i, j, rng.uniform() < p ? std::int8_t{1} : std::int8_t{-1});
    }
  }
}

IsingSampler::IsingSampler(LatticeState init, double theta)
    : state_(std::move(init)), theta_(theta), stat_(ising_suff_stat(state_)) {
  set_theta(theta);
}

void IsingSampler::set_theta(double theta) {
  theta_ = theta;
  for (int s = -4; s <= 4; ++s)
    ptable_[s + 4] = 1.0 / (1.0 + std::exp(-2.0 * theta * s));
}

void IsingSampler::cycle(Rng& rng) {
  const int m = state_.rows(), n = state_.cols();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      const int s = state_.neighbor_sum(i, j);
      const std::int8_t old = state_.at(i, j);
      const std::int8_t next =
          rng.uniform() < ptable_[s + 4] ? std::int8_t{1} : std::int8_t{-1};
      if (next != old) {
        state_.set(i, j, next);
        stat_ += 2LL * next * s;
      }
    }
  }
  updates_ += static_cast<long long>(m) * n;
}

namespace {

// One heat-bath sweep applied to the bounding pair with shared uniforms.
void sweep_pair(LatticeState& hi, LatticeState& lo, const double* ptable,
                Rng& rng) {
  const int m = hi.rows(), n = hi.cols();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = rng.uniform();
      hi.set(i, j, u < ptable[hi.neighbor_sum(i, j) + 4] ? std::int8_t{1}
                                                         : std::int8_t{-1});
      lo.set(i, j, u < ptable[lo.neighbor_sum(i, j) + 4] ? std::int8_t{1}
                                                         : std::int8_t{-1});
    }
  }
}

}  // namespace

LatticeState cftp_ising(double theta, int rows, int cols, std::uint64_t seed,
                        int max_sweeps_log2) {
  if (theta < 0.0)
    throw std::invalid_argument("cftp_ising requires theta >= 0 (monotone coupling)");
  double ptable[9];
  for (int s = -4; s <= 4; ++s)
    ptable[s + 4] = 1.0 / (1.0 + std::exp(-2.0 * theta * s));

  const long long max_sweeps = 1LL << max_sweeps_log2;
  for (long long epoch = 1; epoch <= max_sweeps; epoch *= 2) {
    LatticeState hi(rows, cols, +1);
    LatticeState lo(rows, cols, -1);
    // Sweep at time -t always consumes the stream seeded by t, so earlier
    // randomness is reused verbatim as the start time recedes.
    for (long long t = epoch; t >= 1; --t) {
      Rng sweep_rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
      sweep_pair(hi, lo, ptable, sweep_rng);
    }
    if (hi == lo) return hi;
  }
  throw CoalescenceError(
      "cftp_ising: no coalescence within 2^" + std::to_string(max_sweeps_log2) +
      " sweeps (theta=" + std::to_string(theta) + " too near/above critical)");
}

LatticeState read_lattice(std::istream& in) {
  int m = 0, n = 0;
  if (!(in >> m >> n) || m < 1 || n < 1)
    throw std::runtime_error("lattice file: bad header");
  LatticeState lattice(m, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      int v;
      if (!(in >> v) || (v != 1 && v != -1))
        throw std::runtime_error("lattice file: entries must be -1 or 1");
      lattice.set(i, j, static_cast<std::int8_t>(v));
    }
  }
  return lattice;
}

void write_lattice(const LatticeState& lattice, std::ostream& out) {
  out << lattice.rows() << ' ' << lattice.cols() << '\n';
  for (int i = 0; i < lattice.rows(); ++i) {
    for (int j = 0; j < lattice.cols(); ++j) {
      if (j) out << ' ';
      out << static_cast<int>(lattice.at(i, j));
    }
    out << '\n';
  }
}

LatticeState load_lattice(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open lattice file: " + path);
  return read_lattice(in);
}

void save_lattice(const LatticeState& lattice, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write lattice file: " + path);
  write_lattice(lattice, out);
}

}  // namespace iavm
