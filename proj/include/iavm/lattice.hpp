#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "iavm/rng.hpp"

namespace iavm {

// Spin configuration on an m x n lattice, entries in {-1, +1}.
// Free (non-periodic) boundary throughout.
class LatticeState {
 public:
  LatticeState(int rows, int cols, std::int8_t fill = +1);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::int8_t at(int i, int j) const { return spins_[idx(i, j)]; }
  void set(int i, int j, std::int8_t v) { spins_[idx(i, j)] = v; }

  // Sum of the (up to 4) neighboring spins of site (i, j).
  int neighbor_sum(int i, int j) const;

  const std::vector<std::int8_t>& spins() const { return spins_; }

  bool operator==(const LatticeState& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && spins_ == o.spins_;
  }

 private:
  int idx(int i, int j) const { return i * cols_ + j; }

  int rows_;
  int cols_;
  std::vector<std::int8_t> spins_;
};

// Nearest-neighbor interaction statistic: sum over horizontal and vertical
// adjacent pairs of the spin product.
long long ising_suff_stat(const LatticeState& lattice);

// P(x_ij = +1 | rest) under interaction strength theta.
double ising_full_conditional(const LatticeState& lattice, int i, int j,
                              double theta);

// One cycle of single-site heat-bath updates in raster order.
void gibbs_cycle_ising(LatticeState& lattice, double theta, Rng& rng);

// Gibbs driver that keeps the interaction statistic incrementally updated.
class IsingSampler {
 public:
  IsingSampler(LatticeState init, double theta);

  void set_theta(double theta);
  void cycle(Rng& rng);

  double stat() const { return static_cast<double>(stat_); }
  const LatticeState& state() const { return state_; }
  long long updates_done() const { return updates_; }

 private:
  LatticeState state_;
  double theta_;
  long long stat_;
  long long updates_ = 0;
  // Heat-bath probability of +1 indexed by neighbor sum + 4.
  double ptable_[9];
};

// Exact draw from the Ising distribution at theta >= 0 via monotone
// coupling-from-the-past (all +1 / all -1 sandwich, doubling epochs with
// reused per-sweep randomness).
LatticeState cftp_ising(double theta, int rows, int cols, std::uint64_t seed,
                        int max_sweeps_log2 = 20);

// Text format: header "m n" then m rows of n entries in {-1, 1}.
LatticeState load_lattice(const std::string& path);
void save_lattice(const LatticeState& lattice, const std::string& path);
LatticeState read_lattice(std::istream& in);
void write_lattice(const LatticeState& lattice, std::ostream& out);

}  // namespace iavm
