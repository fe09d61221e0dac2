#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace iavm {

// Per-node attribute columns; an empty vector means the attribute is absent.
// sex is coded 0 = male, 1 = female.
struct NodeAttributes {
  std::vector<int> grade;
  std::vector<int> sex;
};

// Undirected simple graph with bit-packed adjacency rows (zero diagonal,
// symmetric by construction) plus per-node degrees.
class NetworkState {
 public:
  explicit NetworkState(int n_nodes, NodeAttributes attrs = {});

  int n_nodes() const { return n_; }

  bool has_edge(int i, int j) const {
    return (rows_[i][static_cast<size_t>(j) >> 6] >> (j & 63)) & 1ULL;
  }

  // Sets dyad {i, j}; keeps symmetry, degrees and the edge count exact.
  void set_edge(int i, int j, bool on);

  int degree(int i) const { return degree_[i]; }
  long long edge_count() const { return edge_count_; }

  // Number of common neighbors of i and j.
  int common_neighbors(int i, int j) const;

  // Calls fn(k) for every common neighbor k of i and j.
  template <class Fn>
  void for_each_common_neighbor(int i, int j, Fn&& fn) const {
    const auto& a = rows_[i];
    const auto& b = rows_[j];
    for (size_t w = 0; w < a.size(); ++w) {
      std::uint64_t m = a[w] & b[w];
      while (m) {
        fn(static_cast<int>((w << 6) + static_cast<size_t>(__builtin_ctzll(m))));
        m &= m - 1;
      }
    }
  }

  std::vector<std::pair<int, int>> edges() const;

  const NodeAttributes& attrs() const { return attrs_; }
  NodeAttributes& attrs() { return attrs_; }

  bool operator==(const NetworkState& o) const {
    return n_ == o.n_ && rows_ == o.rows_;
  }

 private:
  int n_;
  size_t words_;
  std::vector<std::vector<std::uint64_t>> rows_;
  std::vector<int> degree_;
  long long edge_count_ = 0;
  NodeAttributes attrs_;
};

// Edge list CSV with header "src,dst" (0-based ids). n_nodes may exceed the
// largest id seen; pass 0 to infer it as max id + 1.
NetworkState load_network(const std::string& edges_path, int n_nodes = 0);
void save_network(const NetworkState& net, const std::string& edges_path);

// Attribute CSV with header "node,grade,sex"; empty fields mark the column
// absent for the whole table.
NodeAttributes load_attributes(const std::string& path, int n_nodes);
void save_attributes(const NetworkState& net, const std::string& path);

int sex_code(const std::string& label);
std::string sex_label(int code);

}  // namespace iavm
