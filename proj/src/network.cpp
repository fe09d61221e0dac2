#include "iavm/network.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace iavm {

NetworkState::NetworkState(int n_nodes, NodeAttributes attrs)
    : n_(n_nodes),
      words_((static_cast<size_t>(n_nodes) + 63) / 64),
      rows_(n_nodes, std::vector<std::uint64_t>((static_cast<size_t>(n_nodes) + 63) / 64, 0)),
      degree_(n_nodes, 0),
      attrs_(std::move(attrs)) {
  if (n_nodes < 1) throw std::invalid_argument("network needs n_nodes >= 1");
  auto check = [&](const std::vector<int>& col, const char* name) {
    if (!col.empty() && static_cast<int>(col.size()) != n_nodes)
      throw std::invalid_argument(std::string("attribute table '") + name +
                                  "' must have exactly n rows");
  };
  check(attrs_.grade, "grade");
  check(attrs_.sex, "sex");
}

void NetworkState::set_edge(int i, int j, bool on) {
  if (i == j) throw std::invalid_argument("no self loops");
  const bool cur = has_edge(i, j);
  if (cur == on) return;
  const std::uint64_t bi = 1ULL << (j & 63);
  const std::uint64_t bj = 1ULL << (i & 63);
  if (on) {
    rows_[i][static_cast<size_t>(j) >> 6] |= bi;
    rows_[j][static_cast<size_t>(i) >> 6] |= bj;
    ++degree_[i];
    ++degree_[j];
    ++edge_count_;
  } else {
    rows_[i][static_cast<size_t>(j) >> 6] &= ~bi;
    rows_[j][static_cast<size_t>(i) >> 6] &= ~bj;
    --degree_[i];
    --degree_[j];
    --edge_count_;
  }
}

int NetworkState::common_neighbors(int i, int j) const {
  const auto& a = rows_[i];
  const auto& b = rows_[j];
  int c = 0;
  for (size_t w = 0; w < a.size(); ++w) c += std::popcount(a[w] & b[w]);
  return c;
}

std::vector<std::pair<int, int>> NetworkState::edges() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<size_t>(edge_count_));
  for (int i = 0; i < n_; ++i)
    for (int j = i + 1; j < n_; ++j)
      if (has_edge(i, j)) out.emplace_back(i, j);
  return out;
}

int sex_code(const std::string& label) {
  if (label == "male") return 0;
  if (label == "female") return 1;
  throw std::runtime_error("unknown sex label: " + label);
}

std::string sex_label(int code) { return code == 0 ? "male" : "female"; }

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

NetworkState load_network(const std::string& edges_path, int n_nodes) {
  std::ifstream in(edges_path);
  if (!in) throw std::runtime_error("cannot open edge file: " + edges_path);
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{"src", "dst"})
    throw std::runtime_error("edge file must start with header 'src,dst'");
  std::vector<std::pair<int, int>> edges;
  int max_id = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 2) throw std::runtime_error("bad edge row: " + line);
    const int a = std::stoi(f[0]), b = std::stoi(f[1]);
    if (a < 0 || b < 0 || a == b) throw std::runtime_error("bad edge ids: " + line);
    edges.emplace_back(a, b);
    max_id = std::max({max_id, a, b});
  }
  if (n_nodes == 0) n_nodes = max_id + 1;
  if (n_nodes <= max_id) throw std::runtime_error("edge id exceeds n_nodes");
  NetworkState net(n_nodes);
  for (auto [a, b] : edges) net.set_edge(a, b, true);
  return net;
}

void save_network(const NetworkState& net, const std::string& edges_path) {
  std::ofstream out(edges_path);
  if (!out) throw std::runtime_error("cannot write edge file: " + edges_path);
  out << "src,dst\n";
  for (auto [i, j] : net.edges()) out << i << ',' << j << '\n';
}

NodeAttributes load_attributes(const std::string& path, int n_nodes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open attribute file: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      split_csv(line) != std::vector<std::string>{"node", "grade", "sex"})
    throw std::runtime_error("attribute file must start with header 'node,grade,sex'");
  NodeAttributes attrs;
  attrs.grade.assign(n_nodes, -1);
  attrs.sex.assign(n_nodes, -1);
  int rows = 0;
  bool any_grade = false, any_sex = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 3) throw std::runtime_error("bad attribute row: " + line);
    const int node = std::stoi(f[0]);
    if (node < 0 || node >= n_nodes) throw std::runtime_error("attribute node id out of range");
    if (!f[1].empty()) {
      attrs.grade[node] = std::stoi(f[1]);
      any_grade = true;
    }
    if (!f[2].empty()) {
      attrs.sex[node] = sex_code(f[2]);
      any_sex = true;
    }
    ++rows;
  }
  if (rows != n_nodes)
    throw std::runtime_error("attribute table must have exactly n rows");
  if (!any_grade) attrs.grade.clear();
  if (!any_sex) attrs.sex.clear();
  return attrs;
}

void save_attributes(const NetworkState& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write attribute file: " + path);
  out << "node,grade,sex\n";
  const auto& a = net.attrs();
  for (int i = 0; i < net.n_nodes(); ++i) {
    out << i << ',';
    if (!a.grade.empty()) out << a.grade[i];
    out << ',';
    if (!a.sex.empty()) out << sex_label(a.sex[i]);
    out << '\n';
  }
}

}  // namespace iavm
