#include "iavm/model.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "iavm/errors.hpp"

namespace iavm {

void ModelSpec::validate() const {
  if (terms.empty()) throw std::invalid_argument("model spec needs at least one term");
  if (kind == ModelKind::Ising) {
    if (terms.size() != 1 || terms[0].kind != TermKind::IsingInteraction)
      throw std::invalid_argument("Ising spec has exactly one interaction term");
  } else {
    for (const auto& t : terms) {
      if (t.kind == TermKind::IsingInteraction)
        throw std::invalid_argument("ising term in an ERGM spec");
      if ((t.kind == TermKind::Gwd || t.kind == TermKind::Gwesp) && t.decay < 0.0)
        throw std::invalid_argument("decay must be nonnegative");
      if (t.kind == TermKind::NodeFactor && t.attribute != "grade" &&
          t.attribute != "sex")
        throw std::invalid_argument("nodefactor attribute must be grade or sex");
    }
  }
}

std::string ModelSpec::canonical() const {
  std::ostringstream os;
  os << (kind == ModelKind::Ising ? "ising" : "ergm");
  for (const auto& t : terms) {
    os << ';';
    switch (t.kind) {
      case TermKind::IsingInteraction: os << "interaction"; break;
      case TermKind::Edges:
        os << (edges_as_edge_count ? "edges[count]" : "edges[degsum]");
        break;
      case TermKind::NodeFactor:
        os << "nodefactor(" << t.attribute << ',' << t.level << ')';
        break;
      case TermKind::Gwd: os << "gwd(" << t.decay << ')'; break;
      case TermKind::Gwesp: os << "gwesp(" << t.decay << ')'; break;
    }
  }
  return os.str();
}

namespace {

std::vector<std::string> split_terms(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string strip(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

Term parse_term(const std::string& raw) {
  const std::string t = strip(raw);
  const auto open = t.find('(');
  const std::string name = strip(open == std::string::npos ? t : t.substr(0, open));
  std::vector<std::string> args;
  if (open != std::string::npos) {
    const auto close = t.rfind(')');
    if (close == std::string::npos || close < open)
      throw ConfigError("malformed term: " + raw);
    for (auto& a : split_terms(t.substr(open + 1, close - open - 1)))
      args.push_back(strip(a));
  }
  if (name == "edges") return Term{TermKind::Edges, "", 0, 0.25};
  if (name == "gwd")
    return Term{TermKind::Gwd, "", 0, args.empty() ? 0.25 : std::stod(args[0])};
  if (name == "gwesp")
    return Term{TermKind::Gwesp, "", 0, args.empty() ? 0.25 : std::stod(args[0])};
  if (name == "nodefactor") {
    if (args.size() != 2) throw ConfigError("nodefactor needs (attribute, level)");
    Term term{TermKind::NodeFactor, args[0], 0, 0.25};
    term.level = args[0] == "sex" ? sex_code(args[1]) : std::stoi(args[1]);
    return term;
  }
  throw ConfigError("unknown term: " + name);
}

}  // namespace

ModelSpec parse_model_spec(const std::string& kind, const std::string& term_list,
                           bool edges_as_edge_count) {
  ModelSpec spec;
  spec.edges_as_edge_count = edges_as_edge_count;
  if (kind == "ising") {
    spec.kind = ModelKind::Ising;
    spec.terms = {Term{TermKind::IsingInteraction, "", 0, 0.25}};
  } else if (kind == "ergm") {
    spec.kind = ModelKind::Ergm;
    spec.terms.clear();
    for (const auto& t : split_terms(term_list)) spec.terms.push_back(parse_term(t));
  } else {
    throw ConfigError("model kind must be ising or ergm");
  }
  spec.validate();
  return spec;
}

void SimSettings::validate() const {
  if (burnin_cycles < 0) throw std::invalid_argument("burnin_cycles < 0");
  if (spacing_cycles < 1) throw std::invalid_argument("spacing_cycles < 1");
}

namespace {

// e^tau * (1 - (1 - e^-tau)^k) for k = 0..n; the k = 0 entry is 0.
std::vector<double> geometric_weights(double tau, int n) {
  std::vector<double> w(static_cast<size_t>(n) + 1);
  const double base = 1.0 - std::exp(-tau);
  double pk = 1.0;
  const double scale = std::exp(tau);
  for (int k = 0; k <= n; ++k) {
    w[static_cast<size_t>(k)] = scale * (1.0 - pk);
    pk *= base;
  }
  return w;
}

const std::vector<int>& attribute_column(const NetworkState& net,
                                         const std::string& name) {
  const auto& col = name == "grade" ? net.attrs().grade : net.attrs().sex;
  if (col.empty())
    throw MissingAttributeError("nodefactor term references absent attribute '" +
                                name + "'");
  return col;
}

}  // namespace

SuffStats ergm_suff_stats(const NetworkState& net, const ModelSpec& spec) {
  spec.validate();
  if (spec.kind != ModelKind::Ergm)
    throw std::invalid_argument("ergm_suff_stats on a non-ERGM spec");
  const int n = net.n_nodes();
  SuffStats out = Vector::Zero(spec.dim());
  const auto edges = net.edges();
  for (int t = 0; t < spec.dim(); ++t) {
    const Term& term = spec.terms[static_cast<size_t>(t)];
    switch (term.kind) {
      case TermKind::Edges: {
        double degsum = 0;
        for (int i = 0; i < n; ++i) degsum += net.degree(i);
        out[t] = spec.edges_as_edge_count ? degsum / 2.0 : degsum;
        break;
      }
      case TermKind::NodeFactor: {
        const auto& col = attribute_column(net, term.attribute);
        double s = 0;
        for (auto [i, j] : edges)
          s += (col[static_cast<size_t>(i)] == term.level) +
               (col[static_cast<size_t>(j)] == term.level);
        out[t] = s;
        break;
      }
      case TermKind::Gwd: {
        const auto w = geometric_weights(term.decay, n);
        double s = 0;
        for (int i = 0; i < n; ++i) s += w[static_cast<size_t>(net.degree(i))];
        out[t] = s;
        break;
      }
      case TermKind::Gwesp: {
        const auto w = geometric_weights(term.decay, n);
        double s = 0;
        for (auto [i, j] : edges)
          s += w[static_cast<size_t>(net.common_neighbors(i, j))];
        out[t] = s;
        break;
      }
      case TermKind::IsingInteraction:
        throw std::invalid_argument("ising term in ERGM stats");
    }
  }
  return out;
}

SuffStats compute_stats(const ModelState& state, const ModelSpec& spec) {
  if (std::holds_alternative<LatticeState>(state)) {
    SuffStats out(1);
    out[0] = static_cast<double>(ising_suff_stat(std::get<LatticeState>(state)));
    return out;
  }
  return ergm_suff_stats(std::get<NetworkState>(state), spec);
}

ErgmSampler::ErgmSampler(NetworkState net, const ModelSpec& spec)
    : net_(std::move(net)), spec_(spec) {
  spec_.validate();
  const int n = net_.n_nodes();
  for (const auto& t : spec_.terms) {
    if (t.kind == TermKind::Gwd && gw_deg_.empty())
      gw_deg_ = geometric_weights(t.decay, n);
    if (t.kind == TermKind::Gwesp && gw_esp_.empty())
      gw_esp_ = geometric_weights(t.decay, n);
    if (t.kind == TermKind::NodeFactor) attribute_column(net_, t.attribute);
  }
  stats_ = ergm_suff_stats(net_, spec_);
}

Vector ErgmSampler::change_stats_off(int i, int j) const {
  Vector delta(spec_.dim());
  for (int t = 0; t < spec_.dim(); ++t) {
    const Term& term = spec_.terms[static_cast<size_t>(t)];
    switch (term.kind) {
      case TermKind::Edges:
        delta[t] = spec_.edges_as_edge_count ? 1.0 : 2.0;
        break;
      case TermKind::NodeFactor: {
        const auto& col = term.attribute == "grade" ? net_.attrs().grade
                                                    : net_.attrs().sex;
        delta[t] = (col[static_cast<size_t>(i)] == term.level) +
                   (col[static_cast<size_t>(j)] == term.level);
        break;
      }
      case TermKind::Gwd: {
        const int di = net_.degree(i), dj = net_.degree(j);
        delta[t] = gw_deg_[static_cast<size_t>(di) + 1] - gw_deg_[static_cast<size_t>(di)] +
                   gw_deg_[static_cast<size_t>(dj) + 1] - gw_deg_[static_cast<size_t>(dj)];
        break;
      }
      case TermKind::Gwesp: {
        // Adding (i,j) creates an edge with c shared partners and grants one
        // extra shared partner to each of (i,k), (j,k) for common neighbors k.
        double d = 0;
        int c = 0;
        net_.for_each_common_neighbor(i, j, [&](int k) {
          ++c;
          const int spi = net_.common_neighbors(i, k);
          const int spj = net_.common_neighbors(j, k);
          d += gw_esp_[static_cast<size_t>(spi) + 1] - gw_esp_[static_cast<size_t>(spi)];
          d += gw_esp_[static_cast<size_t>(spj) + 1] - gw_esp_[static_cast<size_t>(spj)];
        });
        d += gw_esp_[static_cast<size_t>(c)];
        delta[t] = d;
        break;
      }
      case TermKind::IsingInteraction:
        throw std::invalid_argument("ising term in ERGM sampler");
    }
  }
  return delta;
}

Vector ErgmSampler::change_stats(int i, int j) {
  if (i == j) throw std::invalid_argument("change_stats needs i != j");
  const bool present = net_.has_edge(i, j);
  if (present) net_.set_edge(i, j, false);
  Vector delta = change_stats_off(i, j);
  if (present) net_.set_edge(i, j, true);
  return delta;
}

void ErgmSampler::cycle(const Vector& theta, Rng& rng) {
  if (theta.size() != spec_.dim())
    throw std::invalid_argument("theta dimension mismatch");
  const int n = net_.n_nodes();
  const long long n_updates = static_cast<long long>(n) * (n - 1) / 2;
  for (long long u = 0; u < n_updates; ++u) {
    int i = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
    int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n - 1)));
    if (j >= i) ++j;
    if (net_.has_edge(i, j)) {
      net_.set_edge(i, j, false);
      const Vector delta = change_stats_off(i, j);
      stats_ -= delta;
      const double eta = theta.dot(delta);
      if (rng.uniform() < 1.0 / (1.0 + std::exp(-eta))) {
        net_.set_edge(i, j, true);
        stats_ += delta;
      }
    } else {
      const Vector delta = change_stats_off(i, j);
      const double eta = theta.dot(delta);
      if (rng.uniform() < 1.0 / (1.0 + std::exp(-eta))) {
        net_.set_edge(i, j, true);
        stats_ += delta;
      }
    }
  }
  updates_ += n_updates;
}

void gibbs_cycle_ergm(NetworkState& net, const Vector& theta,
                      const ModelSpec& spec, Rng& rng) {
  ErgmSampler sampler(std::move(net), spec);
  sampler.cycle(theta, rng);
  net = sampler.state();
}

SimulatedStats simulate_suff_stats(const ModelSpec& spec, const Vector& theta,
                                   int M, const SimSettings& settings,
                                   const ModelState& init) {
  spec.validate();
  settings.validate();
  if (M < 1) throw std::invalid_argument("M >= 1 required");
  if (theta.size() != spec.dim())
    throw std::invalid_argument("theta dimension mismatch");

  SimulatedStats out;
  out.draws.resize(M, spec.dim());
  Rng rng(settings.rng_seed);

  if (spec.kind == ModelKind::Ising) {
    IsingSampler sampler(std::get<LatticeState>(init), theta[0]);
    for (long long c = 0; c < settings.burnin_cycles; ++c) sampler.cycle(rng);
    for (int m = 0; m < M; ++m) {
      for (long long c = 0; c < settings.spacing_cycles; ++c) sampler.cycle(rng);
      out.draws(m, 0) = sampler.stat();
    }
    out.cycles = settings.burnin_cycles + settings.spacing_cycles * M;
    out.updates = sampler.updates_done();
  } else {
    ErgmSampler sampler(std::get<NetworkState>(init), spec);
    for (long long c = 0; c < settings.burnin_cycles; ++c) sampler.cycle(theta, rng);
    for (int m = 0; m < M; ++m) {
      for (long long c = 0; c < settings.spacing_cycles; ++c) sampler.cycle(theta, rng);
      out.draws.row(m) = sampler.stats().transpose();
    }
    out.cycles = settings.burnin_cycles + settings.spacing_cycles * M;
    out.updates = sampler.updates_done();
  }
  return out;
}

namespace {

struct LogSumExp {
  double max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;

  void add(double v) {
    if (v <= max) {
      sum += std::exp(v - max);
    } else {
      sum = sum * std::exp(max - v) + 1.0;
      max = v;
    }
  }
  double value() const { return max + std::log(sum); }
};

}  // namespace

double exact_log_z(const ModelSpec& spec, const ModelState& shape,
                   const Vector& theta) {
  spec.validate();
  if (theta.size() != spec.dim())
    throw std::invalid_argument("theta dimension mismatch");

  if (spec.kind == ModelKind::Ising) {
    const auto& tmpl = std::get<LatticeState>(shape);
    const int m = tmpl.rows(), n = tmpl.cols();
    const int bits = m * n;
    if (bits > 20)
      throw EnumerationLimitError("exact_log_z: state space exceeds 2^20");
    LatticeState work(m, n);
    LogSumExp lse;
    const std::uint32_t total = 1u << bits;
    for (std::uint32_t mask = 0; mask < total; ++mask) {
      for (int b = 0; b < bits; ++b)
        work.set(b / n, b % n, (mask >> b) & 1u ? std::int8_t{1} : std::int8_t{-1});
      lse.add(theta[0] * static_cast<double>(ising_suff_stat(work)));
    }
    return lse.value();
  }

  const auto& tmpl = std::get<NetworkState>(shape);
  const int n = tmpl.n_nodes();
  const int dyads = n * (n - 1) / 2;
  if (dyads > 20)
    throw EnumerationLimitError("exact_log_z: state space exceeds 2^20");
  std::vector<std::pair<int, int>> index;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) index.emplace_back(i, j);
  LogSumExp lse;
  const std::uint32_t total = 1u << dyads;
  NetworkState work(n, tmpl.attrs());
  for (std::uint32_t mask = 0; mask < total; ++mask) {
    for (int b = 0; b < dyads; ++b)
      work.set_edge(index[static_cast<size_t>(b)].first,
                    index[static_cast<size_t>(b)].second, (mask >> b) & 1u);
    lse.add(theta.dot(ergm_suff_stats(work, spec)));
  }
  return lse.value();
}

std::uint64_t model_digest(const ModelSpec& spec, const ModelState& data) {
  std::ostringstream os;
  os << spec.canonical() << '|';
  if (std::holds_alternative<LatticeState>(data)) {
    const auto& l = std::get<LatticeState>(data);
    os << "lattice:" << l.rows() << 'x' << l.cols();
  } else {
    const auto& net = std::get<NetworkState>(data);
    os << "network:" << net.n_nodes() << ";grade:" << !net.attrs().grade.empty()
       << ";sex:" << !net.attrs().sex.empty();
  }
  const std::string s = os.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_digest(std::uint64_t digest) {
  std::ostringstream os;
  os << std::hex << digest;
  return os.str();
}

}  // namespace iavm
