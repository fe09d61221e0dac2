#include "iavm/config.hpp"

#include <fstream>
#include <sstream>

#include "iavm/errors.hpp"

namespace iavm {

namespace {

std::string strip(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(strip(cell)));
  return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("bad section at line " + std::to_string(lineno));
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key = value at line " + std::to_string(lineno));
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));
    const std::string qual = section + "." + key;

    try {
      if (qual == "model.kind") cfg.model_kind = value;
      else if (qual == "model.terms") cfg.terms = value;
      else if (qual == "model.edge_convention") {
        if (value == "degree-sum") cfg.edges_as_edge_count = false;
        else if (value == "edge-count") cfg.edges_as_edge_count = true;
        else throw ConfigError("edge_convention must be degree-sum or edge-count");
      }
      else if (qual == "model.lattice") cfg.lattice_path = value;
      else if (qual == "model.edges") cfg.edges_path = value;
      else if (qual == "model.attributes") cfg.attributes_path = value;
      else if (qual == "prior.mode") cfg.prior_mode = value;
      else if (qual == "prior.width_sd") cfg.width_sd = std::stod(value);
      else if (qual == "prior.lower") cfg.prior_lower = parse_list(value);
      else if (qual == "prior.upper") cfg.prior_upper = parse_list(value);
      else if (qual == "design.mode") cfg.design_mode = value;
      else if (qual == "design.d") cfg.d = std::stoi(value);
      else if (qual == "design.nu") cfg.nu = std::stod(value);
      else if (qual == "design.seed") cfg.design_seed = std::stoull(value);
      else if (qual == "precompute.M") cfg.M = std::stoi(value);
      else if (qual == "precompute.burnin") cfg.burnin = std::stoll(value);
      else if (qual == "precompute.spacing") cfg.spacing = std::stoll(value);
      else if (qual == "precompute.workers") cfg.workers = std::stoi(value);
      else if (qual == "precompute.seed") cfg.seed = std::stoull(value);
      else if (qual == "sampler.algorithm") cfg.algorithm = value;
      else if (qual == "sampler.n_samples") cfg.n_samples = std::stoll(value);
      else if (qual == "sampler.mcse_target") cfg.mcse_target = std::stod(value);
      else if (qual == "sampler.max_samples") cfg.max_samples = std::stoll(value);
      else if (qual == "sampler.proposal_scale") cfg.proposal_scale = std::stod(value);
      else if (qual == "sampler.proposal_sd") cfg.proposal_sd = std::stod(value);
      else if (qual == "sampler.inner_cycles") cfg.inner_cycles = std::stoll(value);
      else if (qual == "sampler.seed") cfg.sampler_seed = std::stoull(value);
      else if (qual == "output.dir") cfg.out_dir = value;
      else throw ConfigError("unknown config key: " + qual);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("bad value for " + qual + " at line " + std::to_string(lineno));
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void ExperimentConfig::validate() const {
  if (model_kind != "ising" && model_kind != "ergm")
    throw ConfigError("model.kind must be ising or ergm");
  if (model_kind == "ising" && lattice_path.empty())
    throw ConfigError("model.lattice required for ising");
  if (model_kind == "ergm" && edges_path.empty())
    throw ConfigError("model.edges required for ergm");
  if (model_kind == "ergm" && terms.empty())
    throw ConfigError("model.terms required for ergm");
  if (prior_mode != "mple" && prior_mode != "box")
    throw ConfigError("prior.mode must be mple or box");
  if (prior_mode == "box" && (prior_lower.empty() || prior_lower.size() != prior_upper.size()))
    throw ConfigError("prior.lower/upper must be set and equal length in box mode");
  if (design_mode != "mvt" && design_mode != "uniform")
    throw ConfigError("design.mode must be mvt or uniform");
  if (d < 2) throw ConfigError("design.d must be >= 2");
  if (M < 1) throw ConfigError("precompute.M must be >= 1");
  if (workers < 1) throw ConfigError("precompute.workers must be >= 1");
  if (algorithm != "dmh" && algorithm != "iavm" && algorithm != "exchange")
    throw ConfigError("sampler.algorithm must be dmh, iavm or exchange");
  if (n_samples < 1) throw ConfigError("sampler.n_samples must be >= 1");
  if (inner_cycles < 1) throw ConfigError("sampler.inner_cycles must be >= 1");
}

ModelSpec ExperimentConfig::model_spec() const {
  return parse_model_spec(model_kind, terms, edges_as_edge_count);
}

ModelState ExperimentConfig::load_data() const {
  if (model_kind == "ising") return load_lattice(lattice_path);
  NetworkState net = load_network(edges_path);
  if (!attributes_path.empty())
    net.attrs() = load_attributes(attributes_path, net.n_nodes());
  return net;
}

}  // namespace iavm
