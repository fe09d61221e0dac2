#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "iavm/model.hpp"
#include "iavm/pseudolik.hpp"

namespace iavm {

// Sectioned key/value experiment configuration. Unknown keys are rejected so
// typos fail loudly.
struct ExperimentConfig {
  // [model]
  std::string model_kind;   // ising | ergm
  std::string terms;        // ERGM term list
  bool edges_as_edge_count = false;
  std::string lattice_path;     // ising data
  std::string edges_path;       // ergm data
  std::string attributes_path;  // optional

  // [prior]
  std::string prior_mode = "mple";  // mple | box
  double width_sd = 10.0;
  std::vector<double> prior_lower;
  std::vector<double> prior_upper;

  // [design]
  std::string design_mode = "mvt";  // mvt | uniform
  int d = 20;
  double nu = 5.0;
  std::uint64_t design_seed = 1;

  // [precompute]
  int M = 50;
  long long burnin = 0;
  long long spacing = 1;
  int workers = 1;
  std::uint64_t seed = 0;

  // [sampler]
  std::string algorithm = "dmh";  // dmh | iavm | exchange
  long long n_samples = 10000;
  std::optional<double> mcse_target;
  long long max_samples = 1000000;
  double proposal_scale = 1.0;
  std::optional<double> proposal_sd;  // overrides to sd^2 * I
  long long inner_cycles = 1;
  std::uint64_t sampler_seed = 0;

  // [output]
  std::string out_dir = "out";

  ModelSpec model_spec() const;
  ModelState load_data() const;
  void validate() const;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text);

}  // namespace iavm
