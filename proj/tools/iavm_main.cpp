#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "iavm/config.hpp"
#include "iavm/diagnostics.hpp"
#include "iavm/errors.hpp"
#include "iavm/gp.hpp"
#include "iavm/model.hpp"
#include "iavm/precompute.hpp"
#include "iavm/pseudolik.hpp"
#include "iavm/samplers.hpp"

namespace fs = std::filesystem;
using namespace iavm;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDigest = 3;
constexpr int kExitMissing = 4;

struct MissingFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_exists(const std::string& path) {
  if (!fs::exists(path)) throw MissingFileError("missing file: " + path);
}

struct Cli {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> algorithm;
  std::optional<std::string> out_dir;

  ExperimentConfig load() const {
    require_exists(config_path);
    ExperimentConfig cfg = load_config(config_path);
    if (out_dir) cfg.out_dir = *out_dir;
    if (algorithm) cfg.algorithm = *algorithm;
    if (workers) {
      cfg.workers = *workers;
    } else if (const char* env = std::getenv("IAVM_WORKERS")) {
      cfg.workers = std::atoi(env);
    }
    if (cfg.workers < 1) throw ConfigError("worker count must be >= 1");
    return cfg;
  }
};

ModelState load_checked_data(const ExperimentConfig& cfg) {
  if (cfg.model_kind == "ising") {
    require_exists(cfg.lattice_path);
  } else {
    require_exists(cfg.edges_path);
    if (!cfg.attributes_path.empty()) require_exists(cfg.attributes_path);
  }
  return cfg.load_data();
}

std::string artifact(const ExperimentConfig& cfg, const std::string& name) {
  return (fs::path(cfg.out_dir) / name).string();
}

MPLEResult load_checked_mple(const ExperimentConfig& cfg, std::uint64_t digest) {
  const std::string path = artifact(cfg, "mple.json");
  require_exists(path);
  std::uint64_t stored = 0;
  MPLEResult result = load_mple_json(path, &stored);
  if (stored != digest)
    throw DigestMismatchError("mple.json digest does not match the configured model");
  return result;
}

PriorBox resolve_prior(const ExperimentConfig& cfg, std::uint64_t digest) {
  if (cfg.prior_mode == "box") {
    PriorBox box;
    box.lower = Eigen::Map<const Vector>(cfg.prior_lower.data(),
                                         static_cast<long>(cfg.prior_lower.size()));
    box.upper = Eigen::Map<const Vector>(cfg.prior_upper.data(),
                                         static_cast<long>(cfg.prior_upper.size()));
    box.validate();
    return box;
  }
  return prior_box(load_checked_mple(cfg, digest), cfg.width_sd);
}

int cmd_mple(const Cli& cli) {
  const ExperimentConfig cfg = cli.load();
  const ModelSpec spec = cfg.model_spec();
  const ModelState data = load_checked_data(cfg);
  const MPLEResult result = mple(data, spec);
  fs::create_directories(cfg.out_dir);
  save_mple_json(result, model_digest(spec, data), artifact(cfg, "mple.json"));
  std::cout << "mple: theta_hat = [" << result.theta_hat.transpose()
            << "] after " << result.iterations << " Newton steps\n"
            << "wrote " << artifact(cfg, "mple.json") << '\n';
  return 0;
}

int cmd_design(const Cli& cli) {
  const ExperimentConfig cfg = cli.load();
  const ModelSpec spec = cfg.model_spec();
  const ModelState data = load_checked_data(cfg);
  const std::uint64_t digest = model_digest(spec, data);

  DesignSet design;
  if (cfg.design_mode == "uniform") {
    design = uniform_grid_design(resolve_prior(cfg, digest), cfg.d);
  } else {
    const MPLEResult result = load_checked_mple(cfg, digest);
    const PriorBox box = cfg.prior_mode == "box" ? resolve_prior(cfg, digest)
                                                 : prior_box(result, cfg.width_sd);
    Rng rng(cli.seed.value_or(cfg.design_seed));
    design = sample_design_points(result, cfg.d, cfg.nu, rng, box);
  }
  fs::create_directories(cfg.out_dir);
  save_design_json(design, digest, artifact(cfg, "design.json"));
  std::cout << "design: " << design.d() << " points, source "
            << (design.source == DesignSource::UniformGrid ? "uniform-grid" : "mvt")
            << "\nwrote " << artifact(cfg, "design.json") << '\n';
  return 0;
}

int cmd_precompute(const Cli& cli) {
  const ExperimentConfig cfg = cli.load();
  const ModelSpec spec = cfg.model_spec();
  const ModelState data = load_checked_data(cfg);
  const std::uint64_t digest = model_digest(spec, data);

  const std::string design_path = artifact(cfg, "design.json");
  require_exists(design_path);
  std::uint64_t stored = 0;
  const DesignSet design = load_design_json(design_path, &stored);
  if (stored != digest)
    throw DigestMismatchError("design.json digest does not match the configured model");

  SimSettings settings{cfg.burnin, cfg.spacing, cli.seed.value_or(cfg.seed)};
  const PrecomputeStore store =
      harvest(spec, data, design, cfg.M, settings, cfg.workers);
  save_store(store, artifact(cfg, "store.bin"));
  export_means_csv(store, artifact(cfg, "store_means.csv"));
  std::cout << "precompute: d=" << store.d() << " M=" << store.M << " workers="
            << cfg.workers << "\nwrote " << artifact(cfg, "store.bin") << '\n';
  return 0;
}

int cmd_fit_gp(const Cli& cli) {
  const ExperimentConfig cfg = cli.load();
  const std::string store_path = artifact(cfg, "store.bin");
  require_exists(store_path);
  PrecomputeStore store = load_store(store_path);
  store.gp = fit_gp(store.design.points, store.means);
  save_store(store, store_path);
  std::cout << "fit-gp: " << store.gp->dims.size() << " emulator dimension(s)\n";
  for (size_t k = 0; k < store.gp->dims.size(); ++k) {
    const auto& h = store.gp->dims[k].hyper;
    std::cout << "  dim " << (k + 1) << ": sigma2=" << h.sigma2
              << " phi=" << h.phi << " tau2=" << h.tau2 << '\n';
  }
  std::cout << "wrote " << store_path << '\n';
  return 0;
}

int cmd_sample(const Cli& cli) {
  const ExperimentConfig cfg = cli.load();
  const ModelSpec spec = cfg.model_spec();
  const ModelState data = load_checked_data(cfg);
  const std::uint64_t digest = model_digest(spec, data);
  const PriorBox prior = resolve_prior(cfg, digest);

  ProposalSpec proposal;
  if (cfg.proposal_sd) {
    proposal.covariance =
        (*cfg.proposal_sd) * (*cfg.proposal_sd) * Matrix::Identity(spec.dim(), spec.dim());
  } else {
    proposal.covariance = load_checked_mple(cfg, digest).neg_hessian_inv;
  }
  proposal.scale = cfg.proposal_scale;

  RunOptions options;
  options.n_samples = cfg.n_samples;
  options.mcse_target = cfg.mcse_target;
  options.max_samples = cfg.max_samples;

  const std::uint64_t seed = cli.seed.value_or(cfg.sampler_seed);
  Chain chain;
  if (cfg.algorithm == "dmh") {
    chain = run_dmh(data, spec, prior, proposal, cfg.inner_cycles, options, seed);
  } else if (cfg.algorithm == "iavm") {
    const std::string store_path = artifact(cfg, "store.bin");
    require_exists(store_path);
    const PrecomputeStore store = load_store(store_path);
    if (store.model_digest != digest)
      throw DigestMismatchError("store.bin digest does not match the configured model");
    chain = run_iavm(data, spec, prior, proposal, store, options, seed);
  } else {
    chain = run_exchange(data, spec, prior, proposal, options, seed);
  }

  fs::create_directories(cfg.out_dir);
  const std::string stem = "chain_" + cfg.algorithm;
  save_chain_csv(chain, artifact(cfg, stem + ".csv"));
  save_chain_manifest(chain, artifact(cfg, stem + "_manifest.json"));
  std::cout << cfg.algorithm << ": " << chain.n() << " samples, acceptance "
            << chain.acceptance_rate() << ", wall " << chain.wall_seconds
            << " s\nwrote " << artifact(cfg, stem + ".csv") << '\n';
  return 0;
}

int cmd_diagnose(const std::string& chain_path) {
  require_exists(chain_path);
  const Matrix samples = load_chain_csv(chain_path);

  double wall = 0.0;
  fs::path manifest = chain_path;
  manifest.replace_extension();
  manifest += "_manifest.json";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    nlohmann::json j;
    in >> j;
    wall = j.value("wall_seconds", 0.0);
  }

  const SummaryTable table = summarize(samples, wall);
  std::cout << render_summary_text(table);
  fs::path out = chain_path;
  out.replace_extension();
  out += "_summary.csv";
  save_summary_csv(table, out.string());
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

int cmd_check_surrogate(const Cli& cli, const std::string& theta_arg, int m_draws) {
  const ExperimentConfig cfg = cli.load();
  const ModelSpec spec = cfg.model_spec();
  const ModelState data = load_checked_data(cfg);
  const std::uint64_t digest = model_digest(spec, data);

  Vector theta(spec.dim());
  if (theta_arg == "mple") {
    theta = load_checked_mple(cfg, digest).theta_hat;
  } else {
    std::stringstream ss(theta_arg);
    std::string cell;
    int k = 0;
    while (std::getline(ss, cell, ',')) {
      if (k >= spec.dim()) throw ConfigError("too many theta components");
      theta[k++] = std::stod(cell);
    }
    if (k != spec.dim()) throw ConfigError("theta must have p components");
  }

  SimSettings settings{cfg.burnin, cfg.spacing, cli.seed.value_or(cfg.seed)};
  const int m = m_draws > 0 ? m_draws : cfg.M;
  const SurrogateCheck check = surrogate_check(spec, data, theta, m, settings);

  fs::create_directories(cfg.out_dir);
  const std::string path = artifact(cfg, "surrogate_check.csv");
  std::ofstream out(path);
  out.precision(17);
  out << "stat_index,true_value,surrogate_value\n";
  for (int k = 0; k < check.true_draws.cols(); ++k)
    for (int i = 0; i < check.true_draws.rows(); ++i)
      out << (k + 1) << ',' << check.true_draws(i, k) << ','
          << check.normal_draws(i, k) << '\n';
  std::cout << "check-surrogate: theta = [" << theta.transpose() << "], M = "
            << m << '\n';
  for (int k = 0; k < check.ks_distance.size(); ++k)
    std::cout << "  KS distance dim " << (k + 1) << ": " << check.ks_distance[k]
              << '\n';
  std::cout << "wrote " << path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Indirect auxiliary-variable MCMC for doubly intractable models"};
  app.require_subcommand(1);

  Cli cli;
  std::string chain_path;
  std::string theta_arg = "mple";
  int m_draws = 0;

  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    auto* opt = sub->add_option("--config", cli.config_path, "experiment config file");
    if (needs_config) opt->required();
    sub->add_option("--seed", cli.seed, "override the stage seed");
    sub->add_option("--workers", cli.workers, "worker threads (precompute)");
    sub->add_option("--out", cli.out_dir, "override the output directory");
  };

  auto* mple_cmd = app.add_subcommand("mple", "maximum pseudolikelihood estimate");
  add_common(mple_cmd);
  auto* design_cmd = app.add_subcommand("design", "generate design points");
  add_common(design_cmd);
  auto* pre_cmd = app.add_subcommand("precompute", "harvest statistics at design points");
  add_common(pre_cmd);
  auto* gp_cmd = app.add_subcommand("fit-gp", "fit the GP emulators into the store");
  add_common(gp_cmd);
  auto* sample_cmd = app.add_subcommand("sample", "run a posterior sampler");
  add_common(sample_cmd);
  sample_cmd->add_option("--algorithm", cli.algorithm, "dmh | iavm | exchange")
      ->check(CLI::IsMember({"dmh", "iavm", "exchange"}));
  auto* diag_cmd = app.add_subcommand("diagnose", "summarize a chain CSV");
  diag_cmd->add_option("--chain", chain_path, "chain CSV path")->required();
  auto* surr_cmd = app.add_subcommand("check-surrogate",
                                      "paired true-vs-normal statistic draws");
  add_common(surr_cmd);
  surr_cmd->add_option("--theta", theta_arg, "comma-separated theta or 'mple'");
  surr_cmd->add_option("--m-draws", m_draws, "number of paired draws");

  CLI11_PARSE(app, argc, argv);

  try {
    if (mple_cmd->parsed()) return cmd_mple(cli);
    if (design_cmd->parsed()) return cmd_design(cli);
    if (pre_cmd->parsed()) return cmd_precompute(cli);
    if (gp_cmd->parsed()) return cmd_fit_gp(cli);
    if (sample_cmd->parsed()) return cmd_sample(cli);
    if (diag_cmd->parsed()) return cmd_diagnose(chain_path);
    if (surr_cmd->parsed()) return cmd_check_surrogate(cli, theta_arg, m_draws);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DigestMismatchError& e) {
    std::cerr << "digest mismatch: " << e.what() << '\n';
    return kExitDigest;
  } catch (const MissingFileError& e) {
    std::cerr << e.what() << '\n';
    return kExitMissing;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
