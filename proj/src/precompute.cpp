#include "iavm/precompute.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "iavm/errors.hpp"

namespace iavm {

namespace {

Matrix sample_covariance(const Matrix& draws) {
  const int m = static_cast<int>(draws.rows());
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  const Matrix centered = draws.rowwise() - mean;
  return centered.transpose() * centered / (m - 1);
}

Matrix factor_with_jitter(const Matrix& cov) {
  const int p = static_cast<int>(cov.rows());
  const double trace = cov.trace();
  if (!(trace > 0.0))
    throw DegenerateCovarianceError(
        "design-point covariance has zero trace (constant statistics)");
  const double jitter = 1e-8 * trace / p;
  Matrix c = cov;
  c.diagonal().array() += jitter;
  Eigen::LLT<Matrix> llt(c);
  if (llt.info() != Eigen::Success)
    throw DegenerateCovarianceError("design-point covariance not factorizable");
  return llt.matrixL();
}

}  // namespace

PrecomputeStore harvest(const ModelSpec& spec, const ModelState& data,
                        const DesignSet& design, int M,
                        const SimSettings& settings, int workers) {
  spec.validate();
  settings.validate();
  design.validate();
  if (design.p() != spec.dim())
    throw std::invalid_argument("design dimension does not match model");
  if (M <= spec.dim())
    throw std::invalid_argument("harvest needs M > p");
  if (workers < 1) throw std::invalid_argument("workers >= 1");

  PrecomputeStore store;
  store.design = design;
  store.M = M;
  store.sim_settings = settings;
  store.model_digest = model_digest(spec, data);
  const int d = design.d();
  const int p = design.p();
  store.means.resize(d, p);
  store.covariances.assign(static_cast<size_t>(d), Matrix());
  store.chol_cache.assign(static_cast<size_t>(d), Matrix());

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  std::mutex error_mutex;

  auto work = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= d || failed.load()) return;
      try {
        SimSettings point_settings = settings;
        point_settings.rng_seed = derive_seed(settings.rng_seed, static_cast<std::uint64_t>(i));
        const Vector theta = design.points.row(i).transpose();
        const SimulatedStats sims = simulate_suff_stats(spec, theta, M, point_settings, data);
        store.means.row(i) = sims.draws.colwise().mean();
        store.covariances[static_cast<size_t>(i)] = sample_covariance(sims.draws);
        store.chol_cache[static_cast<size_t>(i)] =
            factor_with_jitter(store.covariances[static_cast<size_t>(i)]);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) error_message = e.what();
        return;
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    const int count = std::min(workers, d);
    pool.reserve(static_cast<size_t>(count));
    for (int w = 0; w < count; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw std::runtime_error("harvest: " + error_message);
  return store;
}

std::pair<int, const Matrix*> nearest_design(const PrecomputeStore& store,
                                             const Vector& theta) {
  if (store.d() == 0) throw std::invalid_argument("empty store");
  int best = 0;
  double best_d2 = (store.design.points.row(0).transpose() - theta).squaredNorm();
  for (int i = 1; i < store.d(); ++i) {
    const double d2 = (store.design.points.row(i).transpose() - theta).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return {best, &store.chol_cache[static_cast<size_t>(best)]};
}

double ks_distance(const Vector& a, const Vector& b) {
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const size_t na = sa.size(), nb = sb.size();
  size_t ia = 0, ib = 0;
  double dmax = 0.0;
  while (ia < na && ib < nb) {
    const double v = std::min(sa[ia], sb[ib]);
    while (ia < na && sa[ia] <= v) ++ia;
    while (ib < nb && sb[ib] <= v) ++ib;
    dmax = std::max(dmax, std::abs(static_cast<double>(ia) / na -
                                   static_cast<double>(ib) / nb));
  }
  return dmax;
}

SurrogateCheck surrogate_check(const ModelSpec& spec, const ModelState& data,
                               const Vector& theta, int M,
                               const SimSettings& settings) {
  if (M < 2) throw std::invalid_argument("surrogate_check needs M >= 2");
  SurrogateCheck out;
  out.true_draws = simulate_suff_stats(spec, theta, M, settings, data).draws;
  const Eigen::RowVectorXd mean = out.true_draws.colwise().mean();
  const Matrix cov = sample_covariance(out.true_draws);
  const Matrix l = factor_with_jitter(cov);

  const int p = static_cast<int>(out.true_draws.cols());
  Rng rng(derive_seed(settings.rng_seed, 0x5357u));
  out.normal_draws.resize(M, p);
  Vector z(p);
  for (int m = 0; m < M; ++m) {
    for (int k = 0; k < p; ++k) z[k] = rng.normal();
    out.normal_draws.row(m) = mean + (l * z).transpose();
  }
  out.ks_distance.resize(p);
  for (int k = 0; k < p; ++k)
    out.ks_distance[k] = ks_distance(out.true_draws.col(k), out.normal_draws.col(k));
  return out;
}

namespace {

constexpr char kMagic[5] = {'I', 'A', 'V', 'M', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

double get_f64(std::istream& in) {
  const std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  put_u64(out, static_cast<std::uint64_t>(m.rows()));
  put_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
}

Matrix get_matrix(std::istream& in) {
  const auto r = static_cast<long>(get_u64(in));
  const auto c = static_cast<long>(get_u64(in));
  Matrix m(r, c);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) m(i, j) = get_f64(in);
  return m;
}

void put_vector(std::ostream& out, const Vector& v) {
  put_u64(out, static_cast<std::uint64_t>(v.size()));
  for (long i = 0; i < v.size(); ++i) put_f64(out, v[i]);
}

Vector get_vector(std::istream& in) {
  const auto n = static_cast<long>(get_u64(in));
  Vector v(n);
  for (long i = 0; i < n; ++i) v[i] = get_f64(in);
  return v;
}

}  // namespace

void save_store(const PrecomputeStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write store: " + path);
  out.write(kMagic, 5);
  put_u64(out, 1);  // container version
  put_u64(out, store.model_digest);
  put_u64(out, static_cast<std::uint64_t>(store.M));
  put_u64(out, static_cast<std::uint64_t>(store.sim_settings.burnin_cycles));
  put_u64(out, static_cast<std::uint64_t>(store.sim_settings.spacing_cycles));
  put_u64(out, store.sim_settings.rng_seed);
  put_u64(out, store.design.source == DesignSource::UniformGrid ? 0 : 1);
  put_f64(out, store.design.nu);
  put_matrix(out, store.design.points);
  put_matrix(out, store.means);
  for (const auto& cov : store.covariances) put_matrix(out, cov);

  put_u64(out, store.gp.has_value() ? 1 : 0);
  if (store.gp) {
    const GPModel& gp = *store.gp;
    put_matrix(out, gp.design_std);
    put_vector(out, gp.in_center);
    put_vector(out, gp.in_scale);
    put_u64(out, gp.dims.size());
    for (const auto& dim : gp.dims) {
      put_f64(out, dim.hyper.sigma2);
      put_f64(out, dim.hyper.phi);
      put_f64(out, dim.hyper.tau2);
      put_vector(out, dim.hyper.beta);
      put_matrix(out, dim.chol_c);
      put_vector(out, dim.weights);
      put_f64(out, dim.out_center);
      put_f64(out, dim.out_scale);
    }
  }

  // JSON sidecar with human-readable metadata.
  nlohmann::json meta;
  meta["format"] = "IAVM1";
  meta["model_digest"] = format_digest(store.model_digest);
  meta["d"] = store.d();
  meta["p"] = store.p();
  meta["M"] = store.M;
  meta["burnin_cycles"] = store.sim_settings.burnin_cycles;
  meta["spacing_cycles"] = store.sim_settings.spacing_cycles;
  meta["seed"] = store.sim_settings.rng_seed;
  meta["design_source"] =
      store.design.source == DesignSource::UniformGrid ? "uniform-grid" : "mvt";
  meta["has_gp"] = store.gp.has_value();
  std::ofstream side(path + ".json");
  if (!side) throw std::runtime_error("cannot write store sidecar: " + path + ".json");
  side << meta.dump(2) << '\n';
}

PrecomputeStore load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open store: " + path);
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kMagic, 5) != 0)
    throw std::runtime_error("not an IAVM1 store: " + path);
  const std::uint64_t version = get_u64(in);
  if (version != 1) throw std::runtime_error("unsupported store version");

  PrecomputeStore store;
  store.model_digest = get_u64(in);
  store.M = static_cast<int>(get_u64(in));
  store.sim_settings.burnin_cycles = static_cast<long long>(get_u64(in));
  store.sim_settings.spacing_cycles = static_cast<long long>(get_u64(in));
  store.sim_settings.rng_seed = get_u64(in);
  store.design.source = get_u64(in) == 0 ? DesignSource::UniformGrid
                                         : DesignSource::MultivariateT;
  store.design.nu = get_f64(in);
  store.design.points = get_matrix(in);
  store.means = get_matrix(in);
  const int d = store.d();
  store.covariances.resize(static_cast<size_t>(d));
  store.chol_cache.resize(static_cast<size_t>(d));
  for (int i = 0; i < d; ++i) {
    store.covariances[static_cast<size_t>(i)] = get_matrix(in);
    store.chol_cache[static_cast<size_t>(i)] =
        factor_with_jitter(store.covariances[static_cast<size_t>(i)]);
  }

  if (get_u64(in) == 1) {
    GPModel gp;
    gp.design_std = get_matrix(in);
    gp.in_center = get_vector(in);
    gp.in_scale = get_vector(in);
    const auto q = get_u64(in);
    gp.dims.resize(q);
    for (auto& dim : gp.dims) {
      dim.hyper.sigma2 = get_f64(in);
      dim.hyper.phi = get_f64(in);
      dim.hyper.tau2 = get_f64(in);
      dim.hyper.beta = get_vector(in);
      dim.chol_c = get_matrix(in);
      dim.weights = get_vector(in);
      dim.out_center = get_f64(in);
      dim.out_scale = get_f64(in);
    }
    store.gp = std::move(gp);
  }
  if (!in) throw std::runtime_error("truncated store: " + path);
  return store;
}

void export_means_csv(const PrecomputeStore& store, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  for (int j = 0; j < store.p(); ++j) out << "theta_" << (j + 1) << ',';
  for (int j = 0; j < store.p(); ++j)
    out << "mean_" << (j + 1) << (j + 1 < store.p() ? "," : "\n");
  for (int i = 0; i < store.d(); ++i) {
    for (int j = 0; j < store.p(); ++j) out << store.design.points(i, j) << ',';
    for (int j = 0; j < store.p(); ++j)
      out << store.means(i, j) << (j + 1 < store.p() ? "," : "\n");
  }
}

}  // namespace iavm
