#include "iavm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "iavm/errors.hpp"

namespace iavm {

double ess(const Vector& series) {
  const long long n = series.size();
  if (n < 10) throw std::invalid_argument("ess needs at least 10 samples");
  const double mean = series.mean();
  const Vector centered = series.array() - mean;
  const double gamma0 = centered.squaredNorm() / static_cast<double>(n);
  if (!(gamma0 > 0.0)) throw ConstantSeriesError("ess: constant series");

  double rho_sum = 0.0;
  for (long long k = 1; k < n; ++k) {
    const double gamma_k =
        centered.head(n - k).dot(centered.tail(n - k)) / static_cast<double>(n);
    const double rho = gamma_k / gamma0;
    if (rho <= 0.0) break;  // initial-positive-sequence truncation
    rho_sum += rho;
  }
  const double raw = static_cast<double>(n) / (1.0 + 2.0 * rho_sum);
  return std::min(std::max(raw, 1.0), static_cast<double>(n));
}

std::pair<double, double> hpd(const Vector& series, double level) {
  const long long n = series.size();
  if (n < 20) throw std::invalid_argument("hpd needs at least 20 samples");
  if (level <= 0.0 || level >= 1.0) throw std::invalid_argument("level in (0,1)");
  std::vector<double> sorted(series.begin(), series.end());
  std::sort(sorted.begin(), sorted.end());
  const long long k = static_cast<long long>(
      std::ceil(level * static_cast<double>(n)));
  const long long windows = n - k + 1;
  long long best = 0;
  double best_width = sorted[static_cast<size_t>(k - 1)] - sorted[0];
  for (long long i = 1; i < windows; ++i) {
    const double width =
        sorted[static_cast<size_t>(i + k - 1)] - sorted[static_cast<size_t>(i)];
    if (width < best_width) {
      best_width = width;
      best = i;
    }
  }
  return {sorted[static_cast<size_t>(best)],
          sorted[static_cast<size_t>(best + k - 1)]};
}

double mcse(const Vector& series) {
  const long long n = series.size();
  if (n < 100) throw std::invalid_argument("mcse needs at least 100 samples");
  const long long b = static_cast<long long>(std::floor(std::sqrt(static_cast<double>(n))));
  const long long len = n / b;
  double mean_of_means = 0.0;
  std::vector<double> batch(static_cast<size_t>(b));
  for (long long i = 0; i < b; ++i) {
    batch[static_cast<size_t>(i)] = series.segment(i * len, len).mean();
    mean_of_means += batch[static_cast<size_t>(i)];
  }
  mean_of_means /= static_cast<double>(b);
  double var = 0.0;
  for (long long i = 0; i < b; ++i) {
    const double d = batch[static_cast<size_t>(i)] - mean_of_means;
    var += d * d;
  }
  var /= static_cast<double>(b - 1);
  return std::sqrt(var / static_cast<double>(b));
}

SummaryTable summarize(const Matrix& samples, double wall_seconds) {
  if (samples.rows() == 0) throw std::invalid_argument("summarize: empty chain");
  SummaryTable table;
  table.wall_seconds = wall_seconds;
  const int p = static_cast<int>(samples.cols());
  double min_ess = std::numeric_limits<double>::infinity();
  for (int k = 0; k < p; ++k) {
    const Vector col = samples.col(k);
    ParameterSummary s{};
    s.mean = col.mean();
    try {
      const auto interval = hpd(col);
      s.hpd_lower = interval.first;
      s.hpd_upper = interval.second;
      s.ess = ess(col);
      s.mcse = mcse(col);
    } catch (const ConstantSeriesError&) {
      throw ConstantSeriesError("summarize: parameter " + std::to_string(k + 1) +
                                " is a constant series");
    }
    min_ess = std::min(min_ess, s.ess);
    table.params.push_back(s);
  }
  table.min_ess_per_second =
      wall_seconds > 0.0 ? min_ess / wall_seconds : 0.0;
  return table;
}

SummaryTable summarize(const Chain& chain) {
  return summarize(chain.samples, chain.wall_seconds);
}

std::string render_summary_text(const SummaryTable& table) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "param" << std::right << std::setw(12)
     << "mean" << std::setw(24) << "95%HPD" << std::setw(12) << "ESS"
     << std::setw(12) << "MCSE" << '\n';
  for (size_t k = 0; k < table.params.size(); ++k) {
    const auto& s = table.params[k];
    std::ostringstream interval;
    interval << '(' << std::fixed << std::setprecision(4) << s.hpd_lower << ", "
             << s.hpd_upper << ')';
    os << std::left << std::setw(10) << ("theta_" + std::to_string(k + 1))
       << std::right << std::setw(12) << std::fixed << std::setprecision(4)
       << s.mean << std::setw(24) << interval.str() << std::setw(12)
       << std::setprecision(1) << s.ess << std::setw(12) << std::setprecision(6)
       << s.mcse << '\n';
  }
  os << "wall_seconds " << std::setprecision(3) << table.wall_seconds
     << "  minESS/Time " << std::setprecision(3) << table.min_ess_per_second
     << '\n';
  return os.str();
}

void save_summary_csv(const SummaryTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(12);
  out << "param,mean,hpd_lower,hpd_upper,ess,mcse\n";
  for (size_t k = 0; k < table.params.size(); ++k) {
    const auto& s = table.params[k];
    out << "theta_" << (k + 1) << ',' << s.mean << ',' << s.hpd_lower << ','
        << s.hpd_upper << ',' << s.ess << ',' << s.mcse << '\n';
  }
}

}  // namespace iavm
