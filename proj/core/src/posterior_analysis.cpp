#include "dgps/posterior_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "dgps/errors.hpp"

namespace dgps {

double kurtosis(const std::vector<double>& samples) {
  const std::size_t n = samples.size();
  if (n < 4) throw std::invalid_argument("kurtosis: need at least 4 samples");
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(n);
  double m2 = 0.0, m4 = 0.0;
  for (double x : samples) {
    const double d = x - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  if (m2 <= 0.0) throw DegenerateInputError("kurtosis: sample variance is zero");
  return m4 / (m2 * m2);
}

double kurtosis_pvalue(const std::vector<double>& samples) {
  const double n = static_cast<double>(samples.size());
  if (samples.size() < 20)
    throw std::invalid_argument("kurtosis_pvalue: need at least 20 samples for the null approximation");

  const double b2 = kurtosis(samples);
  // Moments of b2 under the Gaussian null.
  const double e_b2 = 3.0 * (n - 1.0) / (n + 1.0);
  const double var_b2 =
      24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
  const double x = (b2 - e_b2) / std::sqrt(var_b2);
  // Anscombe-Glynn: match the null's skewness with a cube-root transform.
  const double sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0)) *
                            std::sqrt(6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0)));
  const double a =
      6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + std::sqrt(1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)));
  const double denom = 1.0 + x * std::sqrt(2.0 / (a - 4.0));
  const double base = (1.0 - 2.0 / a) / std::abs(denom);
  const double term2 = (denom < 0.0 ? -1.0 : 1.0) * std::cbrt(base);
  const double z = (1.0 - 2.0 / (9.0 * a) - term2) / std::sqrt(2.0 / (9.0 * a));
  return std::erfc(std::abs(z) / std::numbers::sqrt2);
}

int GaussianityReport::rejections() const {
  int r = 0;
  for (const Row& row : rows) r += row.rejected ? 1 : 0;
  return r;
}

std::string GaussianityReport::to_delimited() const {
  std::ostringstream out;
  out.precision(12);
  out << "coordinate,kurtosis,p_value,rejected\n";
  for (const Row& row : rows)
    out << row.coordinate << "," << row.kurtosis << "," << row.p_value << ","
        << (row.rejected ? 1 : 0) << "\n";
  return out.str();
}

GaussianityReport gaussianity_report(const SampleWindow& window, int n_coords, double alpha,
                                     RngStream& rng, const std::string& dataset_label) {
  if (window.size() < 20)
    throw std::invalid_argument("gaussianity_report: need a window of at least 20 samples");
  const int dim = static_cast<int>(window.at(0).size());
  if (n_coords < 0 || n_coords > dim)
    throw std::invalid_argument("gaussianity_report: n_coords exceeds latent dimension");

  GaussianityReport report;
  report.alpha = alpha;
  report.corrected_alpha = n_coords > 0 ? alpha / static_cast<double>(n_coords) : alpha;
  report.dataset_label = dataset_label;
  if (n_coords == 0) return report;

  // Uniform without replacement.
  std::vector<int> pool(dim);
  for (int i = 0; i < dim; ++i) pool[i] = i;
  for (int i = 0; i < n_coords; ++i) {
    const int j = i + rng.uniform_int(dim - i);
    std::swap(pool[i], pool[j]);
  }

  std::vector<double> trajectory(window.size());
  for (int c = 0; c < n_coords; ++c) {
    const int coord = pool[c];
    for (int s = 0; s < window.size(); ++s) trajectory[s] = window.at(s)(coord);
    GaussianityReport::Row row;
    row.coordinate = coord;
    row.n = window.size();
    row.kurtosis = kurtosis(trajectory);
    row.p_value = kurtosis_pvalue(trajectory);
    row.rejected = row.p_value < report.corrected_alpha;
    report.rows.push_back(row);
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const auto& a, const auto& b) { return a.coordinate < b.coordinate; });
  return report;
}

std::pair<double, double> bimodality_coverage(const SampleWindow& window,
                                              const Eigen::VectorXd& reference_direction) {
  if (window.empty()) throw InvalidStateError("bimodality_coverage: window is empty");
  if (reference_direction.norm() == 0.0)
    throw std::invalid_argument("bimodality_coverage: direction must be nonzero");

  long positive = 0, negative = 0;
  for (int s = 0; s < window.size(); ++s) {
    const double proj = window.at(s).dot(reference_direction);
    if (proj > 0.0)
      ++positive;
    else if (proj < 0.0)
      ++negative;
  }
  const double n = static_cast<double>(window.size());
  return {static_cast<double>(positive) / n, static_cast<double>(negative) / n};
}

}  // namespace dgps
