#ifndef DGPS_POSTERIOR_ANALYSIS_HPP
#define DGPS_POSTERIOR_ANALYSIS_HPP

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dgps/rng.hpp"
#include "dgps/sample_window.hpp"

namespace dgps {

// Population-style kurtosis mu4 / sigma^4 (3 under a Gaussian).
// Requires length >= 4 and positive sample variance.
double kurtosis(const std::vector<double>& samples);

// Two-sided p-value for H0 "samples are Gaussian", from the normalized
// kurtosis statistic with the Anscombe-Glynn cube-root transformation to
// correct the skewed small-sample null. Requires length >= 20.
double kurtosis_pvalue(const std::vector<double>& samples);

// Per-coordinate Gaussianity test results over a sample window.
struct GaussianityReport {
  struct Row {
    int coordinate = 0;
    int n = 0;
    double kurtosis = 0.0;
    double p_value = 1.0;
    bool rejected = false;
  };

  std::vector<Row> rows;
  double alpha = 1e-5;
  double corrected_alpha = 1e-5;  // alpha / #coordinates tested
  std::string dataset_label;

  int rejections() const;
  // Delimited table: coordinate, kurtosis, p_value, rejected.
  std::string to_delimited() const;
};

// Tests n_coords coordinates drawn uniformly without replacement from the
// latent dimension, flagging p < alpha / n_coords (Bonferroni).
GaussianityReport gaussianity_report(const SampleWindow& window, int n_coords, double alpha,
                                     RngStream& rng, const std::string& dataset_label = "");

// Fractions of window samples whose projection onto the reference direction
// is strictly positive / strictly negative. The direction is typically the
// latent difference between the two MAP modes of a bimodal posterior.
std::pair<double, double> bimodality_coverage(const SampleWindow& window,
                                              const Eigen::VectorXd& reference_direction);

}  // namespace dgps

#endif  // DGPS_POSTERIOR_ANALYSIS_HPP
