#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "glean/example.hpp"
#include "glean/table.hpp"

namespace glean {

/// Answer normalization used by EM and F1 (casefold, punctuation and article
/// strip, numeric canonicalization).
std::string normalize_answer(std::string_view s);

/// 1 iff the normalized prediction equals any normalized gold answer.
double em(std::string_view pred, const std::vector<std::string>& gold);

/// Token-bag F1, max over gold answers. Both empty -> 1, one empty -> 0.
double token_f1(std::string_view pred, const std::vector<std::string>& gold);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Interval&) const = default;
};

/// Percentile bootstrap of the mean. The interval is widened, if necessary,
/// to contain the sample mean.
Interval bootstrap_ci(const std::vector<double>& values, std::uint64_t seed,
                      std::size_t resamples = 1000, double level = 0.95);

struct ExampleScore {
  std::string id;
  double em = 0.0;
  double f1 = 0.0;
};

struct MetricBlock {
  double em = 0.0;
  double f1 = 0.0;
  std::size_t n = 0;
  Interval ci_em;
  Interval ci_f1;
  std::vector<std::string> ids;  // sorted
};

/// Aggregates per-example scores (reduced in id order).
MetricBlock aggregate_scores(std::vector<ExampleScore> scores, std::uint64_t seed,
                             std::size_t resamples = 1000);

struct ClassifierMetrics {
  double accuracy = 0.0;
  double auroc = 0.0;
  double auprc = 0.0;
  double pos_rate = 0.0;
  std::size_t n = 0;
};

/// Mann-Whitney AUROC with midranks. Throws Error(kSingleClass).
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);
/// Average precision: sum over distinct thresholds of (R_k - R_{k-1}) * P_k.
double average_precision(const std::vector<double>& scores, const std::vector<int>& labels);
/// Accuracy thresholds scores at 0.5.
ClassifierMetrics classifier_metrics(const std::vector<double>& scores, const std::vector<int>& labels);

/// Throws Error(kIdMismatch) on length mismatch, Error(kDegenerateMarginals)
/// when chance agreement is 1.
double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b);

inline constexpr std::array<std::string_view, 7> kBiasWords = {"not",  "all",     "most",   "none",
                                                               "less", "greater", "highest"};

struct ArtifactFeatures {
  double jaccard_overlap = 0.0;
  double numeric_overlap = 0.0;
  double n_rows = 0.0;
  double n_cols = 0.0;
  std::array<double, 7> bias{};
};

enum FeatureGroup : unsigned {
  kOverlapFeatures = 1u,
  kSizeFeatures = 2u,
  kBiasFeatures = 4u,
  kAllFeatures = 7u,
};

std::vector<std::string> feature_names(unsigned groups = kAllFeatures);
std::vector<double> feature_vector(const ArtifactFeatures& f, unsigned groups = kAllFeatures);

ArtifactFeatures extract_features(const Example& ex, const Table& t);

struct LinearModel {
  std::vector<std::string> slots;
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> mean;
  std::vector<double> scale;
  std::string trained_on;
  std::size_t epochs = 0;
  double lr = 0.0;
};

/// Logistic regression by full-batch gradient descent on standardized
/// features. Deterministic given the seed (used for weight initialization).
LinearModel train_linear(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                         double lr, std::size_t epochs, std::uint64_t seed,
                         std::vector<std::string> slots = {}, std::string trained_on = {});

std::vector<double> predict(const LinearModel& model, const std::vector<std::vector<double>>& x);

}  // namespace glean
