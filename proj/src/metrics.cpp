#include "glean/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "glean/error.hpp"
#include "glean/rng.hpp"

namespace glean {
namespace {

std::vector<std::string> answer_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string norm = normalize_answer(s);
  std::size_t start = 0;
  while (start < norm.size()) {
    std::size_t end = norm.find(' ', start);
    if (end == std::string::npos) end = norm.size();
    if (end > start) out.push_back(norm.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

double f1_pair(std::vector<std::string> pred, std::vector<std::string> gold) {
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  std::sort(pred.begin(), pred.end());
  std::sort(gold.begin(), gold.end());
  std::vector<std::string> common;
  std::set_intersection(pred.begin(), pred.end(), gold.begin(), gold.end(), std::back_inserter(common));
  if (common.empty()) return 0.0;
  double p = static_cast<double>(common.size()) / static_cast<double>(pred.size());
  double r = static_cast<double>(common.size()) / static_cast<double>(gold.size());
  return 2.0 * p * r / (p + r);
}

// Type-7 (linear interpolation) quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  auto lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void check_binary(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "scores and labels differ in length");
  }
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error(ErrorCode::kInvalidArgument, "labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  if (pos == 0 || pos == labels.size()) {
    throw Error(ErrorCode::kSingleClass, "both classes are required");
  }
}


}  // namespace

std::string normalize_answer(std::string_view s) { return normalize(s, GroundingConfig::exact()).text; }

double em(std::string_view pred, const std::vector<std::string>& gold) {
  std::string p = normalize_answer(pred);
  for (const auto& g : gold) {
    if (normalize_answer(g) == p) return 1.0;
  }
  return 0.0;
}

double token_f1(std::string_view pred, const std::vector<std::string>& gold) {
  auto p = answer_tokens(pred);
  double best = 0.0;
  for (const auto& g : gold) best = std::max(best, f1_pair(p, answer_tokens(g)));
  return best;
}

Interval bootstrap_ci(const std::vector<double>& values, std::uint64_t seed, std::size_t resamples,
                      double level) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "bootstrap of an empty sample");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::kInvalidArgument, "level must lie in (0, 1)");
  if (resamples == 0) throw Error(ErrorCode::kInvalidArgument, "resamples must be positive");
  const double point = mean(values);
  Rng rng(seed);
  std::vector<double> means(resamples);
  const std::size_t n = values.size();
  for (auto& m : means) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += values[rng.uniform_index(n)];
    m = sum / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  Interval ci{quantile_sorted(means, alpha), quantile_sorted(means, 1.0 - alpha)};
  ci.lo = std::min(ci.lo, point);
  ci.hi = std::max(ci.hi, point);
  return ci;
}

MetricBlock aggregate_scores(std::vector<ExampleScore> scores, std::uint64_t seed, std::size_t resamples) {
  std::sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  MetricBlock block;
  block.n = scores.size();
  if (scores.empty()) return block;
  std::vector<double> ems;
  std::vector<double> f1s;
  for (const auto& s : scores) {
    ems.push_back(s.em);
    f1s.push_back(s.f1);
    block.ids.push_back(s.id);
  }
  block.em = mean(ems);
  block.f1 = mean(f1s);
  block.ci_em = bootstrap_ci(ems, seed, resamples);
  block.ci_f1 = bootstrap_ci(f1s, splitmix64(seed), resamples);
  return block;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_binary(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  std::vector<double> ranks(scores.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = midrank;
    i = j;
  }
  double n_pos = 0.0;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      n_pos += 1.0;
      rank_sum += ranks[i];
    }
  }
  double n_neg = static_cast<double>(labels.size()) - n_pos;
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double average_precision(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_binary(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  double total_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  double tp = 0.0;
  double seen = 0.0;
  double prev_recall = 0.0;
  double ap = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += labels[order[j]];
      seen += 1.0;
      ++j;
    }
    double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / seen);
    prev_recall = recall;
    i = j;
  }
  return ap;
}

ClassifierMetrics classifier_metrics(const std::vector<double>& scores, const std::vector<int>& labels) {
  ClassifierMetrics m;
  m.auroc = auroc(scores, labels);
  m.auprc = average_precision(scores, labels);
  m.n = labels.size();
  double correct = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int pred = scores[i] >= 0.5 ? 1 : 0;
    correct += pred == labels[i] ? 1.0 : 0.0;
  }
  m.accuracy = correct / static_cast<double>(labels.size());
  m.pos_rate = static_cast<double>(std::count(labels.begin(), labels.end(), 1)) /
               static_cast<double>(labels.size());
  return m;
}

double cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kIdMismatch, "labelings differ in length");
  if (a.empty()) throw Error(ErrorCode::kInvalidArgument, "kappa of empty labelings");
  std::map<std::string, double> ca;
  std::map<std::string, double> cb;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
    agree += a[i] == b[i] ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(a.size());
  double pe = 0.0;
  for (const auto& [label, count] : ca) {
    if (auto it = cb.find(label); it != cb.end()) pe += (count / n) * (it->second / n);
  }
  if (pe >= 1.0) throw Error(ErrorCode::kDegenerateMarginals, "chance agreement is 1");
  return (agree / n - pe) / (1.0 - pe);
}

std::vector<std::string> feature_names(unsigned groups) {
  std::vector<std::string> out;
  if (groups & kOverlapFeatures) out.insert(out.end(), {"jaccard_overlap", "numeric_overlap"});
  if (groups & kSizeFeatures) out.insert(out.end(), {"n_rows", "n_cols"});
  if (groups & kBiasFeatures) {
    for (auto w : kBiasWords) out.push_back("bias_" + std::string(w));
  }
  return out;
}

std::vector<double> feature_vector(const ArtifactFeatures& f, unsigned groups) {
  std::vector<double> out;
  if (groups & kOverlapFeatures) out.insert(out.end(), {f.jaccard_overlap, f.numeric_overlap});
  if (groups & kSizeFeatures) out.insert(out.end(), {f.n_rows, f.n_cols});
  if (groups & kBiasFeatures) out.insert(out.end(), f.bias.begin(), f.bias.end());
  return out;
}

ArtifactFeatures extract_features(const Example& ex, const Table& t) {
  ArtifactFeatures f;
  TokenSet statement = content_token_set(ex.question);
  TokenSet table;
  for (const auto& h : t.headers()) {
    for (auto& tok : content_tokens(h)) table.insert(std::move(tok));
  }
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    for (std::size_t c = 0; c < t.n_cols(); ++c) {
      for (auto& tok : content_tokens(t.raw(r, c))) table.insert(std::move(tok));
    }
  }
  auto numeric_only = [](const TokenSet& s) {
    TokenSet out;
    for (const auto& tok : s) {
      if (auto v = parse_number(tok)) out.insert(canonical_number(*v));
    }
    return out;
  };
  f.jaccard_overlap = jaccard(statement, table);
  f.numeric_overlap = jaccard(numeric_only(statement), numeric_only(table));
  f.n_rows = static_cast<double>(t.n_rows());
  f.n_cols = static_cast<double>(t.n_cols());
  for (std::size_t i = 0; i < kBiasWords.size(); ++i) {
    f.bias[i] = statement.count(std::string(kBiasWords[i])) ? 1.0 : 0.0;
  }
  return f;
}

LinearModel train_linear(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                         double lr, std::size_t epochs, std::uint64_t seed,
                         std::vector<std::string> slots, std::string trained_on) {
  if (x.empty() || x.size() != y.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "training needs one label per nonempty feature row");
  }
  const std::size_t d = x.front().size();
  for (const auto& row : x) {
    if (row.size() != d) throw Error(ErrorCode::kDimensionMismatch, "ragged feature matrix");
  }
  if (!slots.empty() && slots.size() != d) {
    throw Error(ErrorCode::kDimensionMismatch, "slot names do not match the feature width");
  }
  const double n = static_cast<double>(x.size());
  LinearModel m;
  m.slots = std::move(slots);
  m.trained_on = std::move(trained_on);
  m.epochs = epochs;
  m.lr = lr;
  m.mean.assign(d, 0.0);
  m.scale.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (const auto& row : x) s += row[j];
    m.mean[j] = s / n;
    double v = 0.0;
    for (const auto& row : x) v += (row[j] - m.mean[j]) * (row[j] - m.mean[j]);
    double sd = std::sqrt(v / n);
    m.scale[j] = sd > 1e-12 ? sd : 1.0;
  }
  std::vector<std::vector<double>> z(x.size(), std::vector<double>(d));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) z[i][j] = (x[i][j] - m.mean[j]) / m.scale[j];
  }
  Rng rng(seed);
  m.weights.resize(d);
  for (auto& w : m.weights) w = (rng.uniform01() - 0.5) * 0.02;
  std::vector<double> grad(d);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      double logit = m.bias;
      for (std::size_t j = 0; j < d; ++j) logit += m.weights[j] * z[i][j];
      double err = 1.0 / (1.0 + std::exp(-logit)) - static_cast<double>(y[i]);
      for (std::size_t j = 0; j < d; ++j) grad[j] += err * z[i][j];
      grad_b += err;
    }
    for (std::size_t j = 0; j < d; ++j) m.weights[j] -= lr * grad[j] / n;
    m.bias -= lr * grad_b / n;
  }
  return m;
}

std::vector<double> predict(const LinearModel& model, const std::vector<std::vector<double>>& x) {
  std::vector<double> out;
  out.reserve(x.size());
  for (const auto& row : x) {
    if (row.size() != model.weights.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "feature width differs from the model");
    }
    double logit = model.bias;
    for (std::size_t j = 0; j < row.size(); ++j) {
      logit += model.weights[j] * (row[j] - model.mean[j]) / model.scale[j];
    }
    out.push_back(1.0 / (1.0 + std::exp(-logit)));
  }
  return out;
}

}  // namespace glean
