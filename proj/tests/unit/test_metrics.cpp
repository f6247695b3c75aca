#include "doctest.h"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "glean/error.hpp"
#include "glean/metrics.hpp"
#include "glean/rng.hpp"

using namespace glean;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kIo;
}

Example statement(std::string text) {
  Example ex;
  ex.id = "v";
  ex.task = Task::kVerdict;
  ex.label = "entailed";
  ex.table_id = "t";
  ex.question = std::move(text);
  return ex;
}

}  // namespace

TEST_CASE("em examples") {
  CHECK(em("Paris", {"paris"}) == 1.0);
  CHECK(em("the paris", {"paris"}) == 1.0);
  CHECK(em("london", {"paris"}) == 0.0);
  CHECK(em("2,000", {"2000"}) == 1.0);
  CHECK(em("London", {"paris", "london"}) == 1.0);
}

TEST_CASE("token_f1 examples") {
  CHECK(token_f1("new york", {"york new"}) == 1.0);
  CHECK(token_f1("x b", {"x c"}) == 0.5);
  // Articles are stripped before counting.
  CHECK(token_f1("a b", {"a c"}) == 0.0);
  CHECK(token_f1("", {"x"}) == 0.0);
  CHECK(token_f1("", {""}) == 1.0);
  CHECK(token_f1("x y", {"x", "y"}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("property: f1 in [0,1] and em = 1 implies f1 = 1") {
  Rng rng(81);
  const std::vector<std::string> words = {"the", "a", "paris", "Paris", "new", "york", "2,000", "2000", "x", ""};
  for (int i = 0; i < 3000; ++i) {
    auto phrase = [&] {
      std::string s;
      for (std::size_t k = rng.uniform_index(4); k > 0; --k) s += words[rng.uniform_index(words.size())] + " ";
      return s;
    };
    std::string pred = phrase();
    std::vector<std::string> gold = {phrase(), phrase()};
    double f = token_f1(pred, gold);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    if (em(pred, gold) == 1.0) CHECK(f == 1.0);
  }
}

TEST_CASE("bootstrap_ci examples") {
  std::vector<double> same(50, 0.25);
  CHECK(bootstrap_ci(same, 1) == Interval{0.25, 0.25});
  std::vector<double> mixed;
  for (int i = 0; i < 200; ++i) mixed.push_back(i % 3 == 0 ? 1.0 : 0.0);
  CHECK(bootstrap_ci(mixed, 7) == bootstrap_ci(mixed, 7));
  CHECK(code_of([] { bootstrap_ci({}, 1); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("property: bootstrap contains the mean and narrows with n") {
  Rng rng(82);
  double small_width = 0;
  double large_width = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> small;
    std::vector<double> large;
    for (int i = 0; i < 40; ++i) small.push_back(rng.coin() ? 1.0 : 0.0);
    for (int i = 0; i < 640; ++i) large.push_back(rng.coin() ? 1.0 : 0.0);
    for (const auto* v : {&small, &large}) {
      double m = 0;
      for (double x : *v) m += x;
      m /= static_cast<double>(v->size());
      auto ci = bootstrap_ci(*v, rng.next(), 500);
      CHECK(ci.lo <= m);
      CHECK(m <= ci.hi);
      (v == &small ? small_width : large_width) += ci.hi - ci.lo;
    }
  }
  // Width scales as 1/sqrt(n): 16x the data gives about a quarter of the width.
  double ratio = large_width / small_width;
  CHECK(ratio > 0.15);
  CHECK(ratio < 0.35);
}

TEST_CASE("aggregate_scores reduces in id order") {
  std::vector<ExampleScore> a = {{"b", 1, 1}, {"a", 0, 0.5}, {"c", 1, 1}};
  std::vector<ExampleScore> b = {{"c", 1, 1}, {"b", 1, 1}, {"a", 0, 0.5}};
  auto x = aggregate_scores(a, 3);
  auto y = aggregate_scores(b, 3);
  CHECK(x.ids == std::vector<std::string>{"a", "b", "c"});
  CHECK(x.em == doctest::Approx(2.0 / 3.0));
  CHECK(x.f1 == doctest::Approx(2.5 / 3.0));
  CHECK(x.ci_em == y.ci_em);
  CHECK(x.ci_f1 == y.ci_f1);
}

TEST_CASE("classifier metric examples") {
  CHECK(auroc({0.9, 0.1}, {1, 0}) == 1.0);
  CHECK(auroc({0.3, 0.3, 0.3, 0.3}, {1, 0, 1, 0}) == 0.5);
  CHECK(code_of([] { auroc({0.2, 0.4}, {1, 1}); }) == ErrorCode::kSingleClass);
}

TEST_CASE("auroc and average precision match frozen reference values") {
  // Reference values from scikit-learn roc_auc_score / average_precision_score.
  std::vector<double> s = {0.9, 0.8, 0.8, 0.7, 0.55, 0.4, 0.4, 0.3, 0.2, 0.1};
  std::vector<int> y = {1, 1, 0, 1, 0, 1, 0, 0, 1, 0};
  CHECK(auroc(s, y) == doctest::Approx(0.68).epsilon(1e-12));
  CHECK(average_precision(s, y) == doctest::Approx(0.7087301587301588).epsilon(1e-12));

  std::vector<double> s2 = {0.1, 0.35, 0.4, 0.8, 0.65, 0.2, 0.9, 0.5};
  std::vector<int> y2 = {0, 0, 1, 1, 0, 0, 1, 1};
  CHECK(auroc(s2, y2) == doctest::Approx(0.875).epsilon(1e-12));
  CHECK(average_precision(s2, y2) == doctest::Approx(0.8875).epsilon(1e-12));

  auto m = classifier_metrics(s2, y2);
  // Threshold 0.5: predicted positive {0.8, 0.65, 0.9, 0.5}, 3 of them correct, plus 3 true negatives.
  CHECK(m.accuracy == doctest::Approx(6.0 / 8.0));
  CHECK(m.pos_rate == 0.5);
  CHECK(m.n == 8);
}

TEST_CASE("property: auroc is invariant under strictly monotone transforms") {
  Rng rng(83);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> s;
    std::vector<int> y;
    for (int k = 0; k < 20; ++k) {
      s.push_back(static_cast<double>(rng.uniform_index(8)) / 8.0);
      y.push_back(k < 2 ? k : static_cast<int>(rng.coin()));
    }
    std::vector<double> t;
    for (double v : s) t.push_back(std::exp(3.0 * v) - 7.0);
    CHECK(auroc(s, y) == doctest::Approx(auroc(t, y)).epsilon(1e-12));
    CHECK(average_precision(s, y) == doctest::Approx(average_precision(t, y)).epsilon(1e-12));
  }
}

TEST_CASE("cohen_kappa examples") {
  CHECK(cohen_kappa({"x", "y", "x"}, {"x", "y", "x"}) == 1.0);
  // p_o = 0.5, p_e = 0.5*0.5 + 0.5*0.5 = 0.5
  CHECK(cohen_kappa({"x", "x", "y", "y"}, {"x", "y", "x", "y"}) == doctest::Approx(0.0));
  // scikit-learn cohen_kappa_score reference
  CHECK(cohen_kappa({"x", "x", "y", "z", "y", "x", "z", "z"}, {"x", "y", "y", "z", "x", "x", "z", "y"}) ==
        doctest::Approx(0.4418604651162791).epsilon(1e-12));
  CHECK(code_of([] { cohen_kappa({"x"}, {"x", "y"}); }) == ErrorCode::kIdMismatch);
  CHECK(code_of([] { cohen_kappa({"x", "x"}, {"x", "x"}); }) == ErrorCode::kDegenerateMarginals);
}

TEST_CASE("property: kappa symmetric, 1 on self, near 0 for independent labelings") {
  Rng rng(84);
  double sum = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    std::vector<std::string> a;
    std::vector<std::string> b;
    for (int i = 0; i < 100; ++i) {
      a.push_back(rng.coin() ? "s" : "n");
      b.push_back(rng.coin() ? "s" : "n");
    }
    double k = cohen_kappa(a, b);
    CHECK(k == doctest::Approx(cohen_kappa(b, a)).epsilon(1e-12));
    CHECK(cohen_kappa(a, a) == doctest::Approx(1.0));
    sum += k;
  }
  CHECK(std::abs(sum / trials) < 0.01);
}

TEST_CASE("extract_features examples") {
  Table t("t", {"team"}, {{"owls"}, {"7"}});
  auto f = extract_features(statement("owls did not win 7"), t);
  CHECK(f.bias[0] == 1.0);
  CHECK(extract_features(statement("nothing here"), t).bias[0] == 0.0);
  CHECK(f.n_rows == 2.0);
  CHECK(f.n_cols == 1.0);
  // statement {owls, did, not, win, 7}, table {team, owls, 7}: 2 / 6
  CHECK(f.jaccard_overlap == doctest::Approx(2.0 / 6.0));
  CHECK(f.numeric_overlap == 1.0);
  auto all = extract_features(statement("team owls"), t);
  CHECK(all.jaccard_overlap == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("feature groups") {
  CHECK(feature_names().size() == 11);
  CHECK(feature_names(kOverlapFeatures | kSizeFeatures).size() == 4);
  ArtifactFeatures f;
  CHECK(feature_vector(f, kAllFeatures).size() == feature_names(kAllFeatures).size());
  CHECK(feature_vector(f, kBiasFeatures).size() == 7);
}

TEST_CASE("train_linear separates a separable fixture") {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  Rng rng(85);
  for (int i = 0; i < 100; ++i) {
    double a = rng.uniform01();
    double b = rng.uniform01();
    x.push_back({a, b});
    y.push_back(a + b > 1.0 ? 1 : 0);
  }
  auto model = train_linear(x, y, 0.5, 500, 1);
  auto p = predict(model, x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < p.size(); ++i) correct += (p[i] >= 0.5) == (y[i] == 1) ? 1 : 0;
  CHECK(correct >= 97);
  auto again = train_linear(x, y, 0.5, 500, 1);
  CHECK(again.weights == model.weights);
}

TEST_CASE("property: random labels give chance held-out accuracy") {
  Rng rng(86);
  double acc = 0;
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (int i = 0; i < 1000; ++i) {
      x.push_back({rng.uniform01(), rng.uniform01(), static_cast<double>(rng.uniform_index(5))});
      y.push_back(rng.coin() ? 1 : 0);
    }
    std::vector<std::vector<double>> train_x(x.begin(), x.begin() + 500);
    std::vector<int> train_y(y.begin(), y.begin() + 500);
    auto model = train_linear(train_x, train_y, 0.1, 500, static_cast<std::uint64_t>(s));
    std::vector<std::vector<double>> test_x(x.begin() + 500, x.end());
    std::vector<int> test_y(y.begin() + 500, y.end());
    acc += classifier_metrics(predict(model, test_x), test_y).accuracy;
  }
  CHECK(acc / seeds == doctest::Approx(0.5).epsilon(0.1));
}
