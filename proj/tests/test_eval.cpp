#include "cogtree/error.hpp"
#include "cogtree/eval.hpp"
#include "doctest.h"
#include "generators.hpp"
#include "json.hpp"

using namespace cogtree;

namespace {

ScoreMatrix matrix(const std::vector<std::vector<double>>& rows) {
  ScoreMatrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  return m;
}

ScoreMatrix random_matrix(Rng& rng, std::size_t n, std::size_t d) {
  ScoreMatrix m(n, d);
  // Coarse values so that ties actually occur.
  for (double& v : m.data) v = static_cast<double>(rng.below(4));
  return m;
}

}  // namespace

TEST_CASE("top-k uses the lower index on ties") {
  const std::vector<double> s{1.0, 2.0, 2.0, 0.5};
  CHECK(in_top_k(s, 1, 1));
  CHECK_FALSE(in_top_k(s, 2, 1));
  CHECK(in_top_k(s, 2, 2));
  CHECK_FALSE(in_top_k(s, 3, 3));
  CHECK(in_top_k(s, 3, 4));
}

TEST_CASE("recall at k: worked examples") {
  const std::vector<ClassIndex> labels{0, 1, 2, 1};
  const auto perfect = matrix({{3, 0, 0}, {0, 3, 0}, {0, 0, 3}, {0, 3, 0}});
  CHECK(recall_at_k(perfect, labels, 1) == 1.0);
  const auto constant = matrix({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  CHECK(recall_at_k(constant, labels, 1) == 0.25);
  CHECK(recall_at_k(constant, labels, 3) == 1.0);
  CHECK_THROWS_AS(recall_at_k(constant, labels, 0), Error);
  CHECK_THROWS_AS(recall_at_k(constant, labels, 4), Error);
  try {
    recall_at_k(constant, labels, 4);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::k_out_of_range);
  }
}

TEST_CASE("mean recall weighs classes equally") {
  // Class 0 (9 samples) always right, class 1 (1 sample) always wrong.
  std::vector<std::vector<double>> rows(10, {1.0, 0.0});
  std::vector<ClassIndex> labels(9, 0);
  labels.push_back(1);
  const auto m = matrix(rows);
  const auto mr = mean_recall_at_k(m, labels, 1);
  CHECK(mr.mean == 0.5);
  CHECK(recall_at_k(m, labels, 1) == 0.9);
  REQUIRE(mr.per_class.size() == 2);
  CHECK(mr.per_class[0] == 1.0);
  CHECK(mr.per_class[1] == 0.0);
}

TEST_CASE("classes without evaluation samples are excluded and flagged") {
  const auto m = matrix({{2, 1, 0}, {0, 2, 1}});
  const std::vector<ClassIndex> labels{0, 1};
  const auto mr = mean_recall_at_k(m, labels, 1);
  CHECK(mr.mean == 1.0);
  CHECK_FALSE(mr.per_class[2].has_value());
  const LabelSpace space({"a", "b", "c"}, {1, 1, 1});
  const std::vector<std::size_t> ks{1, 2};
  const auto report = evaluate(m, labels, space, ks);
  CHECK(report.excluded == std::vector<ClassIndex>{2});
  const auto json = nlohmann::json::parse(report_to_json(report));
  CHECK(json["version"] == 1);
  CHECK(json["excluded"] == nlohmann::json::array({"c"}));
}

TEST_CASE("metric properties on random instances") {
  Rng rng(71);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 2 + rng.below(8), n = 1 + rng.below(60);
    const auto m = random_matrix(rng, n, d);
    std::vector<ClassIndex> labels(n);
    for (auto& l : labels) l = rng.below(d);
    double prev_r = 0, prev_mr = 0;
    for (std::size_t k = 1; k <= d; ++k) {
      const double r = recall_at_k(m, labels, k);
      const double mr = mean_recall_at_k(m, labels, k).mean;
      CHECK(r >= prev_r);
      CHECK(mr >= prev_mr);
      CHECK(r >= 0.0);
      CHECK(r <= 1.0);
      CHECK(mr <= 1.0);
      prev_r = r;
      prev_mr = mr;
    }
    CHECK(prev_r == 1.0);
    const auto cm = confusion_matrix(m, labels);
    CHECK(static_cast<double>(cm.trace()) / static_cast<double>(cm.total()) ==
          recall_at_k(m, labels, 1));
    std::vector<std::uint64_t> hist(d, 0);
    for (auto l : labels) ++hist[l];
    for (ClassIndex c = 0; c < d; ++c) CHECK(cm.row_sum(c) == hist[c]);
  }
}

TEST_CASE("mean recall equals recall on balanced sets") {
  Rng rng(72);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + rng.below(6), per = 1 + rng.below(6);
    const auto m = random_matrix(rng, d * per, d);
    std::vector<ClassIndex> labels;
    for (std::size_t i = 0; i < d * per; ++i) labels.push_back(i % d);
    for (std::size_t k = 1; k <= d; ++k) {
      CHECK(mean_recall_at_k(m, labels, k).mean == doctest::Approx(recall_at_k(m, labels, k)).epsilon(1e-15));
    }
  }
}

TEST_CASE("perfect predictions give a diagonal confusion matrix") {
  const auto m = matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}});
  const auto cm = confusion_matrix(m, std::vector<ClassIndex>{0, 1, 2, 0});
  for (ClassIndex i = 0; i < 3; ++i)
    for (ClassIndex j = 0; j < 3; ++j)
      if (i != j) CHECK(cm.at(i, j) == 0);
  CHECK(cm.at(0, 0) == 2);
}

TEST_CASE("report text table and subsets") {
  const LabelSpace space({"head", "tail"}, {100, 3});
  const auto m = matrix({{2, 0}, {2, 0}, {0, 2}, {2, 0}});
  const std::vector<ClassIndex> labels{0, 0, 1, 1};
  const std::vector<std::size_t> ks{1, 2};
  const auto report = evaluate(m, labels, space, ks);
  CHECK(report.mean_recall[0] == 0.75);
  CHECK(report.overall_recall[0] == 0.75);
  CHECK(report.mean_recall[1] == 1.0);
  const std::vector<ClassIndex> tail{1};
  CHECK(subset_mean_recall(report, 0, tail) == 0.5);
  const std::string text = report_to_text(report);
  CHECK(text.find("R@1") != std::string::npos);
  CHECK(text.find("tail") != std::string::npos);
  CHECK(text.find("mean") != std::string::npos);
  CHECK(report_to_json(report) == report_to_json(evaluate(m, labels, space, ks)));
  CHECK_THROWS_AS(evaluate(matrix({{1, 2, 3}}), std::vector<ClassIndex>{0}, space, ks), Error);
}
