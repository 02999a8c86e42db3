#include <cmath>
#include <numbers>

#include "cogtree/builder.hpp"
#include "cogtree/error.hpp"
#include "cogtree/losses.hpp"
#include "doctest.h"
#include "generators.hpp"
#include "oracles.hpp"

using namespace cogtree;
using doctest::Approx;

namespace {

oracle::Agg to_oracle(Aggregator a) {
  switch (a) {
    case Aggregator::average: return oracle::Agg::average;
    case Aggregator::max: return oracle::Agg::max;
    case Aggregator::sum: return oracle::Agg::sum;
  }
  return oracle::Agg::average;
}

// root -> y1 -> {concept_leaf(0), fine_virtual -> {1, 2}}
CogTree one_concept_tree() {
  TreeAssembler t;
  const auto root = t.add_root();
  const auto y1 = t.add_child(root, NodeKind::concept_virtual);
  t.add_child(y1, NodeKind::concept_leaf, 0);
  const auto fv = t.add_child(y1, NodeKind::fine_virtual);
  t.add_child(fv, NodeKind::fine_leaf, 1);
  t.add_child(fv, NodeKind::fine_leaf, 2);
  return std::move(t).finish(TreeVariant::standard, {"a", "b", "c"});
}

// Two concepts, each with two fine classes: classes 0 and 3 are concepts.
CogTree symmetric_tree() {
  ConceptMap map;
  map.concept_of = {0, 0, 0, 3, 3, 3};
  map.concepts = {0, 3};
  return aggregate_tree(map, LabelSpace(gen::class_names(6), std::vector<std::uint64_t>(6, 1)));
}

NodeValues unit_node_weights(const CogTree& tree, Aggregator agg = Aggregator::average) {
  const std::vector<double> ones(tree.num_classes(), 1.0);
  return node_values(tree, ones, agg);
}

}  // namespace

TEST_CASE("class-balanced weight closed forms") {
  const std::vector<std::uint64_t> counts{1, 5, 1000, 7};
  for (double w : class_balanced_weights(counts, 0.0).w) CHECK(w == 1.0);
  for (double beta : {0.5, 0.9, 0.999, 0.9999}) {
    CHECK(class_balanced_weights(counts, beta).w[0] == 1.0);
  }
  const double w = class_balanced_weights(std::vector<std::uint64_t>{1000}, 0.999).w[0];
  CHECK(std::abs(w - oracle::class_weight(0.999, 1000)) <= 1e-12);
  CHECK(w == Approx(1.5818e-3).epsilon(1e-4));
}

TEST_CASE("class-balanced weights match the extended-precision oracle") {
  cogtree::Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const double beta = rng.uniform(0.0, 0.99999);
    const std::uint64_t n = 1 + rng.below(100000);
    const double w = class_balanced_weights(std::vector<std::uint64_t>{n}, beta).w[0];
    const double ref = oracle::class_weight(beta, n);
    CHECK(std::abs(w - ref) <= 1e-14 * std::max(1.0, ref));
  }
}

TEST_CASE("class-balanced weights are positive and non-increasing in n") {
  std::vector<std::uint64_t> counts;
  for (std::uint64_t n = 1; n <= 5000; n += 7) counts.push_back(n);
  for (double beta : {0.0, 0.3, 0.99, 0.999}) {
    const auto w = class_balanced_weights(counts, beta).w;
    for (std::size_t i = 0; i < w.size(); ++i) {
      CHECK(w[i] > 0.0);
      if (i) CHECK(w[i] <= w[i - 1]);
    }
  }
}

TEST_CASE("class-balanced weight errors") {
  const std::vector<std::uint64_t> with_zero{3, 0};
  CHECK_THROWS_AS(class_balanced_weights(with_zero, 0.9), Error);
  try {
    class_balanced_weights(with_zero, 0.9);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::zero_count);
    CHECK(e.index() == 1u);
  }
  const std::vector<std::uint64_t> ok{1, 2};
  CHECK_THROWS_AS(class_balanced_weights(ok, 1.0), Error);
  CHECK_THROWS_AS(class_balanced_weights(ok, -0.1), Error);

  std::vector<std::string> warnings;
  CHECK(floor_counts(with_zero, &warnings) == std::vector<std::uint64_t>{3, 1});
  CHECK(warnings.size() == 1);
}

TEST_CASE("balanced counts give near-uniform weights") {
  const std::vector<std::uint64_t> counts(10, 500);
  const auto w = normalized(class_balanced_weights(counts, 0.999)).w;
  for (double x : w) CHECK(x == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalized weights sum to the class count and keep ratios") {
  const std::vector<std::uint64_t> counts{1000, 20, 20, 3};
  const auto raw = class_balanced_weights(counts, 0.999);
  const auto norm = normalized(raw);
  double s = 0;
  for (double x : norm.w) s += x;
  CHECK(s == Approx(4.0).epsilon(1e-14));
  CHECK(norm.w[3] / norm.w[0] == Approx(raw.w[3] / raw.w[0]).epsilon(1e-14));
}

TEST_CASE("node values: worked examples") {
  const auto tree = one_concept_tree();
  const std::vector<double> leaves{0.6, 0.2, 0.4};
  // ids: 0 root, 1 y1, 2 concept_leaf, 3 fine_virtual, 4 and 5 fine leaves
  const auto avg = node_values(tree, leaves, Aggregator::average);
  CHECK(avg.values[3] == Approx(0.3).epsilon(1e-15));
  CHECK(avg.values[1] == Approx(0.45).epsilon(1e-15));
  CHECK(node_values(tree, leaves, Aggregator::max).values[3] == 0.4);
  CHECK(node_values(tree, leaves, Aggregator::sum).values[3] == Approx(0.6).epsilon(1e-15));
  CHECK(avg.values[2] == 0.6);
  CHECK(avg.values[4] == 0.2);
  CHECK(avg.aggregator == Aggregator::average);

  const std::vector<double> zeros(3, 0.0);
  for (double v : node_values(tree, zeros, Aggregator::average).values) CHECK(v == 0.0);
  CHECK_THROWS_AS(node_values(tree, std::vector<double>{1.0}, Aggregator::sum), Error);
}

TEST_CASE("node values: bounding and dominance on random trees") {
  cogtree::Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto space = gen::space(rng, 2 + rng.below(40));
    const auto tree = gen::standard_tree(rng, space);
    std::vector<double> leaves(space.size());
    for (double& x : leaves) x = rng.uniform(0.0, 3.0);
    const auto avg = node_values(tree, leaves, Aggregator::average);
    const auto sum = node_values(tree, leaves, Aggregator::sum);
    for (const auto& node : tree.nodes()) {
      const auto id = node.id;
      if (node.class_index) {
        CHECK(avg.values[id] == leaves[*node.class_index]);
        continue;
      }
      double lo = INFINITY, hi = -INFINITY;
      for (ClassIndex c = 0; c < space.size(); ++c) {
        if (oracle::contains_class(tree, id, c)) lo = std::min(lo, leaves[c]), hi = std::max(hi, leaves[c]);
      }
      CHECK(avg.values[id] >= lo - 1e-12);
      CHECK(avg.values[id] <= hi + 1e-12);
      CHECK(sum.values[id] >= avg.values[id]);
      CHECK(std::abs(avg.values[id] - static_cast<double>(oracle::node_value(
                                          tree, id, leaves, oracle::Agg::average))) < 1e-12);
    }
    // Coarse-fine layer: the fine_virtual node gets no less softmax mass under SUM.
    for (const auto& node : tree.nodes()) {
      if (node.kind != NodeKind::concept_virtual || node.children.size() != 2) continue;
      const auto cl = node.children[0], fv = node.children[1];
      auto mass = [&](const NodeValues& v) {
        return std::exp(v.values[fv]) / (std::exp(v.values[cl]) + std::exp(v.values[fv]));
      };
      CHECK(mass(sum) >= mass(avg));
    }
  }
}

TEST_CASE("CB and CE closed forms") {
  const std::vector<double> uniform4(4, 0.7);
  CHECK(std::abs(loss_ce(uniform4, 2).loss - std::log(4.0)) <= 1e-12);
  const std::vector<double> two{1.0, 0.0};
  const double ref = std::log1p(std::exp(-1.0));
  CHECK(std::abs(loss_ce(two, 0).loss - ref) <= 1e-15);
  CHECK(loss_ce(two, 0).loss == Approx(0.31326).epsilon(1e-5));
  const std::vector<double> u2(2, 0.0);
  CHECK(std::abs(loss_ce(u2, 1).loss - std::numbers::ln2) <= 1e-15);

  ClassWeights half{{0.5, 0.5}, 0.0};
  ClassWeights one{{1.0, 1.0}, 0.0};
  const auto h = loss_cb(two, 0, half), o = loss_cb(two, 0, one);
  CHECK(h.loss == o.loss / 2);
  for (std::size_t i = 0; i < 2; ++i) CHECK(h.grad[i] == o.grad[i] / 2);
}

TEST_CASE("CE equals CB with beta = 0 and its gradient sums to zero") {
  cogtree::Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    const auto scores = gen::normal_scores(rng, n);
    const auto counts = gen::zipf_counts(rng, n);
    const ClassIndex t = rng.below(n);
    const auto ce = loss_ce(scores, t);
    const auto cb = loss_cb(scores, t, class_balanced_weights(counts, 0.0));
    CHECK(ce.loss == cb.loss);
    CHECK(ce.grad == cb.grad);
    double s = 0;
    for (double g : ce.grad) s += g;
    CHECK(std::abs(s) < 1e-14);
    CHECK(std::abs(ce.loss - static_cast<double>(oracle::weighted_ce(scores, t, 1.0))) < 1e-12);
  }
}

TEST_CASE("CE stays finite for extreme logits") {
  const std::vector<double> big{1000.0, -1000.0, 0.0};
  const auto r = loss_ce(big, 1);
  CHECK(r.loss == Approx(2000.0));
  CHECK(std::isfinite(r.grad[0]));
  CHECK(loss_ce(big, 0).loss == 0.0);
}

TEST_CASE("focal loss") {
  cogtree::Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(20);
    const auto scores = gen::normal_scores(rng, n);
    const ClassIndex t = rng.below(n);
    const auto f0 = loss_focal(scores, t, 0.0);
    const auto ce = loss_ce(scores, t);
    CHECK(f0.loss == ce.loss);
    CHECK(f0.grad == ce.grad);
    for (double gamma : {0.5, 1.0, 2.0, 3.5}) {
      const auto f = loss_focal(scores, t, gamma);
      CHECK(std::abs(f.loss - static_cast<double>(oracle::focal(scores, t, gamma))) < 1e-12);
      auto fn = [&](std::span<const double> s) { return loss_focal(s, t, gamma).loss; };
      CHECK(oracle::relative_error(f.grad, finite_diff_grad(fn, scores, 1e-6)) <= 1e-6);
    }
  }
  // As p_t -> 1 focal vanishes faster than CE.
  double prev_ratio = 1.0;
  for (double margin : {1.0, 3.0, 6.0, 10.0}) {
    const std::vector<double> s{margin, 0.0, 0.0};
    const double ratio = loss_focal(s, 0, 2.0).loss / loss_ce(s, 0).loss;
    CHECK(ratio < prev_ratio);
    prev_ratio = ratio;
  }
  CHECK(prev_ratio < 1e-6);
  CHECK_THROWS_AS(loss_focal(std::vector<double>{0.0, 1.0}, 0, -1.0), Error);
}

TEST_CASE("finite differences: constants, linear maps and CE") {
  const std::vector<double> p{0.3, -1.2, 2.0, 0.0};
  const auto zero = finite_diff_grad([](std::span<const double>) { return 4.2; }, p, 1e-6);
  for (double g : zero) CHECK(g == 0.0);
  const std::vector<double> c{1.5, -2.0, 0.25, 3.0};
  auto linear = [&](std::span<const double> x) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += c[i] * x[i];
    return s;
  };
  const auto lg = finite_diff_grad(linear, p, 1e-3);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(lg[i] == Approx(c[i]).epsilon(1e-9));
  auto ce = [&](std::span<const double> x) { return loss_ce(x, 1).loss; };
  CHECK(oracle::relative_error(loss_ce(p, 1).grad, finite_diff_grad(ce, p, 1e-6)) <= 1e-6);
  CHECK_THROWS_AS(finite_diff_grad(ce, p, 0.0), Error);
}

TEST_CASE("tree loss on a flat tree equals CB") {
  cogtree::Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const auto space = gen::space(rng, 2 + rng.below(40));
    const auto tree = flat_tree(space);
    const auto scores = gen::normal_scores(rng, space.size());
    const auto w = class_balanced_weights(space.counts(), 0.999);
    const ClassIndex t = rng.below(space.size());
    const auto tcb = loss_tcb(tree, scores, t, node_values(tree, w.w, Aggregator::average));
    const auto cb = loss_cb(scores, t, w);
    CHECK(std::abs(tcb.loss - cb.loss) <= 1e-12);
    CHECK(oracle::max_abs_diff(tcb.grad, cb.grad) <= 1e-12);
  }
}

TEST_CASE("symmetric tree with zero scores gives ln 2") {
  const auto tree = symmetric_tree();
  const std::vector<double> zeros(6, 0.0);
  for (ClassIndex fine : {1, 2, 4, 5}) {
    REQUIRE(tree.depth(fine) == 3);
    CHECK(std::abs(loss_tcb(tree, zeros, fine, unit_node_weights(tree)).loss - std::numbers::ln2) <=
          1e-12);
  }
}

TEST_CASE("a level with one child contributes nothing but counts in K") {
  ConceptMap map;
  map.concept_of = {0, 1, 1};
  map.concepts = {0, 1};
  const auto tree = aggregate_tree(map, LabelSpace({"a", "b", "c"}, {5, 5, 1}));
  REQUIRE(tree.depth(0) == 2);
  const std::vector<double> scores{0.3, -0.5, 1.1};
  const auto r = loss_tcb(tree, scores, 0, unit_node_weights(tree));
  // Level 1 is a softmax over the two concept nodes, level 2 is log 1 = 0.
  const double z_a = 0.3, z_b = (-0.5 + 1.1) / 2;
  const double level1 = -(z_a - std::log(std::exp(z_a) + std::exp(z_b)));
  CHECK(r.loss == Approx(level1 / 2).epsilon(1e-14));
}

TEST_CASE("tree loss matches the brute-force oracle") {
  cogtree::Rng rng(55);
  for (int trial = 0; trial < 300; ++trial) {
    const auto space = gen::space(rng, 2 + rng.below(40));
    const auto tree = gen::standard_tree(rng, space);
    const auto scores = gen::normal_scores(rng, space.size());
    const auto w = normalized(class_balanced_weights(space.counts(), 0.999));
    const ClassIndex t = rng.below(space.size());
    for (Aggregator agg : {Aggregator::average, Aggregator::max, Aggregator::sum}) {
      const auto r = loss_tcb(tree, scores, t, node_values(tree, w.w, agg));
      const double ref = static_cast<double>(oracle::tree_loss(tree, scores, w.w, t, to_oracle(agg)));
      CHECK(std::abs(r.loss - ref) <= 1e-10 * std::max(1.0, ref));
      CHECK(r.loss >= 0.0);
    }
  }
}

TEST_CASE("tree loss gradient matches finite differences") {
  cogtree::Rng rng(56);
  for (int trial = 0; trial < 100; ++trial) {
    const auto space = gen::space(rng, 10 + rng.below(41));
    const auto tree = gen::standard_tree(rng, space);
    const auto scores = gen::normal_scores(rng, space.size());
    const auto w = normalized(class_balanced_weights(space.counts(), 0.999));
    const ClassIndex t = rng.below(space.size());
    for (Aggregator agg : {Aggregator::average, Aggregator::sum}) {
      const auto nw = node_values(tree, w.w, agg);
      auto fn = [&](std::span<const double> s) { return loss_tcb(tree, s, t, nw).loss; };
      CHECK(oracle::relative_error(loss_tcb(tree, scores, t, nw).grad,
                                   finite_diff_grad(fn, scores, 1e-6)) <= 1e-6);
    }
  }
}

TEST_CASE("MAX aggregation routes the gradient to the lowest-id maximiser") {
  const auto tree = one_concept_tree();
  // Fine leaves tie at 0.5; node 4 (class 1) has the lower id.
  const std::vector<double> scores{0.1, 0.5, 0.5};
  const auto r = loss_tcb(tree, scores, 0, unit_node_weights(tree, Aggregator::max));
  CHECK(r.grad[1] != 0.0);
  CHECK(r.grad[2] == 0.0);
}

TEST_CASE("combined loss is CB plus lambda times the tree term") {
  cogtree::Rng rng(60);
  for (int trial = 0; trial < 50; ++trial) {
    const auto space = gen::space(rng, 3 + rng.below(30));
    const auto tree = gen::standard_tree(rng, space);
    const auto scores = gen::normal_scores(rng, space.size());
    const auto w = class_balanced_weights(space.counts(), 0.999);
    const auto nw = node_values(tree, w.w, Aggregator::average);
    const ClassIndex t = rng.below(space.size());
    const auto l0 = loss_cogtree(tree, scores, t, w, nw, 0.0);
    const auto cb = loss_cb(scores, t, w);
    CHECK(l0.loss == cb.loss);
    CHECK(l0.grad == cb.grad);
    const auto l1 = loss_cogtree(tree, scores, t, w, nw, 1.0);
    const auto l2 = loss_cogtree(tree, scores, t, w, nw, 2.0);
    CHECK(std::abs((l2.loss - l0.loss) - 2 * (l1.loss - l0.loss)) <= 1e-12);
    const auto tcb = loss_tcb(tree, scores, t, nw);
    CHECK(std::abs(l1.loss - (cb.loss + tcb.loss)) <= 1e-14);
  }
  CHECK_THROWS_AS(loss_cogtree(symmetric_tree(), std::vector<double>(6, 0.0), 0,
                               ClassWeights{std::vector<double>(6, 1.0), 0.0},
                               unit_node_weights(symmetric_tree()), -1.0),
                  Error);
}

TEST_CASE("tree loss input checks") {
  const auto tree = symmetric_tree();
  const auto nw = unit_node_weights(tree);
  CHECK_THROWS_AS(loss_tcb(tree, std::vector<double>(5, 0.0), 0, nw), Error);
  try {
    loss_tcb(tree, std::vector<double>(6, 0.0), 9, nw);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::unknown_class || e.code() == ErrorCode::label_out_of_range));
  }
}

TEST_CASE("Loss binds a spec to class counts") {
  const auto tree = std::make_shared<const CogTree>(symmetric_tree());
  const std::vector<std::uint64_t> counts{1000, 20, 20, 500, 20, 0};
  const std::vector<double> scores{0.2, -0.3, 0.5, 0.0, 1.0, -1.0};

  LossSpec spec;
  CHECK_THROWS_AS(Loss(spec, counts), Error);  // cogtree without a tree
  spec.tree = tree;
  const Loss loss(spec, counts);
  CHECK(loss.warnings().size() == 1);
  double s = 0;
  for (double w : loss.class_weights().w) s += w;
  CHECK(s == Approx(6.0).epsilon(1e-14));
  CHECK(loss.node_weights().values.size() == tree->size());
  const auto r = loss(scores, 4);
  const auto direct = loss_cogtree(*tree, scores, 4, loss.class_weights(), loss.node_weights(), 1.0);
  CHECK(r.loss == direct.loss);

  LossSpec raw = spec;
  raw.normalize_weights = false;
  const Loss unnormalized(raw, counts);
  CHECK(unnormalized.class_weights().w[5] == 1.0);

  LossSpec tce = spec;
  tce.kind = LossKind::tce;
  const Loss tce_loss(tce, counts);
  for (double v : tce_loss.node_weights().values) CHECK(v == 1.0);
  CHECK(tce_loss(scores, 1).loss == loss_tcb(*tree, scores, 1, unit_node_weights(*tree)).loss);

  LossSpec ce;
  ce.kind = LossKind::ce;
  CHECK(Loss(ce, counts)(scores, 3).loss == loss_ce(scores, 3).loss);
  CHECK_THROWS_AS(Loss(ce, counts)(std::vector<double>{1.0}, 0), Error);
}

TEST_CASE("loss names parse") {
  CHECK(parse_loss_kind("cogtree") == LossKind::cogtree);
  CHECK(parse_loss_kind("reweight") == LossKind::cb);
  CHECK(parse_aggregator("avg") == Aggregator::average);
  CHECK(parse_aggregator("max") == Aggregator::max);
  CHECK_THROWS_AS(parse_loss_kind("hinge"), Error);
  CHECK(requires_tree(LossKind::tce));
  CHECK_FALSE(requires_tree(LossKind::focal));
}
