#include "cogtree/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cogtree/error.hpp"

namespace cogtree {

const char* to_string(Aggregator agg) noexcept {
  switch (agg) {
    case Aggregator::average: return "average";
    case Aggregator::max: return "max";
    case Aggregator::sum: return "sum";
  }
  return "average";
}

const char* to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::ce: return "ce";
    case LossKind::cb: return "cb";
    case LossKind::focal: return "focal";
    case LossKind::tce: return "tce";
    case LossKind::tcb: return "tcb";
    case LossKind::cogtree: return "cogtree";
  }
  return "ce";
}

Aggregator parse_aggregator(std::string_view text) {
  if (text == "average" || text == "avg" || text == "mean") return Aggregator::average;
  if (text == "max") return Aggregator::max;
  if (text == "sum") return Aggregator::sum;
  throw Error(ErrorCode::invalid_argument, "unknown aggregator '" + std::string(text) + "'");
}

LossKind parse_loss_kind(std::string_view text) {
  for (auto k : {LossKind::ce, LossKind::cb, LossKind::focal, LossKind::tce, LossKind::tcb,
                 LossKind::cogtree}) {
    if (text == to_string(k)) return k;
  }
  if (text == "reweight") return LossKind::cb;
  throw Error(ErrorCode::invalid_argument, "unknown loss '" + std::string(text) + "'");
}

bool requires_tree(LossKind kind) noexcept {
  return kind == LossKind::tce || kind == LossKind::tcb || kind == LossKind::cogtree;
}

ClassWeights class_balanced_weights(std::span<const std::uint64_t> counts, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "beta must lie in [0, 1)");
  }
  ClassWeights out;
  out.beta = beta;
  out.w.resize(counts.size());
  const double log_beta = std::log(beta);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) {
      throw Error(ErrorCode::zero_count, "class-balanced weight undefined for an empty class", i);
    }
    if (beta == 0.0 || counts[i] == 1) {
      out.w[i] = 1.0;
    } else {
      // 1 - beta^n evaluated as -expm1(n log beta) to keep precision for beta near 1.
      out.w[i] = (1.0 - beta) / -std::expm1(static_cast<double>(counts[i]) * log_beta);
    }
  }
  return out;
}

ClassWeights normalized(ClassWeights weights) {
  double total = 0.0;
  for (double v : weights.w) total += v;
  const double scale = static_cast<double>(weights.w.size()) / total;
  for (double& v : weights.w) v *= scale;
  return weights;
}

std::vector<std::uint64_t> floor_counts(std::span<const std::uint64_t> counts,
                                        std::vector<std::string>* warnings) {
  std::vector<std::uint64_t> out(counts.begin(), counts.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] == 0) {
      out[i] = 1;
      if (warnings) warnings->push_back("class " + std::to_string(i) + " has no training samples; count floored at 1");
    }
  }
  return out;
}

NodeValues node_values(const CogTree& tree, std::span<const double> leaf_values, Aggregator agg) {
  if (leaf_values.size() != tree.num_classes()) {
    throw Error(ErrorCode::dimension_mismatch, "need one leaf value per class");
  }
  NodeValues out;
  out.aggregator = agg;
  out.values.assign(tree.size(), 0.0);
  // Children have larger ids than their parents.
  for (NodeId id = tree.size(); id-- > 0;) {
    const TreeNode& n = tree.node(id);
    if (n.is_leaf()) {
      out.values[id] = leaf_values[*n.class_index];
      continue;
    }
    double acc = agg == Aggregator::max ? -std::numeric_limits<double>::infinity() : 0.0;
    for (NodeId c : n.children) {
      if (agg == Aggregator::max) {
        acc = std::max(acc, out.values[c]);
      } else {
        acc += out.values[c];
      }
    }
    if (agg == Aggregator::average) acc /= static_cast<double>(n.children.size());
    out.values[id] = acc;
  }
  return out;
}

namespace {

void check_target(std::span<const double> scores, ClassIndex target) {
  if (scores.empty()) throw Error(ErrorCode::invalid_argument, "empty score vector");
  if (target >= scores.size()) throw Error(ErrorCode::label_out_of_range, "target", target);
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

LossResult loss_cb(std::span<const double> scores, ClassIndex target, const ClassWeights& weights) {
  check_target(scores, target);
  if (weights.w.size() != scores.size()) {
    throw Error(ErrorCode::dimension_mismatch, "weights and scores differ in length");
  }
  const double w = weights.w[target];
  const double lse = log_sum_exp(scores);
  LossResult r;
  r.loss = -w * (scores[target] - lse);
  r.grad.resize(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) r.grad[j] = w * std::exp(scores[j] - lse);
  r.grad[target] -= w;
  return r;
}

LossResult loss_ce(std::span<const double> scores, ClassIndex target) {
  ClassWeights unit;
  unit.w.assign(scores.size(), 1.0);
  return loss_cb(scores, target, unit);
}

LossResult loss_focal(std::span<const double> scores, ClassIndex target, double gamma) {
  if (!(gamma >= 0.0)) throw Error(ErrorCode::invalid_argument, "focal gamma must be >= 0");
  if (gamma == 0.0) return loss_ce(scores, target);
  check_target(scores, target);
  const double lse = log_sum_exp(scores);
  const double log_p = scores[target] - lse;
  const double p = std::exp(log_p);
  std::vector<double> prob(scores.size());
  double q = 0.0;  // 1 - p, summed directly so it stays accurate as p -> 1
  for (std::size_t j = 0; j < scores.size(); ++j) {
    prob[j] = std::exp(scores[j] - lse);
    if (j != target) q += prob[j];
  }
  LossResult r;
  const double q_gamma = std::pow(q, gamma);
  r.loss = -q_gamma * log_p;
  // dL/ds_j = A (delta_tj - p_j),  A = gamma q^(gamma-1) p log p - q^gamma.
  const double a = q > 0.0 ? gamma * std::pow(q, gamma - 1.0) * p * log_p - q_gamma : 0.0;
  r.grad.resize(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) r.grad[j] = -a * prob[j];
  r.grad[target] = a * q;
  return r;
}

LossResult loss_tcb(const CogTree& tree, std::span<const double> scores, ClassIndex target,
                    const NodeValues& node_weights) {
  check_target(scores, target);
  if (scores.size() != tree.num_classes()) {
    throw Error(ErrorCode::dimension_mismatch, "scores and tree differ in class count");
  }
  if (node_weights.values.size() != tree.size()) {
    throw Error(ErrorCode::dimension_mismatch, "need one weight per tree node");
  }
  const auto path = tree.path(target);
  const std::size_t levels = path.size() - 1;
  const Aggregator agg = node_weights.aggregator;
  const std::vector<double> z = node_values(tree, scores, agg).values;

  std::vector<double> gz(tree.size(), 0.0);
  double loss = 0.0;
  std::vector<double> buf;
  for (std::size_t k = 1; k <= levels; ++k) {
    const TreeNode& parent = tree.node(path[k - 1]);
    if (parent.children.size() < 2) continue;
    const double w = node_weights.values[path[k]];
    buf.clear();
    for (NodeId c : parent.children) buf.push_back(z[c]);
    const double lse = log_sum_exp(buf);
    loss -= w * (z[path[k]] - lse);
    for (NodeId c : parent.children) gz[c] += w * std::exp(z[c] - lse);
    gz[path[k]] -= w;
  }
  const double inv_k = 1.0 / static_cast<double>(levels);

  // Push node gradients down to the leaves; parents precede children.
  for (NodeId id = 0; id < tree.size(); ++id) {
    const TreeNode& n = tree.node(id);
    if (n.is_leaf() || gz[id] == 0.0) continue;
    switch (agg) {
      case Aggregator::average: {
        const double share = gz[id] / static_cast<double>(n.children.size());
        for (NodeId c : n.children) gz[c] += share;
        break;
      }
      case Aggregator::sum:
        for (NodeId c : n.children) gz[c] += gz[id];
        break;
      case Aggregator::max: {
        NodeId best = n.children.front();
        for (NodeId c : n.children) {
          if (z[c] > z[best] || (z[c] == z[best] && c < best)) best = c;
        }
        gz[best] += gz[id];
        break;
      }
    }
  }

  LossResult r;
  r.loss = loss * inv_k;
  r.grad.resize(scores.size());
  for (ClassIndex c = 0; c < scores.size(); ++c) r.grad[c] = gz[tree.leaf_of(c)] * inv_k;
  return r;
}

LossResult loss_cogtree(const CogTree& tree, std::span<const double> scores, ClassIndex target,
                        const ClassWeights& weights, const NodeValues& node_weights, double lambda) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::invalid_argument, "lambda must be >= 0");
  LossResult r = loss_cb(scores, target, weights);
  if (lambda == 0.0) return r;
  const LossResult t = loss_tcb(tree, scores, target, node_weights);
  r.loss += lambda * t.loss;
  for (std::size_t j = 0; j < r.grad.size(); ++j) r.grad[j] += lambda * t.grad[j];
  return r;
}

std::vector<double> finite_diff_grad(const std::function<double(std::span<const double>)>& fn,
                                     std::span<const double> scores, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorCode::invalid_argument, "eps must be positive");
  std::vector<double> x(scores.begin(), scores.end());
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double saved = x[j];
    x[j] = saved + eps;
    const double up = fn(x);
    x[j] = saved - eps;
    const double down = fn(x);
    x[j] = saved;
    g[j] = (up - down) / (2.0 * eps);
  }
  return g;
}

Loss::Loss(LossSpec spec, std::span<const std::uint64_t> class_counts)
    : spec_(std::move(spec)), num_classes_(class_counts.size()) {
  if (!(spec_.lambda >= 0.0)) throw Error(ErrorCode::invalid_argument, "lambda must be >= 0");
  if (!(spec_.gamma >= 0.0)) throw Error(ErrorCode::invalid_argument, "gamma must be >= 0");
  const auto counts = floor_counts(class_counts, &warnings_);
  const bool weighted =
      spec_.kind == LossKind::cb || spec_.kind == LossKind::tcb || spec_.kind == LossKind::cogtree;
  weights_ = class_balanced_weights(counts, weighted ? spec_.beta : 0.0);
  if (weighted && spec_.normalize_weights) weights_ = normalized(std::move(weights_));

  if (requires_tree(spec_.kind)) {
    if (!spec_.tree) {
      throw Error(ErrorCode::invalid_argument,
                  std::string("loss '") + to_string(spec_.kind) + "' needs a tree");
    }
    if (spec_.tree->num_classes() != num_classes_) {
      throw Error(ErrorCode::dimension_mismatch, "tree and label space differ in class count");
    }
    if (spec_.kind == LossKind::tce) {
      node_weights_.values.assign(spec_.tree->size(), 1.0);
      node_weights_.aggregator = spec_.aggregator;
    } else {
      node_weights_ = node_values(*spec_.tree, weights_.w, spec_.aggregator);
    }
  }
}

LossResult Loss::operator()(std::span<const double> scores, ClassIndex target) const {
  if (scores.size() != num_classes_) {
    throw Error(ErrorCode::dimension_mismatch, "score vector length differs from class count");
  }
  switch (spec_.kind) {
    case LossKind::ce: return loss_ce(scores, target);
    case LossKind::cb: return loss_cb(scores, target, weights_);
    case LossKind::focal: return loss_focal(scores, target, spec_.gamma);
    case LossKind::tce:
    case LossKind::tcb: return loss_tcb(*spec_.tree, scores, target, node_weights_);
    case LossKind::cogtree:
      return loss_cogtree(*spec_.tree, scores, target, weights_, node_weights_, spec_.lambda);
  }
  throw Error(ErrorCode::invalid_argument, "unknown loss kind");
}

}  // namespace cogtree
