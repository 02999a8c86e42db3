#include "cogtree/eval.hpp"

#include <cstdio>
#include <sstream>

#include "cogtree/error.hpp"
#include "json.hpp"

namespace cogtree {

using json = nlohmann::ordered_json;

bool in_top_k(std::span<const double> scores, ClassIndex label, std::size_t k) {
  std::size_t rank = 0;
  const double s = scores[label];
  for (ClassIndex j = 0; j < scores.size(); ++j) {
    if (scores[j] > s || (scores[j] == s && j < label)) ++rank;
  }
  return rank < k;
}

namespace {

void check(const ScoreMatrix& scores, std::span<const ClassIndex> labels, std::size_t k) {
  if (labels.size() != scores.rows) {
    throw Error(ErrorCode::dimension_mismatch, "one label per score row required");
  }
  if (k < 1 || k > scores.cols) {
    throw Error(ErrorCode::k_out_of_range,
                "k=" + std::to_string(k) + " outside [1, " + std::to_string(scores.cols) + "]");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= scores.cols) throw Error(ErrorCode::label_out_of_range, "label", i);
  }
}

}  // namespace

double recall_at_k(const ScoreMatrix& scores, std::span<const ClassIndex> labels, std::size_t k) {
  check(scores, labels, k);
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += in_top_k(scores.row(i), labels[i], k);
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

MeanRecall mean_recall_at_k(const ScoreMatrix& scores, std::span<const ClassIndex> labels,
                            std::size_t k) {
  check(scores, labels, k);
  std::vector<std::uint64_t> hits(scores.cols, 0), totals(scores.cols, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++totals[labels[i]];
    hits[labels[i]] += in_top_k(scores.row(i), labels[i], k);
  }
  MeanRecall out;
  out.per_class.resize(scores.cols);
  double sum = 0.0;
  std::size_t present = 0;
  for (ClassIndex c = 0; c < scores.cols; ++c) {
    if (totals[c] == 0) continue;
    const double r = static_cast<double>(hits[c]) / static_cast<double>(totals[c]);
    out.per_class[c] = r;
    sum += r;
    ++present;
  }
  out.mean = present ? sum / static_cast<double>(present) : 0.0;
  return out;
}

std::uint64_t ConfusionMatrix::row_sum(ClassIndex truth) const {
  std::uint64_t s = 0;
  for (ClassIndex j = 0; j < num_classes; ++j) s += at(truth, j);
  return s;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t s = 0;
  for (ClassIndex j = 0; j < num_classes; ++j) s += at(j, j);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto v : counts) s += v;
  return s;
}

ConfusionMatrix confusion_matrix(const ScoreMatrix& scores, std::span<const ClassIndex> labels) {
  check(scores, labels, 1);
  ConfusionMatrix m{scores.cols, std::vector<std::uint64_t>(scores.cols * scores.cols, 0)};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++m.counts[labels[i] * scores.cols + argmax(scores.row(i))];
  }
  return m;
}

MetricsReport evaluate(const ScoreMatrix& scores, std::span<const ClassIndex> labels,
                       const LabelSpace& space, std::span<const std::size_t> ks) {
  if (scores.cols != space.size()) {
    throw Error(ErrorCode::dimension_mismatch, "score width differs from class count");
  }
  MetricsReport r;
  r.class_names.assign(space.names().begin(), space.names().end());
  r.ks.assign(ks.begin(), ks.end());
  r.confusion = confusion_matrix(scores, labels);
  r.class_counts.resize(space.size());
  for (ClassIndex c = 0; c < space.size(); ++c) {
    r.class_counts[c] = r.confusion.row_sum(c);
    if (r.class_counts[c] == 0) r.excluded.push_back(c);
  }
  for (std::size_t k : ks) {
    MeanRecall m = mean_recall_at_k(scores, labels, k);
    r.mean_recall.push_back(m.mean);
    r.per_class.push_back(std::move(m.per_class));
    r.overall_recall.push_back(recall_at_k(scores, labels, k));
  }
  return r;
}

namespace {

json optional_value(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string report_to_json(const MetricsReport& r) {
  json doc;
  doc["version"] = 1;
  doc["ks"] = r.ks;
  json summary = json::object();
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    summary["mR@" + std::to_string(r.ks[i])] = r.mean_recall[i];
    summary["R@" + std::to_string(r.ks[i])] = r.overall_recall[i];
  }
  doc["summary"] = summary;
  doc["classes"] = json::array();
  for (ClassIndex c = 0; c < r.class_names.size(); ++c) {
    json cls;
    cls["name"] = r.class_names[c];
    cls["n"] = r.class_counts[c];
    json recalls = json::object();
    for (std::size_t i = 0; i < r.ks.size(); ++i) {
      recalls["R@" + std::to_string(r.ks[i])] = optional_value(r.per_class[i][c]);
    }
    cls["recall"] = recalls;
    doc["classes"].push_back(cls);
  }
  doc["excluded"] = json::array();
  for (ClassIndex c : r.excluded) doc["excluded"].push_back(r.class_names[c]);
  doc["confusion"] = json::array();
  for (ClassIndex c = 0; c < r.confusion.num_classes; ++c) {
    doc["confusion"].push_back(std::vector<std::uint64_t>(
        r.confusion.counts.begin() + static_cast<std::ptrdiff_t>(c * r.confusion.num_classes),
        r.confusion.counts.begin() + static_cast<std::ptrdiff_t>((c + 1) * r.confusion.num_classes)));
  }
  return doc.dump(2) + "\n";
}

std::string report_to_text(const MetricsReport& r) {
  std::size_t width = 5;
  for (const auto& n : r.class_names) width = std::max(width, n.size());
  std::ostringstream os;
  auto pad = [](const std::string& s, std::size_t w, bool right) {
    const std::string fill(w > s.size() ? w - s.size() : 0, ' ');
    return right ? fill + s : s + fill;
  };
  os << pad("class", width, false) << "  " << pad("n", 6, true);
  for (std::size_t k : r.ks) os << "  " << pad("R@" + std::to_string(k), 7, true);
  os << '\n';
  for (ClassIndex c = 0; c < r.class_names.size(); ++c) {
    os << pad(r.class_names[c], width, false) << "  "
       << pad(std::to_string(r.class_counts[c]), 6, true);
    for (std::size_t i = 0; i < r.ks.size(); ++i) {
      os << "  " << pad(r.per_class[i][c] ? fixed(*r.per_class[i][c]) : "-", 7, true);
    }
    os << '\n';
  }
  std::uint64_t total = 0;
  for (auto n : r.class_counts) total += n;
  os << pad("mean", width, false) << "  " << pad(std::to_string(total), 6, true);
  for (double v : r.mean_recall) os << "  " << pad(fixed(v), 7, true);
  os << '\n' << pad("overall", width, false) << "  " << pad(std::to_string(total), 6, true);
  for (double v : r.overall_recall) os << "  " << pad(fixed(v), 7, true);
  os << '\n';
  return os.str();
}

double subset_mean_recall(const MetricsReport& r, std::size_t k_index,
                          std::span<const ClassIndex> classes) {
  double sum = 0.0;
  std::size_t n = 0;
  for (ClassIndex c : classes) {
    if (const auto& v = r.per_class.at(k_index).at(c)) {
      sum += *v;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace cogtree
