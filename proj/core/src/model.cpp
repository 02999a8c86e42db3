#include "cogtree/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cogtree/error.hpp"
#include "json.hpp"

namespace cogtree {

using json = nlohmann::ordered_json;

const char* to_string(ModelKind kind) noexcept {
  return kind == ModelKind::linear ? "linear" : "mlp1";
}

const char* to_string(Activation act) noexcept {
  return act == Activation::tanh ? "tanh" : "relu";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "linear") return ModelKind::linear;
  if (text == "mlp1" || text == "mlp") return ModelKind::mlp1;
  throw Error(ErrorCode::invalid_argument, "unknown model kind '" + std::string(text) + "'");
}

Activation parse_activation(std::string_view text) {
  if (text == "tanh") return Activation::tanh;
  if (text == "relu") return Activation::relu;
  throw Error(ErrorCode::invalid_argument, "unknown activation '" + std::string(text) + "'");
}

Classifier::Classifier(ModelKind kind, std::size_t in, std::size_t hidden, std::size_t out,
                       Activation act)
    : kind_(kind), act_(act), in_(in), hidden_(hidden), out_(out) {
  if (in == 0 || out == 0) throw Error(ErrorCode::invalid_argument, "zero-sized classifier");
  if (kind == ModelKind::mlp1 && hidden == 0) {
    throw Error(ErrorCode::invalid_argument, "mlp1 needs a hidden width");
  }
  const std::size_t n = kind == ModelKind::linear ? out * in + out
                                                  : hidden * in + hidden + out * hidden + out;
  params_.assign(n, 0.0);
}

Classifier Classifier::linear(std::size_t input_dim, std::size_t num_classes) {
  return Classifier(ModelKind::linear, input_dim, 0, num_classes, Activation::tanh);
}

Classifier Classifier::mlp(std::size_t input_dim, std::size_t hidden, std::size_t num_classes,
                           Activation act) {
  return Classifier(ModelKind::mlp1, input_dim, hidden, num_classes, act);
}

void Classifier::initialize(Rng& rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  auto fill_uniform = [&](std::size_t offset, std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < count; ++i) params_[offset + i] = rng.uniform(-bound, bound);
  };
  if (kind_ == ModelKind::linear) {
    fill_uniform(0, out_ * in_, in_);
  } else {
    fill_uniform(0, hidden_ * in_, in_);
    fill_uniform(hidden_ * in_ + hidden_, out_ * hidden_, hidden_);
  }
}

void Classifier::check_input(std::span<const double> features) const {
  if (features.size() != in_) {
    throw Error(ErrorCode::dimension_mismatch, "expected " + std::to_string(in_) +
                                                   " features, got " +
                                                   std::to_string(features.size()));
  }
}

void Classifier::hidden_forward(std::span<const double> x, std::vector<double>& pre,
                                std::vector<double>& post) const {
  pre.assign(hidden_, 0.0);
  post.assign(hidden_, 0.0);
  const double* w1 = params_.data();
  const double* b1 = w1 + hidden_ * in_;
  for (std::size_t h = 0; h < hidden_; ++h) {
    double s = b1[h];
    for (std::size_t i = 0; i < in_; ++i) s += w1[h * in_ + i] * x[i];
    pre[h] = s;
    post[h] = act_ == Activation::tanh ? std::tanh(s) : std::max(0.0, s);
  }
}

ScoreVector Classifier::score(std::span<const double> features) const {
  check_input(features);
  std::vector<double> out(out_, 0.0);
  if (kind_ == ModelKind::linear) {
    const double* w = params_.data();
    const double* b = w + out_ * in_;
    for (std::size_t c = 0; c < out_; ++c) {
      double s = b[c];
      for (std::size_t i = 0; i < in_; ++i) s += w[c * in_ + i] * features[i];
      out[c] = s;
    }
  } else {
    std::vector<double> pre, post;
    hidden_forward(features, pre, post);
    const double* w2 = params_.data() + hidden_ * in_ + hidden_;
    const double* b2 = w2 + out_ * hidden_;
    for (std::size_t c = 0; c < out_; ++c) {
      double s = b2[c];
      for (std::size_t h = 0; h < hidden_; ++h) s += w2[c * hidden_ + h] * post[h];
      out[c] = s;
    }
  }
  return ScoreVector(std::move(out));
}

ScoreMatrix Classifier::forward(std::span<const std::vector<double>> batch) const {
  ScoreMatrix m(batch.size(), out_);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const ScoreVector s = score(batch[r]);
    std::copy(s.values().begin(), s.values().end(), m.row(r).begin());
  }
  return m;
}

void Classifier::accumulate_gradient(std::span<const double> x, std::span<const double> g,
                                     std::span<double> grad) const {
  check_input(x);
  if (g.size() != out_ || grad.size() != params_.size()) {
    throw Error(ErrorCode::dimension_mismatch, "gradient buffer size");
  }
  if (kind_ == ModelKind::linear) {
    double* dw = grad.data();
    double* db = dw + out_ * in_;
    for (std::size_t c = 0; c < out_; ++c) {
      if (g[c] == 0.0) continue;
      for (std::size_t i = 0; i < in_; ++i) dw[c * in_ + i] += g[c] * x[i];
      db[c] += g[c];
    }
    return;
  }
  std::vector<double> pre, post;
  hidden_forward(x, pre, post);
  const double* w2 = params_.data() + hidden_ * in_ + hidden_;
  double* dw1 = grad.data();
  double* db1 = dw1 + hidden_ * in_;
  double* dw2 = db1 + hidden_;
  double* db2 = dw2 + out_ * hidden_;
  std::vector<double> dpost(hidden_, 0.0);
  for (std::size_t c = 0; c < out_; ++c) {
    for (std::size_t h = 0; h < hidden_; ++h) {
      dw2[c * hidden_ + h] += g[c] * post[h];
      dpost[h] += w2[c * hidden_ + h] * g[c];
    }
    db2[c] += g[c];
  }
  for (std::size_t h = 0; h < hidden_; ++h) {
    const double d = act_ == Activation::tanh ? dpost[h] * (1.0 - post[h] * post[h])
                                              : (pre[h] > 0.0 ? dpost[h] : 0.0);
    for (std::size_t i = 0; i < in_; ++i) dw1[h * in_ + i] += d * x[i];
    db1[h] += d;
  }
}

std::vector<std::vector<double>> Classifier::class_weight_rows() const {
  const std::size_t width = kind_ == ModelKind::linear ? in_ : hidden_;
  const double* w = kind_ == ModelKind::linear ? params_.data()
                                               : params_.data() + hidden_ * in_ + hidden_;
  std::vector<std::vector<double>> rows(out_);
  for (std::size_t c = 0; c < out_; ++c) rows[c].assign(w + c * width, w + (c + 1) * width);
  return rows;
}

void validate(const TrainConfig& config) {
  if (config.epochs < 1) throw Error(ErrorCode::invalid_config, "epochs must be >= 1");
  if (config.batch_size < 1) throw Error(ErrorCode::invalid_config, "batch size must be >= 1");
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    throw Error(ErrorCode::invalid_config, "learning rate must be finite and >= 0");
  }
}

double batch_loss_and_gradient(const Classifier& model, const Loss& loss, const Dataset& data,
                               std::span<const std::size_t> batch, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  if (batch.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  std::vector<double> g;
  for (std::size_t idx : batch) {
    const ScoreVector s = model.score(data.features[idx]);
    LossResult r = loss(s.values(), data.labels[idx]);
    total += r.loss;
    for (double& v : r.grad) v *= scale;
    model.accumulate_gradient(data.features[idx], r.grad, grad);
  }
  return total * scale;
}

std::vector<std::size_t> resample_balanced(const Dataset& data, std::size_t num_classes, Rng& rng) {
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < data.size(); ++i) by_class.at(data.labels[i]).push_back(i);
  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (!by_class[c].empty()) present.push_back(c);
  }
  if (present.empty()) throw Error(ErrorCode::empty_dataset, "nothing to resample");
  std::vector<std::size_t> schedule(data.size());
  for (auto& slot : schedule) {
    const auto& pool = by_class[present[rng.below(present.size())]];
    slot = pool[rng.below(pool.size())];
  }
  return schedule;
}

std::vector<std::size_t> resample_balanced(const Dataset& data, std::size_t num_classes,
                                           std::uint64_t seed) {
  Rng rng = Rng::derive(seed, "resample");
  return resample_balanced(data, num_classes, rng);
}

namespace {

double training_accuracy(const Classifier& model, const Dataset& data) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const ScoreVector s = model.score(data.features[i]);
    if (argmax(s.values()) == data.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace

TrainResult train(Classifier model, const Dataset& data, const LabelSpace& space,
                  const TrainConfig& config) {
  validate(config);
  validate_dataset(data, space);
  if (data.dim() != model.input_dim() || space.size() != model.num_classes()) {
    throw Error(ErrorCode::dimension_mismatch, "model does not match the dataset");
  }
  const Loss loss(config.loss, space.counts());
  TrainResult result{std::move(model), {}, {loss.warnings().begin(), loss.warnings().end()}};
  Classifier& m = result.model;

  Rng order_rng = Rng::derive(config.seed, "shuffle");
  std::vector<std::size_t> order(data.size());
  std::vector<double> grad(m.parameters().size());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.resample) {
      order = resample_balanced(data, space.size(), order_rng);
    } else {
      std::iota(order.begin(), order.end(), std::size_t{0});
      order_rng.shuffle(std::span<std::size_t>(order));
    }
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> batch(order.data() + start, end - start);
      const double mean = batch_loss_and_gradient(m, loss, data, batch, grad);
      epoch_total += mean * static_cast<double>(batch.size());
      if (config.learning_rate == 0.0) continue;
      auto params = m.parameters();
      for (std::size_t p = 0; p < params.size(); ++p) params[p] -= config.learning_rate * grad[p];
    }
    result.history.epoch_loss.push_back(epoch_total / static_cast<double>(order.size()));
    result.history.epoch_accuracy.push_back(training_accuracy(m, data));
  }
  return result;
}

PredictionLog predict_log(const Classifier& model, const Dataset& data) {
  PredictionLog log;
  log.rows.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const ScoreVector s = model.score(data.features[i]);
    log.rows.push_back({data.labels[i], argmax(s.values())});
  }
  return log;
}

namespace {
constexpr int kCheckpointSchemaVersion = 1;
}

std::string checkpoint_to_json(const Checkpoint& ck) {
  const Classifier& m = ck.model;
  json doc;
  doc["version"] = kCheckpointSchemaVersion;
  doc["kind"] = to_string(m.kind());
  doc["activation"] = to_string(m.activation());
  doc["input_dim"] = m.input_dim();
  doc["hidden_dim"] = m.hidden_dim();
  doc["num_classes"] = m.num_classes();
  doc["seed"] = ck.seed;
  doc["config_digest"] = ck.config_digest;
  auto params = m.parameters();
  auto layer = [&](std::size_t offset, std::size_t rows, std::size_t cols) {
    json l;
    l["rows"] = rows;
    l["cols"] = cols;
    l["weights"] = std::vector<double>(params.begin() + offset, params.begin() + offset + rows * cols);
    l["bias"] = std::vector<double>(params.begin() + offset + rows * cols,
                                    params.begin() + offset + rows * cols + rows);
    return l;
  };
  doc["layers"] = json::array();
  if (m.kind() == ModelKind::linear) {
    doc["layers"].push_back(layer(0, m.num_classes(), m.input_dim()));
  } else {
    doc["layers"].push_back(layer(0, m.hidden_dim(), m.input_dim()));
    doc["layers"].push_back(layer(m.hidden_dim() * m.input_dim() + m.hidden_dim(),
                                  m.num_classes(), m.hidden_dim()));
  }
  return doc.dump(2) + "\n";
}

Checkpoint checkpoint_from_json(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("version").get<int>() != kCheckpointSchemaVersion) {
      throw Error(ErrorCode::parse_error, "unsupported checkpoint schema version");
    }
    const ModelKind kind = parse_model_kind(doc.at("kind").get<std::string>());
    const auto in = doc.at("input_dim").get<std::size_t>();
    const auto hidden = doc.at("hidden_dim").get<std::size_t>();
    const auto out = doc.at("num_classes").get<std::size_t>();
    Classifier m = kind == ModelKind::linear
                       ? Classifier::linear(in, out)
                       : Classifier::mlp(in, hidden, out,
                                         parse_activation(doc.at("activation").get<std::string>()));
    std::vector<double> flat;
    for (const json& l : doc.at("layers")) {
      const auto w = l.at("weights").get<std::vector<double>>();
      const auto b = l.at("bias").get<std::vector<double>>();
      if (w.size() != l.at("rows").get<std::size_t>() * l.at("cols").get<std::size_t>() ||
          b.size() != l.at("rows").get<std::size_t>()) {
        throw Error(ErrorCode::parse_error, "layer shape does not match its arrays");
      }
      flat.insert(flat.end(), w.begin(), w.end());
      flat.insert(flat.end(), b.begin(), b.end());
    }
    if (flat.size() != m.parameters().size()) {
      throw Error(ErrorCode::parse_error, "parameter count does not match the model shape");
    }
    std::copy(flat.begin(), flat.end(), m.parameters().begin());
    return Checkpoint{std::move(m), doc.at("seed").get<std::uint64_t>(),
                      doc.at("config_digest").get<std::string>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("checkpoint json: ") + e.what());
  }
}

}  // namespace cogtree
