#include "cogtree/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cogtree/error.hpp"
#include "cogtree/random.hpp"

namespace cogtree {

void validate(const SynthSpec& s) {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::invalid_spec, what); };
  if (s.num_concepts < 1) bad("num_concepts must be >= 1");
  if ((s.num_concepts * (1 + s.fine_per_concept)) < 2) bad("need at least 2 classes");
  if (s.tail_count < 3) bad("tail_count must be >= 3 so every split gets a sample");
  if (s.head_count < s.tail_count) bad("head_count must be >= tail_count");
  if (s.head_count < 3) bad("head_count must be >= 3");
  if (s.dim < 1) bad("dim must be >= 1");
  if (!(s.sigma_off > 0.0)) bad("sigma_off must be > 0");
  if (!(s.sigma_sep > s.sigma_off)) bad("sigma_sep must exceed sigma_off");
  if (!(s.sigma_noise >= 0.0) || !std::isfinite(s.sigma_noise)) bad("sigma_noise must be >= 0");
}

namespace {

struct SplitSizes {
  std::size_t train, val, test;
};

SplitSizes split_sizes(std::size_t n) {
  auto share = [&](double frac) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(frac * static_cast<double>(n))));
  };
  const std::size_t val = share(0.15);
  const std::size_t test = share(0.15);
  return {n - val - test, val, test};
}

}  // namespace

SyntheticData generate_synthetic(const SynthSpec& spec) {
  validate(spec);
  Rng rng = Rng::derive(spec.seed, "synthetic-data");
  const std::size_t per_concept = 1 + spec.fine_per_concept;
  const std::size_t num_classes = spec.num_concepts * per_concept;

  std::vector<std::string> names;
  std::vector<ClassIndex> planted(num_classes);
  std::vector<std::vector<double>> centroid(num_classes, std::vector<double>(spec.dim));
  // sigma_sep and sigma_off are distance scales: per-coordinate draws are
  // divided by sqrt(d) so the expected squared norm of a concept centroid
  // (resp. a fine-class offset) is sigma_sep^2 (resp. sigma_off^2).
  // sigma_noise is the per-coordinate sample noise.
  const double per_coord = 1.0 / std::sqrt(static_cast<double>(spec.dim));
  for (std::size_t k = 0; k < spec.num_concepts; ++k) {
    const ClassIndex head = k * per_concept;
    std::vector<double> base(spec.dim);
    for (double& v : base) v = rng.normal(0.0, spec.sigma_sep * per_coord);
    for (std::size_t j = 0; j < per_concept; ++j) {
      const ClassIndex c = head + j;
      names.push_back(j == 0 ? "c" + std::to_string(k)
                             : "c" + std::to_string(k) + "_f" + std::to_string(j - 1));
      planted[c] = head;
      for (std::size_t d = 0; d < spec.dim; ++d) {
        centroid[c][d] = base[d] + (j == 0 ? 0.0 : rng.normal(0.0, spec.sigma_off * per_coord));
      }
    }
  }

  Dataset train{{}, {}, Split::train}, val{{}, {}, Split::val}, test{{}, {}, Split::test};
  std::vector<std::uint64_t> train_counts(num_classes);
  for (ClassIndex c = 0; c < num_classes; ++c) {
    const std::size_t n = c % per_concept == 0 ? spec.head_count : spec.tail_count;
    const SplitSizes sizes = split_sizes(n);
    train_counts[c] = sizes.train;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> x(spec.dim);
      for (std::size_t d = 0; d < spec.dim; ++d) x[d] = centroid[c][d] + rng.normal(0.0, spec.sigma_noise);
      Dataset& dst = i < sizes.train ? train : (i < sizes.train + sizes.val ? val : test);
      dst.features.push_back(std::move(x));
      dst.labels.push_back(c);
    }
  }
  return {LabelSpace(std::move(names), std::move(train_counts)), std::move(train), std::move(val),
          std::move(test), std::move(planted)};
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

double parse_double(std::string_view text, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::malformed_row, "bad number '" + std::string(text) + "'", line_no);
  }
  return v;
}

// Shared reader; `resolve` maps a label string to a class index.
template <typename Resolve>
Dataset read_rows(std::istream& in, Split split, Resolve&& resolve) {
  std::string line;
  if (!next_line(in, line) || line.empty()) throw Error(ErrorCode::empty_dataset, "empty file");
  const auto header = split_fields(line);
  if (header.size() < 2 || header[0] != "label") {
    throw Error(ErrorCode::unknown_header, "expected 'label,f0,...'", 1);
  }
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i] != "f" + std::to_string(i - 1)) {
      throw Error(ErrorCode::unknown_header, "unexpected column '" + std::string(header[i]) + "'", 1);
    }
  }
  const std::size_t dim = header.size() - 1;
  Dataset ds{{}, {}, split};
  std::size_t line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != dim + 1) {
      throw Error(ErrorCode::inconsistent_dimension,
                  "expected " + std::to_string(dim) + " features, got " +
                      std::to_string(fields.size() - 1),
                  line_no);
    }
    if (fields[0].empty()) throw Error(ErrorCode::malformed_row, "empty label", line_no);
    std::vector<double> x(dim);
    for (std::size_t d = 0; d < dim; ++d) x[d] = parse_double(fields[d + 1], line_no);
    ds.labels.push_back(resolve(fields[0], line_no));
    ds.features.push_back(std::move(x));
  }
  if (ds.labels.empty()) throw Error(ErrorCode::empty_dataset, "no data rows");
  return ds;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  return in;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

LabeledDataset read_dataset_csv(std::istream& in, Split split) {
  std::vector<std::string> names;
  std::unordered_map<std::string, ClassIndex> index;
  Dataset ds = read_rows(in, split, [&](std::string_view label, std::size_t) {
    auto [it, inserted] = index.emplace(std::string(label), names.size());
    if (inserted) names.emplace_back(label);
    return it->second;
  });
  if (names.size() < 2) throw Error(ErrorCode::invalid_argument, "dataset has fewer than 2 classes");
  auto counts = class_histogram(ds, names.size());
  LabelSpace space(std::move(names), std::move(counts));
  return {std::move(ds), std::move(space)};
}

Dataset read_dataset_csv(std::istream& in, const LabelSpace& space, Split split) {
  return read_rows(in, split, [&](std::string_view label, std::size_t line_no) {
    if (auto c = space.find(label)) return *c;
    throw Error(ErrorCode::unknown_label, "'" + std::string(label) + "'", line_no);
  });
}

LabeledDataset read_dataset_csv(const std::filesystem::path& path, Split split) {
  auto in = open_in(path);
  return read_dataset_csv(in, split);
}

Dataset read_dataset_csv(const std::filesystem::path& path, const LabelSpace& space, Split split) {
  auto in = open_in(path);
  return read_dataset_csv(in, space, split);
}

void write_dataset_csv(const Dataset& dataset, const LabelSpace& space, std::ostream& out) {
  validate_dataset(dataset, space);
  for (const auto& name : space.names()) {
    if (name.find_first_of(",\n\r") != std::string::npos) {
      throw Error(ErrorCode::invalid_argument, "class name '" + name + "' cannot be written to CSV");
    }
  }
  out << "label";
  for (std::size_t d = 0; d < dataset.dim(); ++d) out << ",f" << d;
  out << '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out << space.name(dataset.labels[i]);
    for (double v : dataset.features[i]) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_dataset_csv(const Dataset& dataset, const LabelSpace& space,
                       const std::filesystem::path& path) {
  std::ostringstream os;
  write_dataset_csv(dataset, space, os);
  write_file_atomic(path, os.str());
}

PredictionLog read_prediction_log_csv(std::istream& in, const LabelSpace& space) {
  std::string line;
  if (!next_line(in, line) || line.empty()) throw Error(ErrorCode::empty_log, "empty file");
  if (line != "ground_truth,predicted") {
    throw Error(ErrorCode::unknown_header, "expected 'ground_truth,predicted'", 1);
  }
  PredictionLog log;
  std::size_t line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2) throw Error(ErrorCode::malformed_row, "expected 2 fields", line_no);
    auto resolve = [&](std::string_view name) {
      if (auto c = space.find(name)) return *c;
      throw Error(ErrorCode::unknown_label, "'" + std::string(name) + "'", line_no);
    };
    log.rows.push_back({resolve(fields[0]), resolve(fields[1])});
  }
  return log;
}

PredictionLog read_prediction_log_csv(const std::filesystem::path& path, const LabelSpace& space) {
  auto in = open_in(path);
  return read_prediction_log_csv(in, space);
}

void write_prediction_log_csv(const PredictionLog& log, const LabelSpace& space, std::ostream& out) {
  validate_log(log, space);
  out << "ground_truth,predicted\n";
  for (const Prediction& p : log.rows) {
    out << space.name(p.ground_truth) << ',' << space.name(p.predicted) << '\n';
  }
}

void write_prediction_log_csv(const PredictionLog& log, const LabelSpace& space,
                              const std::filesystem::path& path) {
  std::ostringstream os;
  write_prediction_log_csv(log, space, os);
  write_file_atomic(path, os.str());
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::io_error, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot rename onto '" + path.string() + "': " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace cogtree
