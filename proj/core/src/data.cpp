#include "tsdl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "tsdl/error.hpp"
#include "tsdl/serialize.hpp"

namespace tsdl::data {

namespace {

// View of a [n] or [n, k] series as n rows of k channels.
struct Layout {
  std::size_t n;
  std::size_t k;
};

Layout layout_of(const Tensor& x, const char* op) {
  if (x.rank() == 0) throw EmptyInputError(std::string(op) + ": empty series");
  if (x.rank() == 1) return {x.shape()[0], 1};
  if (x.rank() == 2) return {x.shape()[0], x.shape()[1]};
  throw ShapeError(std::string(op) + ": expected a [n] or [n, k] series, got " + to_string(x.shape()));
}

Shape with_length(const Tensor& x, std::size_t n) {
  Shape s = x.shape();
  s[0] = n;
  return s;
}

}  // namespace

std::size_t SeriesDataset::size() const { return inputs.rank() == 0 ? 0 : inputs.shape()[0]; }

SeriesDataset slice(const SeriesDataset& d, std::size_t begin, std::size_t end) {
  if (begin > end || end > d.size()) throw ParameterError("slice: bad row range");
  std::vector<std::size_t> rows(end - begin);
  std::iota(rows.begin(), rows.end(), begin);
  return {take_rows(d.inputs, rows), take_rows(d.targets, rows), d.note};
}

// ---- preprocessing ----------------------------------------------------------

Tensor smooth(const Tensor& series, std::size_t w, std::size_t iterations) {
  const auto [n, k] = layout_of(series, "smooth");
  if (w == 0) throw ParameterError("smooth: window must be at least 1");
  if (w > n) throw ParameterError("smooth: window " + std::to_string(w) + " exceeds series length " + std::to_string(n));
  Tensor cur = series;
  Tensor next(series.shape());
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t t = 0; t < n; ++t) {
        const std::size_t from = t + 1 >= w ? t + 1 - w : 0;
        real sum = 0;
        for (std::size_t s = from; s <= t; ++s) sum += cur.raw()[s * k + c];
        next.raw()[t * k + c] = sum / static_cast<real>(t + 1 - from);
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

Moments moments(const Tensor& series) {
  const auto [n, k] = layout_of(series, "moments");
  if (n < 2) throw DegenerateError("moments: need at least two steps");
  Moments m{std::vector<real>(k, 0), std::vector<real>(k, 0)};
  for (std::size_t c = 0; c < k; ++c) {
    real sum = 0;
    for (std::size_t t = 0; t < n; ++t) sum += series.raw()[t * k + c];
    const real mean = sum / static_cast<real>(n);
    real ss = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const real d = series.raw()[t * k + c] - mean;
      ss += d * d;
    }
    const real sd = std::sqrt(ss / static_cast<real>(n - 1));
    if (!(sd > 0)) throw DegenerateError("moments: channel " + std::to_string(c) + " has zero variance");
    m.mean[c] = mean;
    m.stdev[c] = sd;
  }
  return m;
}

Tensor standardize(const Tensor& series, const Moments& m) {
  const auto [n, k] = layout_of(series, "standardize");
  if (m.mean.size() != k || m.stdev.size() != k) throw ShapeError("standardize: moments do not match channel count");
  Tensor out(series.shape());
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < k; ++c) out.raw()[t * k + c] = (series.raw()[t * k + c] - m.mean[c]) / m.stdev[c];
  return out;
}

Tensor zscore(const Tensor& segment) { return standardize(segment, moments(segment)); }

Range value_range(const Tensor& series) {
  const auto [n, k] = layout_of(series, "value_range");
  Range r{std::vector<real>(k, std::numeric_limits<real>::infinity()),
          std::vector<real>(k, -std::numeric_limits<real>::infinity())};
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < k; ++c) {
      r.lo[c] = std::min(r.lo[c], series.raw()[t * k + c]);
      r.hi[c] = std::max(r.hi[c], series.raw()[t * k + c]);
    }
  for (std::size_t c = 0; c < k; ++c)
    if (!(r.hi[c] > r.lo[c])) throw DegenerateError("value_range: channel " + std::to_string(c) + " is flat");
  return r;
}

Tensor rescale(const Tensor& series, const Range& r) {
  const auto [n, k] = layout_of(series, "rescale");
  if (r.lo.size() != k || r.hi.size() != k) throw ShapeError("rescale: range does not match channel count");
  Tensor out(series.shape());
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t c = 0; c < k; ++c)
      out.raw()[t * k + c] = (series.raw()[t * k + c] - r.lo[c]) / (r.hi[c] - r.lo[c]);
  return out;
}

Split chrono_split(const Tensor& series, std::array<double, 3> fractions) {
  for (double f : fractions)
    if (!(f > 0)) throw ParameterError("chrono_split: fractions must be positive");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1) > 1e-9)
    throw ParameterError("chrono_split: fractions must sum to 1");
  if (series.rank() == 0) throw ShapeError("chrono_split: scalar input");
  const std::size_t n = series.shape()[0];
  if (n < 3) throw EmptyInputError("chrono_split: need at least 3 steps, got " + std::to_string(n));
  // The epsilon absorbs representation error such as 30 * 0.7 = 20.999...
  const auto part = [n](double f) { return static_cast<std::size_t>(std::floor(static_cast<double>(n) * f + 1e-9)); };
  const std::size_t a = part(fractions[0]);
  const std::size_t b = part(fractions[1]);
  if (a == 0 || b == 0 || a + b >= n) throw EmptyInputError("chrono_split: a split would be empty");
  return {crop(series, 0, 0, a), crop(series, 0, a, b), crop(series, 0, a + b, n - a - b)};
}

SeriesDataset windowize(const Tensor& series, std::size_t i, std::size_t o, std::size_t stride) {
  const auto [n, k] = layout_of(series, "windowize");
  if (i == 0 || o == 0 || stride == 0) throw ParameterError("windowize: i, o and stride must be positive");
  if (n < i + o)
    throw ShapeError("windowize: series of length " + std::to_string(n) + " is shorter than i + o = " +
                     std::to_string(i + o));
  const std::size_t m = (n - i - o) / stride + 1;
  SeriesDataset d{Tensor({m, i, k}), Tensor({m, o, k}), {}};
  const real* src = series.raw();
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t s = j * stride;
    std::copy(src + s * k, src + (s + i) * k, d.inputs.raw() + j * i * k);
    std::copy(src + (s + i) * k, src + (s + i + o) * k, d.targets.raw() + j * o * k);
  }
  d.note = "windowize i=" + std::to_string(i) + " o=" + std::to_string(o) + " stride=" + std::to_string(stride);
  return d;
}

Tensor pad_or_truncate(const Tensor& segment, std::size_t target_len) {
  if (target_len == 0) throw ParameterError("pad_or_truncate: target length must be positive");
  if (segment.rank() == 0) throw ShapeError("pad_or_truncate: scalar input");
  const std::size_t n = segment.shape()[0];
  if (n >= target_len) return n == target_len ? segment : crop(segment, 0, 0, target_len);
  Tensor out(with_length(segment, target_len));
  std::copy(segment.data().begin(), segment.data().end(), out.raw());
  return out;
}

// ---- anomaly scoring --------------------------------------------------------

std::vector<real> anomaly_scores(const Tensor& forecast, const Tensor& target) {
  if (forecast.shape() != target.shape() || forecast.rank() == 0)
    throw ShapeError("anomaly_scores: forecast " + to_string(forecast.shape()) + " vs target " +
                     to_string(target.shape()));
  const std::size_t n = forecast.shape()[0];
  const std::size_t per = n == 0 ? 0 : forecast.size() / n;
  std::vector<real> scores(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    real acc = 0;
    for (std::size_t e = 0; e < per; ++e) acc += std::abs(forecast.raw()[j * per + e] - target.raw()[j * per + e]);
    scores[j] = acc / static_cast<real>(per);
  }
  return scores;
}

std::vector<real> top_k_labels(std::span<const real> scores, std::size_t k) {
  if (k > scores.size())
    throw ParameterError("top_k_labels: k = " + std::to_string(k) + " exceeds " + std::to_string(scores.size()) +
                         " samples");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<real> labels(scores.size(), 0);
  for (std::size_t r = 0; r < k; ++r) labels[order[r]] = 1;
  return labels;
}

HarnessResult anomaly_harness(Model& model, const SeriesDataset& windows, std::span<const real> true_labels,
                              std::size_t k) {
  if (true_labels.size() != windows.size()) throw ShapeError("anomaly_harness: one label per window required");
  if (k > windows.size()) throw ParameterError("anomaly_harness: k exceeds the number of windows");
  HarnessResult r;
  r.scores = anomaly_scores(train::predict(model, {windows.inputs}), windows.targets);
  r.predicted = top_k_labels(r.scores, k);
  r.auc = train::auc(r.scores, true_labels);
  return r;
}

// ---- synthetic data ---------------------------------------------------------

Tensor sine_mix(const std::vector<double>& freqs, double noise, std::size_t length, std::uint64_t seed) {
  if (freqs.empty() || length == 0) throw ParameterError("sine_mix: need frequencies and a positive length");
  if (noise < 0) throw ParameterError("sine_mix: noise must be non-negative");
  Rng rng(seed);
  std::vector<double> phase(freqs.size());
  for (double& p : phase) p = rng.uniform(0, 2 * std::numbers::pi);
  Tensor s({length, 1});
  for (std::size_t t = 0; t < length; ++t) {
    double v = 0;
    for (std::size_t f = 0; f < freqs.size(); ++f)
      v += std::sin(2 * std::numbers::pi * freqs[f] * static_cast<double>(t) + phase[f]);
    if (noise > 0) v += rng.normal(0, noise);
    s(t, 0) = static_cast<real>(v);
  }
  return s;
}

SeriesDataset labeled_segments(std::size_t classes, std::size_t length, std::size_t count, std::uint64_t seed) {
  if (classes < 2 || length == 0 || count == 0) throw ParameterError("labeled_segments: bad dimensions");
  const std::size_t n = classes * count;
  Rng rng(seed);
  SeriesDataset d{Tensor({n, length, 1}), Tensor({n, classes}), {}};
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t c = j % classes;
    const double cycles = 2.0 + 3.0 * static_cast<double>(c);
    const double phase = rng.uniform(0, 2 * std::numbers::pi);
    const double amp = rng.uniform(0.7, 1.3);
    for (std::size_t t = 0; t < length; ++t) {
      const double x = 2 * std::numbers::pi * cycles * static_cast<double>(t) / static_cast<double>(length);
      d.inputs(j, t, 0) = static_cast<real>(amp * std::sin(x + phase) + rng.normal(0, 0.1));
    }
    d.targets(j, c) = 1;
  }
  d.note = "labeled_segments classes=" + std::to_string(classes) + " length=" + std::to_string(length);
  return d;
}

Traffic traffic_with_anomalies(std::size_t features, std::size_t length, double anomaly_rate, std::uint64_t seed) {
  if (features == 0 || length == 0) throw ParameterError("traffic_with_anomalies: bad dimensions");
  if (!(anomaly_rate >= 0 && anomaly_rate < 1)) throw ParameterError("traffic_with_anomalies: rate must be in [0, 1)");
  Rng rng(seed);
  std::vector<double> level(features), amp(features), period(features), phase(features);
  for (std::size_t f = 0; f < features; ++f) {
    level[f] = rng.uniform(-0.5, 0.5);
    amp[f] = rng.uniform(0.5, 1.0);
    period[f] = 16.0 * static_cast<double>(1 + rng.below(4));
    phase[f] = rng.uniform(0, 2 * std::numbers::pi);
  }
  Traffic tr{Tensor({length, features}), std::vector<real>(length, 0)};
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t f = 0; f < features; ++f)
      tr.series(t, f) = static_cast<real>(
          level[f] + amp[f] * std::sin(2 * std::numbers::pi * static_cast<double>(t) / period[f] + phase[f]) +
          rng.normal(0, 0.05));

  // Partial Fisher-Yates picks the anomalous rows without replacement.
  const auto count = static_cast<std::size_t>(std::llround(anomaly_rate * static_cast<double>(length)));
  std::vector<std::size_t> rows(length);
  std::iota(rows.begin(), rows.end(), 0);
  for (std::size_t r = 0; r < count; ++r) std::swap(rows[r], rows[r + rng.below(length - r)]);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t t = rows[r];
    tr.labels[t] = 1;
    const bool level_shift = rng.below(2) == 0;
    for (std::size_t f = 0; f < features; ++f) {
      if (level_shift)
        tr.series(t, f) += static_cast<real>(rng.uniform(2, 4));
      else
        tr.series(t, f) = static_cast<real>(-2 * tr.series(t, f) + rng.normal(0, 1));
    }
  }
  return tr;
}

std::vector<real> window_labels(std::span<const real> row_labels, std::size_t i, std::size_t o, std::size_t stride) {
  if (i == 0 || o == 0 || stride == 0) throw ParameterError("window_labels: i, o and stride must be positive");
  if (row_labels.size() < i + o) throw ShapeError("window_labels: too few rows");
  const std::size_t m = (row_labels.size() - i - o) / stride + 1;
  std::vector<real> out(m, 0);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t t = j * stride + i; t < j * stride + i + o; ++t)
      if (row_labels[t] != 0) out[j] = 1;
  return out;
}

// ---- files ------------------------------------------------------------------

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

Tensor load_csv(const std::filesystem::path& path, bool has_header, const std::vector<std::string>& columns) {
  if (!columns.empty() && !has_header) throw ParameterError("load_csv: selecting columns by name needs a header");
  std::ifstream in(path);
  if (!in) throw FormatError("load_csv: cannot open " + path.string());

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::size_t> pick;
  std::size_t width = 0;
  if (has_header) {
    if (!std::getline(in, line)) throw FormatError("load_csv: " + path.string() + " is empty");
    ++line_no;
    std::vector<std::string> names = split_fields(line);
    for (auto& nm : names) nm = trim(nm);
    width = names.size();
    for (const std::string& want : columns) {
      const auto it = std::find(names.begin(), names.end(), want);
      if (it == names.end()) throw FormatError("load_csv: no column named '" + want + "' in " + path.string());
      pick.push_back(static_cast<std::size_t>(it - names.begin()));
    }
  }

  std::vector<real> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      throw FormatError("load_csv: line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                        " fields, expected " + std::to_string(width));
    if (pick.empty()) {
      pick.resize(width);
      std::iota(pick.begin(), pick.end(), 0);
    }
    for (std::size_t idx : pick) {
      const std::string f = trim(fields[idx]);
      double v = 0;
      const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || end != f.data() + f.size() || f.empty())
        throw FormatError("load_csv: line " + std::to_string(line_no) + ": '" + f + "' is not a number");
      values.push_back(static_cast<real>(v));
    }
    ++rows;
  }
  if (rows == 0) throw FormatError("load_csv: " + path.string() + " has no data rows");
  return make({rows, pick.size()}, std::move(values));
}

void save_csv(const std::filesystem::path& path, const Tensor& table, const std::vector<std::string>& header) {
  const auto [n, k] = layout_of(table, "save_csv");
  if (!header.empty() && header.size() != k) throw ShapeError("save_csv: header width does not match columns");
  std::ofstream out(path);
  if (!out) throw FormatError("save_csv: cannot write " + path.string());
  out.precision(std::numeric_limits<real>::max_digits10);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  if (!header.empty()) out << '\n';
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < k; ++c) out << (c ? "," : "") << table.raw()[t * k + c];
    out << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const SeriesDataset& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("save_dataset: cannot write " + path.string());
  write_tensors(out, dataset_magic, {{"inputs", d.inputs}, {"targets", d.targets}});
}

SeriesDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("load_dataset: cannot open " + path.string());
  std::vector<NamedTensor> entries = read_tensors(in, dataset_magic);
  if (entries.size() != 2 || entries[0].name != "inputs" || entries[1].name != "targets")
    throw FormatError("load_dataset: expected inputs and targets in " + path.string());
  SeriesDataset d{std::move(entries[0].value), std::move(entries[1].value), "cache " + path.string()};
  if (d.inputs.rank() == 0 || d.targets.rank() == 0 || d.inputs.shape()[0] != d.targets.shape()[0])
    throw FormatError("load_dataset: inputs and targets disagree on sample count");
  return d;
}

}  // namespace tsdl::data
