#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tsdl/graph.hpp"
#include "tsdl/train.hpp"

namespace tsdl::data {

/// Windowed or segmented samples along axis 0.
struct SeriesDataset {
  Tensor inputs;   // [n, time, ch]
  Tensor targets;  // [n, horizon, ch] | [n, classes] | [n, steps, features]
  std::string note;

  std::size_t size() const;
  train::Dataset as_training() const { return {{inputs}, targets}; }
};

/// Rows [begin, end) of both inputs and targets.
SeriesDataset slice(const SeriesDataset& d, std::size_t begin, std::size_t end);

// ---- preprocessing ----------------------------------------------------------

/// Trailing moving average along axis 0 of a [n] or [n, k] series. Step t
/// becomes the mean of steps max(0, t-w+1)..t; repeated `iterations` times.
Tensor smooth(const Tensor& series, std::size_t w, std::size_t iterations = 1);

struct Moments {
  std::vector<real> mean;
  std::vector<real> stdev;  // sample (n - 1) standard deviation
};

/// Per-channel moments along axis 0. Throws DegenerateError on a channel with
/// zero variance or fewer than two steps.
Moments moments(const Tensor& series);
Tensor standardize(const Tensor& series, const Moments& m);
Tensor zscore(const Tensor& segment);

struct Range {
  std::vector<real> lo;
  std::vector<real> hi;
};

/// Per-channel extremes along axis 0; a flat channel raises DegenerateError.
Range value_range(const Tensor& series);
/// Maps [lo, hi] of each channel onto [0, 1].
Tensor rescale(const Tensor& series, const Range& r);

struct Split {
  Tensor train;
  Tensor val;
  Tensor test;
};

/// Contiguous split along axis 0. train and val take floor(n * fraction),
/// test takes the remainder.
Split chrono_split(const Tensor& series, std::array<double, 3> fractions = {0.70, 0.20, 0.10});

/// Input window j is steps [j*stride, j*stride+i), its target the following o steps.
SeriesDataset windowize(const Tensor& series, std::size_t i, std::size_t o, std::size_t stride = 1);

/// Keeps the first `target_len` steps or appends zero steps up to it.
Tensor pad_or_truncate(const Tensor& segment, std::size_t target_len = 1000);

// ---- anomaly scoring --------------------------------------------------------

/// Mean absolute error per sample over all non-batch axes.
std::vector<real> anomaly_scores(const Tensor& forecast, const Tensor& target);

/// Exactly k ones at the k largest scores; ties go to the earlier index.
std::vector<real> top_k_labels(std::span<const real> scores, std::size_t k);

struct HarnessResult {
  std::vector<real> scores;
  std::vector<real> predicted;
  real auc = 0;
};

/// Scores every window by its forecast error, labels the top k and computes
/// AUC of the raw scores against `true_labels`.
HarnessResult anomaly_harness(Model& model, const SeriesDataset& windows, std::span<const real> true_labels,
                              std::size_t k);

// ---- synthetic data ---------------------------------------------------------

/// Sum of unit sines with seeded phases, frequencies in cycles per step, plus
/// Gaussian noise.
/// Returns [length, 1].
Tensor sine_mix(const std::vector<double>& freqs, double noise, std::size_t length, std::uint64_t seed);

/// `count` segments per class, interleaved by class (sample j has class
/// j % classes). Class c is a sine with 2 + 3c cycles per segment, random phase
/// and amplitude, plus noise. Targets are one-hot.
SeriesDataset labeled_segments(std::size_t classes, std::size_t length, std::size_t count, std::uint64_t seed);

struct Traffic {
  Tensor series;              // [length, features]
  std::vector<real> labels;   // 1 at injected anomalous rows
};

/// Periodic multi-feature traffic with round(rate * length) anomalous rows at
/// seeded positions; each carries a level shift or a shape distortion.
Traffic traffic_with_anomalies(std::size_t features, std::size_t length, double anomaly_rate, std::uint64_t seed);

/// 1 for window targets that contain an anomalous row.
std::vector<real> window_labels(std::span<const real> row_labels, std::size_t i, std::size_t o,
                                std::size_t stride = 1);

// ---- files ------------------------------------------------------------------

/// Comma-separated numeric columns. `columns` selects by header name (needs a
/// header); empty keeps every column. Returns [rows, columns].
Tensor load_csv(const std::filesystem::path& path, bool has_header, const std::vector<std::string>& columns = {});
void save_csv(const std::filesystem::path& path, const Tensor& table, const std::vector<std::string>& header = {});

void save_dataset(const std::filesystem::path& path, const SeriesDataset& d);
SeriesDataset load_dataset(const std::filesystem::path& path);

}  // namespace tsdl::data
