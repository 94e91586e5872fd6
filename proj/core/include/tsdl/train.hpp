#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsdl/graph.hpp"

namespace tsdl::train {

// ---- losses -----------------------------------------------------------------

enum class LossKind { mae, mse, categorical_crossentropy };

std::string_view to_string(LossKind kind);
LossKind parse_loss(const std::string& name);

struct LossResult {
  real value = 0;
  Tensor grad;  // dL/dprediction
};

/// mae and mse average over every element; cross-entropy averages
/// -sum(t * log(p + 1e-12)) over rows of the last axis and requires each
/// prediction row to sum to 1 within 1e-6.
LossResult loss(LossKind kind, const Tensor& prediction, const Tensor& target);

// ---- Adam -------------------------------------------------------------------

struct AdamConfig {
  real lr = real(1e-3);
  real beta1 = real(0.9);
  real beta2 = real(0.999);
  real epsilon = real(1e-8);
};

struct AdamMoments {
  Tensor m;
  Tensor v;
};

/// One bias-corrected update of `value` at step t (1-based).
void adam_update(Tensor& value, const Tensor& grad, AdamMoments& moments, std::uint64_t t, const AdamConfig& config);

class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  /// Advances the step counter once and updates every non-frozen parameter.
  void step(const std::vector<ParamRef>& params);

  std::uint64_t steps() const { return t_; }
  const AdamMoments& moments(const std::string& name) const;
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::map<std::string, AdamMoments> state_;
};

/// Scales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
real clip_global_norm(const std::vector<ParamRef>& params, real max_norm);

// ---- early stopping ---------------------------------------------------------

struct EarlyStoppingConfig {
  std::size_t patience = 2;
  real min_delta = 0;
};

/// An epoch improves when val < best - min_delta. Training stops once
/// `patience` consecutive epochs fail to improve.
class EarlyStopping {
 public:
  explicit EarlyStopping(EarlyStoppingConfig config);

  /// Records epoch `epoch`'s validation loss; true means stop now.
  bool update(std::size_t epoch, real val_loss);

  bool improved() const { return improved_; }
  std::size_t best_epoch() const { return best_epoch_; }
  real best_loss() const { return best_; }
  std::size_t wait() const { return wait_; }

 private:
  EarlyStoppingConfig config_;
  real best_ = std::numeric_limits<real>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t wait_ = 0;
  bool improved_ = false;
};

// ---- fit ----------------------------------------------------------------

/// Samples along axis 0. `inputs` holds one tensor per model input; a single
/// tensor is fed to every input of a multi-input model.
struct Dataset {
  std::vector<Tensor> inputs;
  Tensor targets;

  std::size_t size() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  real train_loss = 0;
  real val_loss = 0;
  std::string phase;
};

struct History {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  real best_val_loss = std::numeric_limits<real>::infinity();
  bool stopped_early = false;
};

struct TrainConfig {
  LossKind loss = LossKind::mse;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 150;
  std::optional<EarlyStoppingConfig> early_stopping = EarlyStoppingConfig{};
  AdamConfig adam;
  std::uint64_t seed = 0;
  real clip_norm = 0;  // 0 disables clipping
  std::string phase;
  std::function<void(const EpochRecord&)> on_epoch;
};

void validate(const TrainConfig& config);

/// Mini-batch Adam training with per-epoch seeded shuffling and a partial
/// final batch. Restores the best-validation weights before returning.
/// Throws DivergedError when a loss turns non-finite.
History fit(Model& model, const Dataset& train, const Dataset& val, const TrainConfig& config);

/// Eval-mode forward in batches, concatenated along axis 0.
Tensor predict(Model& model, const std::vector<Tensor>& inputs, std::size_t batch_size = 256);

/// Eval-mode mean loss over `data`.
real evaluate_loss(Model& model, const Dataset& data, LossKind kind, std::size_t batch_size = 256);

/// Line per epoch: "epoch <i> train_loss <x> val_loss <y>" plus " phase <p>" when labelled.
void write_history(std::ostream& out, const History& history);

// ---- metrics ----------------------------------------------------------------

enum class MetricKind { accuracy, mae, auc };

std::string_view to_string(MetricKind kind);
MetricKind parse_metric(const std::string& name);

/// Fraction of rows whose argmax matches; targets are one-hot rows or class ids.
real accuracy(const Tensor& scores, const Tensor& targets);
real mean_absolute_error(const Tensor& prediction, const Tensor& target);
/// Mann-Whitney AUC; ties count one half. Labels are 0/1.
real auc(std::span<const real> scores, std::span<const real> labels);

real evaluate(MetricKind kind, const Tensor& prediction, const Tensor& target);

// ---- autoencoder pretraining ------------------------------------------------

/// Phase 1 trains `autoencoder` to reconstruct the inputs (mse). Phase 2
/// copies every parameter and buffer whose node name starts with
/// `encoder_prefix` into `classifier`, freezes those nodes and fits the
/// classifier on `train`. History phases are labelled "phase1" / "phase2".
History two_phase_autoencoder_fit(Model& autoencoder, Model& classifier, const Dataset& train, const Dataset& val,
                                  const TrainConfig& phase1, const TrainConfig& phase2,
                                  std::string_view encoder_prefix = "encoder_");

}  // namespace tsdl::train
