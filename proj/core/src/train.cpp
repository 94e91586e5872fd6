#include "tsdl/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "tsdl/error.hpp"
#include "tsdl/rng.hpp"

namespace tsdl::train {

namespace {

constexpr real ce_epsilon = real(1e-12);

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": prediction " + tsdl::to_string(a.shape()) + " vs target " + tsdl::to_string(b.shape()));
  }
}

std::size_t rows_of(const Tensor& t) { return t.rank() == 0 ? 1 : t.extent(0); }

}  // namespace

// ---- losses -----------------------------------------------------------------

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::mae: return "mae";
    case LossKind::mse: return "mse";
    case LossKind::categorical_crossentropy: return "categorical_crossentropy";
  }
  return "?";
}

LossKind parse_loss(const std::string& name) {
  if (name == "mae") return LossKind::mae;
  if (name == "mse") return LossKind::mse;
  if (name == "categorical_crossentropy" || name == "cce") return LossKind::categorical_crossentropy;
  throw ParameterError("unknown loss '" + name + "'");
}

LossResult loss(LossKind kind, const Tensor& p, const Tensor& t) {
  require_same_shape(p, t, "loss");
  LossResult r;
  r.grad = Tensor(p.shape());
  const auto pd = p.data();
  const auto td = t.data();
  auto g = r.grad.data();
  const real n = static_cast<real>(p.size());
  real acc = 0;
  switch (kind) {
    case LossKind::mae:
      for (std::size_t i = 0; i < pd.size(); ++i) {
        const real d = pd[i] - td[i];
        acc += std::abs(d);
        g[i] = (d > 0 ? real(1) : d < 0 ? real(-1) : real(0)) / n;
      }
      r.value = acc / n;
      break;
    case LossKind::mse:
      for (std::size_t i = 0; i < pd.size(); ++i) {
        const real d = pd[i] - td[i];
        acc += d * d;
        g[i] = 2 * d / n;
      }
      r.value = acc / n;
      break;
    case LossKind::categorical_crossentropy: {
      if (p.rank() == 0) throw ShapeError("cross-entropy needs class rows");
      const std::size_t c = p.shape().back();
      const std::size_t rows = p.size() / c;
      for (std::size_t i = 0; i < rows; ++i) {
        real sum = 0;
        for (std::size_t j = 0; j < c; ++j) sum += pd[i * c + j];
        if (std::abs(sum - 1) > real(1e-6)) {
          throw ContractError("cross-entropy prediction row " + std::to_string(i) + " sums to " + std::to_string(sum));
        }
        for (std::size_t j = 0; j < c; ++j) {
          const std::size_t k = i * c + j;
          acc -= td[k] * std::log(pd[k] + ce_epsilon);
          g[k] = -td[k] / (pd[k] + ce_epsilon) / static_cast<real>(rows);
        }
      }
      r.value = acc / static_cast<real>(rows);
      break;
    }
  }
  return r;
}

// ---- Adam -------------------------------------------------------------------

void adam_update(Tensor& value, const Tensor& grad, AdamMoments& s, std::uint64_t t, const AdamConfig& c) {
  require_same_shape(value, grad, "adam");
  if (s.m.shape() != value.shape()) s.m = Tensor(value.shape());
  if (s.v.shape() != value.shape()) s.v = Tensor(value.shape());
  const real c1 = 1 - std::pow(c.beta1, static_cast<real>(t));
  const real c2 = 1 - std::pow(c.beta2, static_cast<real>(t));
  auto w = value.data();
  auto m = s.m.data();
  auto v = s.v.data();
  const auto g = grad.data();
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1 - c.beta2) * g[i] * g[i];
    const real mhat = m[i] / c1;
    const real vhat = v[i] / c2;
    w[i] -= c.lr * mhat / (std::sqrt(vhat) + c.epsilon);
  }
}

Adam::Adam(AdamConfig config) : config_(config) {}

void Adam::step(const std::vector<ParamRef>& params) {
  ++t_;
  for (const ParamRef& ref : params) {
    if (ref.param->frozen) continue;
    adam_update(ref.param->value, ref.param->grad, state_[ref.name], t_, config_);
  }
}

const AdamMoments& Adam::moments(const std::string& name) const {
  auto it = state_.find(name);
  if (it == state_.end()) throw ParameterError("no optimizer state for '" + name + "'");
  return it->second;
}

real clip_global_norm(const std::vector<ParamRef>& params, real max_norm) {
  real sq = 0;
  for (const ParamRef& ref : params)
    for (real g : ref.param->grad.data()) sq += g * g;
  const real norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const real s = max_norm / norm;
    for (const ParamRef& ref : params)
      for (real& g : ref.param->grad.data()) g *= s;
  }
  return norm;
}

// ---- early stopping ---------------------------------------------------------

EarlyStopping::EarlyStopping(EarlyStoppingConfig config) : config_(config) {
  if (!(config.min_delta >= 0)) throw ParameterError("min_delta must be non-negative");
}

bool EarlyStopping::update(std::size_t epoch, real val_loss) {
  improved_ = val_loss < best_ - config_.min_delta;
  if (improved_) {
    best_ = val_loss;
    best_epoch_ = epoch;
    wait_ = 0;
    return false;
  }
  ++wait_;
  return wait_ >= config_.patience;
}

// ---- fit ----------------------------------------------------------------

std::size_t Dataset::size() const { return targets.rank() == 0 ? 0 : targets.extent(0); }

namespace {

void check_dataset(const Model& model, const Dataset& d, const char* what) {
  if (d.inputs.empty() || d.size() == 0) throw EmptyInputError(std::string(what) + " set is empty");
  if (d.inputs.size() != 1 && d.inputs.size() != model.inputs().size()) {
    throw ShapeError(std::string(what) + " set has " + std::to_string(d.inputs.size()) + " input arrays, model takes " +
                     std::to_string(model.inputs().size()));
  }
  for (const Tensor& x : d.inputs) {
    if (rows_of(x) != d.size()) {
      throw ShapeError(std::string(what) + " set has " + std::to_string(rows_of(x)) + " inputs but " +
                       std::to_string(d.size()) + " targets");
    }
  }
}

std::vector<Tensor> gather(const Model& model, const std::vector<Tensor>& inputs, std::span<const std::size_t> idx) {
  std::vector<Tensor> out;
  if (inputs.size() == 1) {
    const Tensor x = take_rows(inputs[0], idx);
    out.assign(model.inputs().size(), x);
  } else {
    for (const Tensor& in : inputs) out.push_back(take_rows(in, idx));
  }
  return out;
}

std::vector<Tensor> snapshot(Model& model) {
  std::vector<Tensor> s;
  for (ParamRef& p : model.parameters()) s.push_back(p.param->value);
  for (BufferRef& b : model.buffers()) s.push_back(*b.buffer);
  return s;
}

void restore(Model& model, const std::vector<Tensor>& s) {
  std::size_t i = 0;
  for (ParamRef& p : model.parameters()) p.param->value = s[i++];
  for (BufferRef& b : model.buffers()) *b.buffer = s[i++];
}

class ModeGuard {
 public:
  ModeGuard(Model& m, Mode mode) : m_(m), saved_(m.mode()) { m.set_mode(mode); }
  ~ModeGuard() { m_.set_mode(saved_); }
  ModeGuard(const ModeGuard&) = delete;
  ModeGuard& operator=(const ModeGuard&) = delete;

 private:
  Model& m_;
  Mode saved_;
};

}  // namespace

void validate(const TrainConfig& c) {
  if (c.batch_size == 0) throw ParameterError("batch_size must be >= 1");
  if (c.max_epochs == 0) throw ParameterError("max_epochs must be >= 1");
  if (c.early_stopping && !(c.early_stopping->min_delta >= 0)) throw ParameterError("min_delta must be non-negative");
  if (!(c.adam.lr > 0)) throw ParameterError("learning rate must be positive");
  if (!(c.adam.beta1 >= 0 && c.adam.beta1 < 1) || !(c.adam.beta2 >= 0 && c.adam.beta2 < 1)) {
    throw ParameterError("Adam betas must lie in [0, 1)");
  }
  if (!(c.adam.epsilon > 0)) throw ParameterError("Adam epsilon must be positive");
  if (!(c.clip_norm >= 0)) throw ParameterError("clip_norm must be non-negative");
}

History fit(Model& model, const Dataset& train, const Dataset& val, const TrainConfig& config) {
  validate(config);
  check_dataset(model, train, "training");
  check_dataset(model, val, "validation");

  Adam opt(config.adam);
  EarlyStopping stopper(config.early_stopping.value_or(
      EarlyStoppingConfig{std::numeric_limits<std::size_t>::max(), 0}));
  History h;
  std::vector<Tensor> best = snapshot(model);
  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, "shuffle/" + std::to_string(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    real total = 0;
    {
      ModeGuard guard(model, Mode::train);
      for (std::size_t start = 0; start < n; start += config.batch_size) {
        const std::size_t end = std::min(n, start + config.batch_size);
        const std::span<const std::size_t> idx(order.data() + start, end - start);
        const Tensor y = model.forward(gather(model, train.inputs, idx));
        const LossResult l = loss(config.loss, y, take_rows(train.targets, idx));
        if (!std::isfinite(l.value)) {
          throw DivergedError(epoch, "training loss became non-finite in epoch " + std::to_string(epoch));
        }
        model.zero_grad();
        model.backward(l.grad);
        std::vector<ParamRef> params = model.parameters();
        if (config.clip_norm > 0) clip_global_norm(params, config.clip_norm);
        opt.step(params);
        total += l.value * static_cast<real>(end - start);
      }
    }
    EpochRecord rec{epoch, total / static_cast<real>(n), evaluate_loss(model, val, config.loss, config.batch_size),
                    config.phase};
    if (!std::isfinite(rec.val_loss)) {
      throw DivergedError(epoch, "validation loss became non-finite in epoch " + std::to_string(epoch));
    }
    h.epochs.push_back(rec);
    if (config.on_epoch) config.on_epoch(rec);
    const bool stop = stopper.update(epoch, rec.val_loss);
    if (stopper.improved()) best = snapshot(model);
    if (stop) {
      h.stopped_early = true;
      break;
    }
  }
  restore(model, best);
  h.best_epoch = stopper.best_epoch();
  h.best_val_loss = stopper.best_loss();
  return h;
}

Tensor predict(Model& model, const std::vector<Tensor>& inputs, std::size_t batch_size) {
  if (inputs.empty() || rows_of(inputs[0]) == 0) throw EmptyInputError("nothing to predict");
  if (batch_size == 0) throw ParameterError("batch_size must be >= 1");
  ModeGuard guard(model, Mode::eval);
  const std::size_t n = rows_of(inputs[0]);
  std::vector<std::size_t> idx;
  std::vector<Tensor> parts;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    parts.push_back(model.forward(gather(model, inputs, idx)));
  }
  return parts.size() == 1 ? parts[0] : concat(parts, 0);
}

real evaluate_loss(Model& model, const Dataset& data, LossKind kind, std::size_t batch_size) {
  check_dataset(model, data, "evaluation");
  const Tensor y = predict(model, data.inputs, batch_size);
  return loss(kind, y, data.targets).value;
}

void write_history(std::ostream& out, const History& h) {
  const auto flags = out.flags();
  const auto prec = out.precision(10);
  for (const EpochRecord& e : h.epochs) {
    out << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_loss " << e.val_loss;
    if (!e.phase.empty()) out << " phase " << e.phase;
    out << '\n';
  }
  out.precision(prec);
  out.flags(flags);
}

// ---- metrics ----------------------------------------------------------------

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::accuracy: return "accuracy";
    case MetricKind::mae: return "mae";
    case MetricKind::auc: return "auc";
  }
  return "?";
}

MetricKind parse_metric(const std::string& name) {
  if (name == "accuracy") return MetricKind::accuracy;
  if (name == "mae") return MetricKind::mae;
  if (name == "auc") return MetricKind::auc;
  throw ParameterError("unknown metric '" + name + "'");
}

real accuracy(const Tensor& scores, const Tensor& targets) {
  if (scores.rank() != 2) throw ShapeError("accuracy expects [rows, classes] scores");
  const std::size_t n = scores.extent(0), c = scores.extent(1);
  if (n == 0) throw EmptyInputError("accuracy of no rows");
  const bool one_hot = targets.shape() == scores.shape();
  if (!one_hot && targets.size() != n) throw ShapeError("accuracy targets must be one-hot rows or class ids");
  auto argmax = [c](const real* row) { return static_cast<std::size_t>(std::max_element(row, row + c) - row); };
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t pred = argmax(scores.raw() + i * c);
    const std::size_t truth =
        one_hot ? argmax(targets.raw() + i * c) : static_cast<std::size_t>(std::llround(targets.raw()[i]));
    correct += pred == truth;
  }
  return static_cast<real>(correct) / static_cast<real>(n);
}

real mean_absolute_error(const Tensor& prediction, const Tensor& target) {
  require_same_shape(prediction, target, "mae");
  if (prediction.size() == 0) throw EmptyInputError("mae of nothing");
  return loss(LossKind::mae, prediction, target).value;
}

real auc(std::span<const real> scores, std::span<const real> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc needs one label per score");
  std::size_t pos = 0;
  for (real l : labels) {
    if (l != 0 && l != 1) throw MetricError("auc labels must be 0 or 1");
    pos += l == 1;
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw MetricError("auc is undefined unless both classes are present");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // average 1-based ranks over tie groups
  real rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const real avg = static_cast<real>(i + 1 + j) / 2;
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum += avg;
    i = j;
  }
  const real p = static_cast<real>(pos), q = static_cast<real>(neg);
  return (rank_sum - p * (p + 1) / 2) / (p * q);
}

real evaluate(MetricKind kind, const Tensor& prediction, const Tensor& target) {
  switch (kind) {
    case MetricKind::accuracy: return accuracy(prediction, target);
    case MetricKind::mae: return mean_absolute_error(prediction, target);
    case MetricKind::auc: return auc(prediction.data(), target.data());
  }
  throw ParameterError("unknown metric");
}

// ---- autoencoder pretraining ------------------------------------------------

History two_phase_autoencoder_fit(Model& autoencoder, Model& classifier, const Dataset& train, const Dataset& val,
                                  const TrainConfig& phase1, const TrainConfig& phase2,
                                  std::string_view encoder_prefix) {
  auto reconstruction = [](const Dataset& d) {
    if (d.inputs.empty()) throw EmptyInputError("autoencoder set is empty");
    return Dataset{{d.inputs[0]}, d.inputs[0]};
  };
  TrainConfig c1 = phase1;
  c1.loss = LossKind::mse;
  c1.phase = "phase1";
  History h = fit(autoencoder, reconstruction(train), reconstruction(val), c1);

  auto is_encoder = [&](const std::string& name) { return name.rfind(encoder_prefix, 0) == 0; };
  std::size_t copied = 0;
  for (ParamRef& p : autoencoder.parameters()) {
    if (!is_encoder(p.name)) continue;
    Parameter& dst = classifier.parameter(p.name);
    if (dst.value.shape() != p.param->value.shape()) throw ShapeError("encoder parameter '" + p.name + "' differs");
    dst.value = p.param->value;
    ++copied;
  }
  if (copied == 0) throw GraphError("no parameters start with '" + std::string(encoder_prefix) + "'");
  std::vector<BufferRef> dst_buffers = classifier.buffers();
  for (BufferRef& b : autoencoder.buffers()) {
    if (!is_encoder(b.name)) continue;
    auto it = std::find_if(dst_buffers.begin(), dst_buffers.end(), [&](const BufferRef& d) { return d.name == b.name; });
    if (it == dst_buffers.end()) throw GraphError("classifier lacks buffer '" + b.name + "'");
    *it->buffer = *b.buffer;
  }
  for (const NodeInfo& info : classifier.node_info())
    if (is_encoder(info.name)) classifier.freeze(info.name);

  TrainConfig c2 = phase2;
  c2.phase = "phase2";
  History h2 = fit(classifier, train, val, c2);
  h.epochs.insert(h.epochs.end(), h2.epochs.begin(), h2.epochs.end());
  h.best_epoch = h2.best_epoch;
  h.best_val_loss = h2.best_val_loss;
  h.stopped_early = h2.stopped_early;
  return h;
}

}  // namespace tsdl::train
