#include "app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "tsdl/error.hpp"
#include "tsdl/serialize.hpp"

#ifndef TSDL_VERSION
#define TSDL_VERSION "unknown"
#endif

namespace tsdl::app {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const std::string v = trim(value);
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || end != v.data() + v.size())
    throw ParameterError("'" + key + "' expects a number, got '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ParameterError("'" + key + "' expects true or false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

std::string format_real(double v) {
  std::ostringstream s;
  s.precision(std::numeric_limits<double>::max_digits10);
  s << v;
  return s.str();
}

std::string version_line() {
  std::ostringstream s;
#if defined(__clang__)
  s << "clang " << __clang_major__ << "." << __clang_minor__ << "." << __clang_patchlevel__;
#elif defined(__GNUC__)
  s << "gcc " << __GNUC__ << "." << __GNUC_MINOR__ << "." << __GNUC_PATCHLEVEL__;
#else
  s << "unknown compiler";
#endif
  return s.str();
}

Tensor one_hot(const std::vector<std::size_t>& ids, std::size_t classes) {
  Tensor t({ids.size(), classes});
  for (std::size_t j = 0; j < ids.size(); ++j) t(j, ids[j]) = 1;
  return t;
}

// Samples j of a [n, ...] dataset assembled into splits by the 70/20/10 rule.
std::array<data::SeriesDataset, 3> split_samples(const data::SeriesDataset& all) {
  Tensor index({all.size()});
  const data::Split s = data::chrono_split(index);
  const std::size_t a = s.train.size(), b = s.val.size();
  return {data::slice(all, 0, a), data::slice(all, a, a + b), data::slice(all, a + b, all.size())};
}

// ---- task pipelines -----------------------------------------------------

TaskData prepare_forecast(const RunConfig& c) {
  Tensor series;
  std::string source;
  if (!c.csv.empty()) {
    series = data::load_csv(c.csv, c.header, c.columns);
    source = "csv " + c.csv;
  } else {
    // Two sines with periods 400 and 150 steps survive the default smoothing.
    series = data::sine_mix({1.0 / 400, 1.0 / 150}, c.noise, c.length, c.seed);
    source = "synth sine";
  }
  if (c.smooth_iterations > 0 && c.smooth_window > 1) series = data::smooth(series, c.smooth_window, c.smooth_iterations);
  const data::Split s = data::chrono_split(series);
  const data::Range r = data::value_range(s.train);
  const std::size_t k = series.rank() == 1 ? 1 : series.shape()[1];
  TaskData d;
  d.train = data::windowize(data::rescale(s.train, r), c.window, c.horizon, c.stride);
  d.val = data::windowize(data::rescale(s.val, r), c.window, c.horizon, c.stride);
  d.test = data::windowize(data::rescale(s.test, r), c.window, c.horizon, c.stride);
  d.input_shape = {c.window, k};
  d.top = zoo::forecast_top(c.horizon, k);
  d.note = source + ", smoothed w=" + std::to_string(c.smooth_window) + " x" + std::to_string(c.smooth_iterations) +
           ", min-max scaled on train";
  return d;
}

TaskData prepare_classify(const RunConfig& c) {
  data::SeriesDataset all;
  std::size_t classes = c.classes;
  if (!c.csv.empty()) {
    // One segment per row: class id, then the samples.
    const Tensor table = data::load_csv(c.csv, c.header);
    const std::size_t n = table.shape()[0], m = table.shape()[1];
    if (m < 2) throw FormatError("classify csv needs a label column and at least one sample column");
    std::vector<std::size_t> ids(n);
    Tensor x({n, m - 1, 1});
    for (std::size_t j = 0; j < n; ++j) {
      const real label = table(j, 0);
      if (label < 0 || label != std::floor(label)) throw FormatError("row " + std::to_string(j + 1) + ": bad class id");
      ids[j] = static_cast<std::size_t>(label);
      for (std::size_t t = 1; t < m; ++t) x(j, t - 1, 0) = table(j, t);
    }
    classes = *std::max_element(ids.begin(), ids.end()) + 1;
    all = {x, one_hot(ids, classes), "csv " + c.csv};
  } else {
    all = data::labeled_segments(c.classes, c.segment_length, c.per_class, c.seed);
  }
  const std::size_t n = all.size(), len = all.inputs.shape()[1];
  Tensor x({n, c.segment_length, 1});
  for (std::size_t j = 0; j < n; ++j) {
    Tensor seg({len, 1});
    std::copy(all.inputs.raw() + j * len, all.inputs.raw() + (j + 1) * len, seg.raw());
    seg = data::zscore(data::pad_or_truncate(seg, c.segment_length));
    std::copy(seg.data().begin(), seg.data().end(), x.raw() + j * c.segment_length);
  }
  all.inputs = std::move(x);
  auto [tr, va, te] = split_samples(all);
  TaskData d{std::move(tr), std::move(va), std::move(te), {}, {c.segment_length, 1}, zoo::classify_top(classes), {}};
  d.note = all.note + ", padded or truncated to " + std::to_string(c.segment_length) + ", z-scored per segment";
  return d;
}

TaskData prepare_anomaly(const RunConfig& c) {
  Tensor series;
  std::vector<real> labels;
  Tensor clean;
  std::string source;
  if (!c.csv.empty()) {
    // Feature columns plus a 0/1 column named "label".
    const Tensor table = data::load_csv(c.csv, true);
    std::ifstream in(c.csv);
    std::string head;
    std::getline(in, head);
    std::vector<std::string> names = split_list(head);
    const auto it = std::find(names.begin(), names.end(), "label");
    if (it == names.end()) throw FormatError("anomaly csv needs a column named 'label'");
    const std::size_t lab = static_cast<std::size_t>(it - names.begin());
    std::vector<std::string> feats;
    for (const std::string& nm : names)
      if (nm != "label") feats.push_back(nm);
    series = data::load_csv(c.csv, true, c.columns.empty() ? feats : c.columns);
    for (std::size_t t = 0; t < table.shape()[0]; ++t) labels.push_back(table(t, lab) != 0 ? 1 : 0);
    clean = series;
    source = "csv " + c.csv;
  } else {
    const data::Traffic tr = data::traffic_with_anomalies(c.features, c.length, c.anomaly_rate, c.seed);
    series = tr.series;
    labels = tr.labels;
    // Same seed, no injection: the identical normal traffic underneath.
    clean = data::traffic_with_anomalies(c.features, c.length, 0, c.seed).series;
    source = "synth traffic";
  }
  const std::size_t n = series.shape()[0];
  const data::Split s = data::chrono_split(series);
  const data::Split sc = data::chrono_split(clean);
  const std::size_t a = s.train.shape()[0], b = s.val.shape()[0];

  // Normalization and training only see normal rows.
  std::vector<std::size_t> normal_rows;
  for (std::size_t t = 0; t < a; ++t)
    if (labels[t] == 0) normal_rows.push_back(t);
  const data::Moments m = data::moments(take_rows(sc.train, normal_rows));

  const auto normal_windows = [&](const Tensor& part, std::size_t offset) {
    data::SeriesDataset w = data::windowize(data::standardize(part, m), c.window, c.steps, c.stride);
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const std::size_t from = offset + j * c.stride;
      bool clean_rows = true;
      for (std::size_t t = from; t < from + c.window + c.steps; ++t) clean_rows = clean_rows && labels[t] == 0;
      if (clean_rows || c.csv.empty()) keep.push_back(j);
    }
    if (keep.empty()) throw EmptyInputError("no anomaly-free windows to train on");
    return data::SeriesDataset{take_rows(w.inputs, keep), take_rows(w.targets, keep), w.note};
  };

  TaskData d;
  d.train = normal_windows(c.csv.empty() ? sc.train : s.train, 0);
  d.val = normal_windows(c.csv.empty() ? sc.val : s.val, a);
  d.test = data::windowize(data::standardize(s.test, m), c.window, c.steps, c.stride);
  const std::span<const real> test_rows(labels.data() + a + b, n - a - b);
  d.test_labels = data::window_labels(test_rows, c.window, c.steps, c.stride);
  d.input_shape = {c.window, series.shape()[1]};
  d.top = zoo::anomaly_top(c.steps, series.shape()[1]);
  d.note = source + ", trained on normal rows, z-scored on normal train rows";
  return d;
}

// ---- subcommands --------------------------------------------------------

struct Cli {
  std::map<std::string, std::string> flags;   // flag name -> raw value, given flags only
  std::vector<std::string> hyper;
  std::string config_path;
};

RunConfig resolve(const Cli& cli) {
  std::vector<std::pair<std::string, std::string>> file;
  if (!cli.config_path.empty()) file = read_config_file(cli.config_path);
  std::string task;
  for (const auto& [k, v] : file)
    if (k == "task") task = v;
  if (cli.flags.count("task")) task = cli.flags.at("task");
  if (task.empty()) throw ParameterError("--task is required (forecast, classify or anomaly)");
  RunConfig c = preset(parse_task(task));
  for (const auto& [k, v] : file) apply(c, k, v);
  for (const auto& [k, v] : cli.flags) apply(c, k, v);
  for (const std::string& h : cli.hyper) {
    const auto eq = h.find('=');
    if (eq == std::string::npos) throw ParameterError("--hyper expects key=value, got '" + h + "'");
    apply(c, "hyper." + trim(h.substr(0, eq)), h.substr(eq + 1));
  }
  validate(c);
  return c;
}

void write_manifest(std::ostream& out, const RunConfig& c, const std::string& command, const std::string& note) {
  out << "# tsdl " << command << " manifest\n";
  out << "# tsdl_version = " << TSDL_VERSION << "\n";
  out << "# compiler = " << version_line() << "\n";
  out << "# scalar = " << (sizeof(real) == 8 ? "float64" : "float32") << "\n";
  out << "# data = " << note << "\n";
  for (const auto& [k, v] : echo(c)) out << k << " = " << v << "\n";
}

int cmd_list(std::ostream& out) {
  for (const auto& d : zoo::list_models()) out << d.name << "  " << d.description << "\n";
  return exit_code::ok;
}

int cmd_describe(const std::string& name, const std::vector<std::string>& hyper_args, std::ostream& out) {
  zoo::Hyper hyper;
  for (const std::string& h : hyper_args) {
    const auto eq = h.find('=');
    if (eq == std::string::npos) throw ParameterError("--hyper expects key=value, got '" + h + "'");
    hyper[trim(h.substr(0, eq))] = trim(h.substr(eq + 1));
  }
  const zoo::Description d = zoo::describe(name, hyper);
  out << "name: " << d.descriptor.name << "\n";
  out << "description: " << d.descriptor.description << "\n";
  out << "citation: " << d.descriptor.citation << "\n";
  out << "inputs: " << d.descriptor.inputs << "\n";
  for (const auto& [family, count] : zoo::complete_counts(d.family_contract)) out << family << ": " << count << "\n";
  for (const auto& [key, value] : d.descriptor.default_hyper) out << "hyper." << key << ": " << value << "\n";
  out << "input_shape: " << tsdl::to_string(d.input_shape) << "\n";
  out << "output_shape: " << tsdl::to_string(d.output_shape) << "\n";
  out << "parameter_count: " << d.parameter_count << "\n";
  for (const NodeInfo& n : d.nodes)
    out << "node: " << n.name << " " << n.kind << " " << tsdl::to_string(n.output_shape) << " " << n.parameter_count
        << "\n";
  return exit_code::ok;
}

int run_pipeline(const Cli& cli, bool training, const std::string& weights_arg, std::ostream& out,
                 std::ostream& err) {
  RunConfig c;
  try {
    c = resolve(cli);
  } catch (const Error& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_code::usage;
  }

  TaskData d;
  try {
    d = prepare(c);
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return exit_code::data;
  }

  std::optional<Model> model;
  try {
    model.emplace(build(c, d));
  } catch (const Error& e) {
    err << "model error: " << e.what() << "\n";
    return exit_code::usage;
  }

  const std::filesystem::path dir = c.out;
  const std::filesystem::path weights = weights_arg.empty() ? dir / "weights.tsdlw" : std::filesystem::path(weights_arg);
  std::filesystem::create_directories(dir);

  if (training) {
    train::History h;
    try {
      const train::TrainConfig tc = training_config(c);
      if (c.task == Task::classify && c.model == "YildirimOzal") {
        zoo::BuildOptions opts{c.hyper, true, d.top, c.seed};
        zoo::AutoencoderPair pair = zoo::build_autoencoder_pair(d.input_shape, opts);
        train::TrainConfig p1 = tc;
        p1.loss = train::LossKind::mse;
        h = train::two_phase_autoencoder_fit(pair.autoencoder, pair.classifier, d.train.as_training(),
                                             d.val.as_training(), p1, tc, zoo::encoder_prefix);
        model.emplace(std::move(pair.classifier));
      } else {
        h = train::fit(*model, d.train.as_training(), d.val.as_training(), tc);
      }
    } catch (const DivergedError& e) {
      err << "diverged at epoch " << e.epoch() << ": " << e.what() << "\n";
      return exit_code::diverged;
    } catch (const Error& e) {
      err << "training error: " << e.what() << "\n";
      return exit_code::data;
    }
    train::write_history(out, h);
    std::ofstream hist(dir / "history.txt");
    train::write_history(hist, h);
    save_weights(*model, weights);
  }

  // Metrics are computed from the saved file so train and eval agree exactly.
  try {
    load_weights(*model, weights);
  } catch (const Error& e) {
    err << "weights error: " << e.what() << "\n";
    return exit_code::weights;
  }
  std::vector<Metric> metrics;
  try {
    metrics = test_metrics(c, *model, d);
  } catch (const Error& e) {
    err << "metric error: " << e.what() << "\n";
    return exit_code::data;
  }
  write_metrics(out, metrics);

  const std::string command = training ? "train" : "eval";
  std::ofstream mf(dir / (training ? "metrics.txt" : "eval_metrics.txt"));
  write_metrics(mf, metrics);
  std::ofstream man(dir / (command + "_manifest.txt"));
  write_manifest(man, c, command, d.note);
  return exit_code::ok;
}

}  // namespace

std::string_view to_string(Task task) {
  switch (task) {
    case Task::forecast: return "forecast";
    case Task::classify: return "classify";
    case Task::anomaly: return "anomaly";
  }
  return "?";
}

Task parse_task(const std::string& name) {
  if (name == "forecast") return Task::forecast;
  if (name == "classify") return Task::classify;
  if (name == "anomaly") return Task::anomaly;
  throw ParameterError("unknown task '" + name + "' (forecast, classify, anomaly)");
}

RunConfig preset(Task task) {
  RunConfig c;
  c.task = task;
  switch (task) {
    case Task::forecast:
      c.synth = "sine";
      c.patience = 2;
      break;
    case Task::classify:
      c.synth = "segments";
      c.patience = 3;
      break;
    case Task::anomaly:
      c.synth = "traffic";
      c.patience = 3;
      c.batch_size = 4096;
      c.window = 64;
      c.length = 20000;
      break;
  }
  return c;
}

void apply(RunConfig& c, const std::string& raw_key, const std::string& value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '_', '-');
  const std::string v = trim(value);
  using Setter = std::function<void()>;
  const auto size = [&](std::size_t& f) { return Setter([&f, &key, &v] { f = parse_number<std::size_t>(key, v); }); };
  const auto dbl = [&](double& f) { return Setter([&f, &key, &v] { f = parse_number<double>(key, v); }); };
  const auto str = [&](std::string& f) { return Setter([&f, &v] { f = v; }); };
  const std::map<std::string, Setter> setters{
      {"task", [&] { c.task = parse_task(v); }},
      {"model", str(c.model)},
      {"csv", [&] { c.csv = v; if (!v.empty()) c.synth.clear(); }},
      {"synth", [&] { c.synth = v; if (!v.empty()) c.csv.clear(); }},
      {"seed", [&] { c.seed = parse_number<std::uint64_t>(key, v); }},
      {"epochs", size(c.epochs)},
      {"batch-size", size(c.batch_size)},
      {"patience", size(c.patience)},
      {"delta", dbl(c.delta)},
      {"lr", dbl(c.lr)},
      {"out", str(c.out)},
      {"window", size(c.window)},
      {"horizon", size(c.horizon)},
      {"stride", size(c.stride)},
      {"smooth-window", size(c.smooth_window)},
      {"smooth-iterations", size(c.smooth_iterations)},
      {"length", size(c.length)},
      {"noise", dbl(c.noise)},
      {"classes", size(c.classes)},
      {"segment-length", size(c.segment_length)},
      {"per-class", size(c.per_class)},
      {"features", size(c.features)},
      {"steps", size(c.steps)},
      {"anomaly-rate", dbl(c.anomaly_rate)},
      {"header", [&] { c.header = parse_bool(key, v); }},
      {"columns", [&] { c.columns = split_list(v); }},
  };
  if (key.rfind("hyper.", 0) == 0) {
    c.hyper[key.substr(6)] = v;
    return;
  }
  const auto it = setters.find(key);
  if (it == setters.end()) throw ParameterError("unknown setting '" + raw_key + "'");
  it->second();
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ParameterError(path.string() + ":" + std::to_string(no) + ": expected key = value");
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> echo(const RunConfig& c) {
  std::string cols;
  for (const std::string& col : c.columns) cols += (cols.empty() ? "" : ",") + col;
  std::vector<std::pair<std::string, std::string>> out{
      {"task", std::string(to_string(c.task))},
      {"model", c.model},
      {"csv", c.csv},
      {"synth", c.synth},
      {"seed", std::to_string(c.seed)},
      {"epochs", std::to_string(c.epochs)},
      {"batch-size", std::to_string(c.batch_size)},
      {"patience", std::to_string(c.patience)},
      {"delta", format_real(c.delta)},
      {"lr", format_real(c.lr)},
      {"out", c.out},
      {"window", std::to_string(c.window)},
      {"horizon", std::to_string(c.horizon)},
      {"stride", std::to_string(c.stride)},
      {"smooth-window", std::to_string(c.smooth_window)},
      {"smooth-iterations", std::to_string(c.smooth_iterations)},
      {"length", std::to_string(c.length)},
      {"noise", format_real(c.noise)},
      {"classes", std::to_string(c.classes)},
      {"segment-length", std::to_string(c.segment_length)},
      {"per-class", std::to_string(c.per_class)},
      {"features", std::to_string(c.features)},
      {"steps", std::to_string(c.steps)},
      {"anomaly-rate", format_real(c.anomaly_rate)},
      {"header", c.header ? "true" : "false"},
      {"columns", cols},
  };
  for (const auto& [k, v] : c.hyper) out.emplace_back("hyper." + k, v);
  return out;
}

void validate(const RunConfig& c) {
  if (c.model.empty()) throw ParameterError("--model is required");
  if (!zoo::has_model(c.model)) throw RegistryError("unknown model '" + c.model + "'; see `tsdl list`");
  if (c.csv.empty() && c.synth.empty()) throw ParameterError("one data source is required: --csv or --synth");
  if (!c.csv.empty() && !c.synth.empty()) throw ParameterError("--csv and --synth are mutually exclusive");
  const std::string want = c.task == Task::forecast ? "sine" : c.task == Task::classify ? "segments" : "traffic";
  if (!c.synth.empty() && c.synth != want)
    throw ParameterError("--synth for task " + std::string(to_string(c.task)) + " must be '" + want + "'");
  if (c.epochs == 0 || c.batch_size == 0) throw ParameterError("epochs and batch size must be positive");
  if (!(c.lr > 0) || c.delta < 0) throw ParameterError("lr must be positive and delta non-negative");
  if (c.window == 0 || c.horizon == 0 || c.steps == 0 || c.stride == 0)
    throw ParameterError("window, horizon, steps and stride must be positive");
}

TaskData prepare(const RunConfig& c) {
  switch (c.task) {
    case Task::forecast: return prepare_forecast(c);
    case Task::classify: return prepare_classify(c);
    case Task::anomaly: return prepare_anomaly(c);
  }
  throw ParameterError("unknown task");
}

Model build(const RunConfig& c, const TaskData& d) {
  return zoo::build_model(c.model, d.input_shape, zoo::BuildOptions{c.hyper, true, d.top, c.seed});
}

train::TrainConfig training_config(const RunConfig& c) {
  train::TrainConfig t;
  t.loss = c.task == Task::classify ? train::LossKind::categorical_crossentropy : train::LossKind::mse;
  t.batch_size = c.batch_size;
  t.max_epochs = c.epochs;
  t.early_stopping = train::EarlyStoppingConfig{c.patience, static_cast<real>(c.delta)};
  t.adam.lr = static_cast<real>(c.lr);
  t.seed = c.seed;
  return t;
}

std::vector<Metric> test_metrics(const RunConfig& c, Model& model, const TaskData& d) {
  switch (c.task) {
    case Task::forecast: {
      const Tensor pred = train::predict(model, {d.test.inputs});
      const real mae = train::mean_absolute_error(pred, d.test.targets);
      // Constant predictor: per-channel mean of the training targets.
      const Tensor& tt = d.train.targets;
      const std::size_t k = tt.shape().back();
      std::vector<real> mean(k, 0);
      for (std::size_t e = 0; e < tt.size(); ++e) mean[e % k] += tt.data()[e];
      for (real& m : mean) m /= static_cast<real>(tt.size() / k);
      Tensor base(d.test.targets.shape());
      for (std::size_t e = 0; e < base.size(); ++e) base.data()[e] = mean[e % k];
      const real base_mae = train::mean_absolute_error(base, d.test.targets);
      return {{"mae", mae}, {"baseline_mae", base_mae}, {"mae_ratio", mae / base_mae}};
    }
    case Task::classify: {
      const Tensor pred = train::predict(model, {d.test.inputs});
      return {{"accuracy", train::accuracy(pred, d.test.targets)}};
    }
    case Task::anomaly: {
      const auto k = static_cast<std::size_t>(std::accumulate(d.test_labels.begin(), d.test_labels.end(), real(0)));
      const data::HarnessResult r = data::anomaly_harness(model, d.test, d.test_labels, k);
      real hits = 0;
      for (std::size_t j = 0; j < r.predicted.size(); ++j) hits += r.predicted[j] * d.test_labels[j];
      return {{"auc", r.auc}, {"k", static_cast<real>(k)}, {"top_k_hits", hits}};
    }
  }
  return {};
}

void write_metrics(std::ostream& out, const std::vector<Metric>& metrics) {
  const auto old = out.precision(std::numeric_limits<real>::max_digits10);
  for (const Metric& m : metrics) out << "metric " << m.name << " value " << m.value << "\n";
  out.precision(old);
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-series deep learning model zoo"};
  app.require_subcommand(1);

  CLI::App* list = app.add_subcommand("list", "List registered architectures");
  CLI::App* describe = app.add_subcommand("describe", "Print an architecture descriptor");
  std::string describe_name;
  std::vector<std::string> describe_hyper;
  describe->add_option("name", describe_name, "Architecture name")->required();
  describe->add_option("--hyper", describe_hyper, "Hyperparameter override key=value");

  Cli train_cli, eval_cli;
  std::string weights_path;
  const auto add_run_flags = [](CLI::App* sub, Cli& cli) {
    static const char* const keys[] = {"task",          "model",          "csv",       "synth",       "seed",
                                       "epochs",        "batch-size",     "patience",  "delta",       "out",
                                       "lr",            "window",         "horizon",   "stride",      "smooth-window",
                                       "smooth-iterations", "length",     "noise",     "classes",     "segment-length",
                                       "per-class",     "features",       "steps",     "anomaly-rate", "header",
                                       "columns"};
    for (const char* key : keys) {
      sub->add_option_function<std::string>(std::string("--") + key,
                                            [&cli, k = std::string(key)](const std::string& v) { cli.flags[k] = v; });
    }
    sub->add_option("--hyper", cli.hyper, "Hyperparameter override key=value (repeatable)");
    sub->add_option("--config", cli.config_path, "Flat key = value file; flags override it");
  };
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model on a task preset");
  add_run_flags(train_cmd, train_cli);
  CLI::App* eval_cmd = app.add_subcommand("eval", "Recompute the test metric from saved weights");
  add_run_flags(eval_cmd, eval_cli);
  eval_cmd->add_option("--weights", weights_path, "Weights file (default <out>/weights.tsdlw)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_code::ok : exit_code::usage;
  }

  try {
    if (list->parsed()) return cmd_list(out);
    if (describe->parsed()) return cmd_describe(describe_name, describe_hyper, out);
    if (train_cmd->parsed()) return run_pipeline(train_cli, true, "", out, err);
    if (eval_cmd->parsed()) return run_pipeline(eval_cli, false, weights_path, out, err);
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code::usage;
  }
  return exit_code::usage;
}

}  // namespace tsdl::app
