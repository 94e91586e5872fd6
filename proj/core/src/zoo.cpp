#include "tsdl/zoo.hpp"

#include <algorithm>
#include <charconv>
#include <functional>

#include "tsdl/error.hpp"
#include "tsdl/layers.hpp"

namespace tsdl::zoo {

namespace {

class Params {
 public:
  Params(const ArchitectureDescriptor& d, const Hyper& user) : name_(d.name), values_(d.default_hyper) {
    for (const auto& [key, value] : user) {
      auto it = values_.find(key);
      if (it == values_.end()) throw ParameterError(name_ + " has no hyperparameter '" + key + "'");
      it->second = value;
    }
  }

  std::size_t count(const std::string& key) const {
    const std::string& s = raw(key);
    std::size_t v = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size() || v == 0) {
      throw ParameterError(name_ + ": '" + key + "' must be a positive integer, got '" + s + "'");
    }
    return v;
  }

  real fraction(const std::string& key, real lo, real hi) const {
    const std::string& s = raw(key);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || !(v >= lo && v < hi)) {
      throw ParameterError(name_ + ": '" + key + "' must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) +
                           "), got '" + s + "'");
    }
    return static_cast<real>(v);
  }

  std::string choice(const std::string& key, std::initializer_list<std::string_view> allowed) const {
    const std::string& s = raw(key);
    if (std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
      throw ParameterError(name_ + ": unsupported value '" + s + "' for '" + key + "'");
    }
    return s;
  }

  bool flag(const std::string& key) const { return choice(key, {"on", "off"}) == "on"; }

 private:
  const std::string& raw(const std::string& key) const { return values_.at(key); }

  std::string name_;
  Hyper values_;
};

std::size_t ladder(std::size_t base, std::size_t i) { return base << std::min<std::size_t>(i, 3); }

void conv(GraphSpec& g, const std::string& name, std::size_t filters, std::size_t kernel,
          Activation act = Activation::relu(), Padding padding = Padding::same) {
  g.then<Conv1d>(name, Conv1dOptions{filters, kernel, 1, padding, act});
}

void max_pool(GraphSpec& g, const std::string& name, std::size_t window) {
  g.then<Pool1d>(name, Pool1dOptions{PoolKind::max, window, window});
}

void gap(GraphSpec& g, const std::string& name) { g.then<Pool1d>(name, Pool1dOptions{PoolKind::global_avg}); }

void lstm(GraphSpec& g, const std::string& name, std::size_t units, bool sequences) {
  g.then<Lstm>(name, RecurrentOptions{units, sequences});
}

void gru(GraphSpec& g, const std::string& name, std::size_t units, bool sequences) {
  g.then<Gru>(name, RecurrentOptions{units, sequences});
}

void batchnorm(GraphSpec& g, const std::string& name) { g.then<BatchNorm1d>(name); }

void activation(GraphSpec& g, const std::string& name, Activation act) { g.then<ActivationLayer>(name, act); }

std::string at(std::string_view stem, std::size_t i) { return std::string(stem) + std::to_string(i); }

// ---- builders -------------------------------------------------------------

void cai_wenjuan(GraphSpec& g, const Shape& in, const Params& p) {
  const std::size_t f = p.count("filters"), depth = p.count("block_depth"), ratio = p.count("se_ratio");
  g.input("input", in);
  const std::size_t kernels[] = {3, 5, 7};
  std::vector<std::string> branches;
  for (std::size_t k : kernels) {
    branches.push_back(at("entry_conv_k", k));
    g.node<Conv1d>(branches.back(), {"input"}, Conv1dOptions{f, k, 1, Padding::same, Activation::relu()});
  }
  g.node<Concat>("entry_concat", branches);
  g.then<SeBlock>("entry_se", ratio);
  for (std::size_t b = 1; b <= 2; ++b) {
    for (std::size_t l = 1; l <= depth; ++l) {
      const std::string pre = "block" + std::to_string(b) + "_" + std::to_string(l) + "_";
      const std::string block_in = g.last();
      batchnorm(g, pre + "bn1");
      activation(g, pre + "relu1", Activation::relu());
      conv(g, pre + "conv1", 2 * f, 1, Activation::linear());
      batchnorm(g, pre + "bn2");
      activation(g, pre + "relu2", Activation::relu());
      conv(g, pre + "conv2", f, p.count("kernel"), Activation::linear());
      g.node<Concat>(pre + "concat", {block_in, g.last()});
    }
    g.then<SeBlock>(at("block", b) + "_se", ratio);
    if (b == 1) {
      conv(g, "transition_conv", 4 * f, 1);
      g.then<Pool1d>("transition_pool", Pool1dOptions{PoolKind::avg, p.count("pool"), p.count("pool")});
    }
  }
  gap(g, "gap");
}

FamilyCounts cai_wenjuan_contract(const Params& p) {
  const std::size_t depth = p.count("block_depth");
  return {{"conv1d", 3 + 4 * depth + 1}, {"batchnorm", 4 * depth}, {"pooling", 2}, {"se_block", 3}};
}

void conv_pool_stack(GraphSpec& g, const Params& p, std::size_t n, std::size_t first_kernel) {
  const std::size_t f = p.count("filters"), k = p.count("kernel"), w = p.count("pool");
  for (std::size_t i = 0; i < n; ++i) {
    conv(g, at("conv", i + 1), ladder(f, i), i == 0 ? first_kernel : k);
    max_pool(g, at("pool", i + 1), w);
  }
}

void chen_chen(GraphSpec& g, const Shape& in, const Params& p) {
  g.input("input", in);
  conv_pool_stack(g, p, 6, p.count("kernel"));
  lstm(g, "lstm1", p.count("units"), true);
  lstm(g, "lstm2", p.count("units"), false);
}

void fu_jiangmeng(GraphSpec& g, const Shape& in, const Params& p) {
  g.input("input", in);
  conv_pool_stack(g, p, 1, p.count("kernel"));
  lstm(g, "lstm", p.count("units"), false);
}

void gao_junli(GraphSpec& g, const Shape& in, const Params& p) {
  g.input("input", in);
  lstm(g, "lstm", p.count("units"), false);
}

void gen_minxing(GraphSpec& g, const Shape& in, const Params& p) {
  g.input("input", in);
  g.then<Bidirectional>("bilstm", RecurrentCell::lstm, RecurrentOptions{p.count("units"), false});
}

void htet_myet_lynn(GraphSpec& g, const Shape& in, const Params& p) {
  const std::size_t f = p.count("filters"), k = p.count("kernel"), w = p.count("pool");
  g.input("input", in);
  for (std::size_t i = 0; i < 4; ++i) {
    conv(g, at("conv", i + 1), ladder(f, i), k);
    if (i % 2 == 1) max_pool(g, at("pool", i / 2 + 1), w);
  }
  const RecurrentCell cell = p.choice("recurrent", {"gru", "lstm"}) == "gru" ? RecurrentCell::gru : RecurrentCell::lstm;
  g.then<Bidirectional>(cell == RecurrentCell::gru ? "bigru" : "bilstm", cell, RecurrentOptions{p.count("units"), false});
}

FamilyCounts htet_myet_lynn_contract(const Params& p) {
  const std::string rec = p.choice("recurrent", {"gru", "lstm"}) == "gru" ? "bigru" : "bilstm";
  return {{"conv1d", 4}, {"pooling", 2}, {rec, 1}};
}

void huang_mei_ling(GraphSpec& g, const Shape& in, const Params& p) {
  g.input("input", in);
  conv_pool_stack(g, p, 2, p.count("kernel"));
}

void khan_zulfiqar(GraphSpec& g, const Shape& in, const Params& p) {
  const std::size_t f = p.count("filters"), k = p.count("kernel");
  const real rate = p.fraction("dropout", 0, 1);
  g.input("input", in);
  for (std::size_t i = 0; i < 2; ++i) {
    conv(g, at("conv", i + 1), ladder(f, i), k);
    g.then<Dropout>(at("dropout", i + 1), rate);
  }
  gru(g, "gru1", p.count("units"), true);
  gru(g, "gru2", p.count("units"), false);
}

void kim_tae_young(GraphSpec& g, const Shape& in, const Params& p) {
  g.input("input", in);
  conv_pool_stack(g, p, 2, p.count("kernel"));
  lstm(g, "lstm", p.count("units"), false);
}

void kong_zhengmin(GraphSpec& g, const Shape& in, const Params& p) {
  g.input("input", in);
  conv_pool_stack(g, p, 1, p.count("kernel"));
  lstm(g, "lstm1", p.count("units"), true);
  lstm(g, "lstm2", p.count("units"), false);
}

void lih_oh_shu(GraphSpec& g, const Shape& in, const Params& p) {
  g.input("input", in);
  conv_pool_stack(g, p, 5, p.count("first_kernel"));
  lstm(g, "lstm", p.count("units"), false);
}

void oh_shu_lih(GraphSpec& g, const Shape& in, const Params& p) {
  const std::size_t f = p.count("filters"), k = p.count("kernel"), w = p.count("pool");
  g.input("input", in);
  for (std::size_t i = 0; i < 3; ++i) {
    conv(g, at("conv", i + 1), ladder(f, i), k, Activation::relu(), Padding::full);
    if (i < 2) max_pool(g, at("pool", i + 1), w);
  }
  lstm(g, "lstm", p.count("units"), false);
}

void shi_haotian(GraphSpec& g, const Shape& in, const Params& p) {
  const std::size_t f = p.count("filters"), k = p.count("kernel"), w = p.count("pool");
  std::vector<std::string> branches;
  for (std::size_t i = 1; i <= 3; ++i) {
    const std::string input = at("input_", i);
    g.input(input, in);
    g.node<Conv1d>(at("branch", i) + "_conv", {input}, Conv1dOptions{f, k, 1, Padding::same, Activation::relu()});
    max_pool(g, at("branch", i) + "_pool", w);
    branches.push_back(g.last());
  }
  g.node<Concat>("concat", branches);
  lstm(g, "lstm", p.count("units"), false);
}

void wang_kejun(GraphSpec& g, const Shape& in, const Params& p) {
  const std::size_t f = p.count("filters"), k = p.count("kernel");
  g.input("input", in);
  lstm(g, "lstm1", p.count("units"), true);
  lstm(g, "lstm2", p.count("units"), true);
  conv(g, "conv1", f, k);
  conv(g, "conv2", 2 * f, k);
}

void wei_xiaoyan(GraphSpec& g, const Shape& in, const Params& p) {
  const std::size_t f = p.count("filters"), k = p.count("kernel"), w = p.count("pool");
  const real slope = p.fraction("slope", 0, 1);
  g.input("input", in);
  for (std::size_t i = 1; i <= 5; ++i) {
    conv(g, at("conv", i), ladder(f, i - 1), k, Activation::linear());
    activation(g, at("leaky_relu", i), Activation::leaky_relu(slope));
    max_pool(g, at("pool", i), w);
    batchnorm(g, at("bn", i));
  }
  lstm(g, "lstm1", p.count("units"), true);
  batchnorm(g, "bn6");
  lstm(g, "lstm2", p.count("units"), false);
}

void yao_qihang(GraphSpec& g, const Shape& in, const Params& p) {
  const std::size_t f = p.count("filters"), k = p.count("kernel"), w = p.count("pool");
  const bool attention = p.flag("attention");
  g.input("input", in);
  const std::size_t block_sizes[] = {2, 2, 3, 3, 3};
  std::size_t layer = 0;
  for (std::size_t b = 0; b < 5; ++b) {
    for (std::size_t j = 0; j < block_sizes[b]; ++j) {
      ++layer;
      conv(g, at("conv", layer), ladder(f, b), layer == 1 ? p.count("first_kernel") : k, Activation::linear());
      batchnorm(g, at("bn", layer));
      activation(g, at("relu", layer), Activation::relu());
    }
    max_pool(g, at("pool", b + 1), w);
  }
  lstm(g, "lstm1", p.count("units"), true);
  lstm(g, "lstm2", p.count("units"), attention);
  if (attention) g.then<AttentionPooling>("attention", p.count("units") / 2 + 1);
}

FamilyCounts yao_qihang_contract(const Params& p) {
  FamilyCounts c{{"conv1d", 13}, {"batchnorm", 13}, {"pooling", 5}, {"lstm", 2}};
  if (p.flag("attention")) c["attention"] = 1;
  return c;
}

void yibo_gao(GraphSpec& g, const Shape& in, const Params& p) {
  const std::size_t f = p.count("filters"), k = p.count("kernel"), w = p.count("pool"), n = p.count("rta_blocks");
  g.input("input", in);
  conv(g, "entry_conv", f, k);
  for (std::size_t i = 1; i <= n; ++i) {
    g.then<RtaBlock>(at("rta", i), RtaOptions{ladder(f, i - 1), k, w});
    max_pool(g, at("pool", i), w);
  }
  gap(g, "gap");
}

FamilyCounts yibo_gao_contract(const Params& p) {
  const std::size_t n = p.count("rta_blocks");
  return {{"conv1d", 1}, {"rta_block", n}, {"pooling", n + 1}};
}

void encoder(GraphSpec& g, const Params& p) {
  const std::size_t f = p.count("filters"), k = p.count("kernel"), w = p.count("pool");
  const std::string pre(encoder_prefix);
  conv(g, pre + "conv1", f, k);
  max_pool(g, pre + "pool1", w);
  conv(g, pre + "conv2", 2 * f, k);
  max_pool(g, pre + "pool2", w);
}

void yildirim_ozal(GraphSpec& g, const Shape& in, const Params& p) {
  g.input("input", in);
  encoder(g, p);
  lstm(g, "lstm", p.count("units"), false);
}

void yildirim_ozal_autoencoder(GraphSpec& g, const Shape& in, const Params& p) {
  const std::size_t f = p.count("filters"), k = p.count("kernel"), w = p.count("pool");
  g.input("input", in);
  encoder(g, p);
  conv(g, "decoder_conv1", 2 * f, k);
  g.then<Upsample1d>("decoder_up1", w);
  conv(g, "decoder_conv2", f, k);
  g.then<Upsample1d>("decoder_up2", w);
  conv(g, "decoder_output", in.back(), k, Activation::linear());
  g.then<CropPad>("decoder_crop", in.front());
}

void zhang_jin(GraphSpec& g, const Shape& in, const Params& p) {
  const std::size_t f = p.count("filters"), k = p.count("kernel"), w = p.count("pool");
  const std::size_t ratio = p.count("se_ratio"), st_kernel = p.count("st_kernel");
  g.input("input", in);
  conv(g, "entry_conv", f, k);
  for (std::size_t i = 1; i <= 2; ++i) {
    g.then<SpatioTemporalAttention>(at("st_attention", i), ratio, st_kernel);
    conv(g, at("conv", i), ladder(f, i), k);
    max_pool(g, at("pool", i), w);
  }
  g.then<Bidirectional>("bigru", RecurrentCell::gru, RecurrentOptions{p.count("units"), false});
}

void zheng_zhenyu(GraphSpec& g, const Shape& in, const Params& p) {
  const std::size_t f = p.count("filters"), k = p.count("kernel"), w = p.count("pool");
  g.input("input", in);
  std::size_t layer = 0;
  for (std::size_t b = 1; b <= 3; ++b) {
    for (std::size_t j = 0; j < 2; ++j) {
      ++layer;
      conv(g, at("conv", layer), ladder(f, b - 1), k);
      batchnorm(g, at("bn", layer));
    }
    max_pool(g, at("pool", b), w);
  }
  lstm(g, "lstm", p.count("units"), false);
}

void hong_tan(GraphSpec& g, const Shape& in, const Params& p) {
  g.input("input", in);
  conv_pool_stack(g, p, 2, p.count("kernel"));
  lstm(g, "lstm1", p.count("units"), true);
  lstm(g, "lstm2", p.count("units"), true);
  lstm(g, "lstm3", p.count("units"), false);
}

void example_model(GraphSpec& g, const Shape& in, const Params& p) {
  huang_mei_ling(g, in, p);
  lstm(g, "lstm", p.count("units"), false);
}

// ---- registry -------------------------------------------------------------

using Builder = void (*)(GraphSpec&, const Shape&, const Params&);
using Contract = std::function<FamilyCounts(const Params&)>;

struct Entry {
  ArchitectureDescriptor descriptor;
  Builder build;
  Contract contract;
};

Contract fixed(FamilyCounts counts) {
  return [counts](const Params&) { return counts; };
}

Hyper conv_hyper(bool pool = true, bool units = true) {
  Hyper h{{"filters", "16"}, {"kernel", "3"}};
  if (pool) h["pool"] = "2";
  if (units) h["units"] = "64";
  return h;
}

Hyper with(Hyper h, const Hyper& extra) {
  for (const auto& [k, v] : extra) h[k] = v;
  return h;
}

std::vector<Entry> make_registry() {
  std::vector<Entry> r;
  auto add = [&](std::string name, std::string description, Hyper hyper, std::size_t inputs, std::size_t rank,
                 Builder build, Contract contract) {
    ArchitectureDescriptor d;
    d.name = name;
    d.description = std::move(description);
    d.default_hyper = std::move(hyper);
    d.inputs = inputs;
    d.citation = name;
    d.output_rank = rank;
    r.push_back({std::move(d), build, std::move(contract)});
  };
  add("CaiWenjuan", "parallel conv entry, two densely connected conv blocks with SE gates, global average pool",
      with(conv_hyper(true, false), {{"block_depth", "4"}, {"se_ratio", "8"}}), 1, 1, cai_wenjuan, cai_wenjuan_contract);
  add("ChenChen", "6 conv/max-pool stages, 2 LSTM", conv_hyper(), 1, 1, chen_chen,
      fixed({{"conv1d", 6}, {"pooling", 6}, {"lstm", 2}}));
  add("FuJiangmeng", "conv, max-pool, LSTM", conv_hyper(), 1, 1, fu_jiangmeng,
      fixed({{"conv1d", 1}, {"pooling", 1}, {"lstm", 1}}));
  add("GaoJunli", "single LSTM", {{"units", "64"}}, 1, 1, gao_junli, fixed({{"lstm", 1}}));
  add("GenMinxing", "single bidirectional LSTM", {{"units", "64"}}, 1, 1, gen_minxing, fixed({{"bilstm", 1}}));
  add("HtetMyetLynn", "4 conv with 2 max-pools, bidirectional GRU or LSTM",
      with(conv_hyper(), {{"recurrent", "gru"}}), 1, 1, htet_myet_lynn, htet_myet_lynn_contract);
  add("HuangMeiLing", "2 conv/max-pool stages", conv_hyper(true, false), 1, 2, huang_mei_ling,
      fixed({{"conv1d", 2}, {"pooling", 2}}));
  add("KhanZulfiqar", "2 conv each followed by dropout, 2 GRU",
      with(conv_hyper(false, true), {{"dropout", "0.2"}}), 1, 1, khan_zulfiqar,
      fixed({{"conv1d", 2}, {"dropout", 2}, {"gru", 2}}));
  add("KimTaeYoung", "2 conv/max-pool stages, LSTM", conv_hyper(), 1, 1, kim_tae_young,
      fixed({{"conv1d", 2}, {"pooling", 2}, {"lstm", 1}}));
  add("KongZhengmin", "conv, max-pool, 2 LSTM", conv_hyper(), 1, 1, kong_zhengmin,
      fixed({{"conv1d", 1}, {"pooling", 1}, {"lstm", 2}}));
  add("LihOhShu", "5 conv/max-pool stages, LSTM", with(conv_hyper(), {{"first_kernel", "5"}}), 1, 1, lih_oh_shu,
      fixed({{"conv1d", 5}, {"pooling", 5}, {"lstm", 1}}));
  add("OhShuLih", "3 full-padding conv with max-pools between, LSTM", conv_hyper(), 1, 1, oh_shu_lih,
      fixed({{"conv1d", 3}, {"pooling", 2}, {"lstm", 1}}));
  add("ShiHaotian", "3 input branches of conv/max-pool, concatenated, LSTM", conv_hyper(), 3, 1, shi_haotian,
      fixed({{"conv1d", 3}, {"pooling", 3}, {"lstm", 1}}));
  add("WangKejun", "2 LSTM then 2 conv", conv_hyper(false, true), 1, 2, wang_kejun,
      fixed({{"lstm", 2}, {"conv1d", 2}}));
  add("WeiXiaoyan", "5 conv/leaky-relu/max-pool/batchnorm blocks, LSTM, batchnorm, LSTM",
      with(conv_hyper(), {{"slope", "0.3"}}), 1, 1, wei_xiaoyan,
      fixed({{"conv1d", 5}, {"pooling", 5}, {"batchnorm", 6}, {"lstm", 2}}));
  add("YaoQihang", "13 conv/batchnorm/relu layers in 5 max-pooled blocks, 2 LSTM, optional attention pooling",
      with(conv_hyper(), {{"first_kernel", "5"}, {"attention", "off"}}), 1, 1, yao_qihang, yao_qihang_contract);
  add("YiboGao", "entry conv, residual temporal attention blocks with max-pools, global average pool",
      with(conv_hyper(true, false), {{"rta_blocks", "3"}}), 1, 1, yibo_gao, yibo_gao_contract);
  add("YildirimOzal", "conv autoencoder encoder with LSTM classifier", conv_hyper(), 1, 1, yildirim_ozal,
      fixed({{"conv1d", 2}, {"pooling", 2}, {"lstm", 1}}));
  add("ZhangJin", "conv, 2 spatio-temporal attention/conv/max-pool stages, bidirectional GRU",
      with(conv_hyper(), {{"se_ratio", "8"}, {"st_kernel", "7"}}), 1, 1, zhang_jin,
      fixed({{"conv1d", 3}, {"attention", 2}, {"pooling", 2}, {"bigru", 1}}));
  add("ZhengZhenyu", "3 blocks of 2 conv/batchnorm plus max-pool, LSTM", conv_hyper(), 1, 1, zheng_zhenyu,
      fixed({{"conv1d", 6}, {"batchnorm", 6}, {"pooling", 3}, {"lstm", 1}}));
  add("HongTan", "2 conv/max-pool stages, 3 LSTM", conv_hyper(), 1, 1, hong_tan,
      fixed({{"conv1d", 2}, {"pooling", 2}, {"lstm", 3}}));
  add("ExampleModel", "HuangMeiLing embedding followed by LSTM(20)", with(conv_hyper(), {{"units", "20"}}), 1, 1,
      example_model, fixed({{"conv1d", 2}, {"pooling", 2}, {"lstm", 1}}));
  return r;
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> r = make_registry();
  return r;
}

const Entry& entry(const std::string& name) {
  for (const Entry& e : registry())
    if (e.descriptor.name == name) return e;
  throw RegistryError("unknown architecture '" + name + "'");
}

void reseed_dropouts(Model& model, std::uint64_t seed) {
  for (const NodeInfo& info : model.node_info()) {
    if (info.family == "dropout") static_cast<Dropout&>(model.layer(info.name)).reseed(derive_seed(seed, info.name));
  }
}

bool builds(const std::function<GraphSpec(std::size_t)>& make, std::size_t length) {
  try {
    build(make(length));
    return true;
  } catch (const ShapeError&) {
    return false;
  }
}

std::size_t scan_minimum(const std::function<GraphSpec(std::size_t)>& make) {
  constexpr std::size_t limit = std::size_t{1} << 20;
  std::size_t lo = 0, hi = 1;
  while (!builds(make, hi)) {
    lo = hi;
    hi *= 2;
    if (hi > limit) return 0;
  }
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    (builds(make, mid) ? hi : lo) = mid;
  }
  return hi;
}

Model build_checked(const std::string& name, const std::function<GraphSpec(std::size_t)>& make, const Shape& input,
                    std::uint64_t seed) {
  if (input.size() != 2) throw ShapeError(name + " expects an input of shape [time, channels]");
  try {
    Model m = build(make(input[0]), seed);
    reseed_dropouts(m, seed);
    return m;
  } catch (const ShapeError&) {
    const std::size_t minimum = scan_minimum(make);
    if (minimum > input[0]) {
      throw ShapeError(name + " needs at least " + std::to_string(minimum) + " time steps, got " +
                       std::to_string(input[0]));
    }
    throw;
  }
}

const TopModule& checked_top(const BuildOptions& options) {
  if (!options.top) throw ParameterError("include_top requires a TopModule");
  return *options.top;
}

}  // namespace

// ---- public API -------------------------------------------------------------

FamilyCounts complete_counts(const FamilyCounts& sparse) {
  FamilyCounts out;
  for (const std::string& tag : family_tags()) {
    auto it = sparse.find(tag);
    out[tag] = it == sparse.end() ? 0 : it->second;
  }
  return out;
}

std::string_view to_string(TopKind kind) {
  switch (kind) {
    case TopKind::forecast: return "forecast";
    case TopKind::classify: return "classify";
    case TopKind::anomaly: return "anomaly";
    case TopKind::custom: return "custom";
  }
  return "?";
}

std::string TopModule::attach(GraphSpec& spec, const std::string& from) const {
  std::string prev = from;
  for (const TopLayer& l : layers) {
    switch (l.op) {
      case TopLayer::Op::flatten: spec.node<Flatten>(l.name, {prev}); break;
      case TopLayer::Op::dropout: spec.node<Dropout>(l.name, {prev}, l.rate); break;
      case TopLayer::Op::dense: spec.node<Dense>(l.name, {prev}, l.units, l.activation); break;
      case TopLayer::Op::reshape: spec.node<Reshape>(l.name, {prev}, l.shape); break;
    }
    prev = l.name;
  }
  return prev;
}

namespace {

TopLayer flatten_layer(std::string name) { return {std::move(name), TopLayer::Op::flatten, 0, {}, 0, {}}; }
TopLayer dense_layer(std::string name, std::size_t units, Activation act) {
  return {std::move(name), TopLayer::Op::dense, units, act, 0, {}};
}
TopLayer reshape_layer(std::string name, Shape shape) {
  return {std::move(name), TopLayer::Op::reshape, 0, {}, 0, std::move(shape)};
}

void require_positive(std::initializer_list<std::size_t> dims, const char* what) {
  for (std::size_t d : dims)
    if (d == 0) throw ParameterError(std::string(what) + " head dimensions must be positive");
}

}  // namespace

TopModule forecast_top(std::size_t horizon, std::size_t features, Activation act) {
  require_positive({horizon, features}, "forecast");
  TopModule t;
  t.kind = TopKind::forecast;
  t.layers = {flatten_layer("top_flatten"), dense_layer("top_dense", horizon * features, act),
              reshape_layer("top_reshape", {horizon, features})};
  t.output_shape = {horizon, features};
  return t;
}

TopModule classify_top(std::size_t classes) {
  require_positive({classes}, "classify");
  TopModule t;
  t.kind = TopKind::classify;
  t.layers = {flatten_layer("top_flatten"),
              {"top_dropout", TopLayer::Op::dropout, 0, {}, real(0.2), {}},
              dense_layer("top_dense1", 20, Activation::relu()),
              dense_layer("top_dense2", 10, Activation::relu()),
              dense_layer("top_output", classes, Activation::softmax())};
  t.output_shape = {classes};
  return t;
}

TopModule anomaly_top(std::size_t steps, std::size_t features) {
  require_positive({steps, features}, "anomaly");
  TopModule t;
  t.kind = TopKind::anomaly;
  t.layers = {flatten_layer("top_flatten"),
              dense_layer("top_dense1", 32, Activation::relu()),
              dense_layer("top_dense2", 64, Activation::relu()),
              dense_layer("top_dense3", features, Activation::relu()),
              dense_layer("top_dense4", steps * features, Activation::linear()),
              reshape_layer("top_reshape", {steps, features})};
  t.output_shape = {steps, features};
  return t;
}

TopModule make_top(const TopRequest& request) {
  switch (request.kind) {
    case TopKind::forecast: return forecast_top(request.a, request.b);
    case TopKind::classify: return classify_top(request.a);
    case TopKind::anomaly: return anomaly_top(request.a, request.b);
    case TopKind::custom: break;
  }
  throw ParameterError("custom heads are built by filling TopModule::layers directly");
}

const std::vector<ArchitectureDescriptor>& list_models() {
  static const std::vector<ArchitectureDescriptor> out = [] {
    std::vector<ArchitectureDescriptor> v;
    for (const Entry& e : registry()) {
      ArchitectureDescriptor d = e.descriptor;
      d.family_contract = complete_counts(e.contract(Params(d, {})));
      v.push_back(std::move(d));
    }
    return v;
  }();
  return out;
}

const ArchitectureDescriptor& descriptor(const std::string& name) {
  for (const ArchitectureDescriptor& d : list_models())
    if (d.name == name) return d;
  throw RegistryError("unknown architecture '" + name + "'");
}

bool has_model(const std::string& name) {
  return std::any_of(registry().begin(), registry().end(),
                     [&](const Entry& e) { return e.descriptor.name == name; });
}

FamilyCounts family_contract(const std::string& name, const Hyper& hyper) {
  const Entry& e = entry(name);
  return complete_counts(e.contract(Params(e.descriptor, hyper)));
}

GraphSpec embedding_spec(const std::string& name, const Shape& input, const Hyper& hyper) {
  const Entry& e = entry(name);
  const Params p(e.descriptor, hyper);
  GraphSpec g;
  e.build(g, input, p);
  return g;
}

Model build_model(const std::string& name, const Shape& input, const BuildOptions& options) {
  const Entry& e = entry(name);
  const Params p(e.descriptor, options.hyper);
  const TopModule* top = options.include_top ? &checked_top(options) : nullptr;
  const std::size_t channels = input.size() == 2 ? input[1] : 1;
  auto make = [&](std::size_t length) {
    GraphSpec g;
    e.build(g, {length, channels}, p);
    if (top) top->attach(g, g.last());
    return g;
  };
  return build_checked(name, make, input, options.seed);
}

std::size_t minimum_length(const std::string& name, std::size_t channels, const Hyper& hyper) {
  const Entry& e = entry(name);
  const Params p(e.descriptor, hyper);
  return scan_minimum([&](std::size_t length) {
    GraphSpec g;
    e.build(g, {length, channels}, p);
    return g;
  });
}

Description describe(const std::string& name, const Hyper& hyper, const Shape& input) {
  Description d;
  d.descriptor = descriptor(name);
  d.family_contract = family_contract(name, hyper);
  d.input_shape = input;
  Model m = build_model(name, input, {hyper, false, std::nullopt, 0});
  d.output_shape = m.output_shape();
  d.parameter_count = m.parameter_count();
  d.nodes = m.node_info();
  return d;
}

AutoencoderPair build_autoencoder_pair(const Shape& input, const BuildOptions& options) {
  const Entry& e = entry("YildirimOzal");
  const Params p(e.descriptor, options.hyper);
  const std::size_t channels = input.size() == 2 ? input[1] : 1;
  auto make_ae = [&](std::size_t length) {
    GraphSpec g;
    yildirim_ozal_autoencoder(g, {length, channels}, p);
    return g;
  };
  Model ae = build_checked("YildirimOzal autoencoder", make_ae, input, options.seed);
  Model clf = build_model("YildirimOzal", input, options);
  return {std::move(ae), std::move(clf)};
}

}  // namespace tsdl::zoo
