#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsdl/graph.hpp"
#include "tsdl/layers/activation.hpp"

namespace tsdl::zoo {

/// Per-build hyperparameter overrides, e.g. {"filters", "8"}. Keys must be
/// among the architecture's default_hyper keys.
using Hyper = std::map<std::string, std::string>;

/// Structural family tags counted by contracts, in a fixed order.
inline const std::vector<std::string>& family_tags() {
  static const std::vector<std::string> tags{"conv1d",  "lstm",     "gru",      "bilstm",    "bigru",    "pooling",
                                             "batchnorm", "dropout", "se_block", "rta_block", "attention"};
  return tags;
}

using FamilyCounts = std::map<std::string, std::size_t>;

/// Counts of every tag in family_tags(), zeros included.
FamilyCounts complete_counts(const FamilyCounts& sparse);

struct ArchitectureDescriptor {
  std::string name;
  std::string description;
  FamilyCounts family_contract;  // under default_hyper
  Hyper default_hyper;
  std::size_t inputs = 1;
  std::string citation;
  /// Rank of the embedding output excluding batch: 2 for sequences, 1 for vectors.
  std::size_t output_rank = 2;
};

enum class TopKind { forecast, classify, anomaly, custom };

std::string_view to_string(TopKind kind);

struct TopLayer {
  enum class Op { flatten, dropout, dense, reshape };
  std::string name;
  Op op = Op::flatten;
  std::size_t units = 0;
  Activation activation;
  real rate = 0;
  Shape shape;
};

/// Specialisation head appended after the embedding output.
struct TopModule {
  TopKind kind = TopKind::custom;
  std::vector<TopLayer> layers;
  /// Per-sample output shape once attached.
  Shape output_shape;

  /// Appends the head to `spec`, fed from `from`; returns the head's last node.
  std::string attach(GraphSpec& spec, const std::string& from) const;
};

/// flatten -> dense(horizon*features, activation) -> reshape [horizon, features]
TopModule forecast_top(std::size_t horizon, std::size_t features = 1, Activation activation = Activation::relu());
/// flatten -> dropout(0.2) -> dense(20, relu) -> dense(10, relu) -> dense(classes, softmax)
TopModule classify_top(std::size_t classes);
/// flatten -> dense(32) -> dense(64) -> dense(features) -> dense(steps*features) -> reshape [steps, features]
TopModule anomaly_top(std::size_t steps, std::size_t features);

struct TopRequest {
  TopKind kind = TopKind::forecast;
  std::size_t a = 0;  // horizon, classes or steps
  std::size_t b = 1;  // features (forecast, anomaly)
};
TopModule make_top(const TopRequest& request);

struct BuildOptions {
  Hyper hyper;
  bool include_top = false;
  std::optional<TopModule> top;
  std::uint64_t seed = 0;
};

const std::vector<ArchitectureDescriptor>& list_models();
const ArchitectureDescriptor& descriptor(const std::string& name);
bool has_model(const std::string& name);

/// Contract counts for `name` under `hyper` layered over the defaults.
FamilyCounts family_contract(const std::string& name, const Hyper& hyper = {});

/// Embedding graph declaration; callers may extend it before building.
GraphSpec embedding_spec(const std::string& name, const Shape& input, const Hyper& hyper = {});

/// Builds the embedding and, when requested, the head. Throws RegistryError
/// for unknown names and ShapeError naming the minimum input length when the
/// time axis is too short for the pooling chain.
Model build_model(const std::string& name, const Shape& input, const BuildOptions& options = {});

/// Smallest time extent (channels fixed) for which `name` builds.
std::size_t minimum_length(const std::string& name, std::size_t channels = 1, const Hyper& hyper = {});

struct Description {
  ArchitectureDescriptor descriptor;
  FamilyCounts family_contract;
  Shape input_shape;
  Shape output_shape;
  std::size_t parameter_count = 0;
  std::vector<NodeInfo> nodes;
};

/// Builds `name` at `input` (default [1000, 1]) without a head and reports it.
Description describe(const std::string& name, const Hyper& hyper = {}, const Shape& input = {1000, 1});

/// Autoencoder and classifier sharing the "encoder_*" node names, so encoder
/// weights transfer by name from the first to the second.
struct AutoencoderPair {
  Model autoencoder;
  Model classifier;
};
AutoencoderPair build_autoencoder_pair(const Shape& input, const BuildOptions& options = {});

/// Prefix shared by the encoder nodes of the autoencoder family.
inline constexpr std::string_view encoder_prefix = "encoder_";

}  // namespace tsdl::zoo
