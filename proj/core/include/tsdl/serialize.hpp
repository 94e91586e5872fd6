#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "tsdl/graph.hpp"

namespace tsdl {

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Tensor container layout (all integers little-endian):
///   magic (7 bytes) | u32 count |
///   count x { u16 name_len | name | u8 rank | rank x u32 extent | f32 values }
///   | u32 CRC-32 of every preceding byte
inline constexpr std::string_view weights_magic{"TSDLW1\0", 7};
inline constexpr std::string_view dataset_magic{"TSDLD1\0", 7};

void write_tensors(std::ostream& out, std::string_view magic, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_tensors(std::istream& in, std::string_view magic);

/// Parameters followed by buffers (batch-norm running statistics).
std::vector<NamedTensor> weights_manifest(Model& model);

void save_weights(Model& model, std::ostream& out);
void save_weights(Model& model, const std::filesystem::path& path);

/// Checks the whole manifest before touching the model: a missing entry, a
/// shape mismatch or an unexpected extra entry raises FormatError naming the
/// first offending tensor.
void load_weights(Model& model, std::istream& in);
void load_weights(Model& model, const std::filesystem::path& path);

}  // namespace tsdl
