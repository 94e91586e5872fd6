#include "tsdl/serialize.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "tsdl/error.hpp"

namespace tsdl {

namespace {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

template <class T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <class T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > data_.size()) throw FormatError(std::string("truncated file while reading ") + what);
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string_view bytes(std::size_t n, const char* what) {
    if (pos_ + n > data_.size()) throw FormatError(std::string("truncated file while reading ") + what);
    std::string_view v = data_.substr(pos_, n);
    pos_ += n;
    return v;
  }

  std::size_t position() const { return pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

void write_tensors(std::ostream& out, std::string_view magic, const std::vector<NamedTensor>& entries) {
  std::string buf(magic);
  if (entries.size() > std::numeric_limits<std::uint32_t>::max()) throw FormatError("too many tensors");
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(entries.size()));
  for (const NamedTensor& e : entries) {
    if (e.name.size() > std::numeric_limits<std::uint16_t>::max()) throw FormatError("name too long: " + e.name);
    put<std::uint16_t>(buf, static_cast<std::uint16_t>(e.name.size()));
    buf += e.name;
    put<std::uint8_t>(buf, static_cast<std::uint8_t>(e.value.rank()));
    for (std::size_t ext : e.value.shape()) put<std::uint32_t>(buf, static_cast<std::uint32_t>(ext));
    for (real v : e.value.data()) put<float>(buf, static_cast<float>(v));
  }
  put<std::uint32_t>(buf, crc_of(buf));
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FormatError("write failed");
}

std::vector<NamedTensor> read_tensors(std::istream& in, std::string_view magic) {
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string data = ss.str();
  if (data.size() < magic.size() + 8) throw FormatError("file too short to be a tensor container");
  if (std::string_view(data).substr(0, magic.size()) != magic) throw FormatError("bad magic bytes");
  const std::string_view body(data.data(), data.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, data.data() + body.size(), 4);
  if (stored != crc_of(body)) throw FormatError("CRC mismatch: file is corrupted");

  Reader r(body);
  r.bytes(magic.size(), "magic");
  const auto count = r.get<std::uint32_t>("count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint16_t>("name length");
    std::string name(r.bytes(len, "name"));
    const auto rank = r.get<std::uint8_t>("rank");
    Shape shape;
    for (std::uint8_t k = 0; k < rank; ++k) shape.push_back(r.get<std::uint32_t>("extent"));
    std::vector<real> values(element_count(shape));
    for (real& v : values) v = static_cast<real>(r.get<float>("values"));
    try {
      Tensor value(shape, std::move(values));
      out.push_back({std::move(name), std::move(value)});
    } catch (const ShapeError& e) {
      throw FormatError("entry '" + name + "': " + e.what());
    }
  }
  if (r.position() != body.size()) throw FormatError("trailing bytes after last entry");
  return out;
}

std::vector<NamedTensor> weights_manifest(Model& model) {
  std::vector<NamedTensor> out;
  for (ParamRef& ref : model.parameters()) out.push_back({ref.name, ref.param->value});
  for (BufferRef& ref : model.buffers()) out.push_back({ref.name, *ref.buffer});
  return out;
}

void save_weights(Model& model, std::ostream& out) { write_tensors(out, weights_magic, weights_manifest(model)); }

void save_weights(Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  save_weights(model, out);
}

void load_weights(Model& model, std::istream& in) {
  std::vector<NamedTensor> entries = read_tensors(in, weights_magic);
  std::map<std::string, Tensor*> file;
  for (NamedTensor& e : entries) {
    if (!file.emplace(e.name, &e.value).second) throw FormatError("duplicate entry '" + e.name + "'");
  }
  std::vector<std::pair<Tensor*, Tensor*>> plan;
  auto match = [&](const std::string& name, Tensor* target) {
    auto it = file.find(name);
    if (it == file.end()) throw FormatError("weights file is missing '" + name + "'");
    if (it->second->shape() != target->shape()) {
      throw FormatError("shape mismatch for '" + name + "': file " + to_string(it->second->shape()) +
                        ", model " + to_string(target->shape()));
    }
    plan.emplace_back(target, it->second);
    file.erase(it);
  };
  for (ParamRef& ref : model.parameters()) match(ref.name, &ref.param->value);
  for (BufferRef& ref : model.buffers()) match(ref.name, ref.buffer);
  if (!file.empty()) {
    for (const NamedTensor& e : entries)
      if (file.count(e.name)) throw FormatError("weights file has unexpected entry '" + e.name + "'");
  }
  for (auto& [target, source] : plan) *target = std::move(*source);
}

void load_weights(Model& model, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  load_weights(model, in);
}

}  // namespace tsdl
