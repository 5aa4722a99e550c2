#include "mina/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <regex>
#include <span>

#include "mina/error.hpp"

namespace mina {

namespace {

constexpr char kMagic[8] = {'M', 'I', 'N', 'A', 'S', 'E', 'G', '1'};
constexpr char kInputSizeLayer[] = "meta.input_size";

static_assert(std::endian::native == std::endian::little, "model I/O assumes a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool at_end() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n)
      throw FormatError(std::string("model file truncated while reading ") + what,
                        FormatError::Unit::Byte, pos_);
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const UNet<float>& model) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_u32(out, static_cast<std::uint32_t>(model.params().size() + 1));
  auto put_layer = [&](const std::string& name, const std::vector<int>& shape,
                       std::span<const float> values) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (int d : shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : values) put_f32(out, v);
  };
  const float input_size = static_cast<float>(model.config().input_size);
  put_layer(kInputSizeLayer, {1}, std::span<const float>(&input_size, 1));
  for (const auto& p : model.params()) put_layer(p.name, p.value.shape(), p.value.values());
  return out;
}

UNet<float> deserialize_model(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const std::string magic = r.bytes(8, "magic");
  if (std::memcmp(magic.data(), kMagic, 8) != 0)
    throw FormatError("bad model magic (expected MINASEG1)", FormatError::Unit::Byte, 0);
  const std::size_t count_at = r.pos();
  const std::uint32_t count = r.u32("layer count");
  if (count < 2 || count > 4096)
    throw FormatError("implausible layer count " + std::to_string(count), FormatError::Unit::Byte, count_at);

  std::vector<Parameter<float>> params;
  UNetConfig cfg;
  cfg.channels.clear();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t layer_at = r.pos();
    const std::uint32_t name_len = r.u32("name length");
    if (name_len == 0 || name_len > 256)
      throw FormatError("bad layer name length", FormatError::Unit::Byte, layer_at);
    std::string name = r.bytes(name_len, "layer name");
    const std::size_t rank_at = r.pos();
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > 8) throw FormatError("bad layer rank", FormatError::Unit::Byte, rank_at);
    std::vector<int> shape;
    std::size_t elements = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::size_t dim_at = r.pos();
      const std::uint32_t dim = r.u32("dimension");
      if (dim == 0 || dim > (1u << 20)) throw FormatError("bad layer dimension", FormatError::Unit::Byte, dim_at);
      shape.push_back(static_cast<int>(dim));
      elements *= dim;
    }
    if (elements > (std::size_t{1} << 26))
      throw FormatError("layer too large", FormatError::Unit::Byte, rank_at);
    std::vector<float> values(elements);
    for (auto& v : values) v = r.f32("weights");

    if (i == 0) {
      if (name != kInputSizeLayer || elements != 1)
        throw FormatError("first layer must be " + std::string(kInputSizeLayer), FormatError::Unit::Byte, layer_at);
      cfg.input_size = static_cast<int>(values[0]);
      continue;
    }
    static const std::regex enc_conv1(R"(enc(\d+)\.conv1\.weight)");
    std::smatch m;
    if (std::regex_match(name, m, enc_conv1)) {
      if (shape.size() != 4) throw FormatError("encoder weight must be rank 4", FormatError::Unit::Byte, layer_at);
      cfg.channels.push_back(shape[0]);
      cfg.kernel = shape[2];
    }
    params.push_back({std::move(name), Tensor<float>(std::move(shape), std::move(values))});
  }
  if (!r.at_end()) throw FormatError("trailing bytes after last layer", FormatError::Unit::Byte, r.pos());
  try {
    return UNet<float>(cfg, std::move(params));
  } catch (const Error& e) {
    throw FormatError(std::string("model layout inconsistent: ") + e.what(), FormatError::Unit::Byte, count_at);
  }
}

void save_model(const std::string& path, const UNet<float>& model) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InvalidArgument("failed writing '" + path + "'");
}

UNet<float> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open model '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace mina
