#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mina/unet.hpp"

namespace mina {

// Model file: magic "MINASEG1", u32 layer count, then per layer
// u32 name length, name bytes, u32 rank, u32 dims, raw f32 weights.
// All integers and floats little-endian. A "meta.input_size" layer comes first.

std::vector<std::uint8_t> serialize_model(const UNet<float>& model);
UNet<float> deserialize_model(const std::vector<std::uint8_t>& bytes);

void save_model(const std::string& path, const UNet<float>& model);
/// Errors report the byte offset; no partial model is ever returned.
UNet<float> load_model(const std::string& path);

}  // namespace mina
