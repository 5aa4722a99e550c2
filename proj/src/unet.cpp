#include "mina/unet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "mina/error.hpp"
#include "mina/nn_ops.hpp"

namespace mina {

void UNetConfig::validate() const {
  if (channels.empty()) throw InvalidArgument("UNet channel list must not be empty");
  for (int c : channels)
    if (c <= 0) throw InvalidArgument("UNet channel counts must be positive");
  if (kernel <= 0 || kernel % 2 == 0) throw InvalidArgument("UNet kernel size must be odd");
  const int div = 1 << levels();
  if (input_size <= 0 || input_size % div != 0)
    throw InvalidArgument("UNet input size " + std::to_string(input_size) +
                          " must be divisible by " + std::to_string(div));
}

// Conv order: encoder level l uses convs 2l and 2l+1; decoders follow in
// forward order (deepest first), then the 1x1 head.
template <typename T>
void UNet<T>::build_layout(std::vector<std::pair<std::string, std::vector<int>>>& layout) const {
  const int levels = cfg_.levels();
  const int k = cfg_.kernel;
  auto add_conv = [&](const std::string& name, int cin, int cout, int ks) {
    layout.push_back({name + ".weight", {cout, cin, ks, ks}});
    layout.push_back({name + ".bias", {cout}});
  };
  int cin = 1;
  for (int l = 0; l < levels; ++l) {
    const int c = cfg_.channels[static_cast<std::size_t>(l)];
    add_conv("enc" + std::to_string(l + 1) + ".conv1", cin, c, k);
    add_conv("enc" + std::to_string(l + 1) + ".conv2", c, c, k);
    cin = c;
  }
  for (int l = levels - 2; l >= 0; --l) {
    const int c = cfg_.channels[static_cast<std::size_t>(l)];
    add_conv("dec" + std::to_string(l + 1) + ".conv1", cin + c, c, k);
    add_conv("dec" + std::to_string(l + 1) + ".conv2", c, c, k);
    cin = c;
  }
  add_conv("head", cin, 1, 1);
}

template <typename T>
UNet<T>::UNet(UNetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::vector<std::pair<std::string, std::vector<int>>> layout;
  build_layout(layout);
  std::mt19937_64 rng(seed);
  for (auto& [name, shape] : layout) {
    Tensor<T> t(shape);
    if (shape.size() == 4) {
      const double fan_in = static_cast<double>(shape[1]) * shape[2] * shape[3];
      const double bound = std::sqrt(6.0 / fan_in);
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : t.values()) v = static_cast<T>(dist(rng));
    }
    params_.push_back({name, std::move(t)});
  }
}

template <typename T>
UNet<T>::UNet(UNetConfig cfg, std::vector<Parameter<T>> params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
  std::vector<std::pair<std::string, std::vector<int>>> layout;
  build_layout(layout);
  if (layout.size() != params_.size())
    throw ShapeError("UNet expects " + std::to_string(layout.size()) + " parameter tensors, got " +
                     std::to_string(params_.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (params_[i].name != layout[i].first)
      throw ShapeError("UNet parameter " + std::to_string(i) + " should be '" + layout[i].first +
                       "', got '" + params_[i].name + "'");
    if (params_[i].value.shape() != layout[i].second)
      throw ShapeError("UNet parameter '" + layout[i].first + "' has shape " +
                       params_[i].value.shape_str() + ", expected " +
                       Tensor<T>::shape_string(layout[i].second));
  }
}

template <typename T>
std::size_t UNet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
std::vector<Tensor<T>> UNet<T>::zero_grads() const {
  std::vector<Tensor<T>> g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.value.shape());
  return g;
}

template <typename T>
Tensor<T> UNet<T>::forward(const Tensor<T>& input, Cache* cache) const {
  const int levels = cfg_.levels();
  const int div = 1 << levels;
  if (input.rank() != 3 || input.dim(0) != 1 || input.dim(1) % div != 0 || input.dim(2) % div != 0)
    throw ShapeError("UNet input must be [1, H, W] with H, W divisible by " + std::to_string(div) +
                     ", got " + input.shape_str());
  if (cache) *cache = Cache{};
  int conv = 0;
  auto run = [&](const Tensor<T>& x, bool activate) {
    const auto& w = params_[static_cast<std::size_t>(2 * conv)].value;
    const auto& b = params_[static_cast<std::size_t>(2 * conv + 1)].value;
    Tensor<T> y = nn::conv2d(x, w, b);
    if (activate) y = nn::relu(y);
    if (cache) {
      cache->conv_inputs.push_back(x);
      cache->conv_outputs.push_back(y);
    }
    ++conv;
    return y;
  };

  std::vector<Tensor<T>> skips;
  Tensor<T> h = input;
  for (int l = 0; l < levels; ++l) {
    h = run(run(h, true), true);
    if (l < levels - 1) {
      skips.push_back(h);
      std::vector<std::uint32_t> argmax;
      Tensor<T> pooled = nn::maxpool2(h, argmax);
      if (cache) {
        cache->pool_argmax.push_back(std::move(argmax));
        cache->pool_input_shapes.push_back(h.shape());
      }
      h = std::move(pooled);
    }
  }
  for (int l = levels - 2; l >= 0; --l) {
    h = nn::concat(nn::upsample2(h), skips[static_cast<std::size_t>(l)]);
    h = run(run(h, true), true);
  }
  return run(h, false);
}

template <typename T>
void UNet<T>::backward(const Cache& cache, const Tensor<T>& dlogits,
                       std::vector<Tensor<T>>& grads) const {
  const int levels = cfg_.levels();
  const int n_convs = 4 * levels - 1;
  if (static_cast<int>(cache.conv_inputs.size()) != n_convs)
    throw ShapeError("UNet backward: cache does not come from a full forward pass");
  if (grads.size() != params_.size()) throw ShapeError("UNet backward: gradient list size mismatch");

  // Backward through conv `i` (and its ReLU when `activated`).
  auto back = [&](int i, Tensor<T> g, bool activated, bool need_dx) {
    const auto idx = static_cast<std::size_t>(i);
    if (activated) g = nn::relu_backward(cache.conv_outputs[idx], g);
    Tensor<T> dx;
    nn::conv2d_backward(cache.conv_inputs[idx], params_[2 * idx].value, g, grads[2 * idx],
                        grads[2 * idx + 1], need_dx ? &dx : nullptr);
    return dx;
  };

  int conv = n_convs - 1;
  Tensor<T> g = back(conv--, dlogits, false, true);

  // Decoders in reverse forward order: shallowest first.
  std::vector<Tensor<T>> skip_grads(static_cast<std::size_t>(std::max(0, levels - 1)));
  for (int l = 0; l <= levels - 2; ++l) {
    g = back(conv--, std::move(g), true, true);
    g = back(conv--, std::move(g), true, true);
    const int up_channels = g.dim(0) - cfg_.channels[static_cast<std::size_t>(l)];
    auto [dup, dskip] = nn::concat_backward(g, up_channels);
    skip_grads[static_cast<std::size_t>(l)] = std::move(dskip);
    g = nn::upsample2_backward(dup);
  }
  for (int l = levels - 1; l >= 0; --l) {
    if (l < levels - 1) {
      const auto li = static_cast<std::size_t>(l);
      g = nn::maxpool2_backward(g, cache.pool_argmax[li], cache.pool_input_shapes[li]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += skip_grads[li][i];
    }
    g = back(conv--, std::move(g), true, true);
    g = back(conv--, std::move(g), true, l > 0);
  }
}

template class UNet<float>;
template class UNet<double>;

void SegmentationMask::validate() const {
  if (size <= 0 || prob.size() != static_cast<std::size_t>(size) * size)
    throw ShapeError("segmentation mask buffer does not match its size");
  if (!(threshold > 0.0f && threshold < 1.0f))
    throw InvalidArgument("segmentation threshold must lie in (0, 1)");
  for (float p : prob)
    if (!(p >= 0.0f && p <= 1.0f)) throw InvalidArgument("segmentation probability outside [0, 1]");
}

SegmentationMask mask_from_grid(const OccupancyGrid& grid, float threshold) {
  SegmentationMask m;
  m.size = grid.size();
  m.threshold = threshold;
  m.prob.resize(grid.pixels().size());
  for (std::size_t i = 0; i < m.prob.size(); ++i) m.prob[i] = grid.pixels()[i] ? 1.0f : 0.0f;
  return m;
}

template <typename T>
Tensor<T> grid_to_tensor(const OccupancyGrid& grid) {
  Tensor<T> t({1, grid.size(), grid.size()});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(grid.pixels()[i]) / T(255);
  return t;
}

template Tensor<float> grid_to_tensor<float>(const OccupancyGrid&);
template Tensor<double> grid_to_tensor<double>(const OccupancyGrid&);

SegmentationMask unet_forward(const OccupancyGrid& grid, const UNet<float>& model, float threshold) {
  if (grid.size() != model.config().input_size)
    throw ShapeError("unet_forward: grid is " + std::to_string(grid.size()) + "x" +
                     std::to_string(grid.size()) + " but the model expects " +
                     std::to_string(model.config().input_size));
  const Tensor<float> p = nn::sigmoid(model.forward(grid_to_tensor<float>(grid)));
  SegmentationMask m;
  m.size = grid.size();
  m.threshold = threshold;
  m.prob.assign(p.values().begin(), p.values().end());
  return m;
}

void write_mask(const std::string& path, const SegmentationMask& mask) {
  mask.validate();
  Image8 img{mask.size, mask.size, std::vector<std::uint8_t>(mask.prob.size())};
  for (std::size_t i = 0; i < mask.prob.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(mask.prob[i] * 255.0f));
  write_pgm(path, img);
  std::ofstream side(path + ".json");
  if (!side) throw InvalidArgument("cannot write mask sidecar '" + path + ".json'");
  side << nlohmann::json{{"threshold", mask.threshold}, {"size", mask.size}}.dump() << '\n';
}

SegmentationMask read_mask(const std::string& path) {
  Image8 img = read_pgm(path);
  if (img.width != img.height)
    throw FormatError("mask must be square", FormatError::Unit::Byte, 3);
  SegmentationMask m;
  m.size = img.width;
  m.prob.resize(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) m.prob[i] = img.pixels[i] / 255.0f;
  std::ifstream side(path + ".json");
  if (side) {
    try {
      const auto j = nlohmann::json::parse(side);
      m.threshold = j.at("threshold").get<float>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad mask sidecar: ") + e.what(), FormatError::Unit::Line, 1);
    }
  }
  m.validate();
  return m;
}

}  // namespace mina
