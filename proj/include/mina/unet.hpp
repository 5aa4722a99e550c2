#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mina/raster.hpp"
#include "mina/tensor.hpp"

namespace mina {

struct UNetConfig {
  int input_size = 256;
  /// Channels per encoder level; the last level is the bottleneck.
  std::vector<int> channels{8, 16, 32};
  int kernel = 3;

  int levels() const { return static_cast<int>(channels.size()); }
  void validate() const;
  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

/// Small U-Net: two 3x3 conv+ReLU per level, 2x2 max-pool down, nearest
/// upsampling plus skip concatenation up, and a 1x1 head producing logits.
template <typename T>
class UNet {
 public:
  /// He-uniform kernels, zero biases.
  UNet(UNetConfig cfg, std::uint64_t seed);
  /// Adopts `params`, which must match the layout `cfg` implies.
  UNet(UNetConfig cfg, std::vector<Parameter<T>> params);

  const UNetConfig& config() const { return cfg_; }
  const std::vector<Parameter<T>>& params() const { return params_; }
  std::vector<Parameter<T>>& params() { return params_; }
  std::size_t parameter_count() const;

  /// Activations kept for the backward pass.
  struct Cache {
    std::vector<Tensor<T>> conv_inputs;
    std::vector<Tensor<T>> conv_outputs;  // after ReLU (head: raw logits)
    std::vector<std::vector<std::uint32_t>> pool_argmax;
    std::vector<std::vector<int>> pool_input_shapes;
  };

  /// [1, H, W] input to [1, H, W] logits. H and W must be divisible by
  /// 2^levels.
  Tensor<T> forward(const Tensor<T>& input, Cache* cache = nullptr) const;

  /// Adds the parameter gradients for `dlogits` into `grads` (one tensor per
  /// parameter, same order as params()).
  void backward(const Cache& cache, const Tensor<T>& dlogits, std::vector<Tensor<T>>& grads) const;

  std::vector<Tensor<T>> zero_grads() const;

  /// Same weights in another precision.
  template <typename U>
  UNet<U> cast() const {
    std::vector<Parameter<U>> ps;
    for (const auto& p : params_) {
      std::vector<U> d(p.value.values().begin(), p.value.values().end());
      ps.push_back({p.name, Tensor<U>(p.value.shape(), std::move(d))});
    }
    return UNet<U>(cfg_, std::move(ps));
  }

 private:
  void build_layout(std::vector<std::pair<std::string, std::vector<int>>>& layout) const;

  UNetConfig cfg_;
  std::vector<Parameter<T>> params_;
};

/// Per-pixel leg probabilities plus the binarization threshold.
struct SegmentationMask {
  int size = 0;
  std::vector<float> prob;  // size*size, indexed [pixel_x * size + pixel_y]
  float threshold = 0.5f;

  float at(int px, int py) const { return prob[static_cast<std::size_t>(px) * size + py]; }
  bool on(int px, int py) const { return at(px, py) >= threshold; }
  void validate() const;
};

/// Probability 1 on occupied pixels of `grid`, 0 elsewhere.
SegmentationMask mask_from_grid(const OccupancyGrid& grid, float threshold = 0.5f);

/// Grid pixels divided by 255, shaped [1, N, N].
template <typename T>
Tensor<T> grid_to_tensor(const OccupancyGrid& grid);

SegmentationMask unet_forward(const OccupancyGrid& grid, const UNet<float>& model,
                              float threshold = 0.5f);

/// Probability PGM (quantized 0..255) plus a JSON sidecar at `path + ".json"`
/// recording the threshold.
void write_mask(const std::string& path, const SegmentationMask& mask);
SegmentationMask read_mask(const std::string& path);

}  // namespace mina
