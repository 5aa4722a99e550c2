#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mina/sim.hpp"
#include "mina/unet.hpp"

namespace mina {

/// On-the-fly, lattice-preserving augmentations applied to each sample every
/// time it is drawn.
struct AugmentToggles {
  bool rot90 = true;
  bool flip = true;
  bool translate = true;
  int max_shift = 10;
};

struct TrainConfig {
  int epochs = 5;
  int batch_size = 16;
  /// Peak rate; decays along a half cosine to `min_learning_rate` over the run.
  double learning_rate = 3e-3;
  double min_learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Positive-class weight; unset means the background/leg pixel ratio of the data.
  std::optional<double> pos_weight = 1.0;
  AugmentToggles augment;
  /// Train on square crops of this side centered near returns (0 or the
  /// input size: whole grids). The network is fully convolutional, so
  /// inference still runs on whole grids.
  int crop_size = 64;
  /// Fraction of crops centered on a leg pixel; the rest center on other returns.
  double leg_crop_fraction = 0.5;
  /// Crops drawn from each sample per epoch when cropping.
  int crops_per_sample = 16;
  std::uint64_t seed = 1;
  /// Stop after this many optimizer steps (0 = run all epochs).
  std::size_t max_steps = 0;

  void validate() const;
};

/// Reads {"epochs", "batch_size", "learning_rate", "min_learning_rate",
/// "pos_weight", "seed", "max_steps", "crop_size", "leg_crop_fraction",
/// "crops_per_sample", "augment": {"rot90", "flip",
/// "translate", "max_shift"}, "channels": [...], "input_size"}; absent keys
/// keep their defaults and "pos_weight": null selects the pixel ratio.
void load_train_config(const std::string& path, TrainConfig& train, UNetConfig& unet);

/// Background pixels divided by leg pixels over every mask in `data`.
double positive_class_weight(const std::vector<TrainingPair>& data);

/// Shift/rotate/flip a grid the same way its mask is transformed.
OccupancyGrid apply_lattice_transform(const OccupancyGrid& g, int rot90, bool flip, int shift_x,
                                      int shift_y);

template <typename T>
class Adam {
 public:
  Adam(const UNet<T>& model, double lr, double beta1, double beta2, double eps);
  void step(UNet<T>& model, const std::vector<Tensor<T>>& grads);
  std::size_t steps() const { return t_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

struct TrainResult {
  UNet<float> model;
  std::vector<double> loss_history;        // one entry per optimizer step
  /// Before training, then after each epoch.
  std::vector<double> validation_history;
  double pos_weight = 1.0;
};

struct TrainProgress {
  std::size_t step = 0;
  int epoch = 0;
  double loss = 0.0;
};

/// Mean weighted BCE of `model` over `data` (no augmentation).
double evaluate_loss(const UNet<float>& model, const std::vector<TrainingPair>& data,
                     double pos_weight);

TrainResult train(const std::vector<TrainingPair>& data, const UNetConfig& unet_cfg,
                  const TrainConfig& train_cfg,
                  const std::vector<TrainingPair>* validation = nullptr,
                  const std::function<void(const TrainProgress&)>& progress = {});

}  // namespace mina
