#include "mina/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "json.hpp"
#include "mina/error.hpp"
#include "mina/nn_ops.hpp"

namespace mina {

void TrainConfig::validate() const {
  if (epochs <= 0) throw InvalidArgument("epochs must be > 0");
  if (batch_size <= 0) throw InvalidArgument("batch_size must be > 0");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
  if (pos_weight && !(*pos_weight > 0.0)) throw InvalidArgument("pos_weight must be > 0");
  if (augment.max_shift < 0) throw InvalidArgument("max_shift must be >= 0");
  if (!(min_learning_rate > 0.0) || min_learning_rate > learning_rate)
    throw InvalidArgument("min_learning_rate must be in (0, learning_rate]");
  if (crop_size < 0) throw InvalidArgument("crop_size must be >= 0");
  if (!(leg_crop_fraction >= 0.0 && leg_crop_fraction <= 1.0))
    throw InvalidArgument("leg_crop_fraction must be in [0, 1]");
  if (crops_per_sample <= 0) throw InvalidArgument("crops_per_sample must be > 0");
}

void load_train_config(const std::string& path, TrainConfig& train, UNetConfig& unet) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open training config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (j.contains("epochs")) train.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_size")) train.batch_size = j.at("batch_size").get<int>();
    if (j.contains("learning_rate")) train.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("min_learning_rate")) train.min_learning_rate = j.at("min_learning_rate").get<double>();
    if (j.contains("crop_size")) train.crop_size = j.at("crop_size").get<int>();
    if (j.contains("leg_crop_fraction")) train.leg_crop_fraction = j.at("leg_crop_fraction").get<double>();
    if (j.contains("crops_per_sample")) train.crops_per_sample = j.at("crops_per_sample").get<int>();
    if (j.contains("pos_weight"))
      train.pos_weight = j.at("pos_weight").is_null() ? std::nullopt : std::optional(j.at("pos_weight").get<double>());
    if (j.contains("seed")) train.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("max_steps")) train.max_steps = j.at("max_steps").get<std::size_t>();
    if (j.contains("augment")) {
      const auto& a = j.at("augment");
      if (a.contains("rot90")) train.augment.rot90 = a.at("rot90").get<bool>();
      if (a.contains("flip")) train.augment.flip = a.at("flip").get<bool>();
      if (a.contains("translate")) train.augment.translate = a.at("translate").get<bool>();
      if (a.contains("max_shift")) train.augment.max_shift = a.at("max_shift").get<int>();
    }
    if (j.contains("channels")) unet.channels = j.at("channels").get<std::vector<int>>();
    if (j.contains("input_size")) unet.input_size = j.at("input_size").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad training config: ") + e.what(), FormatError::Unit::Line, 1);
  }
  train.validate();
  unet.validate();
}

double positive_class_weight(const std::vector<TrainingPair>& data) {
  std::size_t pos = 0, total = 0;
  for (const auto& p : data) {
    pos += p.mask.count_occupied();
    total += p.mask.pixels().size();
  }
  if (pos == 0) throw InvalidArgument("training masks contain no leg pixels");
  return static_cast<double>(total - pos) / static_cast<double>(pos);
}

OccupancyGrid apply_lattice_transform(const OccupancyGrid& g, int rot90, bool flip, int shift_x,
                                      int shift_y) {
  const int n = g.size();
  const int l = g.spec().l();
  OccupancyGrid out(g.spec());
  const int turns = ((rot90 % 4) + 4) % 4;
  for (int px = 0; px < n; ++px)
    for (int py = 0; py < n; ++py) {
      if (!g.occupied(px, py)) continue;
      int x = px - l, y = py - l;
      for (int k = 0; k < turns; ++k) {
        const int t = x;
        x = -y;
        y = t;
      }
      if (flip) y = -y;
      const int qx = x + l + shift_x;
      const int qy = y + l + shift_y;
      if (out.in_bounds(qx, qy)) out.set(qx, qy, true);
    }
  return out;
}

template <typename T>
Adam<T>::Adam(const UNet<T>& model, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(model.zero_grads()), v_(model.zero_grads()) {}

template <typename T>
void Adam<T>::step(UNet<T>& model, const std::vector<Tensor<T>>& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto& params = model.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].value;
    auto& m = m_[i];
    auto& v = v_[i];
    const auto& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      m[k] = static_cast<T>(beta1_ * m[k] + (1.0 - beta1_) * gk);
      v[k] = static_cast<T>(beta2_ * v[k] + (1.0 - beta2_) * gk * gk);
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] = static_cast<T>(p[k] - lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

double evaluate_loss(const UNet<float>& model, const std::vector<TrainingPair>& data,
                     double pos_weight) {
  if (data.empty()) throw InvalidArgument("evaluate_loss: empty data set");
  double sum = 0.0;
  for (const auto& pair : data) {
    const Tensor<float> logits = model.forward(grid_to_tensor<float>(pair.grid));
    sum += nn::weighted_bce_with_logits<float>(logits, grid_to_tensor<float>(pair.mask), pos_weight, nullptr);
  }
  return sum / static_cast<double>(data.size());
}

namespace {

/// Pixel indices that crops may be centered on.
struct CropCenters {
  std::vector<std::uint32_t> leg, other;
};

CropCenters crop_centers(const TrainingPair& p) {
  CropCenters c;
  const auto& g = p.grid.pixels();
  const auto& m = p.mask.pixels();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (m[i]) c.leg.push_back(static_cast<std::uint32_t>(i));
    else if (g[i]) c.other.push_back(static_cast<std::uint32_t>(i));
  }
  return c;
}

/// Side x side window at (x0, y0), rotated by quarter turns and flipped about
/// the window center, as a [1, side, side] tensor in {0, 1}.
Tensor<float> window(const OccupancyGrid& g, int x0, int y0, int side, int rot, bool flip) {
  Tensor<float> t({1, side, side});
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      int x = i, y = flip ? side - 1 - j : j;
      for (int k = 0; k < rot; ++k) {
        const int tx = x;
        x = side - 1 - y;
        y = tx;
      }
      t.at(0, x, y) = g.occupied(x0 + i, y0 + j) ? 1.0f : 0.0f;
    }
  return t;
}

struct Sample {
  Tensor<float> input, target;
};

Sample whole_grid_sample(const TrainingPair& p, const AugmentToggles& aug, std::mt19937_64& rng) {
  const int rot = aug.rot90 ? std::uniform_int_distribution<int>(0, 3)(rng) : 0;
  const bool flip = aug.flip && std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  std::uniform_int_distribution<int> shift(-aug.max_shift, aug.max_shift);
  const int sx = aug.translate ? shift(rng) : 0;
  const int sy = aug.translate ? shift(rng) : 0;
  if (rot == 0 && !flip && sx == 0 && sy == 0) return {grid_to_tensor<float>(p.grid), grid_to_tensor<float>(p.mask)};
  return {grid_to_tensor<float>(apply_lattice_transform(p.grid, rot, flip, sx, sy)),
          grid_to_tensor<float>(apply_lattice_transform(p.mask, rot, flip, sx, sy))};
}

Sample crop_sample(const TrainingPair& p, const CropCenters& centers, const TrainConfig& cfg,
                   std::mt19937_64& rng) {
  const int n = p.grid.size();
  const int side = cfg.crop_size;
  const bool want_leg = std::bernoulli_distribution(cfg.leg_crop_fraction)(rng);
  const auto& pool = (want_leg && !centers.leg.empty()) || centers.other.empty() ? centers.leg : centers.other;
  int cx, cy;
  if (pool.empty()) {
    cx = std::uniform_int_distribution<int>(0, n - 1)(rng);
    cy = std::uniform_int_distribution<int>(0, n - 1)(rng);
  } else {
    const std::uint32_t idx = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    cx = static_cast<int>(idx) / n;
    cy = static_cast<int>(idx) % n;
  }
  if (cfg.augment.translate) {
    std::uniform_int_distribution<int> jitter(-side / 4, side / 4);
    cx += jitter(rng);
    cy += jitter(rng);
  }
  const int x0 = std::clamp(cx - side / 2, 0, n - side);
  const int y0 = std::clamp(cy - side / 2, 0, n - side);
  const int rot = cfg.augment.rot90 ? std::uniform_int_distribution<int>(0, 3)(rng) : 0;
  const bool flip = cfg.augment.flip && std::uniform_int_distribution<int>(0, 1)(rng) == 1;
  return {window(p.grid, x0, y0, side, rot, flip), window(p.mask, x0, y0, side, rot, flip)};
}

}  // namespace

TrainResult train(const std::vector<TrainingPair>& data, const UNetConfig& unet_cfg,
                  const TrainConfig& cfg, const std::vector<TrainingPair>* validation,
                  const std::function<void(const TrainProgress&)>& progress) {
  cfg.validate();
  unet_cfg.validate();
  if (data.empty()) throw InvalidArgument("train: data set is empty");
  for (const auto& p : data)
    if (p.grid.size() != unet_cfg.input_size || p.mask.size() != unet_cfg.input_size)
      throw ShapeError("train: sample size does not match model input size " +
                       std::to_string(unet_cfg.input_size));
  const bool cropping = cfg.crop_size > 0 && cfg.crop_size < unet_cfg.input_size;
  if (cropping) {
    const int stride = 1 << (unet_cfg.levels() - 1);
    if (cfg.crop_size % stride != 0)
      throw InvalidArgument("crop_size " + std::to_string(cfg.crop_size) + " must be a multiple of " +
                            std::to_string(stride));
  }

  TrainResult result{UNet<float>(unet_cfg, cfg.seed), {}, {}, 1.0};
  result.pos_weight = cfg.pos_weight ? *cfg.pos_weight : positive_class_weight(data);
  UNet<float>& model = result.model;
  Adam<float> adam(model, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  if (validation && !validation->empty())
    result.validation_history.push_back(evaluate_loss(model, *validation, result.pos_weight));

  std::vector<CropCenters> centers;
  if (cropping)
    for (const auto& p : data) centers.push_back(crop_centers(p));

  // Each sample appears once per epoch, or crops_per_sample times when cropping.
  const std::size_t repeats = cropping ? static_cast<std::size_t>(cfg.crops_per_sample) : 1;
  std::vector<std::size_t> order(data.size() * repeats);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i % data.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  std::size_t total_steps = static_cast<std::size_t>(cfg.epochs) * ((order.size() + bs - 1) / bs);
  if (cfg.max_steps) total_steps = std::min(total_steps, cfg.max_steps);

  bool done = false;
  for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size() && !done; start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      auto grads = model.zero_grads();
      double batch_loss = 0.0;
      const auto batch = static_cast<float>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        const Sample s = cropping ? crop_sample(data[i], centers[i], cfg, rng) : whole_grid_sample(data[i], cfg.augment, rng);
        UNet<float>::Cache cache;
        const Tensor<float> logits = model.forward(s.input, &cache);
        Tensor<float> dlogits;
        batch_loss += nn::weighted_bce_with_logits(logits, s.target, result.pos_weight, &dlogits);
        for (auto& v : dlogits.values()) v /= batch;
        model.backward(cache, dlogits, grads);
      }
      batch_loss /= static_cast<double>(end - start);
      const std::size_t step = result.loss_history.size();
      if (!std::isfinite(batch_loss)) throw TrainingDiverged(step);
      const double phase = static_cast<double>(step) / static_cast<double>(std::max<std::size_t>(1, total_steps));
      adam.set_learning_rate(cfg.min_learning_rate + 0.5 * (cfg.learning_rate - cfg.min_learning_rate) *
                                                         (1.0 + std::cos(std::numbers::pi * phase)));
      adam.step(model, grads);
      result.loss_history.push_back(batch_loss);
      if (progress) progress({step, epoch, batch_loss});
      if (cfg.max_steps && result.loss_history.size() >= cfg.max_steps) done = true;
    }
    if (validation && !validation->empty())
      result.validation_history.push_back(evaluate_loss(model, *validation, result.pos_weight));
  }
  for (const auto& p : model.params())
    if (!p.value.all_finite()) throw TrainingDiverged(result.loss_history.size());
  return result;
}

}  // namespace mina
