#include "sslforge/toymodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "sslforge/kernels.hpp"
#include "sslforge/rng.hpp"
#include "sslforge/util.hpp"

namespace sslforge {
namespace {

constexpr char kModelMagic[4] = {'S', 'F', 'T', 'M'};
constexpr std::uint32_t kModelVersion = 1;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

}  // namespace

void ToyModelConfig::validate() const {
  if (input_dim == 0) throw Error("toy model: input_dim must be positive");
  if (num_classes < 2) throw Error("toy model: need at least 2 classes");
  for (const std::size_t h : hidden_dims) {
    if (h == 0) throw Error("toy model: hidden dims must be positive");
  }
  if (!(peak_learning_rate > 0.0)) {
    throw Error("toy model: peak_learning_rate must be positive");
  }
  if (warmup_steps == 0) {
    throw Error("toy model: warmup_steps must be >= 1");
  }
}

ToyModel::ToyModel(ToyModelConfig config) : config_(std::move(config)) {
  config_.validate();

  std::vector<std::size_t> dims;
  dims.push_back(config_.input_dim);
  for (const std::size_t h : config_.hidden_dims) dims.push_back(h);
  dims.push_back(config_.num_classes);

  layout_.mask_embedding = 0;
  std::size_t offset = config_.input_dim;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Layout::LayerSpan span;
    span.in = dims[l];
    span.out = dims[l + 1];
    span.w = offset;
    offset += span.in * span.out;
    span.b = offset;
    offset += span.out;
    layout_.layers.push_back(span);
  }
  layout_.total = offset;

  params_.assign(layout_.total, 0.0);
  adam_m_.assign(layout_.total, 0.0);
  adam_v_.assign(layout_.total, 0.0);

  Rng rng(config_.seed);
  for (std::size_t d = 0; d < config_.input_dim; ++d) {
    params_[layout_.mask_embedding + d] = rng.uniform(-0.1, 0.1);
  }
  for (const auto& layer : layout_.layers) {
    const double r = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    for (std::size_t i = 0; i < layer.in * layer.out; ++i) {
      params_[layer.w + i] = rng.uniform(-r, r);
    }
    // Biases start at zero.
  }
}

double ToyModel::learning_rate_at(std::size_t t) const {
  const double progress =
      static_cast<double>(t) / static_cast<double>(config_.warmup_steps);
  return config_.peak_learning_rate * std::min(1.0, progress);
}

void ToyModel::check_inputs(const FrameFeatureSequence& features,
                            const FrameLabelSequence* labels,
                            const MaskSpec& mask) const {
  if (features.dim != config_.input_dim) {
    throw Error("toy model: feature dim " + std::to_string(features.dim) +
                " does not match model input dim " +
                std::to_string(config_.input_dim));
  }
  const std::size_t frames = features.frames();
  if (mask.total_frames != frames) {
    throw Error("toy model: mask covers " + std::to_string(mask.total_frames) +
                " frames but features have " + std::to_string(frames));
  }
  for (const std::uint32_t t : mask.masked) {
    if (t >= frames) {
      throw Error("toy model: mask index " + std::to_string(t) +
                  " out of range");
    }
  }
  if (labels != nullptr) {
    if (labels->labels.size() != frames) {
      throw Error("toy model: " + std::to_string(labels->labels.size()) +
                  " labels for " + std::to_string(frames) + " frames");
    }
    for (const std::uint32_t y : labels->labels) {
      if (y >= config_.num_classes) {
        throw Error("toy model: label " + std::to_string(y) +
                    " out of range for " + std::to_string(config_.num_classes) +
                    " classes");
      }
    }
  }
}

std::vector<double> ToyModel::forward(const FrameFeatureSequence& features,
                                      const MaskSpec& mask) const {
  check_inputs(features, nullptr, mask);
  const std::size_t frames = features.frames();
  const std::size_t classes = config_.num_classes;
  std::vector<double> logprobs(frames * classes);

  const std::span<const double> mask_emb{params_.data() + layout_.mask_embedding,
                                         config_.input_dim};
  std::vector<double> current;
  std::vector<double> next;
  for (std::size_t t = 0; t < frames; ++t) {
    const std::span<const double> input =
        mask.is_masked(static_cast<std::uint32_t>(t)) ? mask_emb
                                                      : features.frame(t);
    current.assign(input.begin(), input.end());
    for (std::size_t l = 0; l < layout_.layers.size(); ++l) {
      const auto& layer = layout_.layers[l];
      next.resize(layer.out);
      for (std::size_t j = 0; j < layer.out; ++j) {
        const std::span<const double> w{params_.data() + layer.w + j * layer.in,
                                        layer.in};
        next[j] = kernels::dot(w, current) + params_[layer.b + j];
      }
      if (l + 1 < layout_.layers.size()) {
        for (double& v : next) v = std::tanh(v);
      }
      current.swap(next);
    }
    // Log-softmax: rows are exact log-distributions up to rounding.
    const double m = *std::max_element(current.begin(), current.end());
    double sum = 0.0;
    for (const double z : current) sum += std::exp(z - m);
    const double lse = m + std::log(sum);
    for (std::size_t c = 0; c < classes; ++c) {
      logprobs[t * classes + c] = current[c] - lse;
    }
  }
  return logprobs;
}

LossResult ToyModel::compute_loss(const FrameFeatureSequence& features,
                                  const FrameLabelSequence& labels,
                                  const MaskSpec& mask) const {
  return loss_and_gradient(features, labels, mask, nullptr);
}

LossResult ToyModel::loss_and_gradient(const FrameFeatureSequence& features,
                                       const FrameLabelSequence& labels,
                                       const MaskSpec& mask,
                                       std::vector<double>* grad) const {
  check_inputs(features, &labels, mask);
  if (grad != nullptr) grad->assign(params_.size(), 0.0);
  const std::size_t masked_count = mask.masked.size();
  if (masked_count == 0) {
    return LossResult{0.0, 0, true};
  }

  const std::size_t num_layers = layout_.layers.size();
  const std::span<const double> mask_emb{params_.data() + layout_.mask_embedding,
                                         config_.input_dim};
  const double inv_count = 1.0 / static_cast<double>(masked_count);

  double loss = 0.0;
  // Per masked frame: forward with stored activations, then backprop.
  // Unmasked frames contribute neither loss nor gradient, so they are
  // skipped entirely.
  std::vector<std::vector<double>> acts(num_layers + 1);
  std::vector<double> delta;
  std::vector<double> delta_prev;
  for (const std::uint32_t t : mask.masked) {
    acts[0].assign(mask_emb.begin(), mask_emb.end());
    for (std::size_t l = 0; l < num_layers; ++l) {
      const auto& layer = layout_.layers[l];
      acts[l + 1].resize(layer.out);
      for (std::size_t j = 0; j < layer.out; ++j) {
        const std::span<const double> w{params_.data() + layer.w + j * layer.in,
                                        layer.in};
        acts[l + 1][j] = kernels::dot(w, acts[l]) + params_[layer.b + j];
      }
      if (l + 1 < num_layers) {
        for (double& v : acts[l + 1]) v = std::tanh(v);
      }
    }

    std::vector<double>& logits = acts[num_layers];
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (const double z : logits) sum += std::exp(z - m);
    const double lse = m + std::log(sum);
    const std::uint32_t label = labels.labels[t];
    loss += (lse - logits[label]) * inv_count;

    if (grad == nullptr) continue;

    // d(loss)/d(logits) = (softmax - onehot) / masked_count.
    delta.resize(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c) {
      delta[c] = std::exp(logits[c] - lse) * inv_count;
    }
    delta[label] -= inv_count;

    for (std::size_t li = num_layers; li-- > 0;) {
      const auto& layer = layout_.layers[li];
      const std::vector<double>& below = acts[li];
      double* gw = grad->data() + layer.w;
      double* gb = grad->data() + layer.b;
      for (std::size_t j = 0; j < layer.out; ++j) {
        kernels::axpy({gw + j * layer.in, layer.in}, below, delta[j]);
        gb[j] += delta[j];
      }
      if (li == 0) {
        // The input of a masked frame is the mask embedding.
        double* ge = grad->data() + layout_.mask_embedding;
        for (std::size_t j = 0; j < layer.out; ++j) {
          const std::span<const double> w{
              params_.data() + layer.w + j * layer.in, layer.in};
          kernels::axpy({ge, layer.in}, w, delta[j]);
        }
      } else {
        delta_prev.assign(layer.in, 0.0);
        for (std::size_t j = 0; j < layer.out; ++j) {
          const std::span<const double> w{
              params_.data() + layer.w + j * layer.in, layer.in};
          kernels::axpy(delta_prev, w, delta[j]);
        }
        // Through tanh: below holds tanh(z), whose derivative is 1 - below^2.
        for (std::size_t i = 0; i < layer.in; ++i) {
          delta_prev[i] *= 1.0 - below[i] * below[i];
        }
        delta.swap(delta_prev);
      }
    }
  }
  return LossResult{loss, masked_count, false};
}

LossResult ToyModel::train_step(const FrameFeatureSequence& features,
                                const FrameLabelSequence& labels,
                                const MaskSpec& mask) {
  std::vector<double> grad;
  const LossResult result = loss_and_gradient(features, labels, mask, &grad);
  if (result.empty_mask) {
    return result;  // nothing to learn from; the optimizer does not advance
  }
  step_ += 1;
  const double lr = learning_rate_at(step_);
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const double g = grad[i];
    adam_m_[i] = kAdamBeta1 * adam_m_[i] + (1.0 - kAdamBeta1) * g;
    adam_v_[i] = kAdamBeta2 * adam_v_[i] + (1.0 - kAdamBeta2) * g * g;
    const double m_hat = adam_m_[i] / bc1;
    const double v_hat = adam_v_[i] / bc2;
    params_[i] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
  }
  return result;
}

void ToyModel::reset_optimizer() {
  std::fill(adam_m_.begin(), adam_m_.end(), 0.0);
  std::fill(adam_v_.begin(), adam_v_.end(), 0.0);
  step_ = 0;
}

double ToyModel::gradient_check(const FrameFeatureSequence& features,
                                const FrameLabelSequence& labels,
                                const MaskSpec& mask, double h) {
  std::vector<double> analytic;
  loss_and_gradient(features, labels, mask, &analytic);
  const auto loss_fn = [&](std::span<const double>) {
    return compute_loss(features, labels, mask).loss;
  };
  return max_relative_gradient_error(loss_fn, params_, analytic, h);
}

double max_relative_gradient_error(
    const std::function<double(std::span<const double>)>& loss,
    std::span<double> params, std::span<const double> analytic, double h) {
  if (params.size() != analytic.size()) {
    throw Error("gradient check: parameter/gradient size mismatch");
  }
  if (!(h > 0.0)) {
    throw Error("gradient check: step size must be positive");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss(params);
    params[i] = saved - h;
    const double down = loss(params);
    params[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double g = analytic[i];
    const double denom = std::max({std::abs(g), std::abs(fd), 1e-6});
    worst = std::max(worst, std::abs(g - fd) / denom);
  }
  return worst;
}

void ToyModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write model: " + path.string());
  }
  auto write_u64 = [&](std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
  };
  auto write_f64 = [&](double v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
  };
  out.write(kModelMagic, 4);
  std::uint32_t version = kModelVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  write_u64(config_.input_dim);
  write_u64(config_.hidden_dims.size());
  for (const std::size_t hd : config_.hidden_dims) write_u64(hd);
  write_u64(config_.num_classes);
  write_f64(config_.peak_learning_rate);
  write_u64(config_.warmup_steps);
  write_u64(config_.seed);
  write_u64(step_);
  for (const auto* vec : {&params_, &adam_m_, &adam_v_}) {
    out.write(reinterpret_cast<const char*>(vec->data()),
              static_cast<std::streamsize>(vec->size() * 8));
  }
  if (!out) {
    throw Error("short write to model: " + path.string());
  }
}

ToyModel ToyModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open model: " + path.string());
  }
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kModelMagic, 4) != 0) {
    throw Error("not a model file: " + path.string());
  }
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != kModelVersion) {
    throw Error("unsupported model version " + std::to_string(version) +
                " in " + path.string());
  }
  auto read_u64 = [&]() {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  auto read_f64 = [&]() {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  ToyModelConfig cfg;
  cfg.input_dim = read_u64();
  const std::uint64_t n_hidden = read_u64();
  if (!in || n_hidden > 64) {
    throw Error("corrupt model header: " + path.string());
  }
  cfg.hidden_dims.clear();
  for (std::uint64_t i = 0; i < n_hidden; ++i) cfg.hidden_dims.push_back(read_u64());
  cfg.num_classes = read_u64();
  cfg.peak_learning_rate = read_f64();
  cfg.warmup_steps = read_u64();
  cfg.seed = read_u64();
  const std::uint64_t step = read_u64();
  if (!in) {
    throw Error("truncated model header: " + path.string());
  }

  ToyModel model(cfg);
  model.step_ = step;
  for (auto* vec : {&model.params_, &model.adam_m_, &model.adam_v_}) {
    in.read(reinterpret_cast<char*>(vec->data()),
            static_cast<std::streamsize>(vec->size() * 8));
  }
  if (!in) {
    throw Error("truncated model data: " + path.string());
  }
  return model;
}

bool ToyModel::operator==(const ToyModel& other) const {
  return config_.input_dim == other.config_.input_dim &&
         config_.hidden_dims == other.config_.hidden_dims &&
         config_.num_classes == other.config_.num_classes &&
         config_.peak_learning_rate == other.config_.peak_learning_rate &&
         config_.warmup_steps == other.config_.warmup_steps &&
         config_.seed == other.config_.seed && step_ == other.step_ &&
         params_ == other.params_ && adam_m_ == other.adam_m_ &&
         adam_v_ == other.adam_v_;
}

}  // namespace sslforge
