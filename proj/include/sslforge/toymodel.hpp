#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sslforge/features.hpp"
#include "sslforge/labels.hpp"
#include "sslforge/masking.hpp"

namespace sslforge {

/// Desk-scale masked-prediction network: an MLP with tanh hidden layers that
/// reads per-frame features, replaces masked frames with a learned embedding,
/// and predicts the frame's cluster label. Small enough to verify end to end
/// (finite-difference gradient checks, exact reproducibility), while keeping
/// the training loop/objective shape of the full-size recipe.
struct ToyModelConfig {
  std::size_t input_dim = 39;
  std::vector<std::size_t> hidden_dims{256, 256};
  std::size_t num_classes = 100;
  double peak_learning_rate = 1e-3;
  std::size_t warmup_steps = 100;
  std::uint64_t seed = 0;

  void validate() const;  // throws Error
};

/// The full-size recipe behind this miniature trains with Adam at a 5e-4
/// peak rate and a 32000-step linear warmup. Those values are impractical at
/// desk scale (warmup alone would dominate any run), so they are preserved
/// here as named constants and the desk defaults above are scaled down.
inline constexpr double kFullScalePeakLearningRate = 5e-4;
inline constexpr std::size_t kFullScaleWarmupSteps = 32000;

struct LossResult {
  double loss = 0.0;
  std::size_t masked_frames = 0;
  /// True when the mask selected no frames: the loss is defined as 0 and a
  /// training step performs no update. Callers should surface this.
  bool empty_mask = false;
};

class ToyModel {
 public:
  explicit ToyModel(ToyModelConfig config);

  const ToyModelConfig& config() const { return config_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::size_t steps_taken() const { return step_; }

  /// Learning rate used by update t (1-based): peak * min(1, t / warmup).
  double learning_rate_at(std::size_t t) const;

  /// Log-probabilities, row-major [frames x num_classes]. Every row is a
  /// normalized log-distribution (its log-sum-exp is 0 up to rounding).
  std::vector<double> forward(const FrameFeatureSequence& features,
                              const MaskSpec& mask) const;

  /// Mean negative log-likelihood over masked frames only. Unmasked frames
  /// contribute nothing. Label values must be < num_classes, label length
  /// must equal the feature frame count, and mask indices must fit.
  LossResult compute_loss(const FrameFeatureSequence& features,
                          const FrameLabelSequence& labels,
                          const MaskSpec& mask) const;

  /// One Adam update (with warmup) on the masked-prediction loss. Returns the
  /// pre-update loss. An empty mask is a no-op that does not advance the
  /// optimizer step.
  LossResult train_step(const FrameFeatureSequence& features,
                        const FrameLabelSequence& labels, const MaskSpec& mask);

  /// Clears optimizer moments and the step counter (fresh warmup), keeping
  /// the weights. Used at curriculum stage boundaries.
  void reset_optimizer();

  /// Maximum relative disagreement between analytic gradients and central
  /// finite differences over every parameter. The relative error for one
  /// parameter is |g - fd| / max(|g|, |fd|, 1e-6); the 1e-6 floor keeps
  /// finite-difference rounding noise (about 1e-11 absolute at h = 1e-5)
  /// from dominating parameters whose true gradient is essentially zero.
  double gradient_check(const FrameFeatureSequence& features,
                        const FrameLabelSequence& labels, const MaskSpec& mask,
                        double h = 1e-5);

  /// Binary checkpoint: config, step counter, weights, optimizer moments.
  /// load() resumes bit-exactly.
  void save(const std::filesystem::path& path) const;
  static ToyModel load(const std::filesystem::path& path);

  bool operator==(const ToyModel& other) const;

  /// Flat parameter access (used by tests and the gradient checker).
  std::span<const double> parameters() const { return params_; }

 private:
  struct Layout {
    std::size_t mask_embedding = 0;  // offset; length input_dim
    struct LayerSpan {
      std::size_t w = 0, b = 0, in = 0, out = 0;
    };
    std::vector<LayerSpan> layers;
    std::size_t total = 0;
  };

  LossResult loss_and_gradient(const FrameFeatureSequence& features,
                               const FrameLabelSequence& labels,
                               const MaskSpec& mask,
                               std::vector<double>* grad) const;
  void check_inputs(const FrameFeatureSequence& features,
                    const FrameLabelSequence* labels,
                    const MaskSpec& mask) const;

  ToyModelConfig config_;
  Layout layout_;
  std::vector<double> params_;
  std::vector<double> adam_m_;
  std::vector<double> adam_v_;
  std::size_t step_ = 0;
};

/// Generic finite-difference harness: perturbs each parameter in place by
/// +/-h, evaluates `loss`, and returns the worst relative disagreement with
/// `analytic` (same floor rule as ToyModel::gradient_check). Usable with any
/// differentiable scalar function, e.g. a plain linear least-squares probe.
double max_relative_gradient_error(
    const std::function<double(std::span<const double>)>& loss,
    std::span<double> params, std::span<const double> analytic, double h);

}  // namespace sslforge
