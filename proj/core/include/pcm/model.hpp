#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pcm/encoding.hpp"
#include "pcm/event_log.hpp"
#include "pcm/rng.hpp"

namespace pcm {

enum class Mode { Baseline, Hybrid, Mtl };

std::string mode_name(Mode mode);        // "baseline" / "hybrid" / "multi-task"
Mode mode_from_name(const std::string&); // accepts "mtl" as an alias

struct DenseLayer {
  std::size_t out = 0;
  std::size_t in = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out

  bool operator==(const DenseLayer&) const = default;
};

struct ParamSet {
  std::vector<DenseLayer> trunk;
  DenseLayer cls_head;  // trunk output -> 1 logit
  DenseLayer reg_head;  // trunk output (+ probability in Mtl mode) -> 1 raw magnitude

  bool operator==(const ParamSet&) const = default;
};

// Shared-trunk network with tanh nonlinearities. The classification head
// emits a sigmoid probability; in Mtl mode that probability is concatenated
// onto the trunk output before the regression head, so magnitude gradients
// flow back through the classifier.
struct MtlModel {
  Mode mode = Mode::Baseline;
  std::size_t input_width = 0;
  std::vector<std::size_t> hidden;
  ParamSet params;
  std::uint64_t init_seed = 0;

  std::size_t trunk_output_width() const { return hidden.empty() ? input_width : hidden.back(); }
};

struct TrainConfig {
  std::vector<std::size_t> hidden_sizes{32, 32};
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  double dropout = 0.0;     // 0 disables
  std::size_t patience = 0; // 0 disables early stopping
};

std::string train_config_digest(const TrainConfig& config);

// fan-in scaled symmetric uniform initialization, seeded
MtlModel make_model(Mode mode, std::size_t input_width, const TrainConfig& config);

struct Prediction {
  double prob = 0.5;          // classification probability (hard proxy in Hybrid mode)
  double raw_magnitude = 0.0; // regression output before clamping

  double magnitude_days() const { return raw_magnitude > 0.0 ? raw_magnitude : 0.0; }
};

// inference-time forward pass (dropout off)
Prediction forward(const MtlModel& model, std::span<const double> features);

double loss_bce(std::span<const int> labels, std::span<const double> probs);
double loss_mse(std::span<const double> targets, std::span<const double> predictions);
double loss_total(double bce, double mse);

struct StepLosses {
  double bce = 0.0;
  double mse = 0.0;
  double total = 0.0;
};

// mode-appropriate losses over the given rows (Baseline: BCE, Hybrid: MSE,
// Mtl: BCE + MSE)
StepLosses batch_loss(const MtlModel& model, const FeatureMatrix& data,
                      std::span<const std::size_t> rows);

// analytic gradients of the mode-appropriate loss; same shapes as the
// model's parameters
ParamSet compute_gradients(const MtlModel& model, const FeatureMatrix& data,
                           std::span<const std::size_t> rows, StepLosses* losses = nullptr);

struct TrainSummary {
  std::size_t epochs_run = 0;
  double initial_loss = 0.0;  // mean loss of the first epoch
  double final_loss = 0.0;    // mean loss of the last epoch
};

// Adam-style moment-based optimizer around a model; single-threaded and
// bitwise deterministic for a fixed seed, config and data order.
class Trainer {
 public:
  Trainer(MtlModel model, TrainConfig config);

  // one optimizer step on a batch (gradients + parameter update)
  StepLosses step(const FeatureMatrix& data, std::span<const std::size_t> rows);

  // full training loop: seeded shuffling, mini-batches, optional early stop
  TrainSummary fit(const FeatureMatrix& data);

  const MtlModel& model() const { return model_; }
  MtlModel& model() { return model_; }
  const TrainConfig& config() const { return config_; }

 private:
  MtlModel model_;
  TrainConfig config_;
  ParamSet moment1_;
  ParamSet moment2_;
  Rng rng_;
  long step_count_ = 0;
};

struct LayerCheck {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<LayerCheck> layers;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// central finite differences against supplied analytic gradients
GradCheckReport compare_gradients(const MtlModel& model, const FeatureMatrix& data,
                                  std::span<const std::size_t> rows, const ParamSet& analytic,
                                  double fd_step = 1e-5, double tolerance = 1e-5);

// analytic vs numeric gradients of the mode-appropriate loss
GradCheckReport gradient_check(const MtlModel& model, const FeatureMatrix& data,
                               std::span<const std::size_t> rows, double fd_step = 1e-5,
                               double tolerance = 1e-5);

// Versioned model document: mode, sizes, bit-exact parameters, the fitted
// encoder, the log schema and prefix cap (so `predict` is self-contained)
// and the training config digest.
void save_model(const MtlModel& model, const EncoderSpec& encoder, const LogSchema& log_schema,
                const TrainConfig& config, std::size_t prefix_cap,
                const std::filesystem::path& path);

struct LoadedModel {
  MtlModel model;
  EncoderSpec encoder;
  LogSchema log_schema;
  std::string train_config_digest;
  std::size_t prefix_cap = 0;
};

LoadedModel load_model(const std::filesystem::path& path);

}  // namespace pcm
