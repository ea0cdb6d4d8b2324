#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cgcre/corpus.hpp"
#include "cgcre/model.hpp"
#include "cgcre/rng.hpp"

namespace cgcre {

struct OptimizerSettings {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
};

struct TrainConfig {
  int epochs = 100;
  int batch_size = 8;
  double alpha = 1.0;
  std::uint64_t seed = 42;
  double dev_fraction = 0.0;  // optional holdout, off by default
  std::string embeddings_path;  // empty -> trainable lookup table
  ModelConfig model;
  OptimizerSettings optimizer;
};

void validate_config(const TrainConfig& config);

// Adaptive-moment update with bias correction; gradients are globally
// norm-clipped before the step.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(OptimizerSettings settings) : settings_(settings) {}

  void step(ParameterStore& params);

  long long step_count() const { return step_count_; }
  const OptimizerSettings& settings() const { return settings_; }

  // Checkpoint access: moments keyed in parameter order.
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void set_step_count(long long t) { step_count_ = t; }

 private:
  void ensure_state(const ParameterStore& params);

  OptimizerSettings settings_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long long step_count_ = 0;
};

// L = mean concern NLL + alpha * mean per-tweet relation cross-entropy.
// Outputs the two components when requested.
Tensor joint_loss(const std::vector<const Tweet*>& batch, const CgCreModel& model, long long rt_min,
                  long long rt_max, double alpha, bool training, Rng& dropout_rng,
                  Tensor* concern_component, Tensor* relation_component);

struct BatchLossRow {
  int epoch = 0;
  int batch = 0;
  double total = 0;
  double concern = 0;
  double relation = 0;
};

struct EpochLoss {
  int epoch = 0;
  double total = 0;
  double concern = 0;
  double relation = 0;
};

struct TrainResult {
  std::vector<BatchLossRow> batch_log;
  std::vector<EpochLoss> epoch_log;
};

// Epoch/batch training loop: seeded shuffle, fixed-size batches (last partial
// batch kept), teacher-forced forward, Adam step. The optional callback runs
// after each epoch; returning false stops training early.
class Trainer {
 public:
  Trainer(CgCreModel& model, const TrainConfig& config);

  using EpochCallback = std::function<bool(const EpochLoss&)>;
  TrainResult train(const Corpus& corpus, const EpochCallback& on_epoch = {});

  AdamOptimizer& optimizer() { return optimizer_; }
  const AdamOptimizer& optimizer() const { return optimizer_; }
  int next_epoch() const { return next_epoch_; }

  // Resume state (checkpoint round-trips).
  void restore(int next_epoch, std::uint64_t shuffle_state, std::uint64_t dropout_state,
               long long adam_step);
  std::uint64_t shuffle_state() const { return shuffle_rng_.state(); }
  std::uint64_t dropout_state() const { return dropout_rng_.state(); }

 private:
  CgCreModel& model_;
  TrainConfig config_;
  AdamOptimizer optimizer_;
  Rng shuffle_rng_;
  Rng dropout_rng_;
  int next_epoch_ = 0;
};

// Checkpoint file: magic bytes, format version, JSON header (config snapshot,
// corpus stats, vocabularies, RNG states, epoch counter, tensor directory),
// then little-endian float64 payloads with per-section length checks.
struct TrainerState {
  int next_epoch = 0;
  std::uint64_t shuffle_state = 0;
  std::uint64_t dropout_state = 0;
  long long adam_step = 0;
};

void save_checkpoint(const std::string& path, const CgCreModel& model, const TrainConfig& config,
                     long long rt_min, long long rt_max, const AdamOptimizer& optimizer,
                     const TrainerState& state);

struct LoadedCheckpoint {
  TrainConfig config;
  long long rt_min = 0;
  long long rt_max = 0;
  std::unique_ptr<CgCreModel> model;
  TrainerState state;
  // Adam moments in parameter order, restored into a Trainer on resume.
  std::vector<std::vector<double>> adam_m;
  std::vector<std::vector<double>> adam_v;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace cgcre
