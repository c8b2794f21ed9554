#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "atd/model.hpp"

namespace atd {

struct TrainConfig {
  double lr0 = 0.1;
  double lr_decay = 0.99;  // per-epoch multiplicative factor
  double momentum0 = 0.5;
  double momentum_max = 0.9;
  double momentum_step = 0.01;  // added per epoch
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 1;
  double weight_decay = 0.0;    // lambda
  double grad_clip_norm = 0.0;  // 0 = off
  int eval_every = 0;           // epochs between held-out evaluations, 0 = off
  int threads = 1;

  void validate() const;
};

// Flat `key=value` lines; `#` starts a comment. Unknown keys are rejected.
TrainConfig parse_train_config(std::istream& in, TrainConfig base = {});
TrainConfig load_train_config(const std::string& path, TrainConfig base = {});
void write_train_config(std::ostream& out, const TrainConfig& config);

struct Schedule {
  double lr;
  double momentum;
};

// lr = lr0 * decay^epoch, momentum = min(max, m0 + epoch * step).
Schedule schedule(const TrainConfig& config, int epoch);

struct EpochStats {
  int epoch = 0;
  double running_nll = 0.0;  // mean of batch losses seen during the epoch
  double mean_nll = 0.0;     // training-set NLL after the epoch's updates
  double perplexity = 0.0;   // exp(mean_nll)
  double lr = 0.0;
  double momentum = 0.0;
  double seconds = 0.0;
  std::optional<double> held_out_nll;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
};

// Momentum buffers plus the number of completed epochs; persisted in snapshots.
struct TrainerState {
  int epoch = 0;
  Gradients velocity;
};

struct TrainCallbacks {
  std::function<void(const EpochStats&)> on_epoch;
  std::span<const TrainingExample> held_out;
};

// Classical momentum, applied once per batch:
//   v <- m v - lr (g + lambda theta),  theta <- theta + v.
// Resumes from `state` when given (state->epoch epochs already done) and
// leaves the buffers there afterwards.
TrainReport train(FactoredParams& params, AttributeTable& table,
                  std::span<const TrainingExample> examples, const TrainConfig& config,
                  const TrainCallbacks& callbacks = {}, TrainerState* state = nullptr);

// One momentum step from a precomputed gradient. Throws NonFiniteError naming
// the first group whose gradient or updated value is not finite.
void apply_update(FactoredParams& params, AttributeTable& table, Gradients& grads,
                  Gradients& velocity, const Schedule& step, double weight_decay,
                  double grad_clip_norm);

struct Evaluation {
  double nll;
  double perplexity;
};

Evaluation evaluate(const FactoredParams& params, const AttributeTable& table,
                    std::span<const TrainingExample> held_out);

}  // namespace atd
