#include "atd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "atd/error.hpp"
#include "atd/random.hpp"

namespace atd {

void TrainConfig::validate() const {
  if (!(lr0 >= 0.0)) throw UsageError("lr0 must be non-negative");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw UsageError("lr_decay must be in (0, 1]");
  if (!(momentum_max < 1.0 && momentum0 >= 0.0 && momentum0 <= momentum_max)) {
    throw UsageError("need 0 <= momentum0 <= momentum_max < 1");
  }
  if (momentum_step < 0.0) throw UsageError("momentum_step must be non-negative");
  if (epochs < 0) throw UsageError("epochs must be non-negative");
  if (batch_size < 1) throw UsageError("batch_size must be at least 1");
  if (weight_decay < 0.0) throw UsageError("weight_decay must be non-negative");
  if (grad_clip_norm < 0.0) throw UsageError("grad_clip_norm must be non-negative");
  if (eval_every < 0) throw UsageError("eval_every must be non-negative");
  if (threads < 1) throw UsageError("threads must be at least 1");
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_value(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (!in || !in.eof()) throw DataError("bad value '" + value + "' for config key '" + key + "'");
  return out;
}

}  // namespace

TrainConfig parse_train_config(std::istream& in, TrainConfig c) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("config line " + std::to_string(lineno) + " is not key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "lr0") c.lr0 = parse_value<double>(key, value);
    else if (key == "lrDecay") c.lr_decay = parse_value<double>(key, value);
    else if (key == "momentum0") c.momentum0 = parse_value<double>(key, value);
    else if (key == "momentumMax") c.momentum_max = parse_value<double>(key, value);
    else if (key == "momentumStepPerEpoch") c.momentum_step = parse_value<double>(key, value);
    else if (key == "epochs") c.epochs = parse_value<int>(key, value);
    else if (key == "batchSize") c.batch_size = parse_value<int>(key, value);
    else if (key == "seed") c.seed = parse_value<std::uint64_t>(key, value);
    else if (key == "weightDecay") c.weight_decay = parse_value<double>(key, value);
    else if (key == "gradClipNorm") c.grad_clip_norm = parse_value<double>(key, value);
    else if (key == "evalEvery") c.eval_every = parse_value<int>(key, value);
    else if (key == "threads") c.threads = parse_value<int>(key, value);
    else throw DataError("unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path);
  return parse_train_config(in, base);
}

void write_train_config(std::ostream& out, const TrainConfig& c) {
  auto old = out.precision(17);
  out << "lr0=" << c.lr0 << '\n'
      << "lrDecay=" << c.lr_decay << '\n'
      << "momentum0=" << c.momentum0 << '\n'
      << "momentumMax=" << c.momentum_max << '\n'
      << "momentumStepPerEpoch=" << c.momentum_step << '\n'
      << "epochs=" << c.epochs << '\n'
      << "batchSize=" << c.batch_size << '\n'
      << "seed=" << c.seed << '\n'
      << "weightDecay=" << c.weight_decay << '\n'
      << "gradClipNorm=" << c.grad_clip_norm << '\n'
      << "evalEvery=" << c.eval_every << '\n'
      << "threads=" << c.threads << '\n';
  out.precision(old);
}

Schedule schedule(const TrainConfig& c, int epoch) {
  if (epoch < 0) throw UsageError("epoch must be non-negative");
  return {c.lr0 * std::pow(c.lr_decay, epoch),
          std::min(c.momentum_max, c.momentum0 + epoch * c.momentum_step)};
}

void apply_update(FactoredParams& params, AttributeTable& table, Gradients& grads,
                  Gradients& velocity, const Schedule& step, double weight_decay,
                  double grad_clip_norm) {
  std::string bad;
  for_each_group(grads, [&bad](const std::string& name, ConstGroupView g) {
    if (bad.empty() && !g.allFinite()) bad = name;
  });
  if (!bad.empty()) throw NonFiniteError(bad, "non-finite gradient in parameter group " + bad);

  if (grad_clip_norm > 0.0) {
    const double norm = std::sqrt(grads.squared_norm());
    if (norm > grad_clip_norm) grads *= grad_clip_norm / norm;
  }

  // Groups are visited in the same order for params, grads and velocity.
  std::vector<GroupView> g_views, v_views;
  for_each_group(grads, [&](const std::string&, GroupView g) { g_views.push_back(g); });
  for_each_group(velocity, [&](const std::string&, GroupView v) { v_views.push_back(v); });
  std::size_t i = 0;
  for_each_group(params, table, [&](const std::string& name, GroupView theta) {
    auto& g = g_views[i];
    auto& v = v_views[i];
    ++i;
    if (weight_decay > 0.0) {
      v = step.momentum * v - step.lr * (g + weight_decay * theta);
    } else {
      v = step.momentum * v - step.lr * g;
    }
    theta += v;
    if (bad.empty() && !theta.allFinite()) bad = name;
  });
  if (!bad.empty()) throw NonFiniteError(bad, "parameter group " + bad + " became non-finite");
}

Evaluation evaluate(const FactoredParams& params, const AttributeTable& table,
                    std::span<const TrainingExample> held_out) {
  if (held_out.empty()) throw UsageError("evaluation set is empty");
  const double nll = nll_loss(params, table, held_out);
  return {nll, std::exp(nll)};
}

TrainReport train(FactoredParams& params, AttributeTable& table,
                  std::span<const TrainingExample> examples, const TrainConfig& config,
                  const TrainCallbacks& callbacks, TrainerState* state) {
  config.validate();
  params.validate();
  if (examples.empty()) throw UsageError("training set is empty");

  TrainerState local;
  TrainerState& st = state ? *state : local;
  const Gradients zero = Gradients::zeros_like(params, table);
  if (st.velocity.wfk.size() == 0) st.velocity = zero;

  TrainReport report;
  Gradients grads = zero;
  BatchIterator batches(examples, static_cast<std::size_t>(config.batch_size), config.seed);
  std::vector<TrainingExample> batch;
  const int first = st.epoch;
  for (int epoch = first; epoch < first + config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const Schedule step = schedule(config, epoch);
    batches.reset(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    double running = 0.0;
    while (batches.next(batch)) {
      const double loss =
          backward(params, table, batch, grads, BackwardOptions{config.threads});
      if (!std::isfinite(loss)) {
        std::string group = first_non_finite(params, table);
        throw NonFiniteError(group.empty() ? "loss" : group,
                             "non-finite loss in epoch " + std::to_string(epoch) +
                                 (group.empty() ? "" : " (first bad group " + group + ")"));
      }
      running += loss * static_cast<double>(batch.size());
      apply_update(params, table, grads, st.velocity, step, config.weight_decay,
                   config.grad_clip_norm);
    }
    st.epoch = epoch + 1;

    EpochStats stats;
    stats.epoch = epoch;
    stats.running_nll = running / static_cast<double>(examples.size());
    const Evaluation train_eval = evaluate(params, table, examples);
    stats.mean_nll = train_eval.nll;
    stats.perplexity = train_eval.perplexity;
    stats.lr = step.lr;
    stats.momentum = step.momentum;
    if (!callbacks.held_out.empty() && config.eval_every > 0 &&
        (epoch - first + 1) % config.eval_every == 0) {
      stats.held_out_nll = evaluate(params, table, callbacks.held_out).nll;
    }
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(stats);
    if (callbacks.on_epoch) callbacks.on_epoch(stats);
  }
  return report;
}

}  // namespace atd
