#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <vector>

#include <json.hpp>

#include "rumor/metrics.hpp"
#include "rumor/model.hpp"
#include "rumor/random.hpp"

namespace rumor {

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 0.01;
  double weight_decay = 0.01;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 300;
  std::size_t patience = 50;
  std::array<double, 3> split = {0.7, 0.2, 0.1};
  std::uint64_t seed = 7;

  // Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
// Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Seeded shuffle, then val = floor(n * r_val), test = floor(n * r_test) and
// the remainder to train. Needs at least 10 items.
SplitIndices split_indices(std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed);

template <typename T>
struct Split {
  std::vector<T> train, val, test;
};

template <typename T>
Split<T> split_dataset(const std::vector<T>& items, const std::array<double, 3>& ratios, std::uint64_t seed) {
  const SplitIndices idx = split_indices(items.size(), ratios, seed);
  Split<T> out;
  for (std::size_t i : idx.train) out.train.push_back(items[i]);
  for (std::size_t i : idx.val) out.val.push_back(items[i]);
  for (std::size_t i : idx.test) out.test.push_back(items[i]);
  return out;
}

// Stops once the validation loss has gone `patience` consecutive epochs
// without a strict improvement on the best value so far.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);

  // Returns true when training should stop after this epoch.
  bool update(std::size_t epoch, double val_loss);
  bool improved_last() const { return improved_last_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
  bool improved_last_ = false;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;

  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

struct TrainResult {
  ModelParams best;
  TrainLog log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Mini-batch AdamW on mean cross-entropy per batch; the training order is
// reshuffled each epoch from the seed. Validation loss is the eval-mode sample
// mean. Returns the parameters of the best-validation-loss epoch.
TrainResult train(const TrainConfig& config, const std::vector<GraphInput>& train_set,
                  const std::vector<GraphInput>& val_set, const EpochCallback& on_epoch = {});

// Same loop starting from given parameters (config.model is ignored).
TrainResult train_from(const TrainConfig& config, ModelParams initial, const std::vector<GraphInput>& train_set,
                       const std::vector<GraphInput>& val_set, const EpochCallback& on_epoch = {});

struct LossAccuracy {
  double loss = 0.0;
  double accuracy = 0.0;
};

// Eval-mode sample-mean loss and accuracy.
LossAccuracy evaluate_loss(const ModelParams& params, const std::vector<GraphInput>& graphs);

// Eval-mode predictions, then the metric suite. Every graph must be labelled.
MetricsReport evaluate(const ModelParams& params, const std::vector<GraphInput>& graphs);

// CSV: header "epoch,train_loss,train_acc,val_loss,val_acc,best_epoch" then one row
// per epoch; best_epoch is 1 on exactly the best epoch.
std::string curves_csv(const TrainLog& log);
void export_curves(const TrainLog& log, const std::filesystem::path& path);
TrainLog parse_curves(const std::string& csv);

nlohmann::json to_json(const TrainLog& log);

}  // namespace rumor
