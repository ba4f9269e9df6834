#include "rumor/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <string>

#include "rumor/errors.hpp"
#include "rumor/io.hpp"
#include "rumor/optim.hpp"

namespace rumor {

using nlohmann::json;

void TrainConfig::validate() const {
  model.validate();
  const double total = split[0] + split[1] + split[2];
  if (std::abs(total - 1.0) > 1e-9 || split[0] < 0 || split[1] < 0 || split[2] < 0) {
    throw ConfigError("split ratios must be non-negative and sum to 1");
  }
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
}

json to_json(const TrainConfig& c) {
  json j = to_json(c.model);
  j["lr"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["patience"] = c.patience;
  j["split"] = c.split;
  j["seed"] = c.seed;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.model = model_config_from_json(j);
  try {
    c.learning_rate = j.value("lr", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    if (j.contains("split")) c.split = j.at("split").get<std::array<double, 3>>();
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad training config: ") + e.what());
  }
  c.validate();
  return c;
}

SplitIndices split_indices(std::size_t n, const std::array<double, 3>& ratios, std::uint64_t seed) {
  if (n < 10) throw DataError("split needs at least 10 graphs, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5711));
  shuffle(order, rng);
  // The epsilon keeps exact products such as 0.2 * 10 from flooring to 1.
  const auto part = [n](double r) { return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9)); };
  const std::size_t n_val = part(ratios[1]);
  const std::size_t n_test = part(ratios[2]);
  const std::size_t n_train = n - n_val - n_test;
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

EarlyStopping::EarlyStopping(std::size_t patience) : patience_(patience) {
  if (patience_ < 1) throw ConfigError("patience must be >= 1");
}

bool EarlyStopping::update(std::size_t epoch, double val_loss) {
  improved_last_ = val_loss < best_loss_;
  if (improved_last_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

LossAccuracy evaluate_loss(const ModelParams& params, const std::vector<GraphInput>& graphs) {
  LossAccuracy out;
  if (graphs.empty()) return out;
  std::size_t correct = 0;
  for (const auto& g : graphs) {
    if (!g.label) throw DataError("graph " + std::to_string(g.graph_id) + " has no label");
    ad::Tape tape;
    const BoundParams bound = bind(tape, params);
    ad::Var logits = forward(tape, bound, g, Mode::eval, 0);
    out.loss += ad::cross_entropy(logits, static_cast<std::size_t>(*g.label)).value()(0, 0);
    if (static_cast<int>(argmax(logits.value())) == *g.label) ++correct;
  }
  out.loss /= static_cast<double>(graphs.size());
  out.accuracy = static_cast<double>(correct) / static_cast<double>(graphs.size());
  return out;
}

MetricsReport evaluate(const ModelParams& params, const std::vector<GraphInput>& graphs) {
  std::vector<int> truth, predicted;
  for (const auto& g : graphs) {
    if (!g.label) throw DataError("graph " + std::to_string(g.graph_id) + " has no label");
    truth.push_back(*g.label);
    predicted.push_back(static_cast<int>(argmax(predict_logits(params, g))));
  }
  return compute_metrics(truth, predicted, params.config.classes);
}

TrainResult train(const TrainConfig& config, const std::vector<GraphInput>& train_set,
                  const std::vector<GraphInput>& val_set, const EpochCallback& on_epoch) {
  config.validate();
  return train_from(config, init_params(config.model, derive_seed(config.seed, 0x1417)), train_set, val_set,
                    on_epoch);
}

TrainResult train_from(const TrainConfig& config, ModelParams params, const std::vector<GraphInput>& train_set,
                       const std::vector<GraphInput>& val_set, const EpochCallback& on_epoch) {
  if (train_set.empty()) throw DataError("training set is empty");
  if (val_set.empty()) throw DataError("validation set is empty");
  for (const auto& g : train_set) {
    if (!g.label) throw DataError("training graph " + std::to_string(g.graph_id) + " has no label");
  }

  AdamW optimizer({config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});
  std::vector<Tensor*> slots;
  for (auto& [name, t] : params.named()) slots.push_back(t);

  EarlyStopping stopper(config.patience);
  TrainResult result{params, {}};
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const std::uint64_t epoch_seed = derive_seed(config.seed, epoch);
    Rng rng(epoch_seed);
    shuffle(order, rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0, batch = 0; start < order.size(); start += config.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Tensor> grads;
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const GraphInput& g = train_set[order[i]];
        LossAndGrad lg = loss_and_grad(params, g, Mode::train, derive_seed(epoch_seed, i + 1));
        if (!std::isfinite(lg.loss)) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch) + ", graph " + std::to_string(g.graph_id));
        }
        batch_loss += lg.loss;
        if (static_cast<int>(argmax(lg.logits)) == *g.label) ++correct;
        if (grads.empty()) {
          grads = std::move(lg.grads);
        } else {
          for (std::size_t t = 0; t < grads.size(); ++t) kernels::add_inplace(grads[t], lg.grads[t]);
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (Tensor& g : grads) {
        for (double& v : g.values()) v *= inv;
      }
      try {
        optimizer.step(slots, grads);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": " + e.what());
      }
      loss_sum += batch_loss;
    }

    const LossAccuracy val = evaluate_loss(params, val_set);
    EpochLog entry{epoch, loss_sum / static_cast<double>(order.size()),
                   static_cast<double>(correct) / static_cast<double>(order.size()), val.loss, val.accuracy};
    if (!std::isfinite(entry.val_loss)) {
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    result.log.epochs.push_back(entry);
    const bool stop = stopper.update(epoch, val.loss);
    if (stopper.improved_last()) result.best = params;
    if (on_epoch) on_epoch(entry);
    if (stop) break;
  }
  result.log.best_epoch = stopper.best_epoch();
  return result;
}

// ---- curves --------------------------------------------------------------------

std::string curves_csv(const TrainLog& log) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc,best_epoch\n";
  char buf[256];
  for (const auto& e : log.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%d\n", e.epoch, e.train_loss, e.train_acc,
                  e.val_loss, e.val_acc, e.epoch == log.best_epoch ? 1 : 0);
    out += buf;
  }
  return out;
}

void export_curves(const TrainLog& log, const std::filesystem::path& path) {
  if (log.epochs.empty()) throw DataError("cannot export an empty training log");
  io::write_atomic(path, curves_csv(log));
}

TrainLog parse_curves(const std::string& csv) {
  TrainLog log;
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,", 0) != 0) throw DataError("curve file lacks header");
  std::size_t best_rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochLog e;
    int best = 0;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf,%d", &e.epoch, &e.train_loss, &e.train_acc, &e.val_loss,
                    &e.val_acc, &best) != 6) {
      throw DataError("malformed curve row: " + line);
    }
    if (best == 1) {
      log.best_epoch = e.epoch;
      ++best_rows;
    }
    log.epochs.push_back(e);
  }
  if (best_rows != 1) throw DataError("curve file must mark exactly one best epoch");
  return log;
}

json to_json(const TrainLog& log) {
  json epochs = json::array();
  for (const auto& e : log.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"train_acc", e.train_acc},
                      {"val_loss", e.val_loss},
                      {"val_acc", e.val_acc}});
  }
  return {{"best_epoch", log.best_epoch}, {"epochs", std::move(epochs)}};
}

}  // namespace rumor
