#pragma once

#include "grass/core/optimizer.hpp"
#include "grass/rvnn/codec.hpp"

#include <filesystem>
#include <functional>
#include <optional>

namespace grass {

struct TrainConfig {
  int epochs = 40;
  int batch_size = 32;
  double learning_rate = 1e-3;
  // When set, the rate follows a cosine from learning_rate in the first epoch
  // down to this value in the last. L-BFGS ignores it.
  std::optional<double> final_learning_rate;
  // Classifier cross-entropy weight.
  double lambda = 0.2;
  bool subtree_loss = true;
  bool symmetry_loss = true;
  std::uint64_t seed = 1;
  OptimizerKind optimizer = OptimizerKind::adam;
  // Mini-batches are split into this many shards evaluated in parallel.
  int threads = 1;
  // Where the last good parameters go if training diverges.
  std::optional<std::filesystem::path> recovery_checkpoint;

  Json to_json() const;
  static TrainConfig from_json(const Json& j, const std::string& path = "<memory>");
  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double box = 0.0;
  double symmetry = 0.0;
  double classifier = 0.0;
};

struct TrainLog {
  // Entry 0 is the loss of the initial parameters over the whole set; later
  // entries average the mini-batch losses of each epoch.
  std::vector<EpochLog> epochs;
  Json to_json() const;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int epoch, const std::string& what)
      : std::runtime_error("training diverged in epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Learning rate used in `epoch` (1-based).
double epoch_learning_rate(const TrainConfig& config, int epoch);

// Loss terms averaged over `trees`, evaluated in chunks without gradients.
EpochLog evaluate_loss(const RvnnModel& model, const std::vector<Hierarchy>& trees, const LossOptions& options,
                       int chunk = 64);

// Minimizes the mean reconstruction loss over `trees`. On a non-finite loss
// or gradient the model is restored to its state at the start of the epoch,
// written to the recovery checkpoint when one is configured, and
// DivergenceError is thrown.
TrainLog train_autoencoder(RvnnModel& model, const std::vector<Hierarchy>& trees, const TrainConfig& config,
                           const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace grass
