#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tpnet/checkpoint.hpp"
#include "tpnet/cifar10.hpp"
#include "tpnet/models.hpp"
#include "tpnet/network.hpp"

namespace tpnet::train {

enum class Precision { F32, F64 };
std::string_view to_string(Precision p);
Precision parse_precision(std::string_view name);

struct TrainConfig {
  models::VariantSpec variant;
  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<std::size_t> milestones{82, 122, 163};
  double lr_factor = 0.1;
  std::uint64_t seed = 0;
  std::filesystem::path data_dir;
  std::filesystem::path out_dir = "runs/latest";
  std::optional<std::size_t> subset;       // training records used
  std::optional<std::size_t> test_subset;  // test records used
  Precision precision = Precision::F32;
  bool reproducible = false;
  bool augment = true;
  std::size_t eval_batch_size = 250;

  void validate() const;
  // subset 5000, 20 epochs, milestones {8, 12, 16}.
  static TrainConfig desk_scale();
};

// Milestones of a base schedule mapped onto a shorter run (floor).
std::vector<std::size_t> scale_milestones(const std::vector<std::size_t>& base,
                                          std::size_t base_epochs, std::size_t epochs);
// Learning rate for 1-based `epoch`: lr * factor^(milestones passed).
double learning_rate(const TrainConfig& config, std::size_t epoch);

// Classic SGD with momentum and coupled L2 weight decay:
//   g += wd * w;  v = momentum * v + g;  w -= lr * v
template <typename T>
class SGD {
 public:
  SGD(std::vector<nn::Parameter<T>*> params, double momentum, double weight_decay);
  void step(double lr);
  std::vector<BasicTensor<T>>& velocity() { return velocity_; }
  const std::vector<nn::Parameter<T>*>& parameters() const { return params_; }

 private:
  std::vector<nn::Parameter<T>*> params_;
  std::vector<BasicTensor<T>> velocity_;
  double momentum_, weight_decay_;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;  // fraction in [0, 1]
  std::size_t correct = 0;
  std::size_t count = 0;
};

template <typename T>
EvalResult evaluate(models::Network<T>& net, const data::Dataset& data, std::size_t batch_size);

// One forward/backward/update on a prepared batch.
template <typename T>
nn::LossResult<T> train_step(models::Network<T>& net, SGD<T>& sgd, const BasicTensor<T>& x,
                             const std::vector<std::uint8_t>& labels, double lr);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0, train_loss = 0, train_accuracy = 0, test_loss = 0, test_accuracy = 0;
  double wall_seconds = 0;
};
std::string csv_header();
std::string to_csv(const EpochLog& row);

struct TrainResult {
  std::vector<EpochLog> log;
  double best_accuracy = 0.0;
  std::size_t best_epoch = 0;
  std::filesystem::path log_file, best_checkpoint, last_checkpoint;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-epoch test evaluation, best-by-test-accuracy checkpoint, CSV log.
TrainResult train(const TrainConfig& config, const data::Cifar10& data,
                  std::ostream* progress = nullptr);

template <typename T>
io::Checkpoint make_checkpoint(models::Network<T>& net, SGD<T>* sgd, std::size_t epoch,
                               double best_accuracy, Precision precision);
template <typename T>
void restore_checkpoint(const io::Checkpoint& ckpt, models::Network<T>& net, SGD<T>* sgd);
models::VariantSpec variant_from_checkpoint(const io::Checkpoint& ckpt);

// Rebuilds the model stored in a checkpoint and evaluates it.
EvalResult evaluate_checkpoint(const std::filesystem::path& file, const data::Dataset& data,
                               std::size_t batch_size);

}  // namespace tpnet::train
