#include "tpnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace tpnet::train {

namespace fs = std::filesystem;

std::string_view to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

Precision parse_precision(std::string_view name) {
  if (name == "f32" || name == "float" || name == "single") return Precision::F32;
  if (name == "f64" || name == "double") return Precision::F64;
  throw std::invalid_argument("unknown precision '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  variant.validate();
  if (epochs == 0) throw std::invalid_argument("train: epochs must be >= 1");
  if (batch_size == 0 || eval_batch_size == 0) throw std::invalid_argument("train: batch size must be >= 1");
  if (!(lr > 0)) throw std::invalid_argument("train: learning rate must be > 0");
  if (momentum < 0 || momentum >= 1) throw std::invalid_argument("train: momentum must be in [0, 1)");
  if (weight_decay < 0) throw std::invalid_argument("train: weight decay must be >= 0");
  for (std::size_t i = 0; i < milestones.size(); ++i) {
    if (i > 0 && milestones[i] <= milestones[i - 1]) {
      throw std::invalid_argument("train: milestones must be strictly increasing");
    }
    if (milestones[i] >= epochs) {
      throw std::invalid_argument("train: milestone " + std::to_string(milestones[i]) +
                                  " is not below the epoch count " + std::to_string(epochs));
    }
  }
  if (subset && *subset == 0) throw std::invalid_argument("train: subset must be >= 1");
  if (variant.input_size != data::kImageSide) {
    throw std::invalid_argument("train: CIFAR-10 training needs 32x32 model inputs");
  }
}

TrainConfig TrainConfig::desk_scale() {
  TrainConfig c;
  c.epochs = 20;
  c.subset = 5000;
  c.milestones = scale_milestones({82, 122, 163}, 200, 20);
  return c;
}

std::vector<std::size_t> scale_milestones(const std::vector<std::size_t>& base,
                                          std::size_t base_epochs, std::size_t epochs) {
  std::vector<std::size_t> out;
  for (auto m : base) {
    const std::size_t s = m * epochs / base_epochs;
    if (s > 0 && s < epochs && (out.empty() || s > out.back())) out.push_back(s);
  }
  return out;
}

double learning_rate(const TrainConfig& config, std::size_t epoch) {
  const auto passed = std::count_if(config.milestones.begin(), config.milestones.end(),
                                    [&](std::size_t m) { return m < epoch; });
  return config.lr * std::pow(config.lr_factor, static_cast<double>(passed));
}

// ------------------------------------------------------------------- SGD

template <typename T>
SGD<T>::SGD(std::vector<nn::Parameter<T>*> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  for (auto* p : params_) velocity_.emplace_back(p->value.shape());
}

template <typename T>
void SGD<T>::step(double lr) {
  const T mu = static_cast<T>(momentum_), wd = static_cast<T>(weight_decay_),
          rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    if (!p.trainable) continue;
    auto& v = velocity_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const T g = p.grad[k] + wd * p.value[k];
      v[k] = mu * v[k] + g;
      p.value[k] -= rate * v[k];
    }
  }
}

// ------------------------------------------------------------ evaluation

template <typename T>
EvalResult evaluate(models::Network<T>& net, const data::Dataset& data, std::size_t batch_size) {
  EvalResult r;
  double loss_sum = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const BasicTensor<T> x = data::make_batch(data, idx, false, nullptr).template cast<T>();
    const auto labels = data::batch_labels(data, idx);
    const auto logits = net.forward(x, nn::Mode::Eval);
    const auto loss = nn::softmax_cross_entropy(logits, labels);
    loss_sum += static_cast<double>(loss.loss) * static_cast<double>(idx.size());
    r.correct += loss.correct;
    r.count += idx.size();
  }
  if (r.count > 0) {
    r.loss = loss_sum / static_cast<double>(r.count);
    r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.count);
  }
  return r;
}

template <typename T>
nn::LossResult<T> train_step(models::Network<T>& net, SGD<T>& sgd, const BasicTensor<T>& x,
                             const std::vector<std::uint8_t>& labels, double lr) {
  const auto logits = net.forward(x, nn::Mode::Train);
  auto loss = nn::softmax_cross_entropy(logits, labels);
  if (!std::isfinite(static_cast<double>(loss.loss))) return loss;
  net.zero_grad();
  net.backward(loss.grad);
  sgd.step(lr);
  return loss;
}

// ------------------------------------------------------------ checkpoints

template <typename T>
io::Checkpoint make_checkpoint(models::Network<T>& net, SGD<T>* sgd, std::size_t epoch,
                               double best_accuracy, Precision precision) {
  io::Checkpoint c;
  const auto& v = net.graph().variant;
  c.put_string("meta.variant", v.name());
  c.put_string("meta.nonlinearity", std::string(tp::to_string(v.nonlinearity)));
  c.put_int("meta.tp_shortcut", v.tp_shortcut ? (*v.tp_shortcut ? 1 : 0) : -1);
  c.put_int("meta.tp_scaling", v.tp_scaling ? 1 : 0);
  c.put_int("meta.input_size", static_cast<std::int64_t>(v.input_size));
  c.put_int("meta.num_classes", static_cast<std::int64_t>(v.num_classes));
  c.put_string("meta.precision", std::string(to_string(precision)));
  c.put_int("meta.epoch", static_cast<std::int64_t>(epoch));
  c.put_real("meta.best_accuracy", best_accuracy);
  for (auto* p : net.parameters()) c.put("param." + p->name, p->value);
  for (auto& b : net.buffers()) c.put("buffer." + b.name, *b.tensor);
  if (sgd) {
    const auto& params = sgd->parameters();
    for (std::size_t i = 0; i < params.size(); ++i)
      c.put("momentum." + params[i]->name, sgd->velocity()[i]);
  }
  return c;
}

namespace {

template <typename T>
void assign(BasicTensor<T>& dst, const BasicTensor<T>& src, const std::string& name) {
  if (dst.shape() != src.shape()) {
    throw io::CheckpointError("checkpoint: record '" + name + "' has shape " +
                              shape_to_string(src.shape()) + ", model expects " +
                              shape_to_string(dst.shape()));
  }
  dst = src;
}

}  // namespace

template <typename T>
void restore_checkpoint(const io::Checkpoint& ckpt, models::Network<T>& net, SGD<T>* sgd) {
  for (auto* p : net.parameters()) {
    const std::string key = "param." + p->name;
    assign(p->value, ckpt.tensor<T>(key), key);
  }
  for (auto& b : net.buffers()) {
    const std::string key = "buffer." + b.name;
    assign(*b.tensor, ckpt.tensor<T>(key), key);
  }
  if (sgd) {
    const auto& params = sgd->parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::string key = "momentum." + params[i]->name;
      assign(sgd->velocity()[i], ckpt.tensor<T>(key), key);
    }
  }
}

models::VariantSpec variant_from_checkpoint(const io::Checkpoint& ckpt) {
  auto v = models::parse_variant(ckpt.get_string("meta.variant"));
  v.nonlinearity = tp::parse_nonlinearity(ckpt.get_string("meta.nonlinearity"));
  const auto shortcut = ckpt.get_int("meta.tp_shortcut");
  if (shortcut >= 0) v.tp_shortcut = shortcut == 1;
  v.tp_scaling = ckpt.get_int("meta.tp_scaling") != 0;
  v.input_size = static_cast<std::size_t>(ckpt.get_int("meta.input_size"));
  v.num_classes = static_cast<std::size_t>(ckpt.get_int("meta.num_classes"));
  return v;
}

namespace {

template <typename T>
EvalResult evaluate_loaded(const io::Checkpoint& ckpt, const data::Dataset& data,
                           std::size_t batch_size) {
  models::Network<T> net(models::build_resnet20(variant_from_checkpoint(ckpt)), 0);
  restore_checkpoint<T>(ckpt, net, nullptr);
  return evaluate(net, data, batch_size);
}

}  // namespace

EvalResult evaluate_checkpoint(const fs::path& file, const data::Dataset& data,
                               std::size_t batch_size) {
  const auto ckpt = io::load_checkpoint(file);
  if (parse_precision(ckpt.get_string("meta.precision")) == Precision::F64) {
    return evaluate_loaded<double>(ckpt, data, batch_size);
  }
  return evaluate_loaded<float>(ckpt, data, batch_size);
}

// -------------------------------------------------------------- training

std::string csv_header() {
  return "epoch,lr,train_loss,train_acc,test_loss,test_acc,wall_seconds";
}

std::string to_csv(const EpochLog& r) {
  std::ostringstream os;
  os << r.epoch << ',' << std::setprecision(17) << r.lr << ',' << r.train_loss << ','
     << r.train_accuracy << ',' << r.test_loss << ',' << r.test_accuracy << ','
     << std::setprecision(6) << std::fixed << r.wall_seconds;
  return os.str();
}

namespace {

template <typename T>
std::string parameter_norm_table(models::Network<T>& net) {
  std::ostringstream os;
  os << std::left << std::setw(48) << "parameter" << std::right << std::setw(16) << "l2 norm"
     << std::setw(16) << "grad l2 norm" << '\n';
  for (auto* p : net.parameters()) {
    os << std::left << std::setw(48) << p->name << std::right << std::setw(16)
       << std::sqrt(static_cast<double>(sum_of_squares(p->value))) << std::setw(16)
       << std::sqrt(static_cast<double>(sum_of_squares(p->grad))) << '\n';
  }
  return os.str();
}

template <typename T>
TrainResult run(const TrainConfig& config, const data::Cifar10& full, std::ostream* progress) {
  const data::Dataset train_set = config.subset ? data::take(full.train, *config.subset) : full.train;
  const data::Dataset test_set =
      config.test_subset ? data::take(full.test, *config.test_subset) : full.test;
  if (train_set.size() == 0) throw std::invalid_argument("train: empty training set");

  fs::create_directories(config.out_dir);
  TrainResult result;
  result.log_file = config.out_dir / "log.csv";
  result.best_checkpoint = config.out_dir / "best.ckpt";
  result.last_checkpoint = config.out_dir / "last.ckpt";
  std::ofstream log(result.log_file, std::ios::trunc);
  if (!log) throw std::runtime_error("train: cannot write '" + result.log_file.string() + "'");
  log << csv_header() << '\n';

  models::Network<T> net(models::build_resnet20(config.variant), config.seed);
  SGD<T> sgd(net.parameters(), config.momentum, config.weight_decay);
  std::mt19937_64 order_rng(config.seed ^ 0x5eed0001ULL);
  std::mt19937_64 augment_rng(config.seed ^ 0x5eed0002ULL);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto start = std::chrono::steady_clock::now();
  std::size_t batch_id = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = learning_rate(config, epoch);
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t s = 0; s < order.size(); s += config.batch_size, ++batch_id) {
      const std::span<const std::size_t> idx(order.data() + s,
                                             std::min(config.batch_size, order.size() - s));
      const BasicTensor<T> x =
          data::make_batch(train_set, idx, config.augment, &augment_rng).template cast<T>();
      const auto labels = data::batch_labels(train_set, idx);
      const auto loss = train_step(net, sgd, x, labels, lr);
      if (!std::isfinite(static_cast<double>(loss.loss))) {
        std::ostringstream msg;
        msg << "train: non-finite loss at epoch " << epoch << ", batch " << batch_id
            << " (batch " << s / config.batch_size << " of the epoch, records";
        for (auto i : idx.first(std::min<std::size_t>(idx.size(), 8))) msg << ' ' << i;
        msg << (idx.size() > 8 ? " ...)" : ")") << "\n" << parameter_norm_table(net);
        std::ofstream(config.out_dir / "divergence.txt") << msg.str();
        throw DivergenceError(msg.str());
      }
      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(idx.size());
      correct += loss.correct;
    }
    const EvalResult test = evaluate(net, test_set, config.eval_batch_size);
    EpochLog row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_loss = loss_sum / static_cast<double>(train_set.size());
    row.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    row.test_loss = test.loss;
    row.test_accuracy = test.accuracy;
    row.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(row);
    log << to_csv(row) << '\n' << std::flush;

    if (result.best_epoch == 0 || test.accuracy > result.best_accuracy) {
      result.best_accuracy = test.accuracy;
      result.best_epoch = epoch;
      io::save_checkpoint(result.best_checkpoint,
                          make_checkpoint(net, &sgd, epoch, result.best_accuracy, config.precision));
    }
    io::save_checkpoint(result.last_checkpoint,
                        make_checkpoint(net, &sgd, epoch, result.best_accuracy, config.precision));
    if (progress) {
      *progress << "epoch " << epoch << "/" << config.epochs << "  lr " << lr << "  train loss "
                << std::fixed << std::setprecision(4) << row.train_loss << "  train acc "
                << std::setprecision(2) << 100 * row.train_accuracy << "%  test acc "
                << 100 * row.test_accuracy << "%  (" << std::setprecision(1) << row.wall_seconds
                << " s)" << std::defaultfloat << std::endl;
    }
  }
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& config, const data::Cifar10& data, std::ostream* progress) {
  config.validate();
  if (config.precision == Precision::F64) return run<double>(config, data, progress);
  return run<float>(config, data, progress);
}

#define TPNET_INSTANTIATE(T)                                                                  \
  template class SGD<T>;                                                                      \
  template EvalResult evaluate(models::Network<T>&, const data::Dataset&, std::size_t);       \
  template nn::LossResult<T> train_step(models::Network<T>&, SGD<T>&, const BasicTensor<T>&,  \
                                        const std::vector<std::uint8_t>&, double);            \
  template io::Checkpoint make_checkpoint(models::Network<T>&, SGD<T>*, std::size_t, double,  \
                                          Precision);                                         \
  template void restore_checkpoint(const io::Checkpoint&, models::Network<T>&, SGD<T>*);

TPNET_INSTANTIATE(float)
TPNET_INSTANTIATE(double)

#undef TPNET_INSTANTIATE

}  // namespace tpnet::train
