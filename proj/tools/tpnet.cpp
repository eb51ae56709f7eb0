// tpnet command-line interface: train, eval, count, verify, bench.

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tpnet/accounting.hpp"
#include "tpnet/cifar10.hpp"
#include "tpnet/network.hpp"
#include "tpnet/trainer.hpp"
#include "tpnet/verify.hpp"

namespace {

using namespace tpnet;

struct Options {
  std::string variant = "resnet20";
  std::string kind;
  std::size_t channels = 0;
  std::string nonlinearity = "soft-threshold";
  std::string tp_shortcut = "auto";
  bool no_scaling = false;

  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<std::size_t> milestones;
  std::uint64_t seed = 0;
  std::size_t subset = 0;
  std::size_t test_subset = 0;
  std::size_t synthetic = 0;
  std::string data_dir;
  std::string out_dir = "runs/latest";
  std::string precision = "f32";
  bool reproducible = false;
  bool desk_scale = false;
  bool no_augment = false;

  std::string checkpoint;
  std::string convention = "matrix-product";
  bool multiplies_only = false;
  bool csv_only = false;
  std::string suite = "all";
  std::vector<std::string> bench_variants{"resnet20", "1c-dct", "3c-dct", "1c-ht", "3c-ht", "3c-bwt"};
  std::size_t repeats = 5;
};

models::VariantSpec resolve_variant(const Options& o) {
  models::VariantSpec v = models::parse_variant(o.variant);
  if (!o.kind.empty()) {
    v.tp = true;
    v.kind = transforms::parse_transform_kind(o.kind);
  }
  if (o.channels > 0) {
    v.tp = true;
    v.channels = o.channels;
  }
  v.nonlinearity = tp::parse_nonlinearity(o.nonlinearity);
  if (o.tp_shortcut == "on") {
    v.tp_shortcut = true;
  } else if (o.tp_shortcut == "off") {
    v.tp_shortcut = false;
  } else if (o.tp_shortcut != "auto") {
    throw std::invalid_argument("--tp-shortcut must be on, off or auto");
  }
  v.tp_scaling = !o.no_scaling;
  v.validate();
  return v;
}

data::Cifar10 load_data(const Options& o) {
  if (auto dir = data::find_cifar10(o.data_dir)) return data::load_cifar10(*dir);
  if (o.synthetic > 0) {
    std::cerr << "note: CIFAR-10 not found, using " << o.synthetic << " synthetic training images\n";
    return data::synthetic_split(o.synthetic, std::max<std::size_t>(o.synthetic / 5, 10),
                                 o.seed);
  }
  throw data::LoadError(
      "CIFAR-10 binary batches not found in '" + o.data_dir +
      "' (expected data_batch_1..5.bin and test_batch.bin, e.g. from cifar-10-binary.tar.gz); "
      "pass --data-dir, or --synthetic N for a synthetic stand-in");
}

int run_train(const Options& o) {
  train::TrainConfig c = o.desk_scale ? train::TrainConfig::desk_scale() : train::TrainConfig{};
  c.variant = resolve_variant(o);
  if (!o.desk_scale) {
    c.epochs = o.epochs;
    if (o.subset > 0) c.subset = o.subset;
    c.milestones = o.milestones.empty() ? train::scale_milestones({82, 122, 163}, 200, c.epochs)
                                        : o.milestones;
  } else if (!o.milestones.empty()) {
    c.milestones = o.milestones;
  }
  c.batch_size = o.batch_size;
  c.lr = o.lr;
  c.momentum = o.momentum;
  c.weight_decay = o.weight_decay;
  c.seed = o.seed;
  if (o.test_subset > 0) c.test_subset = o.test_subset;
  c.data_dir = o.data_dir;
  c.out_dir = o.out_dir;
  c.precision = train::parse_precision(o.precision);
  c.reproducible = o.reproducible;
  c.augment = !o.no_augment;
  c.validate();

  const auto data = load_data(o);
  std::cout << "variant " << c.variant.name() << ", " << c.epochs << " epochs, "
            << (c.subset ? std::min(*c.subset, data.train.size()) : data.train.size())
            << " training images, milestones";
  for (auto m : c.milestones) std::cout << ' ' << m;
  std::cout << std::endl;
  const auto result = train::train(c, data, &std::cout);
  std::cout << "best test accuracy " << std::fixed << std::setprecision(2)
            << 100 * result.best_accuracy << "% at epoch " << result.best_epoch << "\nlog: "
            << result.log_file.string() << "\ncheckpoint: " << result.best_checkpoint.string()
            << '\n';
  return 0;
}

int run_eval(const Options& o) {
  if (o.checkpoint.empty()) throw std::invalid_argument("eval needs --checkpoint");
  const auto data = load_data(o);
  const data::Dataset test = o.test_subset > 0 ? data::take(data.test, o.test_subset) : data.test;
  const auto r = train::evaluate_checkpoint(o.checkpoint, test, o.batch_size);
  std::cout << "test accuracy " << std::fixed << std::setprecision(2) << 100 * r.accuracy << "% ("
            << r.correct << "/" << r.count << "), loss " << std::setprecision(4) << r.loss << '\n';
  return 0;
}

int run_count(const Options& o) {
  accounting::MacOptions m;
  if (o.convention == "fast") {
    m.transform = accounting::TransformCost::FastTransform;
  } else if (o.convention != "matrix-product") {
    throw std::invalid_argument("--convention must be matrix-product or fast");
  }
  m.count_batchnorm = m.count_activations = !o.multiplies_only;
  const auto report = accounting::count(models::build_resnet20(resolve_variant(o)), m);
  if (!o.csv_only) std::cout << accounting::format_table(report) << '\n';
  std::cout << accounting::format_csv(report);
  return 0;
}

int run_verify(const Options& o) {
  verify::Report r;
  if (o.suite == "all") {
    r = verify::run_all();
  } else if (o.suite == "transforms") {
    r = verify::transform_suite();
  } else if (o.suite == "theorems") {
    r = verify::theorem_suite();
  } else if (o.suite == "gradients") {
    r = verify::gradient_suite();
  } else {
    throw std::invalid_argument("--suite must be all, transforms, theorems or gradients");
  }
  std::cout << verify::format(r);
  const auto failed = std::count_if(r.checks.begin(), r.checks.end(),
                                    [](const verify::CheckResult& c) { return !c.passed; });
  std::cout << r.checks.size() - static_cast<std::size_t>(failed) << "/" << r.checks.size()
            << " checks passed\n";
  return failed == 0 ? 0 : 1;
}

int run_bench(const Options& o) {
  std::cout << std::left << std::setw(22) << "variant" << std::right << std::setw(14)
            << "ms/forward" << std::setw(14) << "ms/image" << std::setw(12) << "MMACs" << '\n';
  for (const auto& name : o.bench_variants) {
    Options vo = o;
    vo.variant = name;
    const auto graph = models::build_resnet20(resolve_variant(vo));
    models::Network<float> net(graph, o.seed);
    Tensor x({o.batch_size, 3, data::kImageSide, data::kImageSide});
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<float> dist(0.0f, 1.0f);
    for (auto& v : x.values()) v = dist(rng);
    net.forward(x, nn::Mode::Eval);
    double best = 1e300;
    for (std::size_t r = 0; r < o.repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      net.forward(x, nn::Mode::Eval);
      best = std::min(best, std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - t0).count());
    }
    std::cout << std::left << std::setw(22) << graph.variant.name() << std::right << std::fixed
              << std::setprecision(2) << std::setw(14) << best << std::setw(14)
              << best / static_cast<double>(o.batch_size) << std::setw(12)
              << static_cast<double>(accounting::count(graph).total_macs()) / 1e6 << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transform-domain perceptron networks: training, evaluation and accounting"};
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--variant", o.variant,
                 "resnet20, 1c-dct, 3c-dct, 1c-ht, 3c-ht, 3c-bwt, resnet20+1c-dct-p, all-dct, "
                 "or <P>c-<dct|ht|bwt>")
      ->capture_default_str();
  app.add_option("--kind", o.kind, "Override the transform: dct, ht or bwt");
  app.add_option("--channels", o.channels, "Override the branch count P");
  app.add_option("--nonlinearity", o.nonlinearity,
                 "soft-threshold, relu-with-thresholds, relu-plain, leaky-relu or silu")
      ->capture_default_str();
  app.add_option("--tp-shortcut", o.tp_shortcut, "on, off or auto (on iff P = 1)")
      ->capture_default_str();
  app.add_flag("--no-scaling", o.no_scaling, "Drop the transform-domain scaling matrices");
  app.add_option("--epochs", o.epochs)->capture_default_str();
  app.add_option("--batch-size", o.batch_size)->capture_default_str();
  app.add_option("--lr", o.lr)->capture_default_str();
  app.add_option("--momentum", o.momentum)->capture_default_str();
  app.add_option("--weight-decay", o.weight_decay)->capture_default_str();
  app.add_option("--milestones", o.milestones,
                 "Epochs after which the learning rate drops by 10x (default: 82,122,163 "
                 "scaled to --epochs)")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--seed", o.seed)->capture_default_str();
  app.add_option("--subset", o.subset, "Train on the first N training images");
  app.add_option("--test-subset", o.test_subset, "Evaluate on the first N test images");
  app.add_option("--synthetic", o.synthetic,
                 "Use N synthetic images when CIFAR-10 is not found in --data-dir");
  app.add_option("--data-dir", o.data_dir, "Directory holding the CIFAR-10 binary batches")
      ->envname("TPNET_CIFAR10_DIR");
  app.add_option("--out-dir", o.out_dir)->capture_default_str();
  app.add_option("--precision", o.precision, "f32 or f64")->capture_default_str();
  app.add_flag("--reproducible", o.reproducible, "Deterministic single-threaded data order");
  app.add_flag("--desk-scale", o.desk_scale, "Subset 5000, 20 epochs, milestones 8,12,16");
  app.add_flag("--no-augment", o.no_augment, "Disable crop/flip augmentation");
  app.add_option("--checkpoint", o.checkpoint, "Checkpoint file for eval");
  app.add_option("--convention", o.convention, "MAC convention: matrix-product or fast")
      ->capture_default_str();
  app.add_flag("--multiplies-only", o.multiplies_only,
               "Count MACs of conv, TP and linear layers only (no BN/ReLU cost)");
  app.add_flag("--csv", o.csv_only, "Print only the CSV rows");
  app.add_option("--suite", o.suite, "all, transforms, theorems or gradients")->capture_default_str();
  app.add_option("--bench-variants", o.bench_variants, "Variants timed by bench")->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--repeats", o.repeats)->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "Train a variant on CIFAR-10");
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the CIFAR-10 test set");
  auto* count_cmd = app.add_subcommand("count", "Print parameter and MAC counts");
  auto* verify_cmd = app.add_subcommand("verify", "Run the transform, theorem and gradient checks");
  auto* bench_cmd = app.add_subcommand("bench", "Time eval-mode forward passes");
  for (auto* sub : {train_cmd, eval_cmd, count_cmd, verify_cmd, bench_cmd}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train_cmd) return run_train(o);
    if (*eval_cmd) return run_eval(o);
    if (*count_cmd) return run_count(o);
    if (*verify_cmd) return run_verify(o);
    if (*bench_cmd) return run_bench(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
