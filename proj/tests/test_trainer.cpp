#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tpnet/trainer.hpp"

namespace {

using namespace tpnet;
using train::TrainConfig;

TEST(Schedule, DefaultMilestones) {
  TrainConfig c;
  EXPECT_DOUBLE_EQ(train::learning_rate(c, 1), 0.1);
  EXPECT_DOUBLE_EQ(train::learning_rate(c, 82), 0.1);
  EXPECT_NEAR(train::learning_rate(c, 83), 0.01, 1e-15);
  EXPECT_NEAR(train::learning_rate(c, 122), 0.01, 1e-15);
  EXPECT_NEAR(train::learning_rate(c, 123), 0.001, 1e-15);
  EXPECT_NEAR(train::learning_rate(c, 164), 0.0001, 1e-15);
  EXPECT_NEAR(train::learning_rate(c, 200), 0.0001, 1e-15);
}

TEST(Schedule, DeskScale) {
  const TrainConfig c = TrainConfig::desk_scale();
  EXPECT_EQ(c.epochs, 20u);
  EXPECT_EQ(c.subset, 5000u);
  EXPECT_EQ(c.milestones, (std::vector<std::size_t>{8, 12, 16}));
  EXPECT_NEAR(train::learning_rate(c, 9), 0.01, 1e-15);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, Validation) {
  TrainConfig c;
  c.milestones = {10, 5};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.milestones = {82, 122, 200};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.variant.input_size = 16;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(train::parse_precision("f64"), train::Precision::F64);
  EXPECT_THROW(train::parse_precision("f16"), std::invalid_argument);
}

TEST(Sgd, QuadraticClosedForm) {
  // f(w) = 0.5 * k * (w - c)^2; two steps of coupled-decay momentum SGD.
  const double k = 3.0, c0 = 1.5, lr = 0.05, mu = 0.9, wd = 0.01, w0 = -2.0;
  nn::Parameter<double> p("w", {1});
  p.value[0] = w0;
  train::SGD<double> sgd({&p}, mu, wd);
  double w = w0, v = 0.0;
  for (int step = 0; step < 2; ++step) {
    p.grad[0] = k * (p.value[0] - c0);
    sgd.step(lr);
    const double g = k * (w - c0) + wd * w;
    v = mu * v + g;
    w -= lr * v;
    EXPECT_DOUBLE_EQ(p.value[0], w);
  }
  EXPECT_DOUBLE_EQ(sgd.velocity()[0][0], v);
}

TEST(Evaluate, BatchSizeInvariantAndNearChance) {
  const auto data = data::synthetic_split(0, 60, 4);
  models::Network<float> net(models::build_resnet20(models::parse_variant("1c-ht")), 0);
  const auto a = train::evaluate(net, data.test, 7);
  const auto b = train::evaluate(net, data.test, 60);
  EXPECT_EQ(a.correct, b.correct);
  EXPECT_NEAR(a.loss, b.loss, 1e-5);
  EXPECT_EQ(a.count, 60u);
  EXPECT_GE(a.accuracy, 0.0);
  const auto again = train::evaluate(net, data.test, 7);
  EXPECT_EQ(again.loss, a.loss);
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::string without_wall_clock(const std::string& row) { return row.substr(0, row.rfind(',')); }

TEST(Train, WritesLogAndCheckpoints) {
  support::TempDir tmp;
  TrainConfig c;
  c.variant = models::parse_variant("1c-ht");
  c.epochs = 2;
  c.milestones = {1};
  c.batch_size = 16;
  c.out_dir = tmp.path();
  const auto data = data::synthetic_split(40, 20, 0);
  const auto r = train::train(c, data);
  ASSERT_EQ(r.log.size(), 2u);
  EXPECT_DOUBLE_EQ(r.log[0].lr, 0.1);
  EXPECT_NEAR(r.log[1].lr, 0.01, 1e-15);
  const auto lines = read_lines(r.log_file);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "epoch,lr,train_loss,train_acc,test_loss,test_acc,wall_seconds");
  EXPECT_TRUE(std::filesystem::exists(r.best_checkpoint));
  EXPECT_TRUE(std::filesystem::exists(r.last_checkpoint));
  const auto best = io::load_checkpoint(r.best_checkpoint);
  EXPECT_EQ(static_cast<std::size_t>(best.get_int("meta.epoch")), r.best_epoch);
  EXPECT_EQ(best.get_real("meta.best_accuracy"), r.best_accuracy);
  const auto eval = train::evaluate_checkpoint(r.best_checkpoint, data.test, 5);
  EXPECT_EQ(eval.accuracy, r.best_accuracy);
}

TEST(Train, SeededRunsAreIdentical) {
  support::TempDir a, b;
  TrainConfig c;
  c.variant = models::parse_variant("3c-dct");
  c.epochs = 2;
  c.milestones = {};
  c.batch_size = 16;
  c.reproducible = true;
  c.seed = 7;
  const auto data = data::synthetic_split(48, 20, 1);
  c.out_dir = a.path();
  train::train(c, data);
  c.out_dir = b.path();
  train::train(c, data);
  const auto la = read_lines(a.path() / "log.csv"), lb = read_lines(b.path() / "log.csv");
  ASSERT_EQ(la.size(), lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) EXPECT_EQ(without_wall_clock(la[i]), without_wall_clock(lb[i]));
}

TEST(Train, DivergenceReportsBatchAndNorms) {
  support::TempDir tmp;
  TrainConfig c;
  c.variant = models::parse_variant("resnet20");
  c.epochs = 1;
  c.milestones = {};
  c.lr = 1e30;
  c.batch_size = 8;
  c.out_dir = tmp.path();
  const auto data = data::synthetic_split(64, 8, 2);
  try {
    train::train(c, data);
    FAIL() << "expected DivergenceError";
  } catch (const train::DivergenceError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("batch"), std::string::npos);
    EXPECT_NE(msg.find("l2 norm"), std::string::npos);
    EXPECT_NE(msg.find("conv1.weight"), std::string::npos) << msg;
  }
  EXPECT_TRUE(std::filesystem::exists(tmp.path() / "divergence.txt"));
}

TEST(Train, DoublePrecisionRuns) {
  support::TempDir tmp;
  TrainConfig c;
  c.variant = models::parse_variant("1c-dct");
  c.epochs = 1;
  c.milestones = {};
  c.batch_size = 8;
  c.precision = train::Precision::F64;
  c.out_dir = tmp.path();
  const auto r = train::train(c, data::synthetic_split(16, 8, 3));
  EXPECT_TRUE(std::isfinite(r.log[0].train_loss));
  EXPECT_EQ(io::load_checkpoint(r.best_checkpoint).get_string("meta.precision"), "f64");
}

}  // namespace
