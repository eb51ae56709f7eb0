// Acceptance suite: one PASS/FAIL/SKIP line per criterion.
//
//   tpnet_acceptance [--criterion 1,2,...] [--data-dir DIR]
//
// Exit status: 0 when every selected criterion passes, 1 on any failure,
// 77 when every selected criterion was skipped.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "support.hpp"
#include "tpnet/accounting.hpp"
#include "tpnet/trainer.hpp"
#include "tpnet/verify.hpp"

namespace {

using namespace tpnet;

// Pinned tolerances and budgets.
constexpr double kMacRelTol = 0.005;
constexpr double kGradTol = 1e-4;
constexpr double kMinDeskAccuracy = 0.50;
constexpr double kMaxDeskGap = 0.05;
constexpr double kOverfitLoss = 0.1;
constexpr std::size_t kOverfitSteps = 200;

enum class Outcome { Pass, Fail, Skip };

struct Result {
  Outcome outcome = Outcome::Fail;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;
  std::function<Result()> run;
};

std::optional<std::filesystem::path> g_data_dir;

Result from(bool ok, const std::string& detail) { return {ok ? Outcome::Pass : Outcome::Fail, detail}; }

std::string fmt(double v, int precision = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

Result parameter_counts() {
  bool ok = true;
  std::ostringstream d;
  for (const auto& row : support::table5()) {
    const auto got =
        accounting::count(models::build_resnet20(models::parse_variant(row.variant))).total_params();
    if (got != row.params) {
      ok = false;
      d << row.variant << " " << got << " != " << row.params << "; ";
    }
  }
  d << support::table5().size() << " variants checked";
  return from(ok, d.str());
}

Result mac_counts() {
  bool ok = true;
  std::ostringstream d;
  const auto macs = [](const std::string& v) {
    return static_cast<std::int64_t>(
        accounting::count(models::build_resnet20(models::parse_variant(v))).total_macs());
  };
  const std::int64_t base = macs("resnet20");
  const std::pair<const char*, std::int64_t> exact[] = {{"1c-dct", 10530816}, {"1c-ht", 18788352}};
  for (const auto& [v, want] : exact) {
    const std::int64_t delta = base - macs(v);
    if (delta != want || delta != support::oracle_mac_delta(models::parse_variant(v))) {
      ok = false;
      d << v << " delta " << delta << " != " << want << "; ";
    }
  }
  double worst = 0;
  for (const auto& row : support::table5()) {
    if (row.mmacs == 0.0) continue;
    const double m = static_cast<double>(macs(row.variant)) / 1e6;
    const double rel = std::abs(m - row.mmacs) / row.mmacs;
    worst = std::max(worst, rel);
    if (rel > kMacRelTol) {
      ok = false;
      d << row.variant << " " << fmt(m) << "M vs " << row.mmacs << "M; ";
    }
  }
  d << "exact deltas -10,530,816 / -18,788,352; worst total deviation " << fmt(100 * worst, 3)
    << "% (tol " << fmt(100 * kMacRelTol, 1) << "%)";
  return from(ok, d.str());
}

Result suite(const verify::Report& r, double tol_cap) {
  std::size_t failed = 0;
  double worst = 0;
  std::ostringstream d;
  for (const auto& c : r.checks) {
    worst = std::max(worst, c.measured);
    if (!c.passed || c.tolerance > tol_cap) {
      ++failed;
      d << c.name << " " << c.measured << "; ";
    }
  }
  d << r.checks.size() - failed << "/" << r.checks.size() << " checks, worst error " << std::scientific
    << std::setprecision(2) << worst;
  return from(failed == 0 && !r.checks.empty(), d.str());
}

Result transforms_criterion() { return suite(verify::transform_suite(), 1e-9); }
Result theorems_criterion() { return suite(verify::theorem_suite(), 1e-9); }
Result gradients_criterion() { return suite(verify::gradient_suite(), kGradTol); }

std::optional<data::Cifar10> cifar() {
  const char* env = std::getenv("TPNET_CIFAR10_DIR");
  std::optional<std::filesystem::path> dir = g_data_dir;
  if (!dir && env) dir = env;
  if (!dir) return std::nullopt;
  if (auto found = data::find_cifar10(*dir)) return data::load_cifar10(*found);
  return std::nullopt;
}

Result learnability() {
  const auto data = cifar();
  if (!data) {
    return {Outcome::Skip,
            "CIFAR-10 binaries not found (set TPNET_CIFAR10_DIR or pass --data-dir)"};
  }
  std::vector<double> acc;
  for (const char* v : {"resnet20", "3c-dct"}) {
    train::TrainConfig c = train::TrainConfig::desk_scale();
    c.variant = models::parse_variant(v);
    c.seed = 0;
    c.reproducible = true;
    support::TempDir out;
    c.out_dir = out.path();
    acc.push_back(train::train(c, *data, &std::cerr).best_accuracy);
  }
  const bool ok = acc[0] >= kMinDeskAccuracy && acc[1] >= kMinDeskAccuracy &&
                  std::abs(acc[0] - acc[1]) <= kMaxDeskGap;
  return from(ok, "resnet20 " + fmt(100 * acc[0]) + "%, 3c-dct " + fmt(100 * acc[1]) +
                      "% (need >= 50% each, gap <= 5 points)");
}

Result ablations() {
  const data::Dataset images = support::overfit_images();
  bool ok = true;
  std::ostringstream d;
  std::size_t worst_steps = 0;
  for (const auto& row : support::table6()) {
    const std::uint64_t params =
        accounting::count(models::build_resnet20(row.spec)).total_params();
    const auto smoke = support::overfit_smoke(row.spec, images, kOverfitSteps, kOverfitLoss);
    worst_steps = std::max(worst_steps, smoke.steps);
    std::cerr << "  " << std::left << std::setw(30) << row.label << std::right << std::setw(9)
              << params << "  overfit " << (smoke.passed ? "ok" : "FAILED") << " in "
              << smoke.steps << " steps (loss " << fmt(smoke.loss, 4) << ")\n";
    if (params != row.params || !smoke.passed) {
      ok = false;
      d << row.label << (params != row.params ? " params " + std::to_string(params) : "")
        << (smoke.passed ? "" : " overfit loss " + fmt(smoke.loss, 3)) << "; ";
    }
  }
  d << support::table6().size() << " configurations, slowest overfit " << worst_steps << "/"
    << kOverfitSteps << " steps";
  return from(ok, d.str());
}

std::vector<std::string> log_without_wall_clock(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(line.substr(0, line.rfind(',')));
  return rows;
}

Result determinism() {
  auto loaded = cifar();
  const data::Cifar10 data = loaded ? std::move(*loaded) : data::synthetic_split(512, 500, 0);
  train::TrainConfig c;
  c.variant = models::parse_variant("1c-dct");
  c.epochs = 2;
  c.milestones = {};
  c.subset = 512;
  c.test_subset = 500;
  c.seed = 123;
  c.reproducible = true;
  support::TempDir a, b;
  c.out_dir = a.path();
  const auto first = train::train(c, data);
  c.out_dir = b.path();
  train::train(c, data);
  const bool same_log =
      log_without_wall_clock(a.path() / "log.csv") == log_without_wall_clock(b.path() / "log.csv");
  const data::Dataset test = data::take(data.test, 500);
  const auto reloaded = train::evaluate_checkpoint(first.best_checkpoint, test, 100);
  const bool same_acc = reloaded.accuracy == first.best_accuracy;
  const auto ckpt = io::load_checkpoint(first.best_checkpoint);
  io::save_checkpoint(a.path() / "resaved.ckpt", ckpt);
  std::ifstream f1(first.best_checkpoint, std::ios::binary), f2(a.path() / "resaved.ckpt", std::ios::binary);
  const bool same_bytes = std::string(std::istreambuf_iterator<char>(f1), {}) ==
                          std::string(std::istreambuf_iterator<char>(f2), {});
  return from(same_log && same_acc && same_bytes,
              std::string(loaded ? "CIFAR-10" : "synthetic") + " subset 512, 2 epochs: logs " +
                  (same_log ? "identical" : "DIFFER") + ", reloaded accuracy " +
                  fmt(100 * reloaded.accuracy) + "% vs " + fmt(100 * first.best_accuracy) +
                  "%, checkpoint bytes " + (same_bytes ? "identical" : "DIFFER"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tpnet acceptance criteria"};
  std::vector<int> selected;
  std::string data_dir;
  app.add_option("--criterion", selected, "Criteria to run (default: all)")
      ->delimiter(',')
      ->check(CLI::Range(1, 8));
  app.add_option("--data-dir", data_dir, "CIFAR-10 binary directory");
  CLI11_PARSE(app, argc, argv);
  if (!data_dir.empty()) g_data_dir = data_dir;

  const std::vector<Criterion> criteria{
      {1, "parameter counts", 1, parameter_counts},
      {2, "MAC counts", 1, mac_counts},
      {3, "transform correctness", 10, transforms_criterion},
      {4, "convolution theorems", 10, theorems_criterion},
      {5, "gradient checks", 60, gradients_criterion},
      {6, "desk-scale learnability", 30 * 60, learnability},
      {7, "ablation wiring", 5 * 60, ablations},
      {8, "determinism and persistence", 2 * 60, determinism},
  };

  std::size_t ran = 0, failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) {
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Result r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {Outcome::Fail, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.outcome == Outcome::Pass && secs > c.budget_seconds) {
      r.outcome = Outcome::Fail;
      r.detail += "; over time budget";
    }
    const char* tag = r.outcome == Outcome::Pass ? "PASS" : r.outcome == Outcome::Fail ? "FAIL" : "SKIP";
    std::cout << tag << " " << c.id << " " << c.title << " [" << fmt(secs) << " s / "
              << c.budget_seconds << " s]: " << r.detail << std::endl;
    ran += r.outcome != Outcome::Skip;
    failed += r.outcome == Outcome::Fail;
  }
  if (failed > 0) return 1;
  return ran == 0 ? 77 : 0;
}
