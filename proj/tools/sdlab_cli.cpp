// Command-line driver: config-driven experiment orchestration.
//
//   sdlab train  --config exp.cfg --out runs/exp1
//   sdlab bench  --config exp.cfg --out runs/exp1
//   sdlab ablate --config exp.cfg --ablation sdvit
//   sdlab verify --config exp.cfg
//   sdlab report --out runs/exp1

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sdlab/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct CliOptions {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> arms;
  std::vector<double> temperatures;
  int gamma = 0;
  uint64_t seed = 0;
  bool seed_set = false;
};

sdlab::ExperimentConfig resolve_config(const CliOptions& opt) {
  sdlab::ExperimentConfig cfg;
  if (!opt.config_path.empty()) cfg = sdlab::load_config_file(opt.config_path);
  if (opt.seed_set) cfg.seed = opt.seed;
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  if (!opt.arms.empty()) cfg.arms = opt.arms;
  if (!opt.temperatures.empty()) cfg.temperatures = opt.temperatures;
  if (opt.gamma > 0) cfg.gamma = opt.gamma;
  cfg.validate();
  return cfg;
}

void add_common_flags(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--config", opt.config_path, "config file (key = value lines)");
  auto* seed = cmd->add_option("--seed", opt.seed, "override the experiment seed");
  seed->each([&opt](const std::string&) { opt.seed_set = true; });
  cmd->add_option("--out", opt.out_dir, "output directory");
  cmd->add_option("--arm", opt.arms, "benchmark arm (repeatable)");
  cmd->add_option("--gamma", opt.gamma, "speculation length");
  cmd->add_option("--temperature", opt.temperatures, "sampling temperature (repeatable)");
}

void print_report(const sdlab::BenchmarkReport& report) {
  std::cout << sdlab::report_to_csv(report);
}

int cmd_train(const sdlab::ExperimentConfig& cfg) {
  fs::create_directories(fs::path(cfg.out_dir) / "checkpoints");
  sdlab::write_file(fs::path(cfg.out_dir) / "resolved_config.txt",
                    sdlab::resolved_config_text(cfg));
  sdlab::TrainedArms arms = sdlab::train_pipeline(cfg);
  sdlab::save_checkpoint(*arms.task->target_impl(),
                         (fs::path(cfg.out_dir) / "checkpoints" / "target.json").string());
  for (const std::string& arm : cfg.arms)
    sdlab::save_checkpoint(*sdlab::arm_model(arms, arm),
                           (fs::path(cfg.out_dir) / "checkpoints" / (arm + ".json")).string());
  for (const auto& [phase, curve] : arms.loss_curves) {
    std::cout << phase << " loss:";
    for (double l : curve) std::cout << " " << l;
    std::cout << "\n";
  }
  return 0;
}

int cmd_bench(const sdlab::ExperimentConfig& cfg) {
  print_report(sdlab::run_experiment(cfg));
  return 0;
}

int cmd_ablate(const sdlab::ExperimentConfig& cfg, const std::string& kind) {
  const sdlab::Ablation ab =
      kind == "text_only" ? sdlab::Ablation::text_only : sdlab::Ablation::sdvit;
  sdlab::BenchmarkReport report = sdlab::run_ablation(cfg, ab);
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    sdlab::write_file(fs::path(cfg.out_dir) / ("ablation_" + kind + ".csv"),
                      sdlab::report_to_csv(report));
  }
  print_report(report);
  return 0;
}

int cmd_verify(const sdlab::ExperimentConfig& cfg) {
  sdlab::LosslessSuiteResult result = sdlab::run_lossless_suite(cfg);
  for (const auto& e : result.entries) {
    std::cout << (e.verdict.passed ? "PASS" : "FAIL") << " " << e.name
              << " chi2_p=" << e.verdict.chi_square.p_value
              << " max_identity_error=" << e.verdict.max_identity_error << "\n";
  }
  return result.all_passed() ? 0 : 1;
}

int cmd_report(const sdlab::ExperimentConfig& cfg) {
  const fs::path json_path = fs::path(cfg.out_dir) / "report.json";
  std::ifstream in(json_path);
  if (!in) throw sdlab::Error("no report.json under " + cfg.out_dir + "; run bench first");
  nlohmann::json j;
  in >> j;
  sdlab::BenchmarkReport report;
  report.seed = j.at("seed").get<uint64_t>();
  report.config_hash = j.at("config_hash").get<std::string>();
  report.version = j.at("version").get<std::string>();
  for (const nlohmann::json& row : j.at("rows")) {
    sdlab::BenchRow r;
    r.arm = row.at("arm").get<std::string>();
    r.temperature = row.at("temperature").get<double>();
    r.gamma = row.at("gamma").get<int>();
    r.tau = row.at("tau").get<double>();
    r.speedup = row.at("speedup_model").get<double>();
    r.speedup_vs_baseline = row.at("speedup_vs_baseline").get<double>();
    r.sequences = row.at("sequences").get<long>();
    r.emitted = row.at("emitted").get<long>();
    r.target_passes = row.at("target_passes").get<long>();
    report.rows.push_back(r);
  }
  sdlab::write_file(fs::path(cfg.out_dir) / "report.csv", sdlab::report_to_csv(report));
  print_report(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speculative decoding laboratory"};
  app.require_subcommand(1);

  CliOptions opt;
  std::string ablation_kind = "sdvit";

  CLI::App* train = app.add_subcommand("train", "build the task and train all arms");
  CLI::App* bench = app.add_subcommand("bench", "full pipeline + benchmark report");
  CLI::App* ablate = app.add_subcommand("ablate", "comparison table for one ablation");
  CLI::App* verify = app.add_subcommand("verify", "losslessness suite (nonzero exit on failure)");
  CLI::App* report = app.add_subcommand("report", "re-emit report.csv from report.json");
  for (CLI::App* cmd : {train, bench, ablate, verify, report}) add_common_flags(cmd, opt);
  ablate->add_option("--ablation", ablation_kind, "sdvit | text_only")
      ->check(CLI::IsMember({"sdvit", "text_only"}));

  CLI11_PARSE(app, argc, argv);

  try {
    const sdlab::ExperimentConfig cfg = resolve_config(opt);
    if (*train) return cmd_train(cfg);
    if (*bench) return cmd_bench(cfg);
    if (*ablate) return cmd_ablate(cfg, ablation_kind);
    if (*verify) return cmd_verify(cfg);
    if (*report) return cmd_report(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
