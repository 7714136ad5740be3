#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdlab/analysis.hpp"
#include "sdlab/core.hpp"
#include "sdlab/distill.hpp"
#include "sdlab/model.hpp"
#include "sdlab/neural.hpp"
#include "sdlab/serialize.hpp"
#include "sdlab/specdec.hpp"

namespace sdlab {

inline constexpr const char* kVersion = "sdlab-0.1.0";

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

// Arms of the benchmark: the text-only baseline drafter, the fixed-label
// (vanilla) fine-tuned multimodal drafter, and the self-distilled one.
inline const std::vector<std::string> kAllArms = {"text_baseline", "vanilla_drafter",
                                                  "sdvit_drafter"};

struct ExperimentConfig {
  uint64_t seed = 42;
  std::string out_dir = "out";

  TaskDims task;
  bool ctx_dependent = true;

  int drafter_d_emb = 16;
  int drafter_window = 3;

  int n_pretrain = 5000;
  int n_distill = 10000;

  int epochs = 5;
  int batch_size = 64;
  double lr_phase0 = 1e-2;
  double lr_phase1 = 1e-2;
  double lr_phase2 = 1e-2;

  int gamma = 5;
  std::vector<double> temperatures = {0.0, 1.0};
  int eval_sequences = 200;
  int eval_max_tokens = 48;
  double cost_ratio = 0.1;
  std::vector<std::string> arms = kAllArms;

  long lossless_trials = 100000;

  std::vector<SamplingSetting> sampling_grid = {{0.7, 0.9}, {0.7, 1.0}, {1.0, 0.9}, {1.0, 1.0}};

  void validate() const {
    if (arms.empty()) throw Error("config: arm list is empty");
    for (const std::string& a : arms)
      if (std::find(kAllArms.begin(), kAllArms.end(), a) == kAllArms.end())
        throw Error("config: unknown arm '" + a + "'");
    if (temperatures.empty()) throw Error("config: temperature list is empty");
    if (eval_sequences < 1 || eval_max_tokens < 1 || gamma < 1) throw Error("config: bad bench");
  }
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    // trim
    const size_t a = item.find_first_not_of(" \t");
    const size_t b = item.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(item.substr(a, b - a + 1));
  }
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error("config: bad boolean '" + v + "'");
}

}  // namespace detail

// Flat key=value config with dotted section keys; '#' starts a comment.
// Unknown keys are hard errors.
inline void apply_config_entry(ExperimentConfig& c, const std::string& key,
                               const std::string& value) {
  using detail::parse_bool;
  if (key == "seed") c.seed = std::stoull(value);
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "task.vocab_size") c.task.vocab_size = std::stoi(value);
  else if (key == "task.eos") c.task.eos = std::stoi(value);
  else if (key == "task.d_ctx") c.task.d_ctx = std::stoi(value);
  else if (key == "task.d_vis") c.task.d_vis = std::stoi(value);
  else if (key == "task.target_d_emb") c.task.target_d_emb = std::stoi(value);
  else if (key == "task.target_window") c.task.target_window = std::stoi(value);
  else if (key == "task.instruction_len") c.task.instruction_len = std::stoi(value);
  else if (key == "task.max_response_len") c.task.max_response_len = std::stoi(value);
  else if (key == "task.ctx_dependent") c.ctx_dependent = parse_bool(value);
  else if (key == "drafter.d_emb") c.drafter_d_emb = std::stoi(value);
  else if (key == "drafter.window") c.drafter_window = std::stoi(value);
  else if (key == "data.n_pretrain") c.n_pretrain = std::stoi(value);
  else if (key == "data.n_distill") c.n_distill = std::stoi(value);
  else if (key == "train.epochs") c.epochs = std::stoi(value);
  else if (key == "train.batch_size") c.batch_size = std::stoi(value);
  else if (key == "train.lr_phase0") c.lr_phase0 = std::stod(value);
  else if (key == "train.lr_phase1") c.lr_phase1 = std::stod(value);
  else if (key == "train.lr_phase2") c.lr_phase2 = std::stod(value);
  else if (key == "bench.gamma") c.gamma = std::stoi(value);
  else if (key == "bench.sequences") c.eval_sequences = std::stoi(value);
  else if (key == "bench.max_tokens") c.eval_max_tokens = std::stoi(value);
  else if (key == "bench.cost_ratio") c.cost_ratio = std::stod(value);
  else if (key == "bench.temperatures") {
    c.temperatures.clear();
    for (const std::string& t : detail::split_csv(value)) c.temperatures.push_back(std::stod(t));
  } else if (key == "bench.arms") {
    c.arms = detail::split_csv(value);
  } else if (key == "lossless.trials") {
    c.lossless_trials = std::stol(value);
  } else {
    throw Error("config: unknown key '" + key + "'");
  }
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path);
  ExperimentConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw Error("config: bad line " + std::to_string(lineno));
      continue;
    }
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t\r");
      const size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    apply_config_entry(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

inline std::string resolved_config_text(const ExperimentConfig& c) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "seed = " << c.seed << "\n";
  out << "out_dir = " << c.out_dir << "\n";
  out << "task.vocab_size = " << c.task.vocab_size << "\n";
  out << "task.eos = " << c.task.eos << "\n";
  out << "task.d_ctx = " << c.task.d_ctx << "\n";
  out << "task.d_vis = " << c.task.d_vis << "\n";
  out << "task.target_d_emb = " << c.task.target_d_emb << "\n";
  out << "task.target_window = " << c.task.target_window << "\n";
  out << "task.instruction_len = " << c.task.instruction_len << "\n";
  out << "task.max_response_len = " << c.task.max_response_len << "\n";
  out << "task.ctx_dependent = " << (c.ctx_dependent ? "true" : "false") << "\n";
  out << "drafter.d_emb = " << c.drafter_d_emb << "\n";
  out << "drafter.window = " << c.drafter_window << "\n";
  out << "data.n_pretrain = " << c.n_pretrain << "\n";
  out << "data.n_distill = " << c.n_distill << "\n";
  out << "train.epochs = " << c.epochs << "\n";
  out << "train.batch_size = " << c.batch_size << "\n";
  out << "train.lr_phase0 = " << c.lr_phase0 << "\n";
  out << "train.lr_phase1 = " << c.lr_phase1 << "\n";
  out << "train.lr_phase2 = " << c.lr_phase2 << "\n";
  out << "bench.gamma = " << c.gamma << "\n";
  out << "bench.temperatures = ";
  for (size_t i = 0; i < c.temperatures.size(); ++i)
    out << (i ? "," : "") << c.temperatures[i];
  out << "\n";
  out << "bench.sequences = " << c.eval_sequences << "\n";
  out << "bench.max_tokens = " << c.eval_max_tokens << "\n";
  out << "bench.cost_ratio = " << c.cost_ratio << "\n";
  out << "bench.arms = ";
  for (size_t i = 0; i < c.arms.size(); ++i) out << (i ? "," : "") << c.arms[i];
  out << "\n";
  out << "lossless.trials = " << c.lossless_trials << "\n";
  return out.str();
}

// Hash of the resolved config, ignoring the output location so that the same
// experiment written to two directories reports the same provenance.
inline std::string config_hash(const ExperimentConfig& c) {
  ExperimentConfig stripped = c;
  stripped.out_dir.clear();
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0')
      << hash_label(resolved_config_text(stripped));
  return out.str();
}

// ---------------------------------------------------------------------------
// Training pipeline
// ---------------------------------------------------------------------------

struct TrainedArms {
  std::shared_ptr<SyntheticTask> task;
  std::shared_ptr<CompositeVlm> text_baseline;   // phase 0 only
  std::shared_ptr<CompositeVlm> vanilla_drafter; // phases 0, 1, vanilla fine-tune
  std::shared_ptr<CompositeVlm> sdvit_drafter;   // phases 0, 1, 2
  std::map<std::string, std::vector<double>> loss_curves;
};

inline std::shared_ptr<CompositeVlm> arm_model(const TrainedArms& arms, const std::string& name) {
  if (name == "text_baseline") return arms.text_baseline;
  if (name == "vanilla_drafter") return arms.vanilla_drafter;
  if (name == "sdvit_drafter") return arms.sdvit_drafter;
  throw Error("unknown arm '" + name + "'");
}

inline TrainedArms train_pipeline(const ExperimentConfig& cfg) {
  cfg.validate();
  RngState root(cfg.seed);
  TrainedArms arms;
  arms.task = std::make_shared<SyntheticTask>(
      build_synthetic_task(root.fork("task").seed(), cfg.task, cfg.ctx_dependent));
  const SyntheticTask& task = *arms.task;

  RngState data_rng = root.fork("phase1.data");
  PretrainDataset pretrain = generate_pretrain_data(task, cfg.n_pretrain, data_rng);

  // Phase 0: text-only backbone pretraining. Every arm starts from this
  // backbone, mirroring a drafter built from an already-trained small LM.
  auto base = make_random_composite(cfg.task, task.target_impl()->encoder_ptr(),
                                    cfg.drafter_d_emb, cfg.drafter_window,
                                    root.fork("drafter.init"), 0.1);
  TrainConfig t0;
  t0.epochs = cfg.epochs;
  t0.batch_size = cfg.batch_size;
  t0.lr = cfg.lr_phase0;
  t0.seed = root.fork("phase0.train").seed();
  t0.phase = TrainPhase::backbone_pretrain;
  arms.loss_curves["phase0"] = pretrain_backbone_text(*base, pretrain, t0);
  arms.text_baseline = base;

  // Phase 1: projector pretraining on (ctx, caption) pairs, backbone frozen.
  auto projected = std::make_shared<CompositeVlm>(*base);
  TrainConfig t1;
  t1.epochs = cfg.epochs;
  t1.batch_size = cfg.batch_size;
  t1.lr = cfg.lr_phase1;
  t1.seed = root.fork("phase1.train").seed();
  t1.phase = TrainPhase::projector_pretrain;
  arms.loss_curves["phase1"] = pretrain_projector(*projected, pretrain, t1);

  // Phase 2a: vanilla arm on fixed reference labels from a perturbed target.
  RngState ref_rng = root.fork("phase2.ref_data");
  auto perturbed = make_perturbed_target(task, root.fork("phase2.perturb").seed());
  DistilledDataset d_ref = generate_distilled_data_from(task, *perturbed, cfg.n_distill,
                                                        cfg.sampling_grid, ref_rng, "ref");
  arms.vanilla_drafter = std::make_shared<CompositeVlm>(*projected);
  TrainConfig t2;
  t2.epochs = cfg.epochs;
  t2.batch_size = cfg.batch_size;
  t2.lr = cfg.lr_phase2;
  t2.seed = root.fork("phase2.train").seed();
  t2.phase = TrainPhase::sdvit;
  arms.loss_curves["vanilla"] = vanilla_finetune(*arms.vanilla_drafter, d_ref, t2);

  // Phase 2b: self-distilled arm on the target's own sampled responses.
  RngState sdd_rng = root.fork("phase2.sdd_data");
  DistilledDataset d_sdd =
      generate_self_distilled_data(task, cfg.n_distill, cfg.sampling_grid, sdd_rng);
  arms.sdvit_drafter = std::make_shared<CompositeVlm>(*projected);
  arms.loss_curves["sdvit"] = sdvit_finetune(*arms.sdvit_drafter, d_sdd, t2);

  return arms;
}

// ---------------------------------------------------------------------------
// Benchmarking and reports
// ---------------------------------------------------------------------------

struct BenchRow {
  std::string arm;
  double temperature = 0.0;
  int gamma = 0;
  double tau = 0.0;
  double speedup = 0.0;              // analytical proxy at the configured cost ratio
  double speedup_vs_baseline = 1.0;  // normalized to the text-only baseline row
  long sequences = 0;
  long emitted = 0;
  long target_passes = 0;
};

struct BenchmarkReport {
  std::vector<BenchRow> rows;
  uint64_t seed = 0;
  std::string config_hash;
  std::string version = kVersion;
};

struct ArmBenchResult {
  std::vector<SpeculationTrace> traces;
  double tau = 0.0;
  long emitted = 0;
  long passes = 0;
};

inline ArmBenchResult bench_arm(const ExperimentConfig& cfg, const SyntheticTask& task,
                                const LanguageModelInterface& drafter, bool text_only,
                                double temperature, const std::string& arm_name) {
  SpecConfig sc;
  sc.gamma = cfg.gamma;
  sc.temperature = temperature;
  sc.max_tokens = cfg.eval_max_tokens;
  sc.mode = temperature == 0.0 ? DecodeMode::greedy : DecodeMode::sampled;

  RngState root(cfg.seed);
  std::ostringstream label;
  label << "bench.T" << temperature << "." << arm_name;
  RngState stream = root.fork(label.str());

  ArmBenchResult result;
  for (int s = 0; s < cfg.eval_sequences; ++s) {
    RngState seq = stream.fork("seq." + std::to_string(s));
    RngState ctx_rng = seq.fork("ctx");
    RngState instr_rng = seq.fork("instr");
    RngState dec_rng = seq.fork("decode");
    ContextFeatures ctx = task.sample_ctx(ctx_rng);
    std::vector<TokenId> prompt = task.sample_instruction(instr_rng);
    DecodeResult r = text_only
                         ? text_only_decode(task.target(), drafter, prompt, ctx, sc, dec_rng)
                         : decode(task.target(), drafter, prompt, ctx, ctx, sc, dec_rng);
    result.emitted += r.trace.total_emitted();
    result.passes += r.trace.total_forward_passes();
    result.traces.push_back(std::move(r.trace));
  }
  result.tau = static_cast<double>(result.emitted) / static_cast<double>(result.passes);
  return result;
}

inline BenchmarkReport run_benchmark(const ExperimentConfig& cfg, const TrainedArms& arms,
                                     std::map<std::string, std::vector<SpeculationTrace>>*
                                         traces_out = nullptr) {
  BenchmarkReport report;
  report.seed = cfg.seed;
  report.config_hash = config_hash(cfg);
  for (double t : cfg.temperatures) {
    std::map<std::string, double> speedups;
    size_t first_row = report.rows.size();
    for (const std::string& arm : cfg.arms) {
      std::shared_ptr<CompositeVlm> model = arm_model(arms, arm);
      const bool text_only = arm == "text_baseline";
      ArmBenchResult r = bench_arm(cfg, *arms.task, *model, text_only, t, arm);
      BenchRow row;
      row.arm = arm;
      row.temperature = t;
      row.gamma = cfg.gamma;
      row.tau = r.tau;
      row.speedup = speedup_model(r.tau, cfg.gamma, cfg.cost_ratio);
      row.sequences = cfg.eval_sequences;
      row.emitted = r.emitted;
      row.target_passes = r.passes;
      report.rows.push_back(row);
      speedups[arm] = row.speedup;
      if (traces_out) {
        std::ostringstream key;
        key << arm << "_T" << t;
        (*traces_out)[key.str()] = std::move(r.traces);
      }
    }
    // normalize to the text-only baseline when present, else the first arm
    const std::string norm_arm =
        speedups.count("text_baseline") ? "text_baseline" : cfg.arms.front();
    const double base = speedups.at(norm_arm);
    for (size_t i = first_row; i < report.rows.size(); ++i)
      report.rows[i].speedup_vs_baseline = report.rows[i].speedup / base;
  }
  return report;
}

inline std::string format_double(double x) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6) << x;
  return out.str();
}

inline std::string report_to_csv(const BenchmarkReport& r) {
  std::ostringstream out;
  out << "arm,temperature,gamma,tau,speedup_model,speedup_vs_baseline,sequences,emitted,"
         "target_passes,seed,config_hash,version\n";
  for (const BenchRow& row : r.rows) {
    out << row.arm << "," << format_double(row.temperature) << "," << row.gamma << ","
        << format_double(row.tau) << "," << format_double(row.speedup) << ","
        << format_double(row.speedup_vs_baseline) << "," << row.sequences << "," << row.emitted
        << "," << row.target_passes << "," << r.seed << "," << r.config_hash << "," << r.version
        << "\n";
  }
  return out.str();
}

inline nlohmann::json report_to_json(const BenchmarkReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const BenchRow& row : r.rows)
    rows.push_back({{"arm", row.arm},
                    {"temperature", row.temperature},
                    {"gamma", row.gamma},
                    {"tau", row.tau},
                    {"speedup_model", row.speedup},
                    {"speedup_vs_baseline", row.speedup_vs_baseline},
                    {"sequences", row.sequences},
                    {"emitted", row.emitted},
                    {"target_passes", row.target_passes}});
  return {{"rows", rows}, {"seed", r.seed}, {"config_hash", r.config_hash},
          {"version", r.version}};
}

// TVD probe set: every position along target-greedy rollouts from sampled
// (ctx, instruction) inputs. The convention is recorded in the data file.
inline std::vector<Probe> make_probe_set(const ExperimentConfig& cfg, const SyntheticTask& task,
                                         int n_inputs = 50, int rollout_len = 8) {
  RngState rng = RngState(cfg.seed).fork("tvd.probes");
  std::vector<Probe> probes;
  for (int i = 0; i < n_inputs; ++i) {
    RngState in_rng = rng.fork("input." + std::to_string(i));
    RngState ctx_rng = in_rng.fork("ctx");
    RngState instr_rng = in_rng.fork("instr");
    ContextFeatures ctx = task.sample_ctx(ctx_rng);
    std::vector<TokenId> prefix = task.sample_instruction(instr_rng);
    RngState unused(0);
    std::vector<TokenId> roll =
        autoregressive_generate(task.target(), prefix, ctx, 0.0, 1.0, rollout_len, unused);
    for (TokenId t : roll) {
      probes.push_back({prefix, ctx});
      prefix.push_back(t);
    }
  }
  return probes;
}

inline std::string tvd_hist_dat(const TvdReport& sdvit, const TvdReport& vanilla) {
  std::ostringstream out;
  out << "# TVD histogram: 20 uniform bins on [0,1]\n";
  out << "# probes: every position of target-greedy rollouts\n";
  out << "# bin_lo bin_hi count_sdvit count_vanilla\n";
  for (size_t b = 0; b < sdvit.counts.size(); ++b)
    out << format_double(sdvit.bin_edges[b]) << " " << format_double(sdvit.bin_edges[b + 1])
        << " " << sdvit.counts[b] << " " << vanilla.counts[b] << "\n";
  out << "# mean_sdvit " << format_double(sdvit.mean) << "\n";
  out << "# mean_vanilla " << format_double(vanilla.mean) << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Full experiment run: artifacts on disk
// ---------------------------------------------------------------------------

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

inline BenchmarkReport run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  cfg.validate();
  const fs::path out(cfg.out_dir);
  fs::create_directories(out / "traces");
  fs::create_directories(out / "checkpoints");
  write_file(out / "resolved_config.txt", resolved_config_text(cfg));

  TrainedArms arms = train_pipeline(cfg);
  std::map<std::string, std::vector<SpeculationTrace>> traces;
  BenchmarkReport report = run_benchmark(cfg, arms, &traces);

  write_file(out / "report.csv", report_to_csv(report));
  write_file(out / "report.json", report_to_json(report).dump(2) + "\n");

  for (const auto& [key, trs] : traces) {
    std::ofstream tout(out / "traces" / (key + ".jsonl"));
    for (const SpeculationTrace& tr : trs) write_trace_jsonl(tr, tout);
  }

  save_checkpoint(*arms.task->target_impl(), (out / "checkpoints" / "target.json").string());
  for (const std::string& arm : cfg.arms)
    save_checkpoint(*arm_model(arms, arm), (out / "checkpoints" / (arm + ".json")).string());

  // TVD histogram comparing the fine-tuned arms whenever both exist
  const bool have_sdvit =
      std::find(cfg.arms.begin(), cfg.arms.end(), "sdvit_drafter") != cfg.arms.end();
  const bool have_vanilla =
      std::find(cfg.arms.begin(), cfg.arms.end(), "vanilla_drafter") != cfg.arms.end();
  if (have_sdvit && have_vanilla) {
    std::vector<Probe> probes = make_probe_set(cfg, *arms.task);
    TvdReport sdvit = tvd_probe(*arms.task->target_impl(), *arms.sdvit_drafter, probes);
    TvdReport vanilla = tvd_probe(*arms.task->target_impl(), *arms.vanilla_drafter, probes);
    write_file(out / "tvd_hist.dat", tvd_hist_dat(sdvit, vanilla));
  }
  return report;
}

enum class Ablation { sdvit, text_only };

// Two/three-row comparison reports for the ablation tables.
inline BenchmarkReport run_ablation(ExperimentConfig cfg, Ablation kind) {
  if (kind == Ablation::sdvit) {
    cfg.arms = {"text_baseline", "vanilla_drafter", "sdvit_drafter"};
  } else {
    cfg.arms = {"text_baseline", "sdvit_drafter"};
  }
  TrainedArms arms = train_pipeline(cfg);
  return run_benchmark(cfg, arms);
}

// ---------------------------------------------------------------------------
// Losslessness suite
// ---------------------------------------------------------------------------

struct LosslessSuiteResult {
  struct Entry {
    std::string name;
    LosslessVerdict verdict;
  };
  std::vector<Entry> entries;
  bool all_passed() const {
    for (const Entry& e : entries)
      if (!e.verdict.passed) return false;
    return !entries.empty();
  }
};

inline LosslessSuiteResult run_lossless_suite(const ExperimentConfig& cfg) {
  LosslessSuiteResult result;
  RngState root(cfg.seed);

  Vocabulary vocab(4, 0);
  auto random_dist = [&](RngState& rng, bool adversarial) {
    std::vector<double> raw(4);
    for (double& x : raw) x = rng.next_uniform() + 1e-6;
    if (adversarial) {
      // pile nearly all mass on one token to maximize misalignment
      raw[rng.next_u64() % 4] += 200.0;
    }
    return normalize(raw);
  };
  auto random_tabular = [&](RngState rng, bool adversarial) {
    TabularModel m(vocab, 2, random_dist(rng, adversarial));
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) m.set_entry({a, b}, random_dist(rng, adversarial));
    return m;
  };

  TabularModel target = random_tabular(root.fork("lossless.target"), false);
  TabularModel misaligned = random_tabular(root.fork("lossless.misaligned"), false);
  TabularModel adversarial = random_tabular(root.fork("lossless.adversarial"), true);

  struct Pair {
    std::string name;
    const LanguageModelInterface* drafter;
  };
  const std::vector<Pair> pairs = {{"aligned", &target},
                                   {"misaligned", &misaligned},
                                   {"adversarial", &adversarial}};
  for (const Pair& p : pairs) {
    RngState rng = root.fork("lossless.run." + p.name);
    result.entries.push_back(
        {p.name, lossless_check(target, *p.drafter, {1}, std::nullopt, 4, cfg.lossless_trials,
                                rng)});
  }
  return result;
}

}  // namespace sdlab
