// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria marked with tolerances are pinned here, in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "sdlab/experiment.hpp"

using namespace sdlab;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void criterion(int number, const std::string& name, const std::function<bool(std::string&)>& fn) {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = fn(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("[%s] criterion %2d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL", number, name.c_str(),
              secs, detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

Distribution random_distribution(RngState& rng, int v) {
  std::vector<double> raw(static_cast<size_t>(v));
  for (double& x : raw) x = rng.next_uniform() + 1e-6;
  return normalize(raw);
}

TabularModel random_tabular(Vocabulary vocab, RngState& rng, bool zero_eos = false) {
  auto dist = [&](RngState& r) {
    Distribution d = random_distribution(r, vocab.size);
    if (zero_eos) {
      d.probs[static_cast<size_t>(vocab.eos)] = 0.0;
      d = normalize(d.probs);
    }
    return d;
  };
  TabularModel m(vocab, 2, dist(rng));
  for (int a = 0; a < vocab.size; ++a)
    for (int b = 0; b < vocab.size; ++b) m.set_entry({a, b}, dist(rng));
  return m;
}

bool multi_step_lossless(const TabularModel& target, const TabularModel& drafter, long trials,
                         std::string& detail, const char* label) {
  RngState rng(hash_label(label));
  LosslessVerdict v = lossless_check(target, drafter, {1}, std::nullopt, 4, trials, rng);
  std::ostringstream d;
  d << label << ": chi2_p=" << v.chi_square.p_value
    << " identity_err=" << v.max_identity_error << "; ";
  detail += d.str();
  return v.passed;
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

double arm_tau(const BenchmarkReport& r, const std::string& arm, double temperature) {
  for (const BenchRow& row : r.rows)
    if (row.arm == arm && row.temperature == temperature) return row.tau;
  throw Error("missing row " + arm);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

int main() {
  // 1. Single-step losslessness identity
  criterion(1, "single-step losslessness identity (1000 pairs, err < 1e-12)", [](std::string& d) {
    RngState rng(101);
    double max_err = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const int v = 2 + static_cast<int>(rng.next_u64() % 63);
      max_err = std::max(max_err, single_step_identity_error(random_distribution(rng, v),
                                                             random_distribution(rng, v)));
    }
    d = "max_err=" + std::to_string(max_err);
    return max_err < 1e-12;
  });

  // 2. Multi-step losslessness, aligned and misaligned drafters
  criterion(2, "multi-step losslessness (V=4, len 4, 1e5 runs, chi2 a=0.001)",
            [](std::string& d) {
              Vocabulary vocab(4, 0);
              RngState rng(202);
              TabularModel target = random_tabular(vocab, rng);
              TabularModel misaligned = random_tabular(vocab, rng);
              const long trials = 100000;
              const bool a = multi_step_lossless(target, target, trials, d, "aligned");
              const bool b = multi_step_lossless(target, misaligned, trials, d, "misaligned");
              return a && b;
            });

  // 3. Rejection rate equals TVD
  criterion(3, "first-draft rejection frequency = TVD (20 pairs, 1e5 trials, 3 sigma)",
            [](std::string& d) {
              RngState rng(303);
              Vocabulary vocab(8, 0);
              double worst = 0.0;
              for (int pair = 0; pair < 20; ++pair) {
                Distribution p = random_distribution(rng, 8);
                Distribution q = random_distribution(rng, 8);
                TabularModel target(vocab, 0, p);
                TabularModel drafter(vocab, 0, q);
                SpecConfig cfg;
                cfg.gamma = 1;
                const int n = 100000;
                int rejected = 0;
                RngState mc(4000 + pair);
                for (int i = 0; i < n; ++i) {
                  std::vector<TokenId> prefix = {1};
                  IterationRecord rec = run_iteration(target, drafter, prefix, std::nullopt,
                                                      std::nullopt, cfg, mc);
                  if (!rec.accepted[0]) ++rejected;
                }
                const double t = tvd(p, q);
                const double freq = static_cast<double>(rejected) / n;
                const double sigma = std::sqrt(std::max(t * (1.0 - t), 1e-12) / n);
                worst = std::max(worst, std::abs(freq - t) / sigma);
                if (std::abs(freq - t) > 3.0 * sigma) {
                  d = "pair " + std::to_string(pair) + " off by " +
                      std::to_string(std::abs(freq - t));
                  return false;
                }
              }
              d = "worst deviation " + std::to_string(worst) + " sigma";
              return true;
            });

  // 4. Geometric-chain mean accepted length
  criterion(4, "geometric chain alpha=0.5, gamma=5: mean emitted = 1.96875 +/- 0.02",
            [](std::string& d) {
              Vocabulary vocab(2, 1);
              TabularModel target(vocab, 0, Distribution({0.5, 0.5}));
              TabularModel drafter(vocab, 0, Distribution({1.0, 0.0}));
              SpecConfig cfg;
              cfg.gamma = 5;
              RngState rng(404);
              const int iters = 100000;
              long emitted = 0;
              for (int i = 0; i < iters; ++i) {
                std::vector<TokenId> prefix = {0};
                emitted += static_cast<long>(
                    run_iteration(target, drafter, prefix, std::nullopt, std::nullopt, cfg, rng)
                        .emitted.size());
              }
              const double mean = static_cast<double>(emitted) / iters;
              d = "mean=" + std::to_string(mean);
              return std::abs(mean - 1.96875) <= 0.02;
            });

  // 5. Perfect-drafter bound
  criterion(5, "drafter == target gives tau = 6.0 exactly; tau in [1, gamma+1]",
            [](std::string& d) {
              Vocabulary vocab(4, 0);
              RngState rng(505);
              TabularModel m = random_tabular(vocab, rng, /*zero_eos=*/true);
              SpecConfig cfg;
              cfg.gamma = 5;
              cfg.max_tokens = 60;
              RngState dec(1);
              DecodeResult perfect = decode(m, m, {1}, std::nullopt, cfg, dec);
              if (perfect.tau != 6.0) {
                d = "perfect tau=" + std::to_string(perfect.tau);
                return false;
              }
              for (int pair = 0; pair < 30; ++pair) {
                TabularModel target = random_tabular(vocab, rng);
                TabularModel drafter = random_tabular(vocab, rng);
                RngState r(600 + pair);
                DecodeResult res = decode(target, drafter, {1}, std::nullopt, cfg, r);
                if (res.tau < 1.0 || res.tau > cfg.gamma + 1.0) {
                  d = "tau out of bounds: " + std::to_string(res.tau);
                  return false;
                }
              }
              return true;
            });

  // 6. Greedy exactness
  criterion(6, "greedy decode bit-identical to target greedy generation (50 pairs)",
            [](std::string& d) {
              SpecConfig cfg;
              cfg.gamma = 5;
              cfg.max_tokens = 32;
              cfg.temperature = 0.0;
              cfg.mode = DecodeMode::greedy;
              RngState rng(606);
              int checked = 0;
              // 40 tabular pairs
              for (int pair = 0; pair < 40; ++pair) {
                Vocabulary vocab(5, 0);
                TabularModel target = random_tabular(vocab, rng);
                TabularModel drafter = random_tabular(vocab, rng);
                RngState dec(pair);
                RngState unused(0);
                if (decode(target, drafter, {1}, std::nullopt, cfg, dec).tokens !=
                    autoregressive_generate(target, {1}, std::nullopt, 0.0, 1.0, cfg.max_tokens,
                                            unused)) {
                  d = "tabular pair " + std::to_string(pair);
                  return false;
                }
                ++checked;
              }
              // 10 neural pairs with shared encoders and ctx conditioning
              TaskDims dims;
              dims.vocab_size = 8;
              dims.d_ctx = 4;
              dims.d_vis = 4;
              dims.target_d_emb = 8;
              dims.target_window = 2;
              for (int pair = 0; pair < 10; ++pair) {
                SyntheticTask task = build_synthetic_task(9000 + pair, dims);
                auto drafter = make_random_composite(dims, task.target_impl()->encoder_ptr(), 6,
                                                     1, RngState(70 + pair), 0.1);
                RngState ctx_rng(pair);
                ContextFeatures ctx = task.sample_ctx(ctx_rng);
                RngState dec(pair);
                RngState unused(0);
                if (decode(task.target(), *drafter, {1}, ctx, cfg, dec).tokens !=
                    autoregressive_generate(task.target(), {1}, ctx, 0.0, 1.0, cfg.max_tokens,
                                            unused)) {
                  d = "neural pair " + std::to_string(pair);
                  return false;
                }
                ++checked;
              }
              d = std::to_string(checked) + " pairs";
              return checked == 50;
            });

  // 7. Gradient correctness against central finite differences
  criterion(7, "analytic gradients of L_pre and L_SDViT match finite differences (1e-4 rel)",
            [](std::string& d) {
              TaskDims dims;
              dims.vocab_size = 8;
              dims.d_ctx = 3;
              dims.d_vis = 4;
              dims.target_d_emb = 8;
              dims.target_window = 2;
              SyntheticTask task = build_synthetic_task(707, dims);
              auto model = make_random_composite(dims, task.target_impl()->encoder_ptr(), 6, 2,
                                                 RngState(717), 0.1);
              RngState rng(727);
              std::vector<TrainExample> batch = {
                  {task.sample_ctx(rng), {}, {2, 5}},                      // L_pre shape
                  {task.sample_ctx(rng), task.sample_instruction(rng), {1, 3}},  // L_SDViT shape
              };
              double worst = 0.0;
              for (bool backbone_trainable : {false, true}) {
                model->set_freeze(true, backbone_trainable);
                auto [loss, grads] = model->nll_loss_and_gradients(batch);
                for (Tensor* t : model->params()) {
                  if (t->frozen) continue;
                  const std::vector<double>& g = grads.of(*t);
                  for (size_t i = 0; i < t->count(); ++i) {
                    const double saved = t->v[i];
                    const double step = 1e-5;
                    t->v[i] = saved + step;
                    const double up = model->nll_loss_and_gradients(batch).first;
                    t->v[i] = saved - step;
                    const double down = model->nll_loss_and_gradients(batch).first;
                    t->v[i] = saved;
                    const double fd = (up - down) / (2.0 * step);
                    const double rel =
                        std::abs(g[i] - fd) / std::max({std::abs(fd), std::abs(g[i]), 1e-6});
                    worst = std::max(worst, rel);
                    if (rel >= 1e-4) {
                      d = t->name + "[" + std::to_string(i) + "] rel_err=" + std::to_string(rel);
                      return false;
                    }
                  }
                }
              }
              d = "worst rel_err=" + std::to_string(worst);
              return true;
            });

  // 8. Freeze contracts
  criterion(8, "encoder frozen in both phases; backbone frozen in phase 1", [](std::string& d) {
    TaskDims dims;
    dims.vocab_size = 8;
    dims.d_ctx = 4;
    dims.d_vis = 4;
    dims.target_d_emb = 8;
    dims.target_window = 2;
    dims.max_response_len = 8;
    SyntheticTask task = build_synthetic_task(808, dims);
    auto drafter = make_random_composite(dims, task.target_impl()->encoder_ptr(), 6, 2,
                                         RngState(818), 0.1);
    RngState rng(828);
    PretrainDataset pre = generate_pretrain_data(task, 128, rng);
    DistilledDataset sdd = generate_self_distilled_data(task, 128, {{1.0, 1.0}}, rng);

    const std::vector<double> encoder_before = drafter->encoder().weights().v;
    std::map<std::string, std::vector<double>> backbone_before;
    for (const Tensor* t : drafter->lm().params()) backbone_before[t->name] = t->v;

    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 32;
    cfg.lr = 1e-2;
    cfg.seed = 1;
    cfg.phase = TrainPhase::projector_pretrain;
    pretrain_projector(*drafter, pre, cfg);
    for (const Tensor* t : drafter->lm().params())
      if (t->v != backbone_before.at(t->name)) {
        d = "phase 1 moved backbone tensor " + t->name;
        return false;
      }
    if (drafter->encoder().weights().v != encoder_before) {
      d = "phase 1 moved the encoder";
      return false;
    }

    cfg.phase = TrainPhase::sdvit;
    cfg.lr = 3e-3;
    sdvit_finetune(*drafter, sdd, cfg);
    if (drafter->encoder().weights().v != encoder_before) {
      d = "phase 2 moved the encoder";
      return false;
    }
    if (drafter->encoder().weights().v != task.target_impl()->encoder().weights().v) {
      d = "drafter encoder diverged from the shared target encoder";
      return false;
    }
    return true;
  });

  // Criteria 9-11 share one trained default pipeline.
  ExperimentConfig cfg = default_config();
  TrainedArms arms;
  BenchmarkReport bench;
  bool pipeline_ok = true;
  {
    const auto start = std::chrono::steady_clock::now();
    try {
      arms = train_pipeline(cfg);
      bench = run_benchmark(cfg, arms);
    } catch (const std::exception& e) {
      std::printf("pipeline setup failed: %s\n", e.what());
      pipeline_ok = false;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("-- default pipeline trained and benchmarked in %.1fs\n", secs);
    std::fflush(stdout);
  }

  // 9. SDViT ablation trend
  criterion(9, "tau(sdvit) > tau(vanilla) and tau(sdvit) >= 1.1 * tau(text baseline) at T=0",
            [&](std::string& d) {
              if (!pipeline_ok) return false;
              const double t_base = arm_tau(bench, "text_baseline", 0.0);
              const double t_vanilla = arm_tau(bench, "vanilla_drafter", 0.0);
              const double t_sdvit = arm_tau(bench, "sdvit_drafter", 0.0);
              std::ostringstream s;
              s << "tau base=" << t_base << " vanilla=" << t_vanilla << " sdvit=" << t_sdvit;
              d = s.str();
              return t_sdvit > t_vanilla && t_sdvit >= 1.1 * t_base;
            });

  // 10. Multimodal vs text-only drafting
  criterion(10, "multimodal > text-only on ctx task; equal within 5% on control task",
            [&](std::string& d) {
              if (!pipeline_ok) return false;
              ArmBenchResult mm =
                  bench_arm(cfg, *arms.task, *arms.sdvit_drafter, false, 0.0, "c10.mm");
              ArmBenchResult text =
                  bench_arm(cfg, *arms.task, *arms.sdvit_drafter, true, 0.0, "c10.text");

              ExperimentConfig control_cfg = cfg;
              control_cfg.ctx_dependent = false;
              TrainedArms control = train_pipeline(control_cfg);
              ArmBenchResult cmm = bench_arm(control_cfg, *control.task,
                                             *control.sdvit_drafter, false, 0.0, "c10.cmm");
              ArmBenchResult ctext = bench_arm(control_cfg, *control.task,
                                               *control.sdvit_drafter, true, 0.0, "c10.ctext");
              const double control_gap = std::abs(cmm.tau - ctext.tau) / ctext.tau;
              std::ostringstream s;
              s << "ctx task mm=" << mm.tau << " text=" << text.tau
                << "; control mm=" << cmm.tau << " text=" << ctext.tau
                << " gap=" << control_gap;
              d = s.str();
              return mm.tau > text.tau && control_gap <= 0.05;
            });

  // 11. TVD histogram trend
  criterion(11, "sdvit drafter has lower mean TVD and more mass below 0.2 than vanilla",
            [&](std::string& d) {
              if (!pipeline_ok) return false;
              std::vector<Probe> probes = make_probe_set(cfg, *arms.task);
              TvdReport sdvit = tvd_probe(*arms.task->target_impl(), *arms.sdvit_drafter, probes);
              TvdReport vanilla =
                  tvd_probe(*arms.task->target_impl(), *arms.vanilla_drafter, probes);
              std::ostringstream s;
              s << "mean sdvit=" << sdvit.mean << " vanilla=" << vanilla.mean
                << "; mass<0.2 sdvit=" << sdvit.mass_below(0.2)
                << " vanilla=" << vanilla.mass_below(0.2);
              d = s.str();
              return sdvit.mean < vanilla.mean &&
                     sdvit.mass_below(0.2) > vanilla.mass_below(0.2);
            });

  // 12. Full-pipeline determinism
  criterion(12, "two identical runs produce byte-identical report.csv", [&](std::string& d) {
    const fs::path a = fs::temp_directory_path() / "sdlab_acceptance_a";
    const fs::path b = fs::temp_directory_path() / "sdlab_acceptance_b";
    fs::remove_all(a);
    fs::remove_all(b);
    ExperimentConfig run_cfg = default_config();
    run_cfg.out_dir = a.string();
    run_experiment(run_cfg);
    run_cfg.out_dir = b.string();
    run_experiment(run_cfg);
    const bool same = slurp(a / "report.csv") == slurp(b / "report.csv");
    fs::remove_all(a);
    fs::remove_all(b);
    d = same ? "byte-identical" : "reports differ";
    return same;
  });

  std::printf("%s: %d criterion(s) failed\n", g_failures == 0 ? "ALL PASS" : "FAILURES",
              g_failures);
  return g_failures == 0 ? 0 : 1;
}
