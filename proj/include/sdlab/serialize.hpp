#pragma once

#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "sdlab/core.hpp"
#include "sdlab/distill.hpp"
#include "sdlab/neural.hpp"
#include "sdlab/specdec.hpp"

namespace sdlab {

inline constexpr int kCheckpointFormatVersion = 1;

// ---------------------------------------------------------------------------
// Model checkpoints
// ---------------------------------------------------------------------------

inline nlohmann::json tensor_to_json(const Tensor& t) {
  return {{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"frozen", t.frozen},
          {"data", t.v}};
}

inline void tensor_from_json(const nlohmann::json& j, Tensor& t) {
  if (j.at("name").get<std::string>() != t.name) throw Error("checkpoint tensor name mismatch");
  if (j.at("rows").get<int>() != t.rows || j.at("cols").get<int>() != t.cols)
    throw ShapeMismatchError("checkpoint tensor " + t.name);
  t.frozen = j.at("frozen").get<bool>();
  t.v = j.at("data").get<std::vector<double>>();
}

inline nlohmann::json composite_to_json(const CompositeVlm& m) {
  nlohmann::json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["type"] = "composite_vlm";
  j["vocab_size"] = m.vocabulary().size;
  j["eos"] = m.vocabulary().eos;
  j["d_ctx"] = m.encoder().input_dim();
  j["d_vis"] = m.encoder().output_dim();
  j["d_emb"] = m.lm().embedding_dim();
  j["window"] = m.lm().window();
  j["hidden"] = m.lm().hidden_dim();
  j["encoder"] = tensor_to_json(m.encoder().weights());
  nlohmann::json tensors = nlohmann::json::array();
  for (const Tensor* t : m.params()) tensors.push_back(tensor_to_json(*t));
  j["tensors"] = std::move(tensors);
  return j;
}

inline std::shared_ptr<CompositeVlm> composite_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != kCheckpointFormatVersion)
    throw Error("unsupported checkpoint format version");
  if (j.at("type").get<std::string>() != "composite_vlm")
    throw Error("checkpoint is not a composite VLM");
  Vocabulary vocab(j.at("vocab_size").get<int>(), j.at("eos").get<TokenId>());
  const int d_ctx = j.at("d_ctx").get<int>();
  const int d_vis = j.at("d_vis").get<int>();
  const int d_emb = j.at("d_emb").get<int>();
  const int window = j.at("window").get<int>();
  const int hidden = j.at("hidden").get<int>();

  RngState scratch(0);
  auto encoder = std::make_shared<VisionEncoder>(d_ctx, d_vis, scratch);
  tensor_from_json(j.at("encoder"), encoder->weights_mutable());
  Projector projector(d_vis, d_emb, scratch.fork("p"));
  TinyNeuralLm lm(vocab, d_emb, window, scratch.fork("l"), 0.1, hidden);
  auto model = std::make_shared<CompositeVlm>(std::move(encoder), std::move(projector),
                                              std::move(lm));
  std::map<std::string, const nlohmann::json*> by_name;
  for (const nlohmann::json& tj : j.at("tensors"))
    by_name[tj.at("name").get<std::string>()] = &tj;
  for (Tensor* t : model->params()) {
    auto it = by_name.find(t->name);
    if (it == by_name.end()) throw Error("checkpoint missing tensor " + t->name);
    tensor_from_json(*it->second, *t);
  }
  return model;
}

inline void save_checkpoint(const CompositeVlm& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path);
  out << composite_to_json(m).dump(2) << "\n";
}

inline std::shared_ptr<CompositeVlm> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read checkpoint " + path);
  nlohmann::json j;
  in >> j;
  return composite_from_json(j);
}

// ---------------------------------------------------------------------------
// Trace and dataset JSON lines
// ---------------------------------------------------------------------------

inline nlohmann::json iteration_to_json(const IterationRecord& rec) {
  return {{"drafted", rec.drafted},
          {"accepted", rec.accepted},
          {"emitted", rec.emitted},
          {"target_forward_passes", rec.target_forward_passes}};
}

inline void write_trace_jsonl(const SpeculationTrace& trace, std::ostream& out) {
  for (const IterationRecord& rec : trace.iterations) out << iteration_to_json(rec).dump() << "\n";
}

inline nlohmann::json distilled_record_to_json(const DistilledRecord& r) {
  return {{"ctx", r.ctx.features},     {"instruction", r.instruction},
          {"response", r.response},    {"temperature", r.temperature},
          {"top_p", r.top_p},          {"seed", r.seed}};
}

inline DistilledRecord distilled_record_from_json(const nlohmann::json& j) {
  DistilledRecord r;
  r.ctx = ContextFeatures(j.at("ctx").get<std::vector<double>>());
  r.instruction = j.at("instruction").get<std::vector<TokenId>>();
  r.response = j.at("response").get<std::vector<TokenId>>();
  r.temperature = j.at("temperature").get<double>();
  r.top_p = j.at("top_p").get<double>();
  r.seed = j.at("seed").get<uint64_t>();
  return r;
}

inline void write_dataset_jsonl(const DistilledDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset " + path);
  for (const DistilledRecord& r : data) out << distilled_record_to_json(r).dump() << "\n";
}

inline DistilledDataset read_dataset_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read dataset " + path);
  DistilledDataset data;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    data.push_back(distilled_record_from_json(nlohmann::json::parse(line)));
  }
  return data;
}

}  // namespace sdlab
