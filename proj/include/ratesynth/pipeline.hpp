#pragma once

// The three pipeline stages. Stages talk to each other only through files in
// the output directory, so each one can be rerun on its own.

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ratesynth/audit.hpp"
#include "ratesynth/config.hpp"
#include "ratesynth/evaluate.hpp"
#include "ratesynth/synthesis.hpp"

namespace ratesynth {

namespace detail {

inline void note(std::ostream* log, const std::string& msg) {
  if (log) *log << msg << '\n';
}

inline std::filesystem::path out_path(const PipelineConfig& cfg, const char* name) {
  return std::filesystem::path(cfg.output_dir) / name;
}

inline void ensure_output_dir(const PipelineConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw ConfigError("output_dir", "cannot create " + cfg.output_dir + ": " + ec.message());
}

template <class Fn>
void write_file(const std::filesystem::path& path, Fn&& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  body(out);
  out.flush();
  if (!out) throw Error("write failed for " + path.string());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  write_file(path, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot reopen " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + " is not valid JSON: " + e.what());
  }
}

inline void require_file(const std::string& path, const std::string& key) {
  if (!std::filesystem::is_regular_file(path)) throw ConfigError(key, "file not found: " + path);
}

inline RatingDataset load_original(const PipelineConfig& cfg) {
  require_file(cfg.ratings_path, "dataset.ratings");
  return load_ratings(cfg.ratings_path, cfg.schema, cfg.scale);
}

// A user-supplied synthetic file is taken to be laid out like the input; the
// default one was written by the synthesize stage.
inline RatingDataset load_synthetic(const PipelineConfig& cfg) {
  require_file(cfg.synthetic_file(), "benchmark.synthetic");
  const RatingSchema schema = cfg.synthetic_path.empty() ? cfg.output_schema() : cfg.schema;
  return load_ratings(cfg.synthetic_file(), schema, cfg.scale);
}

inline ItemMetadata load_all_metadata(const PipelineConfig& cfg) {
  ItemMetadata meta;
  for (std::size_t n = 0; n < cfg.metadata.size(); ++n) {
    const auto& src = cfg.metadata[n];
    require_file(src.path, "metadata[" + std::to_string(n) + "].path");
    std::ifstream in(src.path);
    read_metadata(in, src.role, meta, src.delimiter, src.path);
  }
  return meta;
}

inline nlohmann::json to_json(const AgreementReport& r) {
  nlohmann::json flips = nlohmann::json::array();
  for (const auto& [a, b] : r.flips) flips.push_back({a, b});
  return {{"kendall_tau", r.kendall_tau},         {"best_preserved", r.best_preserved},
          {"worst_preserved", r.worst_preserved}, {"flips", flips},
          {"original_order", r.original_order},   {"synthetic_order", r.synthetic_order}};
}

inline nlohmann::json to_json(const HidingResult& h) {
  return {{"percentage", h.percentage}, {"compared", h.compared}, {"changed", h.changed},
          {"gained", h.gained},         {"lost", h.lost}};
}

inline const Leaderboard* board(const std::vector<Leaderboard>& boards, Task task) {
  for (const auto& b : boards)
    if (b.task == task) return &b;
  return nullptr;
}

}  // namespace detail

inline SynthesisResult cmd_synthesize(const PipelineConfig& cfg, std::ostream* log = nullptr) {
  cfg.synthesis.validate();
  const RatingDataset original = detail::load_original(cfg);
  detail::note(log, "loaded " + std::to_string(original.num_ratings()) + " ratings from " + cfg.ratings_path);
  SynthesisResult res = synthesize(original, cfg.synthesis, cfg.threads);

  detail::ensure_output_dir(cfg);
  const RatingSchema schema = cfg.output_schema();
  const auto syn_path = detail::out_path(cfg, "synthetic.csv");
  const auto mask_path = detail::out_path(cfg, "mask.txt");
  const auto log_path = detail::out_path(cfg, "synthesis_log.json");
  detail::write_file(syn_path, [&](std::ostream& out) { write_ratings(res.synthetic, out, schema); });
  detail::write_file(mask_path, [&](std::ostream& out) { write_mask(original, res.mask, out, schema.delimiter); });

  const auto& st = res.stats;
  nlohmann::json doc = {
      {"ratings", original.num_ratings()},
      {"users", original.num_users()},
      {"items", original.num_items()},
      {"retained_cells", res.mask.retained_count()},
      {"synthesized_cells", st.synthesized_cells},
      {"trees", st.trees},
      {"cold_items", st.cold_items},
      {"mean_depth", st.mean_depth},
      {"mean_leaf_size", st.mean_leaf_size},
      {"config",
       {{"retain_fraction", cfg.synthesis.retain_fraction},
        {"min_node_size", cfg.synthesis.stopping.min_node_size},
        {"max_depth", cfg.synthesis.stopping.max_depth},
        {"predictors_per_item", cfg.synthesis.predictors_per_item},
        {"seed", cfg.synthesis.seed}}}};
  detail::write_json(log_path, doc);

  // Read everything back before reporting success.
  RatingDataset reread = load_ratings(syn_path.string(), schema, cfg.scale);
  if (!reread.same_cells(original)) throw Error(syn_path.string() + " does not reproduce the input cell set");
  for (std::size_t k = 0; k < reread.num_ratings(); ++k)
    if (reread.cells()[k].rating != res.synthetic.cells()[k].rating)
      throw Error(syn_path.string() + " does not round-trip");
  RetentionMask mask = load_mask(mask_path.string(), original, schema.delimiter);
  if (mask.flags() != res.mask.flags()) throw Error(mask_path.string() + " does not round-trip");
  detail::read_json(log_path);

  detail::note(log, "synthesized " + std::to_string(st.synthesized_cells) + " cells with " +
                        std::to_string(st.trees) + " trees; wrote " + syn_path.string());
  return res;
}

inline BenchmarkResult cmd_benchmark(const PipelineConfig& cfg, std::ostream* log = nullptr) {
  if (cfg.models.empty()) throw ConfigError("benchmark", "no rating_models or ranking_models configured");
  const RatingDataset original = detail::load_original(cfg);
  const RatingDataset synthetic = detail::load_synthetic(cfg);
  if (!original.same_cells(synthetic))
    throw Error(cfg.synthetic_file() + " does not have the same cells as " + cfg.ratings_path);

  BenchmarkProtocol protocol = cfg.protocol;
  protocol.threads = cfg.threads;
  BenchmarkResult res = run_benchmark(original, synthetic, cfg.models, protocol);

  detail::ensure_output_dir(cfg);
  std::vector<Leaderboard> boards;
  std::size_t rows = 0;
  for (Task task : {Task::rating, Task::ranking}) {
    for (const auto* side : {&res.original, &res.synthetic}) {
      if (const auto* b = detail::board(*side, task)) {
        boards.push_back(*b);
        rows += b->entries.size();
      }
    }
  }
  const auto lb_path = detail::out_path(cfg, "leaderboard.csv");
  detail::write_file(lb_path, [&](std::ostream& out) { write_leaderboards(out, boards); });

  nlohmann::json doc = nlohmann::json::object();
  if (const auto* o = detail::board(res.original, Task::rating))
    doc["rating"] = detail::to_json(rank_agreement(*o, *detail::board(res.synthetic, Task::rating)));
  if (const auto* o = detail::board(res.original, Task::ranking)) {
    const auto* s = detail::board(res.synthetic, Task::ranking);
    nlohmann::json ranking = {{"overall", detail::to_json(rank_agreement(*o, *s))}};
    nlohmann::json per = nlohmann::json::object();
    for (std::size_t it : protocol.iterations) {
      const std::string suffix = "@" + std::to_string(it);
      per[std::to_string(it)] = detail::to_json(rank_agreement(o->filtered(suffix), s->filtered(suffix)));
    }
    if (!protocol.iterations.empty()) ranking["by_iterations"] = per;
    doc["ranking"] = ranking;
  }
  const auto ag_path = detail::out_path(cfg, "agreement.json");
  detail::write_json(ag_path, doc);

  std::ifstream in(lb_path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  if (lines != rows + 1) throw Error(lb_path.string() + " has an unexpected number of rows");
  detail::read_json(ag_path);

  detail::note(log, "wrote " + std::to_string(rows) + " leaderboard rows to " + lb_path.string());
  return res;
}

inline AuditReport cmd_audit(const PipelineConfig& cfg, std::ostream* log = nullptr) {
  const RatingDataset original = detail::load_original(cfg);
  const RatingDataset synthetic = detail::load_synthetic(cfg);
  if (!original.same_cells(synthetic))
    throw Error(cfg.synthetic_file() + " does not have the same cells as " + cfg.ratings_path);
  detail::require_file(cfg.mask_file(), "audit.mask");
  const RetentionMask mask = load_mask(cfg.mask_file(), original, cfg.output_schema().delimiter);
  const ItemMetadata meta = detail::load_all_metadata(cfg);
  const AuditReport r = audit(original, synthetic, mask, meta, cfg.audit);

  nlohmann::json histogram = nlohmann::json::array();
  for (double v : original.scale().values())
    histogram.push_back({{"value", v}, {"original", r.original_histogram[v]}, {"synthetic", r.synthetic_histogram[v]}});
  nlohmann::json roles = nlohmann::json::object();
  for (const auto& ra : r.roles) {
    roles[std::string(to_string(ra.role))] = {
        {"top_persons", {{"original", ra.top_original}, {"synthetic", ra.top_synthetic}, {"overlap", ra.top_person_overlap}}},
        {"hiding", detail::to_json(ra.hiding)}};
  }
  const auto& p = r.perturbation;
  nlohmann::json doc = {
      {"tv_distance", r.tv_distance},
      {"histogram", histogram},
      {"top_items",
       {{"k", cfg.audit.top_k},
        {"threshold", cfg.audit.threshold},
        {"original", r.top_items_original},
        {"synthetic", r.top_items_synthetic},
        {"overlap", r.top_items_overlap}}},
      {"roles", roles},
      {"perturbation",
       {{"cells", p.cells},
        {"mean_abs_change", p.mean_abs_change},
        {"variance", p.variance},
        {"all_cells_mean_abs_change", p.all_cells_mean_abs_change},
        {"all_cells_variance", p.all_cells_variance}}}};

  detail::ensure_output_dir(cfg);
  const auto audit_path = detail::out_path(cfg, "audit.json");
  const auto hist_path = detail::out_path(cfg, "histogram.csv");
  detail::write_json(audit_path, doc);
  detail::write_file(hist_path, [&](std::ostream& out) {
    out << "value,original_fraction,synthetic_fraction\n";
    for (double v : original.scale().values())
      out << format_number(v) << ',' << format_number(r.original_histogram[v]) << ','
          << format_number(r.synthetic_histogram[v]) << '\n';
  });
  detail::read_json(audit_path);

  detail::note(log, "tv_distance " + format_number(r.tv_distance) + "; wrote " + audit_path.string());
  return r;
}

inline void run_all(const PipelineConfig& cfg, std::ostream* log = nullptr) {
  cmd_synthesize(cfg, log);
  cmd_benchmark(cfg, log);
  cmd_audit(cfg, log);
}

}  // namespace ratesynth
