// fusenas command-line driver: compile, fuse-report, bench, tune, search.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "fusenas/autotune/tuner.hpp"
#include "fusenas/codegen/compiled_graph.hpp"
#include "fusenas/codegen/legality.hpp"
#include "fusenas/fusion/report.hpp"
#include "fusenas/ir/graph_io.hpp"
#include "fusenas/ir/metrics.hpp"
#include "fusenas/ir/shape_inference.hpp"
#include "fusenas/nas/search.hpp"

namespace {

using nlohmann::json;
using namespace fusenas;

constexpr const char* kToolVersion = "fusenas 0.1.0";

enum Exit { kOk = 0, kUserError = 1, kInternal = 2, kExhausted = 3 };

struct Globals {
  std::uint64_t seed = 0;
  bool verbose = false;
};

void say(const Globals& g, const std::string& msg) {
  if (g.verbose) std::cerr << msg << '\n';
}

void say_notes(const Globals& g, const std::vector<std::string>& notes) {
  for (const auto& n : notes) say(g, "note: " + n);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Parse, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void emit(const json& doc, const std::string& path) {
  const std::string text = doc.dump(2) + "\n";
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out << text;
}

json stats_json(const autotune::LatencyStats& s) {
  return {{"runs", s.runs},           {"warmup", s.warmup},   {"median_ms", s.median_ms},
          {"p90_ms", s.p90_ms},       {"samples_ms", s.samples_ms}};
}

struct Loaded {
  std::string digest;
  ir::TensorGraph graph;
};

Loaded load(const std::string& path) {
  const std::string text = read_file(path);
  return {fnv1a_hex(text), ir::infer_shapes(ir::parse_graph(text))};
}

ir::TensorGraph fuse(const ir::TensorGraph& g, bool enabled) {
  if (!enabled) return g;
  return fusion::fuse_graph(g, codegen::make_legality_gate()).fused;
}

json blocks_json(const codegen::CompiledGraph& cg) {
  json blocks = json::array();
  for (auto id : cg.block_ids()) {
    const auto& b = cg.block(id);
    const auto& v = b.variants[b.chosen];
    blocks.push_back({{"block", id},
                      {"variant_count", b.variants.size()},
                      {"selected", b.chosen},
                      {"per_op", b.per_op},
                      {"schedule", codegen::dump_variant(v)},
                      {"redundant_flops", v.profile.redundant_flops},
                      {"stride_cost", v.profile.stride_cost}});
  }
  return blocks;
}

// ---------------------------------------------------------------------------

struct CompileOpts {
  std::string graph, report;
  bool no_fuse = false;
};

int cmd_compile(const CompileOpts& o, const Globals& g) {
  const Loaded in = load(o.graph);
  say(g, "loaded " + o.graph + " (" + std::to_string(in.graph.size()) + " nodes, digest " + in.digest + ")");
  const ir::TensorGraph fused = fuse(in.graph, !o.no_fuse);
  const codegen::CompiledGraph cg(fused);
  say(g, std::to_string(cg.block_ids().size()) + " lowered blocks");
  say_notes(g, cg.notes());
  json doc = {{"tool_version", kToolVersion},
              {"input_digest", in.digest},
              {"fused", !o.no_fuse},
              {"metrics",
               {{"before", fusion::metrics_json(ir::count_metrics(in.graph))},
                {"after", fusion::metrics_json(ir::count_metrics(fused))}}},
              {"blocks", blocks_json(cg)},
              {"notes", cg.notes()}};
  emit(doc, o.report);
  return kOk;
}

struct ReportOpts {
  std::string graph, out;
};

int cmd_fuse_report(const ReportOpts& o, const Globals&) {
  const Loaded in = load(o.graph);
  const auto result = fusion::fuse_graph(in.graph, codegen::make_legality_gate());
  json doc = fusion::fusion_report(in.graph, result);
  doc["input_digest"] = in.digest;
  doc["tool_version"] = kToolVersion;
  emit(doc, o.out);
  return kOk;
}

struct BenchOpts {
  std::string graph, out;
  int runs = 100, warmup = 10, workers = 1;
  bool fused = false, unfused = false;
};

int cmd_bench(const BenchOpts& o, const Globals& g) {
  if (o.runs < 1) throw Error(ErrorCode::InvalidArgument, "--runs must be at least 1");
  const Loaded in = load(o.graph);
  const bool both = o.fused == o.unfused;
  const auto bindings = ir::random_bindings(in.graph, g.seed);
  const autotune::LatencyConfig lc{o.runs, o.warmup};
  json timing = json::object();
  json metrics = json::object();
  double fused_ms = 0.0, unfused_ms = 0.0;
  auto bench = [&](bool fuse_it) {
    const ir::TensorGraph graph = fuse(in.graph, fuse_it);
    codegen::CompiledGraph cg(graph);
    cg.set_workers(o.workers);
    say_notes(g, cg.notes());
    metrics[fuse_it ? "fused" : "unfused"] = fusion::metrics_json(ir::count_metrics(graph));
    const auto stats = autotune::measure_latency(cg, bindings, lc);
    timing[fuse_it ? "fused" : "unfused"] = stats_json(stats);
    return stats.median_ms;
  };
  if (both || o.fused) fused_ms = bench(true);
  if (both || o.unfused) unfused_ms = bench(false);
  if (both) timing["speedup"] = fused_ms > 0.0 ? unfused_ms / fused_ms : 0.0;
  json doc = {{"tool_version", kToolVersion},
              {"input_digest", in.digest},
              {"runs", o.runs},
              {"warmup", o.warmup},
              {"workers", o.workers},
              {"metrics", metrics},
              {"timing", timing}};
  emit(doc, o.out);
  return kOk;
}

struct TuneOpts {
  std::string graph, out;
  int runs = 5, warmup = 1, final_runs = 100, final_warmup = 10;
  int generations = 10, population = 12;
  bool text = false;
};

int cmd_tune(const TuneOpts& o, const Globals& g) {
  if (o.runs < 1 || o.final_runs < 1) throw Error(ErrorCode::InvalidArgument, "--runs must be at least 1");
  const Loaded in = load(o.graph);
  const ir::TensorGraph fused = fuse(in.graph, true);
  codegen::CompiledGraph cg(fused);
  const auto bindings = ir::random_bindings(in.graph, g.seed);
  autotune::TuneConfig tc;
  tc.ga.generations = o.generations;
  tc.ga.population_size = o.population;
  tc.ga.rng_seed = g.seed;
  tc.fitness_latency = {o.runs, o.warmup};
  tc.final_latency = {o.final_runs, o.final_warmup};
  const auto r = autotune::tune_graph(cg, bindings, tc);
  say_notes(g, r.notes);
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    say(g, "generation " + std::to_string(i) + " best_ms " + std::to_string(r.history[i]));
  }
  if (o.text) {
    std::cout << autotune::tune_report(cg, r);
    return kOk;
  }
  json assignment = json::object();
  for (const auto& [id, idx] : r.assignment) {
    assignment[std::to_string(id)] = r.per_op.count(id) ? json("per-op") : json(idx);
  }
  json doc = {{"tool_version", kToolVersion},
              {"input_digest", in.digest},
              {"metrics",
               {{"before", fusion::metrics_json(ir::count_metrics(in.graph))},
                {"after", fusion::metrics_json(ir::count_metrics(fused))}}},
              {"notes", r.notes},
              // Selection is driven by wall-clock measurements, so it lives
              // with the timing fields.
              {"timing",
               {{"assignment", assignment},
                {"blocks", blocks_json(cg)},
                {"workers", r.workers},
                {"history_ms", r.history},
                {"latency", stats_json(r.stats)}}}};
  emit(doc, o.out);
  return kOk;
}

// ---------------------------------------------------------------------------

std::vector<int> int_list(const json& j, const char* key, std::vector<int> fallback) {
  return j.contains(key) ? j.at(key).get<std::vector<int>>() : fallback;
}

template <class T>
T value_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* allowed) { return k == allowed; })) {
      throw Error(ErrorCode::Parse, std::string("unknown key '") + k + "' in " + where);
    }
  }
}

struct SearchSetup {
  nas::SearchSpace space;
  nas::SearchConfig cfg;
  std::unique_ptr<nas::TrainerIface> trainer;
  nas::CompileAndMeasure measure;
  std::string history_log;
};

/// Compiles the arch's encoder graph to report fused metrics.
nas::Measurement compiler_feedback(const ir::ArchSample& arch, std::int64_t seq_len) {
  const ir::TensorGraph g = ir::infer_shapes(ir::build_transformer_graph(arch, seq_len));
  const auto fused = fusion::fuse_graph(g, codegen::make_legality_gate()).fused;
  const auto m = ir::count_metrics(fused);
  nas::Measurement out;
  out.fused_layer_count = m.layer_count;
  out.computation_count = m.computation_count;
  return out;
}

SearchSetup parse_search_config(const std::string& path, const Globals& g) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("search config: ") + e.what());
  }
  SearchSetup s;
  try {
    reject_unknown(j, {"space", "latency_budget_ms", "latency_model", "trainer", "search", "reward",
                       "history_log", "compiler_feedback"},
                   "search config");
    const json space = value_or<json>(j, "space", json::object());
    reject_unknown(space, {"layers", "hidden", "ffn", "seq_len", "head_dim"}, "space");
    s.space.layer_choices = int_list(space, "layers", s.space.layer_choices);
    s.space.hidden_choices = int_list(space, "hidden", s.space.hidden_choices);
    s.space.ffn_choices = int_list(space, "ffn", s.space.ffn_choices);
    s.space.seq_len = value_or<std::int64_t>(space, "seq_len", s.space.seq_len);
    s.space.head_dim = value_or<int>(space, "head_dim", s.space.head_dim);
    s.space.latency_budget_ms = j.at("latency_budget_ms").get<double>();
    s.space.validate();

    const json search = value_or<json>(j, "search", json::object());
    reject_unknown(search, {"episodes_per_update", "updates_phase1", "updates_phase2", "learning_rate",
                            "baseline_decay", "seed", "mode_samples"},
                   "search");
    auto& c = s.cfg;
    c.episodes_per_update = value_or(search, "episodes_per_update", c.episodes_per_update);
    c.updates_phase1 = value_or(search, "updates_phase1", c.updates_phase1);
    c.updates_phase2 = value_or(search, "updates_phase2", c.updates_phase2);
    c.learning_rate = value_or(search, "learning_rate", c.learning_rate);
    c.baseline_decay = value_or(search, "baseline_decay", c.baseline_decay);
    c.mode_samples = value_or(search, "mode_samples", c.mode_samples);
    c.seed = value_or<std::uint64_t>(search, "seed", g.seed);
    const std::string reward = value_or<std::string>(j, "reward", "ratio");
    if (reward == "ratio") {
      c.reward = nas::RewardMode::Ratio;
    } else if (reward == "corrected") {
      c.reward = nas::RewardMode::Corrected;
    } else {
      throw Error(ErrorCode::Parse, "reward must be 'ratio' or 'corrected'");
    }
    c.validate();

    const json trainer = value_or<json>(j, "trainer", json{{"kind", "surrogate"}});
    reject_unknown(trainer, {"kind", "command", "noise_std"}, "trainer");
    const std::string kind = value_or<std::string>(trainer, "kind", "surrogate");
    if (kind == "surrogate") {
      s.trainer = std::make_unique<nas::SurrogateTrainer>(
          nas::kSurrogateMaxAccuracy, nas::kSurrogateScale, value_or(trainer, "noise_std", 0.0), c.seed);
    } else if (kind == "command") {
      s.trainer = std::make_unique<nas::ExternalCommandTrainer>(trainer.at("command").get<std::string>());
    } else {
      throw Error(ErrorCode::Parse, "trainer kind must be 'surrogate' or 'command'");
    }

    const bool feedback = value_or(j, "compiler_feedback", true);
    const json model = value_or<json>(j, "latency_model", json{{"kind", "flops"}});
    reject_unknown(model, {"kind", "intercept_ms", "ms_per_gflop", "runs", "warmup"}, "latency_model");
    const std::string mkind = value_or<std::string>(model, "kind", "flops");
    const std::int64_t seq = s.space.seq_len;
    nas::CompileAndMeasure base;
    if (mkind == "flops") {
      base = nas::flops_latency_model(seq, value_or(model, "intercept_ms", 0.0),
                                      value_or(model, "ms_per_gflop", 10.0));
    } else if (mkind == "measured") {
      const autotune::LatencyConfig lc{value_or(model, "runs", 5), value_or(model, "warmup", 1)};
      const std::uint64_t seed = c.seed;
      base = [lc, seq, seed](const ir::ArchSample& arch) {
        const ir::TensorGraph g = ir::infer_shapes(ir::build_transformer_graph(arch, seq));
        codegen::CompiledGraph cg(fusion::fuse_graph(g, codegen::make_legality_gate()).fused);
        nas::Measurement m;
        m.latency_ms = autotune::measure_latency(cg, ir::random_bindings(g, seed), lc).median_ms;
        return m;
      };
    } else {
      throw Error(ErrorCode::Parse, "latency_model kind must be 'flops' or 'measured'");
    }
    s.measure = [base, feedback, seq](const ir::ArchSample& arch) {
      nas::Measurement m = feedback ? compiler_feedback(arch, seq) : nas::Measurement{};
      m.latency_ms = base(arch).latency_ms;
      return m;
    };
    s.history_log = value_or<std::string>(j, "history_log", "");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("search config: ") + e.what());
  }
  return s;
}

json arch_json(const ir::ArchSample& a) {
  return {{"layers", a.num_layers}, {"hidden", a.hidden_size}, {"ffn", a.ffn_size}, {"heads", a.num_heads}};
}

struct SearchOpts {
  std::string config, out, history;
};

int cmd_search(const SearchOpts& o, const Globals& g) {
  SearchSetup s = parse_search_config(o.config, g);
  const auto r = nas::search(s.space, *s.trainer, s.measure, s.cfg);
  say(g, std::to_string(r.history.size()) + " episodes, " + std::to_string(r.trainer_calls) +
             " trainer calls, phase-1 layers " + std::to_string(r.phase1_layers));
  if (r.exhausted) say(g, "no architecture met the latency budget");
  const std::string log_path = o.history.empty() ? s.history_log : o.history;
  if (!log_path.empty()) {
    std::ofstream log(log_path);
    if (!log) throw Error(ErrorCode::InvalidArgument, "cannot write " + log_path);
    log << nas::history_log(r.history);
  }
  json best = json::object();
  if (r.best_episode) {
    const auto& e = *r.best_episode;
    best = {{"arch", arch_json(e.arch)},
            {"accuracy", e.accuracy ? json(*e.accuracy) : json(nullptr)},
            {"latency_ms", e.feedback.latency_ms},
            {"reward", e.reward},
            {"fused_layer_count", e.feedback.fused_layer_count},
            {"computation_count", e.feedback.computation_count},
            {"within_budget", e.feasible}};
  }
  json doc = {{"tool_version", kToolVersion},
              {"input_digest", fnv1a_hex(read_file(o.config))},
              {"status", r.exhausted ? "exhausted" : "ok"},
              {"best", best},
              {"phase1_layers", r.phase1_layers},
              {"policy_mode", {{"arch", arch_json(r.mode)}, {"frequency", r.mode_frequency}}},
              {"episodes", r.history.size()},
              {"trainer_calls", r.trainer_calls},
              {"latency_budget_ms", s.space.latency_budget_ms}};
  emit(doc, o.out);
  return r.exhausted ? kExhausted : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph fusion, schedule tuning and compiler-aware architecture search"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for bindings, tuning and search")->capture_default_str();
  app.add_flag("--verbose", g.verbose, "Print diagnostics to stderr");

  CompileOpts co;
  auto* compile = app.add_subcommand("compile", "Fuse and lower a graph, write the run report");
  compile->add_option("graph", co.graph, "Graph JSON file")->required();
  compile->add_flag("--no-fuse", co.no_fuse, "Skip fusion");
  compile->add_option("--report", co.report, "Write the report here instead of stdout");

  ReportOpts ro;
  auto* report = app.add_subcommand("fuse-report", "List fusion candidates and the selected plan");
  report->add_option("graph", ro.graph, "Graph JSON file")->required();
  report->add_option("--out", ro.out, "Output path");

  BenchOpts bo;
  auto* bench = app.add_subcommand("bench", "Measure fused and/or unfused latency");
  bench->add_option("graph", bo.graph, "Graph JSON file")->required();
  bench->add_option("--runs", bo.runs, "Timed runs")->capture_default_str();
  bench->add_option("--warmup", bo.warmup, "Untimed warmup runs")->capture_default_str();
  bench->add_option("--workers", bo.workers, "Threads per fused block")->capture_default_str();
  bench->add_flag("--fused", bo.fused, "Only the fused graph");
  bench->add_flag("--unfused", bo.unfused, "Only the unfused graph");
  bench->add_option("--out", bo.out, "Output path");

  TuneOpts to;
  auto* tune = app.add_subcommand("tune", "Auto-tune block schedules with the genetic search");
  tune->add_option("graph", to.graph, "Graph JSON file")->required();
  tune->add_option("--runs", to.runs, "Timed runs per candidate")->capture_default_str();
  tune->add_option("--warmup", to.warmup, "Warmup runs per candidate")->capture_default_str();
  tune->add_option("--final-runs", to.final_runs, "Timed runs for the winner")->capture_default_str();
  tune->add_option("--generations", to.generations, "GA generations")->capture_default_str();
  tune->add_option("--population", to.population, "GA population")->capture_default_str();
  tune->add_flag("--text", to.text, "Plain-text tuning report");
  tune->add_option("--out", to.out, "Output path");

  SearchOpts so;
  auto* search = app.add_subcommand("search", "Two-phase architecture search");
  search->add_option("config", so.config, "Search config JSON")->required();
  search->add_option("--history", so.history, "History log path (overrides config)");
  search->add_option("--out", so.out, "Output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUserError;
  }

  try {
    if (*compile) return cmd_compile(co, g);
    if (*report) return cmd_fuse_report(ro, g);
    if (*bench) return cmd_bench(bo, g);
    if (*tune) return cmd_tune(to, g);
    if (*search) return cmd_search(so, g);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_user_error() ? kUserError : kInternal;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kInternal;
}
