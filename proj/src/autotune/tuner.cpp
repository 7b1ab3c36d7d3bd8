#include "fusenas/autotune/tuner.hpp"

#include <set>
#include <sstream>

namespace fusenas::autotune {

namespace {

struct BlockGenes {
  NodeId block;
  std::vector<std::vector<std::size_t>> orders;
  std::vector<int> unrolls;
};

}  // namespace

TuneResult tune_graph(codegen::CompiledGraph& graph, const ir::Bindings& bench,
                      const TuneConfig& cfg) {
  ir::check_bindings(graph.graph(), bench);
  TuneResult result;
  result.notes = graph.notes();

  std::vector<BlockGenes> blocks;
  std::vector<int> sizes;
  for (auto id : graph.block_ids()) {
    const auto& vs = graph.block(id).variants;
    if (vs.empty()) {
      result.notes.push_back("block " + std::to_string(id) + ": no variants, per-op fallback");
      continue;
    }
    std::set<std::vector<std::size_t>> orders;
    std::set<int> unrolls;
    for (const auto& v : vs) {
      orders.insert(v.order);
      unrolls.insert(v.unroll);
    }
    blocks.push_back({id, {orders.begin(), orders.end()}, {unrolls.begin(), unrolls.end()}});
    sizes.push_back(static_cast<int>(orders.size()) + (cfg.allow_per_op ? 1 : 0));
    sizes.push_back(static_cast<int>(unrolls.size()));
  }
  if (cfg.tune_workers) sizes.push_back(static_cast<int>(std::size(kWorkerChoices)));

  auto apply = [&](const Chromosome& c) {
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const auto& bg = blocks[b];
      const auto o = static_cast<std::size_t>(c[2 * b]);
      graph.set_per_op(bg.block, o == bg.orders.size());
      if (o == bg.orders.size()) continue;
      const int unroll = bg.unrolls[static_cast<std::size_t>(c[2 * b + 1])];
      graph.select(bg.block, graph.find_variant(bg.block, bg.orders[o], unroll));
    }
    if (cfg.tune_workers) graph.set_workers(kWorkerChoices[c.back()]);
  };

  if (!sizes.empty()) {
    const GAResult ga = ga_search(
        sizes,
        [&](const Chromosome& c) {
          apply(c);
          return measure_latency(graph, bench, cfg.fitness_latency).median_ms;
        },
        cfg.ga);
    apply(ga.best);
    result.history = ga.history;
  }
  for (const auto& bg : blocks) {
    result.assignment[bg.block] = graph.selected(bg.block);
    if (graph.per_op(bg.block)) result.per_op.insert(bg.block);
  }
  result.workers = graph.workers();
  result.stats = measure_latency(graph, bench, cfg.final_latency);
  return result;
}

std::string tune_report(const codegen::CompiledGraph& graph, const TuneResult& r) {
  std::ostringstream os;
  for (std::size_t g = 0; g < r.history.size(); ++g) {
    os << "generation " << g << " best_ms " << r.history[g] << '\n';
  }
  for (const auto& [id, idx] : r.assignment) {
    if (r.per_op.count(id)) {
      os << "block " << id << " per-op\n";
      continue;
    }
    os << "block " << id << " variant " << idx << '\n';
    std::istringstream dump(codegen::dump_variant(graph.block(id).variants[idx]));
    for (std::string line; std::getline(dump, line);) os << "  " << line << '\n';
  }
  os << "workers " << r.workers << '\n';
  os << "runs " << r.stats.runs << " warmup " << r.stats.warmup << " median_ms "
     << r.stats.median_ms << " p90_ms " << r.stats.p90_ms << '\n';
  os << "samples_ms";
  for (double s : r.stats.samples_ms) os << ' ' << s;
  os << '\n';
  for (const auto& n : r.notes) os << "note " << n << '\n';
  return os.str();
}

}  // namespace fusenas::autotune
