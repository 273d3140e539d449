// Command-line front end: solve, round, analyze, pipeline, gap and sweep.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "mba/analysis.hpp"
#include "mba/arrangements.hpp"
#include "mba/error.hpp"
#include "mba/format.hpp"
#include "mba/instance.hpp"
#include "mba/lp.hpp"
#include "mba/pipeline.hpp"
#include "mba/st_rounding.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

struct Options {
  std::vector<std::string> instances;
  std::string config;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::uint64_t seeds = 1;
  std::string out = ".";
  unsigned jobs = 1;
};

json versioned(json j) {
  j["schema_version"] = kSchemaVersion;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw mba::Error("cannot write " + path.string());
  f << text;
}

void write_json(const fs::path& path, const json& j) {
  write_text(path, versioned(j).dump(2) + "\n");
}

mba::ConstantsConfig load_constants(const Options& o) {
  mba::ConstantsConfig cfg;
  if (!o.config.empty()) {
    std::ifstream f(o.config);
    if (!f) throw mba::PipelineError("cannot open config " + o.config);
    json j;
    try {
      f >> j;
    } catch (const json::exception& e) {
      throw mba::PipelineError("config " + o.config + " is not valid JSON: " + e.what());
    }
    cfg = mba::constants_from_json(j, cfg);
  }
  for (const auto& s : o.overrides) mba::apply_override(cfg, s);
  const auto bad = mba::validate_config(cfg);
  if (!bad.empty()) throw mba::PipelineError("invalid constants: " + bad.front());
  return cfg;
}

const std::string& single_instance(const Options& o) {
  if (o.instances.size() != 1) throw mba::Error("exactly one --instance is required");
  return o.instances.front();
}

mba::AssignmentSolution starting_solution(std::shared_ptr<const mba::Instance> inst,
                                          const mba::ConstantsConfig& cfg) {
  if (cfg.start == "configuration") {
    const auto y = mba::solve_configuration_lp(inst, cfg.config_accuracy);
    return mba::project_to_assignment(y).solution;
  }
  return mba::solve_assignment_lp(inst);
}

json cmd_solve(const Options& o) {
  const auto cfg = load_constants(o);
  auto inst = std::make_shared<const mba::Instance>(mba::load_instance(single_instance(o)));
  const auto x = mba::solve_assignment_lp(inst);
  const auto y = mba::solve_configuration_lp(inst, cfg.config_accuracy);
  json proj_j;
  try {
    const auto proj = mba::project_to_assignment(y);
    proj_j = {{"config_value", proj.config_value},
              {"untrimmed_value", proj.untrimmed_value},
              {"trimming_loss", proj.trimming_loss},
              {"solution", mba::assignment_to_json(proj.solution)}};
  } catch (const mba::ProjectionError& e) {
    proj_j = {{"error", e.what()}};
  }
  const fs::path out(o.out);
  write_json(out / "assignment_lp.json", mba::assignment_to_json(x));
  write_json(out / "configuration_lp.json", mba::config_to_json(y));
  write_json(out / "projection.json", proj_j);
  return {{"assignment_lp", x.objective()},
          {"configuration_lp", y.objective},
          {"configuration_dual_bound", y.dual_bound}};
}

json cmd_round(const Options& o) {
  const auto cfg = load_constants(o);
  auto inst = std::make_shared<const mba::Instance>(mba::load_instance(single_instance(o)));
  const auto x = starting_solution(inst, cfg);
  const auto dist = mba::decompose_matchings(mba::build_bucket_graph(x));
  const auto ev = mba::exact_expected_value(dist);
  const auto sample = mba::sample_allocation(dist, o.seed);
  json alloc = mba::allocation_to_json(*inst, sample.allocation);
  alloc["seed"] = o.seed;
  alloc["expected_value"] = ev.total;
  alloc["lp_value"] = x.objective();
  alloc["support_size"] = dist.support_size();
  const fs::path out(o.out);
  write_json(out / "allocation.json", alloc);
  write_text(out / "distribution.csv", mba::distribution_csv(dist));
  return {{"expected_value", ev.total},
          {"lp_value", x.objective()},
          {"allocation_value", sample.allocation.value}};
}

json cmd_analyze(const Options& o) {
  const auto cfg = load_constants(o);
  auto inst = std::make_shared<const mba::Instance>(mba::load_instance(single_instance(o)));
  const auto x = starting_solution(inst, cfg);
  const auto stats = mba::compute_stats(x);
  const fs::path out(o.out);
  write_text(out / "players.csv", mba::player_stats_csv(x, stats));
  write_text(out / "items.csv", mba::item_stats_csv(x, stats));
  const auto g = mba::build_bucket_graph(x);
  write_text(out / "buckets.dot", mba::bucket_graph_dot(g));
  json players = json::array();
  for (mba::PlayerIdx i = 0; i < inst->num_players(); ++i) {
    if (g.num_buckets(i) == 0) continue;
    const auto worse = mba::worsen_arrangement(mba::initial_arrangement(g, i));
    const auto st = mba::arrangement_stats(worse.arrangement);
    write_text(out / ("arrangement_" + std::to_string(i) + ".csv"),
               mba::arrangement_csv(worse.arrangement));
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(); };
    players.push_back({{"player", inst->player_id(i)},
                       {"file", "arrangement_" + std::to_string(i) + ".csv"},
                       {"swaps", worse.swaps},
                       {"w", st.w},
                       {"v", st.v},
                       {"b_mass", st.b_mass},
                       {"L", opt(st.L)},
                       {"L_B", opt(st.L_B)},
                       {"L_S", opt(st.L_S)},
                       {"G", opt(st.G)},
                       {"expected_value", st.expected_value},
                       {"slack", mba::arrangement_slack(worse.arrangement)}});
  }
  write_json(out / "arrangements.json", {{"D", 1000}, {"players", players}});
  return {{"players", inst->num_players()}, {"lp_value", x.objective()}};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

const char* kSummaryHeader = "instance,seed,branch_path,opt,final_value,ratio,certificate\n";

std::string summary_row(const std::string& id, const mba::PipelineReport& r) {
  std::ostringstream s;
  s << csv_field(id) << ',' << r.seed << ',' << mba::branch_path(r) << ','
    << mba::num(r.opt) << ',' << mba::num(r.final_expected_value) << ','
    << mba::num(r.ratio) << ',' << csv_field(r.certificate.name) << '\n';
  return s.str();
}

json cmd_pipeline(const Options& o) {
  const auto cfg = load_constants(o);
  const std::string& path = single_instance(o);
  const auto inst = mba::load_instance(path);
  const auto res = mba::run_pipeline(inst, cfg, o.seed);
  json report = mba::report_to_json(inst, res);
  report["constants"] = mba::constants_to_json(cfg);
  const fs::path out(o.out);
  write_json(out / "report.json", report);
  const fs::path csv = out / "summary.csv";
  const bool fresh = !fs::exists(csv);
  std::ofstream f(csv, std::ios::app | std::ios::binary);
  if (!f) throw mba::Error("cannot write " + csv.string());
  if (fresh) f << kSummaryHeader;
  f << summary_row(fs::path(path).stem().string(), res.report);
  return {{"branch_path", mba::branch_path(res.report)},
          {"ratio", res.report.ratio},
          {"final_value", res.report.final_expected_value}};
}

json cmd_gap(const Options& o) {
  auto inst = std::make_shared<const mba::Instance>(mba::gen_gap_instance());
  const auto x = mba::solve_assignment_lp(inst);
  const auto best = mba::best_integral_allocation(*inst);
  const auto dist = mba::decompose_matchings(mba::build_bucket_graph(x));
  const double st = mba::exact_expected_value(dist).total;
  const fs::path out(o.out);
  write_json(out / "gap_instance.json", mba::instance_to_json(*inst));
  const json summary = {{"lp", x.objective()},
                        {"opt", best.value},
                        {"ratio", best.value / x.objective()},
                        {"st_expected_value", st},
                        {"lp_solution", mba::assignment_to_json(x)},
                        {"best_allocation", mba::allocation_to_json(*inst, best)}};
  write_json(out / "gap.json", summary);
  write_text(out / "gap.csv", "lp,opt,ratio,st_expected_value\n" + mba::num(x.objective()) +
                                  "," + mba::num(best.value) + "," +
                                  mba::num(best.value / x.objective()) + "," + mba::num(st) +
                                  "\n");
  return {{"lp", x.objective()}, {"opt", best.value}, {"ratio", best.value / x.objective()}};
}

json cmd_sweep(const Options& o) {
  if (o.instances.empty()) throw mba::Error("sweep needs at least one --instance");
  if (o.seeds == 0) throw mba::Error("--seeds must be positive");
  const auto cfg = load_constants(o);
  std::vector<mba::Instance> insts;
  for (const auto& p : o.instances) insts.push_back(mba::load_instance(p));
  const std::size_t total = insts.size() * o.seeds;
  std::vector<std::string> rows(total);
  std::vector<std::string> errors(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < total; t = next++) {
      const std::size_t k = t / o.seeds;
      const std::uint64_t seed = o.seed + t % o.seeds;
      try {
        const auto res = mba::run_pipeline(insts[k], cfg, seed);
        rows[t] = summary_row(fs::path(o.instances[k]).stem().string(), res.report);
      } catch (const std::exception& e) {
        errors[t] = e.what();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(o.jobs, static_cast<unsigned>(total)));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < jobs; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (std::size_t t = 0; t < total; ++t) {
    if (!errors[t].empty()) {
      throw mba::PipelineError("instance " + o.instances[t / o.seeds] + " seed " +
                               std::to_string(o.seed + t % o.seeds) + ": " + errors[t]);
    }
  }
  std::string csv = kSummaryHeader;
  for (const auto& r : rows) csv += r;
  write_text(fs::path(o.out) / "sweep.csv", csv);
  return {{"runs", total}};
}

const char* error_type(const std::exception& e) {
  if (dynamic_cast<const mba::InstanceError*>(&e)) return "instance";
  if (dynamic_cast<const mba::LpError*>(&e)) return "lp";
  if (dynamic_cast<const mba::ProjectionError*>(&e)) return "projection";
  if (dynamic_cast<const mba::DecompositionError*>(&e)) return "decomposition";
  if (dynamic_cast<const mba::TransformError*>(&e)) return "transform";
  if (dynamic_cast<const mba::PipelineError*>(&e)) return "pipeline";
  if (dynamic_cast<const mba::Error*>(&e)) return "error";
  return "internal";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted allocation solver and rounding experiments"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool instance, bool seed, bool config) {
    if (instance) sub->add_option("--instance", o.instances, "Instance JSON file")->required();
    if (config) {
      sub->add_option("--config", o.config, "Constants JSON file");
      sub->add_option("--set", o.overrides, "Override a constant, key=value");
    }
    if (seed) sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--out", o.out, "Output directory");
  };

  using Handler = json (*)(const Options&);
  std::vector<std::pair<CLI::App*, Handler>> verbs;
  auto* solve = app.add_subcommand("solve", "Solve the Assignment-LP and Configuration-LP");
  add_common(solve, true, false, true);
  verbs.push_back({solve, cmd_solve});
  auto* round = app.add_subcommand("round", "Round an LP solution with ST rounding");
  add_common(round, true, true, true);
  verbs.push_back({round, cmd_round});
  auto* analyze = app.add_subcommand("analyze", "Solution statistics and arrangements");
  add_common(analyze, true, false, true);
  verbs.push_back({analyze, cmd_analyze});
  auto* pipeline = app.add_subcommand("pipeline", "Run the seven-step pipeline");
  add_common(pipeline, true, true, true);
  verbs.push_back({pipeline, cmd_pipeline});
  auto* gap = app.add_subcommand("gap", "Integrality gap instance");
  add_common(gap, false, false, false);
  verbs.push_back({gap, cmd_gap});
  auto* sweep = app.add_subcommand("sweep", "Pipeline over instances and seeds");
  add_common(sweep, true, true, true);
  sweep->add_option("--seeds", o.seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  sweep->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  verbs.push_back({sweep, cmd_sweep});

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  for (const auto& [sub, handler] : verbs) {
    if (!sub->parsed()) continue;
    try {
      json result = handler(o);
      result["command"] = sub->get_name();
      std::cout << versioned(result).dump() << '\n';
      return 0;
    } catch (const std::exception& e) {
      json err = {{"command", sub->get_name()},
                  {"error", {{"type", error_type(e)}, {"message", e.what()}}}};
      std::cout << versioned(err).dump() << '\n';
      return 1;
    }
  }
  return 2;
}
