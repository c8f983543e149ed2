#include "hwlaw/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "hwlaw/scenario_io.hpp"
#include "hwlaw/sim_log_io.hpp"
#include "hwlaw/synthetic.hpp"

namespace hwlaw {

using nlohmann::json;

std::vector<ExtractedRun> load_dataset_runs(const std::filesystem::path& csv, const DatasetRunOptions& options,
                                            std::vector<std::string>* diagnostics) {
  TrackFile tf = parse_track_file(csv);
  if (diagnostics) diagnostics->insert(diagnostics->end(), tf.rejected.begin(), tf.rejected.end());
  if (options.scale != 1.0) tf = preprocess_scale(tf, options.scale);
  ExtractOptions ex;
  ex.lane_filter = options.lanes;
  ex.dt = options.dt;
  ex.thresholds = options.thresholds;
  auto runs = extract_runs(tf, ex, diagnostics);
  const std::string stem = csv.stem().string();
  for (auto& r : runs) r.scenario.name = fmt::format("{}/{}", stem, r.scenario.name);
  return runs;
}

SimConfig make_sim_config(const DatasetRunOptions& options, bool compliance_enabled) {
  SimConfig cfg;
  cfg.compliance_enabled = compliance_enabled;
  cfg.mpc.Np = options.np;
  cfg.mpc.Nc = options.nc;
  cfg.mpc.dt = options.dt;
  return cfg;
}

namespace {

// Calls body(i) for i in [0, n) on up to `threads` workers.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) body(i);
  };
  if (threads <= 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
}

}  // namespace

std::vector<SimLog> run_parallel(const std::vector<Scenario>& scenarios, const SimConfig& config, unsigned threads) {
  std::vector<SimLog> out(scenarios.size());
  std::vector<std::exception_ptr> errors(scenarios.size());
  parallel_for(scenarios.size(), threads, [&](std::size_t i) {
    try {
      out[i] = run(scenarios[i], config);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<FileResult> process_files(const std::vector<std::filesystem::path>& files,
                                      const DatasetRunOptions& options, bool compliance_enabled) {
  std::vector<FileResult> results;
  std::vector<Scenario> all;
  std::vector<std::pair<std::size_t, std::size_t>> owner;  // result index, run index
  for (const auto& f : files) {
    FileResult r;
    r.path = f;
    try {
      for (auto& run : load_dataset_runs(f, options, &r.diagnostics)) {
        r.ego_ids.push_back(run.ego_id);
        owner.emplace_back(results.size(), all.size());
        all.push_back(std::move(run.scenario));
      }
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    results.push_back(std::move(r));
  }

  // Runs are independent; a failing one only poisons its own file.
  const SimConfig cfg = make_sim_config(options, compliance_enabled);
  std::vector<SimLog> logs(all.size());
  std::vector<std::optional<std::string>> errors(all.size());
  parallel_for(all.size(), options.threads, [&](std::size_t i) {
    try {
      logs[i] = run(all[i], cfg);
    } catch (const std::exception& e) {
      errors[i] = fmt::format("{}: {}", all[i].name, e.what());
    }
  });
  for (const auto& [ri, si] : owner) {
    FileResult& r = results[ri];
    if (errors[si]) {
      if (!r.error) r.error = *errors[si];
      continue;
    }
    r.logs.push_back(std::move(logs[si]));
  }
  for (FileResult& r : results) {
    if (r.error) r.logs.clear();
  }
  return results;
}

std::vector<std::filesystem::path> list_track_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ComplianceStats stats_of(const std::vector<FileResult>& results) {
  std::vector<SimLog> logs;
  for (const auto& r : results) logs.insert(logs.end(), r.logs.begin(), r.logs.end());
  return aggregate_stats(logs);
}

namespace {

struct CommonFlags {
  std::string out;
  std::string format = "json";
  double dt = 0.05;
  int np = 30;
  int nc = 5;
  double scale = 2.0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string thresholds;
  std::vector<int> lanes;
  unsigned threads = 0;
  bool disable = false;
  bool dump_runs = false;
};

OutputFormat parse_format(const std::string& s) {
  if (s == "json") return OutputFormat::Json;
  if (s == "csv") return OutputFormat::Csv;
  throw std::invalid_argument(fmt::format("unknown format '{}'", s));
}

std::vector<std::filesystem::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::filesystem::path> files;
  for (const auto& in : inputs) {
    const std::filesystem::path p(in);
    if (std::filesystem::is_directory(p)) {
      auto found = list_track_files(p);
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  return files;
}

DatasetRunOptions dataset_options(const CommonFlags& f) {
  DatasetRunOptions o;
  o.scale = f.scale;
  o.dt = f.dt;
  o.np = f.np;
  o.nc = f.nc;
  o.threads = f.threads;
  if (!f.thresholds.empty()) o.thresholds = load_thresholds(f.thresholds);
  if (!f.lanes.empty()) o.lanes = std::set<int>(f.lanes.begin(), f.lanes.end());
  return o;
}

void print_stats(std::ostream& out, const std::string& title, const ComplianceStats& st) {
  out << fmt::format("{:<8} runs={:<4} frames={:<7} compliance={:.4f} active={:.4f} passive={:.4f} intervention={:.4f}\n",
                     title, st.runs, st.total_frames, st.compliance_rate, st.active_rate, st.passive_rate,
                     st.intervention_rate);
}

json failures_json(const std::vector<FileResult>& results) {
  json arr = json::array();
  for (const auto& r : results) {
    if (r.error) arr.push_back({{"file", r.path.string()}, {"error", *r.error}});
  }
  return arr;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", p.string()));
  out << text;
}

std::size_t run_count(const std::vector<FileResult>& results) {
  std::size_t n = 0;
  for (const auto& r : results) n += r.logs.size();
  return n;
}

void report_failures(std::ostream& err, const std::vector<FileResult>& results) {
  for (const auto& r : results) {
    if (r.error) err << fmt::format("error: {}: {}\n", r.path.string(), *r.error);
  }
}

int cmd_audit(const std::vector<std::string>& inputs, const CommonFlags& f, std::ostream& out, std::ostream& err) {
  const auto files = expand_inputs(inputs);
  if (files.empty()) {
    err << "error: no track files\n";
    return 1;
  }
  const auto results = process_files(files, dataset_options(f), false);
  report_failures(err, results);
  if (run_count(results) == 0) {
    err << "error: no tracks\n";
    return 1;
  }
  const ComplianceStats st = stats_of(results);
  print_stats(out, "audit", st);
  if (!f.out.empty()) {
    const std::filesystem::path dir(f.out);
    std::string labels = "file,vehicle,t,label,laws\n";
    for (const auto& r : results) {
      for (std::size_t k = 0; k < r.logs.size(); ++k) {
        for (const auto& fr : r.logs[k].frames) {
          labels += fmt::format("{},{},{},{},{}\n", r.path.filename().string(), r.ego_ids[k], fr.t,
                                to_string(fr.label.state), fr.label.laws.to_string());
        }
      }
    }
    write_text(dir / "labels.csv", labels);
    json doc{{"stats", stats_to_json(st)}, {"failures", failures_json(results)}};
    write_text(dir / "audit.json", doc.dump(2) + "\n");
  }
  const bool any_failed = std::any_of(results.begin(), results.end(), [](const auto& r) { return r.error.has_value(); });
  return any_failed ? 1 : 0;
}

int cmd_simulate(const std::string& input, const CommonFlags& f, std::ostream& out, std::ostream& err) {
  Scenario sc = load_scenario(input);
  if (f.seed_set) sc.seed = f.seed;
  if (!f.thresholds.empty()) sc.thresholds = load_thresholds(f.thresholds, sc.thresholds);
  sc.dt = f.dt;
  SimConfig cfg;
  cfg.compliance_enabled = !f.disable;
  cfg.mpc.Np = f.np;
  cfg.mpc.Nc = f.nc;
  cfg.mpc.dt = f.dt;
  const SimLog log = run(sc, cfg);
  const std::filesystem::path dir = f.out.empty() ? std::filesystem::path("out") / sc.name : std::filesystem::path(f.out);
  write_sim_outputs(log, dir, parse_format(f.format));
  const ComplianceStats st = aggregate_stats(std::span<const SimLog>(&log, 1));
  print_stats(out, sc.name, st);
  for (const auto& d : log.diagnostics) err << "warning: " << d << '\n';
  out << "wrote " << dir.string() << '\n';
  return 0;
}

int cmd_batch(const std::string& input, const CommonFlags& f, std::ostream& out, std::ostream& err) {
  const std::filesystem::path dir(input);
  if (!std::filesystem::is_directory(dir)) {
    err << fmt::format("error: {} is not a directory\n", input);
    return 1;
  }
  const auto files = list_track_files(dir);
  if (files.empty()) {
    err << fmt::format("error: no track files in {}\n", input);
    return 1;
  }
  const auto opts = dataset_options(f);
  const auto t0 = std::chrono::steady_clock::now();
  const auto before = process_files(files, opts, false);
  const auto after = process_files(files, opts, true);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report_failures(err, after);
  if (run_count(before) == 0) {
    err << "error: no tracks\n";
    return 1;
  }
  const ComplianceStats sb = stats_of(before);
  const ComplianceStats sa = stats_of(after);
  print_stats(out, "before", sb);
  print_stats(out, "after", sa);

  json doc{{"files", files.size()},
           {"before", stats_to_json(sb)},
           {"after", stats_to_json(sa)},
           {"failures", failures_json(after)},
           {"runtime_s", secs}};
  const std::filesystem::path out_dir = f.out.empty() ? std::filesystem::path("out") : std::filesystem::path(f.out);
  if (f.format == "csv") {
    std::string csv = "phase,runs,frames,compliance_rate,active_rate,passive_rate,intervention_rate\n";
    for (const auto& [name, st] : {std::pair{"before", sb}, std::pair{"after", sa}}) {
      csv += fmt::format("{},{},{},{},{},{},{}\n", name, st.runs, st.total_frames, st.compliance_rate, st.active_rate,
                         st.passive_rate, st.intervention_rate);
    }
    write_text(out_dir / "batch.csv", csv);
  } else {
    parse_format(f.format);
  }
  write_text(out_dir / "batch.json", doc.dump(2) + "\n");
  if (f.dump_runs) {
    const OutputFormat fmt_out = parse_format(f.format);
    for (const auto& [name, results] : {std::pair{"before", &before}, std::pair{"after", &after}}) {
      for (const auto& r : *results) {
        for (const SimLog& log : r.logs) write_sim_outputs(log, out_dir / "runs" / name / log.scenario, fmt_out);
      }
    }
  }
  out << "wrote " << (out_dir / "batch.json").string() << '\n';
  return 0;
}

int cmd_generate(const std::string& dir, int count, const SyntheticOptions& opts, std::ostream& out) {
  const auto paths = write_synthetic_suite(dir, count, opts);
  for (const auto& p : paths) out << p.string() << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Traffic-law compliance monitor, arbiter and MPC simulator"};
  app.require_subcommand(1);
  CommonFlags f;

  auto add_common = [&](CLI::App* sub, bool dataset) {
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--format", f.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--dt", f.dt, "Simulation step [s]")->check(CLI::PositiveNumber);
    sub->add_option("--np", f.np, "Prediction horizon steps")->check(CLI::PositiveNumber);
    sub->add_option("--nc", f.nc, "Control horizon steps")->check(CLI::PositiveNumber);
    sub->add_option("--thresholds", f.thresholds, "YAML threshold overrides")->check(CLI::ExistingFile);
    if (dataset) {
      sub->add_option("--scale", f.scale, "Longitudinal scale factor")->check(CLI::PositiveNumber);
      sub->add_option("--lanes", f.lanes, "Lane indexes to keep (0 = rightmost)");
      sub->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
    }
  };

  std::vector<std::string> audit_inputs;
  auto* audit = app.add_subcommand("audit", "Label recorded tracks without intervention");
  audit->add_option("inputs", audit_inputs, "Track CSV files or directories")->required();
  add_common(audit, true);

  std::string scenario_path;
  auto* simulate = app.add_subcommand("simulate", "Run one scenario file");
  simulate->add_option("scenario", scenario_path, "Scenario YAML")->required()->check(CLI::ExistingFile);
  add_common(simulate, false);
  simulate->add_option("--seed", f.seed, "Override the scenario seed")->each([&](const std::string&) {
    f.seed_set = true;
  });
  simulate->add_flag("--disable-compliance", f.disable, "Replay the initial reference");

  std::string batch_dir;
  auto* batch = app.add_subcommand("batch", "Before/after statistics over a track directory");
  batch->add_option("dir", batch_dir, "Directory of track files")->required();
  add_common(batch, true);
  batch->add_flag("--dump-runs", f.dump_runs, "Also write per-run frame logs under <out>/runs");

  std::string gen_dir;
  int gen_count = 4;
  SyntheticOptions gen;
  auto* generate = app.add_subcommand("gen-synthetic", "Write a synthetic congested track suite");
  generate->add_option("dir", gen_dir, "Output directory")->required();
  generate->add_option("--count", gen_count, "Number of files")->check(CLI::PositiveNumber);
  generate->add_option("--seed", gen.seed, "First seed");
  generate->add_option("--vehicles", gen.vehicles_per_lane, "Vehicles per lane")->check(CLI::PositiveNumber);
  generate->add_option("--duration", gen.duration, "Seconds per file")->check(CLI::PositiveNumber);
  generate->add_flag("--compliant", gen.compliant, "Single lane of legal traffic");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*audit) return cmd_audit(audit_inputs, f, out, err);
    if (*simulate) return cmd_simulate(scenario_path, f, out, err);
    if (*batch) return cmd_batch(batch_dir, f, out, err);
    if (*generate) return cmd_generate(gen_dir, gen_count, gen, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace hwlaw
