// d2k command-line front end.
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "d2k/common/error.hpp"
#include "d2k/common/util.hpp"
#include "d2k/dynamics/model_io.hpp"
#include "d2k/orchestrator/benchmark.hpp"
#include "d2k/orchestrator/k2d.hpp"
#include "d2k/orchestrator/nightly.hpp"
#include "d2k/orchestrator/report.hpp"
#include "d2k/orchestrator/site.hpp"
#include "d2k/store/service.hpp"
#include "d2k/sweep/wire.hpp"

using namespace d2k;
using namespace d2k::orchestrator;
using Json = learner::Json;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
};

PipelineConfig load_config(const Globals& g) {
  auto c = load_pipeline_config(resolve_config_path(g.config));
  if (g.seed) c.seed = *g.seed;
  return c;
}

/// Block until SIGINT or SIGTERM.
void wait_for_signal() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  sigwait(&set, &sig);
}

void block_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

std::unique_ptr<store::StoreApi> open_store_flags(const std::string& dir, const std::string& socket) {
  if (!socket.empty()) return std::make_unique<store::RemoteStore>(socket);
  std::string d = dir;
  if (d.empty()) {
    if (const char* env = std::getenv("D2K_STORE_DIR")) d = env;
  }
  if (d.empty()) throw ValidationError("store_dir", "pass --store-dir or set D2K_STORE_DIR");
  return std::make_unique<store::ShadowStore>(d);
}

store::DatasetQuery parse_query(const std::string& text) {
  if (text.empty()) return {};
  try {
    return store::query_from_json(Json::parse(text));
  } catch (const Json::parse_error& e) {
    throw ValidationError("query", e.what());
  }
}

void emit(const Json& j, const std::string& out) {
  const auto text = j.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
}

std::string stamp() {
  auto s = utc_now();
  for (auto& c : s) {
    if (c == ':') c = '-';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  block_signals();
  CLI::App app{"Data-to-knowledge pipeline for robot inverse-dynamics models"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config, "Pipeline config (default: $D2K_CONFIG)");
  auto* seed_opt = app.add_option("--seed", seed_value, "Override the config seed");

  // generate
  auto* gen = app.add_subcommand("generate", "Generate labelled trajectories as JSONL records");
  std::string gen_model = "builtin", gen_out = "-", gen_purpose = "train", gen_site = "local";
  GenerateSpec gs;
  gs.instance_id = "default";
  dynamics::InstancePerturbation gen_pert;
  gen->add_option("--model", gen_model, "Robot model YAML file or 'builtin'");
  gen->add_option("--instance-id", gs.instance_id);
  gen->add_option("--site", gen_site);
  gen->add_option("--purpose", gen_purpose)->check(CLI::IsMember({"train", "validation", "evaluation"}));
  gen->add_option("--count", gs.count)->check(CLI::PositiveNumber);
  gen->add_option("--velocity-scaling", gs.velocity_scaling);
  gen->add_option("--acceleration-scaling", gs.acceleration_scaling);
  gen->add_option("--n-waypoints", gs.n_waypoints);
  gen->add_option("--sample-dt", gs.sample_dt);
  gen->add_option("--noise-sigma", gs.noise_sigma);
  gen->add_option("--payload-mass", gen_pert.payload_mass);
  gen->add_option("--friction-scale", gen_pert.friction_scale);
  gen->add_option("--seed", gs.seed);
  gen->add_option("--out", gen_out, "Output file ('-' for stdout)");

  // store
  auto* st = app.add_subcommand("store", "Shadow data store");
  st->require_subcommand(1);
  std::string store_dir, store_socket, query_text, out_path;
  st->add_option("--store-dir", store_dir, "Store directory (default: $D2K_STORE_DIR)");
  st->add_option("--socket", store_socket, "Use a served store instead of a directory");
  auto* st_serve = st->add_subcommand("serve", "Serve the store on a unix socket");
  std::string serve_socket;
  st_serve->add_option("--listen", serve_socket)->required();
  auto* st_ingest = st->add_subcommand("ingest", "Ingest JSONL records");
  std::string ingest_file;
  st_ingest->add_option("file", ingest_file, "JSONL file ('-' for stdin)")->required();
  auto* st_query = st->add_subcommand("query", "Print matching records as JSONL");
  st_query->add_option("--query", query_text, "DatasetQuery as JSON");
  auto* st_stats = st->add_subcommand("stats", "Dataset statistics");
  bool persist = false;
  st_stats->add_option("--query", query_text);
  st_stats->add_flag("--persist", persist);
  auto* st_hist = st->add_subcommand("histogram", "Joint-position histogram");
  std::size_t hist_joint = 0, hist_bins = 10;
  st_hist->add_option("--query", query_text);
  st_hist->add_option("--joint", hist_joint)->required();
  st_hist->add_option("--bins", hist_bins);
  auto* st_view = st->add_subcommand("create-view", "Store a named query + projection");
  std::vector<std::string> projection;
  std::string description;
  st_view->add_option("--query", query_text);
  st_view->add_option("--projection", projection)->delimiter(',');
  st_view->add_option("--description", description);
  auto* st_resolve = st->add_subcommand("resolve-view", "Resolve a view to projected JSON objects");
  std::string view_id;
  st_resolve->add_option("view_id", view_id)->required();

  // sweep
  auto* sw = app.add_subcommand("sweep", "Sweep coordinator and model repository");
  sw->require_subcommand(1);
  auto* sw_serve = sw->add_subcommand("serve", "Serve a coordinator on a unix socket");
  std::string repo_dir, sweep_socket;
  sw_serve->add_option("--repo-dir", repo_dir)->required();
  sw_serve->add_option("--socket", sweep_socket)->required();
  auto* sw_status = sw->add_subcommand("status", "Round status and best models");
  std::string round_id, target_key = "foundation";
  sw_status->add_option("--socket", sweep_socket);
  sw_status->add_option("--repo-dir", repo_dir);
  sw_status->add_option("--round", round_id);
  sw_status->add_option("--target", target_key);

  // orchestrator
  auto* site = app.add_subcommand("site", "Simulated data collection");
  site->require_subcommand(1);
  auto* site_run = site->add_subcommand("run", "Generate and ingest a site's configured mix");
  std::vector<std::string> site_names;
  site_run->add_option("--site", site_names, "Site name (default: all sites)");

  auto* nightly = app.add_subcommand("nightly", "Nightly training loop");
  bool once = false;
  nightly->add_flag("--once", once, "Run one pass now instead of following the schedule");
  std::optional<int> configs;
  nightly->add_option("--configs-per-round", configs);

  auto* k2d = app.add_subcommand("k2d", "Coverage-directed data collection");
  k2d->require_subcommand(1);
  auto* k2d_scan = k2d->add_subcommand("scan", "Print directives for under-covered joint bins");
  std::vector<std::size_t> joints;
  std::optional<std::size_t> bins;
  std::optional<double> threshold;
  for (auto* sc : {k2d_scan}) {
    sc->add_option("--joint", joints);
    sc->add_option("--bins", bins);
    sc->add_option("--threshold", threshold);
    sc->add_option("--out", out_path, "JSONL file of directives");
  }
  auto* k2d_apply = k2d->add_subcommand("apply", "Generate and ingest data for directives");
  std::string directives_file;
  k2d_apply->add_option("--directives", directives_file, "JSONL from k2d scan (default: scan now)");

  auto* bench = app.add_subcommand("bench", "Four-setup training benchmark with report files");
  std::optional<int> epochs;
  std::string bench_out;
  bench->add_option("--configs-per-round", configs);
  bench->add_option("--epochs", epochs);
  int bench_agents = 1;
  bench->add_option("--agents", bench_agents, "Concurrent runs per setup (wall times then not comparable)")
      ->check(CLI::PositiveNumber);
  bench->add_option("--out", bench_out, "Report directory (default: <report_dir>/bench-<seed>)");

  auto* rep = app.add_subcommand("report", "Render SVG figures from benchmark CSV files");
  std::string rep_dir;
  rep->add_option("--dir", rep_dir)->required();

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count()) g.seed = seed_value;

  try {
    if (gen->parsed()) {
      const auto base = gen_model == "builtin" ? dynamics::default_robot_model() : dynamics::load_robot_model(gen_model);
      gen_pert.instance_id = gs.instance_id;
      const auto model = dynamics::apply_perturbation(base, gen_pert);
      gs.robot_type = base.name;
      gs.site = gen_site;
      gs.purpose = store::parse_purpose(gen_purpose);
      std::ostringstream out;
      for (auto& r : generate_records(model, gs)) {
        r.record_id = make_uuid();
        r.created_utc = utc_now();
        out << store::serialize_record(r) << '\n';
      }
      if (gen_out == "-") {
        std::cout << out.str();
      } else {
        write_file_atomic(gen_out, out.str());
      }
      return 0;
    }

    if (st->parsed()) {
      auto store = open_store_flags(store_dir, store_socket);
      if (st_serve->parsed()) {
        store::StoreServer server(*store, serve_socket);
        server.start();
        std::cerr << "store serving on " << serve_socket << "\n";
        wait_for_signal();
        server.stop();
      } else if (st_ingest->parsed()) {
        std::ifstream file;
        std::istream* in = &std::cin;
        if (ingest_file != "-") {
          file.open(ingest_file);
          if (!file) throw NotFoundError("cannot open " + ingest_file);
          in = &file;
        }
        int line_no = 0, failed = 0;
        for (std::string line; std::getline(*in, line);) {
          ++line_no;
          if (line.empty()) continue;
          try {
            std::cout << store->ingest(store::parse_record(line)) << '\n';
          } catch (const Error& e) {
            ++failed;
            std::cerr << "line " << line_no << ": " << e.code() << ": " << e.what() << '\n';
          }
        }
        return failed ? 1 : 0;
      } else if (st_query->parsed()) {
        for (const auto& r : store->query(parse_query(query_text))) std::cout << store::serialize_record(*r) << '\n';
      } else if (st_stats->parsed()) {
        emit(store::to_json(store->stats(parse_query(query_text), persist)), "");
      } else if (st_hist->parsed()) {
        emit(store::to_json(store->histogram(parse_query(query_text), hist_joint, hist_bins)), "");
      } else if (st_view->parsed()) {
        store::ShadowView v;
        v.query = parse_query(query_text);
        v.projection = projection.empty() ? store::record_fields() : projection;
        v.description = description;
        std::cout << store->create_view(v) << '\n';
      } else if (st_resolve->parsed()) {
        for (const auto& j : store->resolve_view(view_id)) std::cout << j.dump() << '\n';
      }
      return 0;
    }

    if (sw->parsed()) {
      if (sw_serve->parsed()) {
        sweep::Coordinator coordinator(repo_dir);
        std::unique_ptr<store::StoreApi> store;
        std::optional<PipelineConfig> config;
        if (!g.config.empty() || std::getenv("D2K_CONFIG")) {
          config = load_config(g);
          store = open_store(config->store);
          coordinator.set_post_accept_hook(make_evaluation_hook(*store, *config));
        }
        sweep::SweepServer server(coordinator, sweep_socket);
        server.start();
        std::cerr << "sweep coordinator serving on " << sweep_socket << "\n";
        wait_for_signal();
        server.stop();
        return 0;
      }
      std::unique_ptr<sweep::SweepApi> api;
      if (!sweep_socket.empty()) {
        api = std::make_unique<sweep::RemoteSweep>(sweep_socket, "cli");
      } else if (!repo_dir.empty()) {
        api = std::make_unique<sweep::Coordinator>(repo_dir);
      } else {
        api = open_sweep(load_config(g).sweep);
      }
      Json j;
      if (!round_id.empty()) j["round"] = sweep::to_json(api->status(round_id));
      const auto target = sweep::Target::parse(target_key);
      try {
        j["best"] = sweep::to_json(api->best(target));
      } catch (const NotFoundError&) {
        j["best"] = nullptr;
      }
      j["history_length"] = api->history(target).size();
      emit(j, "");
      return 0;
    }

    const auto config = load_config(g);

    if (site_run->parsed()) {
      auto services = connect(config);
      std::vector<const SiteConfig*> chosen;
      if (site_names.empty()) {
        for (const auto& s : config.sites) chosen.push_back(&s);
      } else {
        for (const auto& n : site_names) chosen.push_back(&config.site(n));
      }
      std::vector<SiteRunResult> results(chosen.size());
      std::vector<std::thread> workers;
      for (std::size_t i = 0; i < chosen.size(); ++i) {
        workers.emplace_back([&, i] { results[i] = run_site(config, *chosen[i], *services.store); });
      }
      for (auto& t : workers) t.join();
      Json out = Json::array();
      bool ok = true;
      for (const auto& r : results) {
        Json purposes = Json::array();
        for (auto p : r.purposes) purposes.push_back(store::to_string(p));
        out.push_back({{"site", r.site}, {"record_ids", r.record_ids}, {"purposes", purposes}, {"errors", r.errors}});
        ok = ok && r.errors.empty();
      }
      emit(out, "");
      return ok ? 0 : 1;
    }

    if (nightly->parsed()) {
      NightlyOptions opt;
      opt.configs_per_round = configs;
      auto run_once = [&] {
        NightlyReport report;
        try {
          auto services = connect(config);
          report = run_nightly(config, services, opt);
        } catch (const std::exception& e) {
          report = unreachable_report(std::string("services unreachable: ") + e.what());
        }
        const auto j = to_json(report);
        write_file_atomic(config.report_dir / "nightly" / (stamp() + ".json"), j.dump(2) + "\n");
        emit(j, "");
        return report.ok();
      };
      if (once) return run_once() ? 0 : 1;
      const auto schedule = DailySchedule::parse(config.schedule);
      while (true) {
        const auto wait = schedule.seconds_until_next(std::chrono::system_clock::now());
        std::cerr << "next nightly run in " << static_cast<long>(wait) << " s\n";
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        run_once();
      }
    }

    if (k2d->parsed()) {
      auto services = connect(config);
      std::vector<CoverageDirective> directives;
      if (k2d_apply->parsed() && !directives_file.empty()) {
        std::istringstream in(read_file(directives_file));
        for (std::string line; std::getline(in, line);) {
          if (!line.empty()) directives.push_back(coverage_directive_from_json(Json::parse(line)));
        }
      } else {
        auto opt = scan_options(config);
        if (!joints.empty()) opt.joints = joints;
        if (bins) opt.n_bins = *bins;
        if (threshold) opt.threshold = *threshold;
        directives = k2d_directives(*services.store, coverage_query(config), config.robot.n_joints(), opt);
      }
      if (k2d_scan->parsed()) {
        std::ostringstream out;
        for (const auto& d : directives) out << to_json(d).dump() << '\n';
        if (out_path.empty()) {
          std::cout << out.str();
        } else {
          write_file_atomic(out_path, out.str());
        }
        return 0;
      }
      Json out = Json::array();
      for (std::size_t i = 0; i < directives.size(); ++i) {
        auto j = to_json(directives[i]);
        j["record_ids"] = apply_directive(config, directives[i], *services.store, i);
        out.push_back(std::move(j));
      }
      emit(out, "");
      return 0;
    }

    if (bench->parsed()) {
      auto services = connect(config);
      BenchmarkOptions opt;
      opt.configs_per_round = configs;
      opt.epochs = epochs;
      opt.agents = bench_agents;
      const auto report = run_benchmark(config, services, opt);
      // Rendering happens after all timed runs.
      const fs::path dir = bench_out.empty() ? config.report_dir / ("bench-" + std::to_string(config.seed)) : fs::path(bench_out);
      write_benchmark_artifacts(report, dir);
      render_report(dir);
      Json summary = Json::array();
      for (const auto& r : report.results) {
        summary.push_back({{"setup", sweep::to_string(r.setup)},
                           {"runs", r.runs.size()},
                           {"total_wall_seconds", r.total_wall_seconds},
                           {"first_run_validation_mae", r.first_run_validation_mae()},
                           {"best_validation_mae", r.best_validation_mae()}});
      }
      emit({{"report_dir", dir.string()}, {"results", summary}, {"notes", report.notes}}, "");
      return 0;
    }

    if (rep->parsed()) {
      for (const auto& p : render_report(rep_dir)) std::cout << p.string() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
