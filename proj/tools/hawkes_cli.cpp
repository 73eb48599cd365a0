// Command-line front end: simulate, track, learn, batch, eval, replicate, forecast.
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical failure.

#include <hawkes/batch.hpp>
#include <hawkes/config.hpp>
#include <hawkes/eval.hpp>
#include <hawkes/events.hpp>
#include <hawkes/experiments.hpp>
#include <hawkes/io.hpp>
#include <hawkes/netlearn.hpp>
#include <hawkes/simulate.hpp>
#include <hawkes/tracker.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace hawkes;

namespace {

struct Model {
  std::size_t p = 0;
  double delta = 0.0;
  Kernel kernel = Kernel::exponential(0.5);
  Vector mu_bar;
  RateBounds bounds;
};

Model load_model(const Config& cfg, std::optional<std::size_t> p_hint, std::optional<double> delta_flag) {
  Model m;
  m.kernel = parse_kernel(cfg);
  m.mu_bar = parse_mu_bar(cfg, config_p(cfg) ? config_p(cfg) : p_hint);
  m.p = static_cast<std::size_t>(m.mu_bar.size());
  m.delta = delta_flag ? *delta_flag : cfg.real("delta");
  require_config(m.delta > 0.0, "delta must be positive");
  m.bounds = parse_bounds(cfg);
  return m;
}

void write_forecasts(const fs::path& path, const std::vector<Vector>& rates) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "t";
  if (!rates.empty())
    for (Eigen::Index k = 0; k < rates.front().size(); ++k) out << ",lambda_" << k;
  out << '\n';
  for (std::size_t t = 0; t < rates.size(); ++t) {
    out << t + 1;
    for (Eigen::Index k = 0; k < rates[t].size(); ++k) out << ',' << fmt(rates[t][k]);
    out << '\n';
  }
}

void write_trace(const fs::path& path, const std::vector<double>& losses, const Config& cfg, double delta) {
  std::optional<double> window;
  if (cfg.has("moving_average_window")) window = cfg.real("moving_average_window");
  const auto records = loss_records(losses, window, delta);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_loss_trace(out, records, static_cast<std::size_t>(cfg.integer("trace_stride", 1)));
}

LearnerConfig learner_config(const Config& cfg, const Model& m, std::size_t bins) {
  LearnerConfig lc;
  lc.mu_bar = m.mu_bar;
  lc.delta = m.delta;
  lc.eta = parse_step(cfg, "eta0", 10.0, bins);
  lc.rho = parse_step(cfg, "rho0", 0.01, bins);
  lc.bounds = m.bounds;
  lc.set = parse_feasible_set(cfg, m.p);
  lc.l1_penalty = cfg.real("l1_penalty", 0.0);
  lc.learn_mu = cfg.boolean("learn_mu");
  if (cfg.has("W")) lc.w_init = parse_network(cfg, m.p);
  if (cfg.has("x_max")) lc.x_max = cfg.real("x_max");
  return lc;
}

int run(int argc, char** argv) {
  CLI::App app{"Online tracking and network learning for multivariate Hawkes processes"};
  app.require_subcommand(1);

  std::string config_path, events_path, out_path, w_out, trace_path, runs_dir, profile;
  std::optional<double> delta;
  std::optional<std::uint64_t> seed;
  bool emit_forecasts = false;

  auto* sim = app.add_subcommand("simulate", "simulate a Hawkes process");
  sim->add_option("--config", config_path, "config file")->required();
  sim->add_option("--seed", seed, "random seed");
  sim->add_option("--out", out_path, "events file (.csv or .jsonl)")->required();
  sim->add_option("--w-out", w_out, "write the generating W here");

  auto* track = app.add_subcommand("track", "track rates with a known W");
  auto* learn = app.add_subcommand("learn", "track rates and learn W");
  auto* fc = app.add_subcommand("forecast", "print the next-bin intensity after the stream");
  for (auto* c : {track, learn, fc}) {
    c->add_option("--config", config_path, "config file")->required();
    c->add_option("--events", events_path, "events file")->required();
    c->add_option("--delta", delta, "bin width (overrides config)");
  }
  for (auto* c : {track, learn}) {
    c->add_option("--out", out_path, "output directory")->required();
    c->add_flag("--emit-forecasts", emit_forecasts, "write forecasts.csv with lambda_hat_t before each bin");
  }

  auto* bat = app.add_subcommand("batch", "fit W offline by proximal gradient");
  bat->add_option("--config", config_path, "config file")->required();
  bat->add_option("--events", events_path, "events file")->required();
  bat->add_option("--out", out_path, "fitted W (CSV)")->required();
  bat->add_option("--trace", trace_path, "objective trace (CSV)");
  bat->add_option("--delta", delta, "bin width (overrides config)");

  auto* ev = app.add_subcommand("eval", "aggregate replicated runs");
  ev->add_option("--runs", runs_dir, "directory written by replicate")->required();
  ev->add_option("--out", out_path, "output directory")->required();

  ReplicateOptions rep;
  std::size_t actors = 0;
  auto* repl = app.add_subcommand("replicate", "run an experiment profile");
  repl->add_option("profile", rep.profile, "mismatch_exp | mismatch_rect | blocknet | memestyle")->required();
  repl->add_option("--trials", rep.trials, "number of trials (default per profile)");
  repl->add_option("--seed-base", rep.seed_base, "trial i uses seed base + i");
  repl->add_option("--scale", rep.scale, "scale factor for the horizon (event count for memestyle)");
  repl->add_option("--delta", delta, "override the profile's bin width");
  repl->add_option("--actors", actors, "override the profile's actor count");
  repl->add_option("--workers", rep.workers, "worker threads (default: hardware concurrency)");
  repl->add_option("--out", out_path, "output directory")->required();
  repl->add_flag("--no-eval", "skip aggregation");

  CLI11_PARSE(app, argc, argv);

  if (*sim) {
    const auto cfg = Config::load(config_path, simulate_schema());
    SimulationConfig sc;
    sc.kernel = parse_kernel(cfg);
    sc.horizon = cfg.real("horizon");
    sc.seed = seed ? *seed : static_cast<std::uint64_t>(cfg.integer("seed", 0));
    if (cfg.has("x_max_guard")) sc.x_max_guard = cfg.real("x_max_guard");
    if (cfg.has("max_events")) sc.max_events = static_cast<std::size_t>(cfg.integer("max_events"));
    if (cfg.text("network", "file") == "block") {
      BlockNetworkSpec spec;
      if (auto p = config_p(cfg)) spec.p = *p;
      Rng rng(sc.seed);
      const auto net = generate_block_network(spec, rng);
      for (const auto& w : net.warnings) std::cerr << "warning: " << w << '\n';
      sc.w = net.w;
      sc.mu_bar = parse_mu_bar(cfg, spec.p);
      sc.seed = rng.next();
    } else {
      sc.mu_bar = parse_mu_bar(cfg, std::nullopt);
      sc.w = parse_network(cfg, static_cast<std::size_t>(sc.mu_bar.size()));
    }
    SimulationReport report;
    const auto stream = simulate_hawkes(sc, &report);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    write_events(out_path, stream);
    if (!w_out.empty()) write_matrix_csv(w_out, sc.w);
    std::cout << stream.size() << " events, " << stream.actors() << " actors, horizon " << stream.horizon() << '\n';
    return 0;
  }

  if (*track) {
    const auto cfg = Config::load(config_path, track_schema());
    const auto stream = read_events(events_path, config_p(cfg));
    const auto m = load_model(cfg, stream.actors(), delta);
    const BinnedCounts counts(stream, m.delta);
    const Matrix w = parse_network(cfg, m.p);
    TrackOptions opts;
    opts.keep_rates = emit_forecasts;
    const auto res = run_tracker(counts, m.kernel, w, m.mu_bar, parse_step(cfg, "eta0", 10.0, counts.bins()), m.bounds, opts);
    fs::create_directories(out_path);
    write_trace(fs::path(out_path) / "loss.csv", res.losses, cfg, m.delta);
    if (emit_forecasts) write_forecasts(fs::path(out_path) / "forecasts.csv", res.rates);
    if (!m.kernel.is_nonincreasing()) std::cerr << "warning: kernel is not nonincreasing; contractivity check skipped\n";
    std::cout << "bins " << counts.bins() << ", cumulative loss " << fmt(sum_of(res.losses)) << '\n';
    return 0;
  }

  if (*learn) {
    const auto cfg = Config::load(config_path, learn_schema());
    const auto stream = read_events(events_path, config_p(cfg));
    const auto m = load_model(cfg, stream.actors(), delta);
    const BinnedCounts counts(stream, m.delta);
    const auto lc = learner_config(cfg, m, counts.bins());
    LearnOptions lo;
    lo.keep_rates = emit_forecasts;
    lo.snapshot_every = static_cast<std::size_t>(cfg.integer("snapshot_every", 0));
    const auto method = cfg.text("method", "alg2");
    fs::create_directories(out_path);
    LearnResult res;
    if (method == "alg2") {
      NetworkLearner learner(m.kernel, lc);
      res = run_learner(learner, counts, lo);
      if (learner.clamp_count()) std::cerr << "note: rate clamped to the box in " << learner.clamp_count() << " bins\n";
      if (learner.x_max_violations())
        std::cerr << "warning: " << learner.x_max_violations() << " bins exceed the declared x_max\n";
    } else if (method == "ogd") {
      res = learn_network_ogd(counts, m.kernel, lc, lo);
    } else {
      throw ConfigError("method must be alg2 or ogd");
    }
    write_trace(fs::path(out_path) / "loss.csv", res.losses, cfg, m.delta);
    write_matrix_csv(fs::path(out_path) / "W.csv", res.w);
    if (lc.learn_mu) write_matrix_csv(fs::path(out_path) / "mu_bar.csv", res.mu_bar.transpose());
    for (const auto& s : res.snapshots)
      write_matrix_csv(fs::path(out_path) / ("W_" + std::to_string(s.t) + ".csv"), s.w);
    if (emit_forecasts) write_forecasts(fs::path(out_path) / "forecasts.csv", res.rates);
    std::cout << "bins " << counts.bins() << ", cumulative loss " << fmt(sum_of(res.losses)) << '\n';
    return 0;
  }

  if (*fc) {
    const auto cfg = Config::load(config_path, forecast_schema());
    const auto stream = read_events(events_path, config_p(cfg));
    const auto m = load_model(cfg, stream.actors(), delta);
    const BinnedCounts counts(stream, m.delta);
    Vector next;
    if (cfg.text("mode", "track") == "track") {
      Tracker tracker(m.kernel, parse_network(cfg, m.p), m.mu_bar, m.delta, parse_step(cfg, "eta0", 10.0, counts.bins()),
                      m.bounds);
      for (std::size_t t = 1; t <= counts.bins(); ++t) tracker.step(counts.bin(t));
      next = tracker.forecast();
    } else if (cfg.text("mode") == "learn") {
      NetworkLearner learner(m.kernel, learner_config(cfg, m, counts.bins()));
      for (std::size_t t = 1; t <= counts.bins(); ++t) learner.step(counts.bin(t));
      next = learner.forecast();
    } else {
      throw ConfigError("mode must be track or learn");
    }
    std::cout << "bin " << counts.bins() + 1;
    for (Eigen::Index k = 0; k < next.size(); ++k) std::cout << ',' << fmt(next[k]);
    std::cout << '\n';
    return 0;
  }

  if (*bat) {
    const auto cfg = Config::load(config_path, batch_schema());
    const auto stream = read_events(events_path, config_p(cfg));
    const auto m = load_model(cfg, stream.actors(), delta);
    const BinnedCounts counts(stream, m.delta);
    BatchOptions bo;
    bo.l1_penalty = cfg.real("l1_penalty", bo.l1_penalty);
    bo.max_outer = static_cast<std::size_t>(cfg.integer("max_outer", static_cast<long long>(bo.max_outer)));
    bo.max_line_search = static_cast<std::size_t>(cfg.integer("max_line_search", static_cast<long long>(bo.max_line_search)));
    bo.tol = cfg.real("tol", bo.tol);
    if (cfg.has("W")) bo.w_init = parse_network(cfg, m.p);
    const auto res = batch_fit(BatchData(counts, m.kernel, m.mu_bar), bo);
    write_matrix_csv(out_path, res.w);
    if (!trace_path.empty()) {
      std::ofstream tr(trace_path);
      tr << "iteration,objective\n";
      for (std::size_t i = 0; i < res.objective.size(); ++i) tr << i << ',' << fmt(res.objective[i]) << '\n';
    }
    std::cout << "objective " << fmt(res.objective.back()) << " after " << res.objective.size() - 1 << " iterations"
              << (res.converged ? " (converged)" : "") << '\n';
    return 0;
  }

  if (*ev) {
    evaluate_runs(runs_dir, out_path);
    return 0;
  }

  if (*repl) {
    rep.delta = delta;
    if (actors) rep.actors = actors;
    const auto manifest = replicate(rep, out_path);
    std::cout << manifest["completed"].size() << " trials completed, " << manifest["failed_count"].get<std::size_t>()
              << " failed\n";
    for (const auto& f : manifest["failed"]) std::cerr << f["trial"].get<std::string>() << ": " << f["error"].get<std::string>() << '\n';
    if (!repl->get_option("--no-eval")->as<bool>() && !manifest["completed"].empty())
      evaluate_runs(out_path, fs::path(out_path) / "summary");
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
