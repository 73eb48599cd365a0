#pragma once

// Experiment profiles, single-trial runners, multi-trial replication and
// aggregation into summary CSVs.
//
// Profiles:
//   mismatch_exp   p=2, W=.75 I, h=e^-t, mu=.005, T=20000, delta=.1; tracked
//                  and direct rates under the assumed kernel (2e)^-t.
//   mismatch_rect  same data, assumed kernel 1{0<t<5}.
//   blocknet       p=100 block network, T=1e5, delta=.01, h=e^-t; Algorithm-1
//                  references, the joint learner and OGD under the true
//                  kernel and under .9^t.
//   memestyle      lag-ordered sparse network, p=217, delta=1 s, true
//                  alpha=.995, 1e5 events; online learner vs. the batch fit
//                  with alpha=.99, mu=2e-5, gamma=1e-3.

#include <hawkes/batch.hpp>
#include <hawkes/common.hpp>
#include <hawkes/eval.hpp>
#include <hawkes/events.hpp>
#include <hawkes/io.hpp>
#include <hawkes/kernels.hpp>
#include <hawkes/loss.hpp>
#include <hawkes/netlearn.hpp>
#include <hawkes/simulate.hpp>
#include <hawkes/tracker.hpp>

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace hawkes {

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Tables with a header row; blank cells read back as NaN.

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw DataError("table has no column '" + name + "'");
  }
  std::vector<double> column(const std::string& name) const {
    const auto i = index(name);
    std::vector<double> out(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) out[r] = rows[r][i];
    return out;
  }
};

inline void write_table(const std::filesystem::path& path, const Table& t) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << '\n';
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out << ',';
      if (!std::isnan(r[i])) out << fmt(r[i]);
    }
    out << '\n';
  }
}

inline Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) return t;
  std::stringstream hs(line);
  for (std::string c; std::getline(hs, c, ',');) t.columns.push_back(std::string(detail::trim(c)));
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (detail::trim(line).empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const auto cell = detail::trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (cell.empty()) row.push_back(std::nan(""));
      else if (const auto v = detail::parse_double(cell)) row.push_back(*v);
      else throw DataError(path.string() + " line " + std::to_string(n) + ": bad number");
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (row.size() != t.columns.size()) throw DataError(path.string() + " line " + std::to_string(n) + ": wrong cell count");
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Loss traces of several methods on one stream.

struct MethodTrace {
  std::string name;
  std::vector<double> losses;
};

/// Final-window moving average of a loss trace.
inline double final_moving_average(std::span<const double> losses, double window, double delta) {
  const auto ma = moving_average_loss(losses, window, delta);
  if (ma.empty()) throw ConfigError("moving-average window longer than the trace");
  return ma.back();
}

/// Strided table t, cum_<m>, ma_<m> for each method.
inline Table trace_table(const std::vector<MethodTrace>& methods, double window, double delta, std::size_t max_rows = 2000) {
  Table t;
  t.columns.push_back("t");
  for (const auto& m : methods) t.columns.push_back("cum_" + m.name);
  for (const auto& m : methods) t.columns.push_back("ma_" + m.name);
  if (methods.empty()) return t;
  const std::size_t n = methods.front().losses.size();
  const std::size_t stride = std::max<std::size_t>(1, n / max_rows);
  std::vector<std::vector<double>> cum(methods.size()), ma(methods.size());
  for (std::size_t j = 0; j < methods.size(); ++j) {
    if (methods[j].losses.size() != n) throw ConfigError("trace_table: traces differ in length");
    cum[j].resize(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) cum[j][i] = acc += methods[j].losses[i];
    ma[j] = moving_average_loss(methods[j].losses, window, delta);
  }
  for (std::size_t i = stride - 1; i < n; i += stride) {
    std::vector<double> row{static_cast<double>(i + 1)};
    for (std::size_t j = 0; j < methods.size(); ++j) row.push_back(cum[j][i]);
    for (std::size_t j = 0; j < methods.size(); ++j) {
      const std::size_t offset = n - ma[j].size();
      row.push_back(i >= offset ? ma[j][i - offset] : std::nan(""));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Mismatch profiles.

enum class MismatchKind { Exponential, Rectangular };

struct MismatchParams {
  MismatchKind kind = MismatchKind::Exponential;
  double horizon = 20000.0;
  double delta = 0.1;
  double eta0 = 10.0;
  double mu = 0.005;
  double self_excitation = 0.75;
  double window = 250.0;
};

struct MismatchTrial {
  EventStream stream;
  std::vector<MethodTrace> methods;  // tracked, direct, oracle
  double sum(const std::string& name) const {
    for (const auto& m : methods)
      if (m.name == name) return sum_of(m.losses);
    throw ConfigError("no method " + name);
  }
};

inline Kernel mismatch_assumed_kernel(MismatchKind kind) {
  return kind == MismatchKind::Exponential ? Kernel::exponential(1.0 / (2.0 * std::exp(1.0))) : Kernel::rectangular(5.0);
}

inline MismatchTrial run_mismatch_trial(const MismatchParams& prm, std::uint64_t seed) {
  SimulationConfig sim;
  sim.mu_bar = Vector::Constant(2, prm.mu);
  sim.w = prm.self_excitation * Matrix::Identity(2, 2);
  sim.kernel = Kernel::exponential(std::exp(-1.0));
  sim.horizon = prm.horizon;
  sim.seed = seed;
  MismatchTrial out{simulate_hawkes(sim), {}};
  const BinnedCounts counts(out.stream, prm.delta);
  const auto assumed = mismatch_assumed_kernel(prm.kind);
  const auto n = counts.bins();
  out.methods.push_back(
      {"tracked", run_tracker(counts, assumed, sim.w, sim.mu_bar, StepSize::constant(prm.eta0, n)).losses});
  out.methods.push_back({"direct", run_tracker(counts, assumed, sim.w, sim.mu_bar, StepSize::zero()).losses});
  out.methods.push_back({"oracle", run_tracker(counts, sim.kernel, sim.w, sim.mu_bar, StepSize::zero()).losses});
  return out;
}

// ---------------------------------------------------------------------------
// Block network profile.

struct BlocknetParams {
  BlockNetworkSpec network{};
  double horizon = 100000.0;
  double delta = 0.01;
  double mu_lo = 0.001, mu_hi = 0.01;
  double eta0 = 10.0;
  double rho0 = 0.01;
  double l1_penalty = 0.001;
  double mismatched_alpha = 0.9;
  double window = 500.0;
  std::size_t snapshots = 10;
  bool mismatched = true;  // also run the .9^t kernel
};

struct LearnedNetwork {
  std::string name;
  Matrix w;
  std::vector<Snapshot> snapshots;
};

struct BlocknetTrial {
  Matrix w_true;
  Vector mu_bar;
  EventStream stream;
  std::vector<MethodTrace> methods;  // alg1_true, alg1_zero, alg2, ogd[, alg2_mis, ogd_mis]
  std::vector<LearnedNetwork> networks;
  std::size_t clamps = 0;

  const std::vector<double>& losses(const std::string& name) const {
    for (const auto& m : methods)
      if (m.name == name) return m.losses;
    throw ConfigError("no method " + name);
  }
  const Matrix& network(const std::string& name) const {
    for (const auto& n : networks)
      if (n.name == name) return n.w;
    throw ConfigError("no network " + name);
  }
};

inline BlocknetTrial run_blocknet_trial(const BlocknetParams& prm, std::uint64_t seed) {
  Rng rng(seed);
  const auto net = generate_block_network(prm.network, rng);
  BlocknetTrial out{net.w, Vector(static_cast<Eigen::Index>(prm.network.p)), EventStream({}, prm.network.p), {}, {}, 0};
  for (Eigen::Index k = 0; k < out.mu_bar.size(); ++k) out.mu_bar[k] = rng.uniform(prm.mu_lo, prm.mu_hi);
  SimulationConfig sim;
  sim.mu_bar = out.mu_bar;
  sim.w = out.w_true;
  sim.kernel = Kernel::exponential(std::exp(-1.0));
  sim.horizon = prm.horizon;
  sim.seed = rng.next();
  out.stream = simulate_hawkes(sim);
  const BinnedCounts counts(out.stream, prm.delta);
  const auto n = counts.bins();
  const auto zero = Matrix::Zero(out.w_true.rows(), out.w_true.cols());

  out.methods.push_back(
      {"alg1_true", run_tracker(counts, sim.kernel, out.w_true, out.mu_bar, StepSize::constant(prm.eta0, n)).losses});
  out.methods.push_back(
      {"alg1_zero", run_tracker(counts, sim.kernel, zero, out.mu_bar, StepSize::constant(prm.eta0, n)).losses});

  LearnOptions lo;
  lo.snapshot_every = std::max<std::size_t>(1, n / std::max<std::size_t>(1, prm.snapshots));
  auto learn = [&](const std::string& suffix, const Kernel& kernel) {
    LearnerConfig cfg;
    cfg.mu_bar = out.mu_bar;
    cfg.delta = prm.delta;
    cfg.eta = StepSize::constant(prm.eta0, n);
    cfg.rho = StepSize::constant(prm.rho0, n);
    cfg.l1_penalty = prm.l1_penalty;
    auto a2 = learn_network(counts, kernel, cfg, lo);
    out.clamps += a2.clamp_count;
    out.methods.push_back({"alg2" + suffix, std::move(a2.losses)});
    out.networks.push_back({"alg2" + suffix, std::move(a2.w), std::move(a2.snapshots)});
    auto og = learn_network_ogd(counts, kernel, cfg, lo);
    out.methods.push_back({"ogd" + suffix, std::move(og.losses)});
    out.networks.push_back({"ogd" + suffix, std::move(og.w), std::move(og.snapshots)});
  };
  learn("", sim.kernel);
  if (prm.mismatched) learn("_mis", Kernel::exponential(prm.mismatched_alpha));
  return out;
}

// ---------------------------------------------------------------------------
// Memetracker-shaped profile.

struct MemestyleParams {
  std::size_t p = 217;
  std::size_t events = 100000;
  double delta = 1.0;
  double true_alpha = 0.995;
  double total_rate = 1.0;  // stationary events per second over all actors
  double model_alpha = 0.99;
  double model_mu = 2e-5;
  double l1_penalty = 1e-3;
  std::size_t batch_outer = 60;
  std::size_t batch_line_search = 15;
  double tune_fraction = 0.05;
  std::vector<double> eta_grid{0.0, 1e-3, 1e-2, 1e-1};
  std::vector<double> rho_grid{1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4};
  double window = 15000.0;
};

struct MemestyleTrial {
  Matrix w_true;
  EventStream stream;
  double eta0 = 0.0, rho0 = 0.0;
  double tune_seconds = 0.0, online_seconds = 0.0, batch_seconds = 0.0;
  std::vector<MethodTrace> methods;  // online, batch, zero
  Matrix w_online, w_batch;
  BatchResult batch;
};

inline LearnerConfig memestyle_learner(const MemestyleParams& prm, std::size_t bins, double eta0, double rho0) {
  LearnerConfig cfg;
  cfg.mu_bar = Vector::Constant(static_cast<Eigen::Index>(prm.p), prm.model_mu);
  cfg.delta = prm.delta;
  cfg.eta = StepSize::constant(eta0, bins);
  cfg.rho = StepSize::constant(rho0, bins);
  cfg.l1_penalty = prm.l1_penalty;
  return cfg;
}

inline MemestyleTrial run_memestyle_trial(const MemestyleParams& prm, std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point a) { return std::chrono::duration<double>(clock::now() - a).count(); };
  Rng rng(seed);
  const auto true_kernel = Kernel::exponential(prm.true_alpha);
  LagNetworkSpec spec;
  spec.p = prm.p;
  MemestyleTrial out;
  out.w_true = generate_lag_network(spec, true_kernel, rng).w;
  Vector mu(static_cast<Eigen::Index>(prm.p));
  for (Eigen::Index k = 0; k < mu.size(); ++k) mu[k] = rng.uniform(0.5, 1.5);
  mu *= prm.total_rate / stationary_rate(out.w_true, mu, true_kernel).sum();
  SimulationConfig sim;
  sim.mu_bar = mu;
  sim.w = out.w_true;
  sim.kernel = true_kernel;
  sim.horizon = 100.0 * static_cast<double>(prm.events) / prm.total_rate;
  sim.max_events = prm.events;
  sim.seed = rng.next();
  out.stream = simulate_hawkes(sim);
  const BinnedCounts counts(out.stream, prm.delta);
  const auto n = counts.bins();
  const auto model_kernel = Kernel::exponential(prm.model_alpha);

  // Step sizes by accumulated loss on a prefix.
  auto t0 = clock::now();
  LearnOptions prefix;
  prefix.max_bins = std::max<std::size_t>(1, static_cast<std::size_t>(prm.tune_fraction * static_cast<double>(n)));
  double best = std::numeric_limits<double>::infinity();
  for (const double eta0 : prm.eta_grid)
    for (const double rho0 : prm.rho_grid) {
      const double l = sum_of(learn_network(counts, model_kernel, memestyle_learner(prm, n, eta0, rho0), prefix).losses);
      if (l < best) best = l, out.eta0 = eta0, out.rho0 = rho0;
    }
  out.tune_seconds = seconds(t0);

  t0 = clock::now();
  auto online = learn_network(counts, model_kernel, memestyle_learner(prm, n, out.eta0, out.rho0));
  out.online_seconds = seconds(t0);
  out.w_online = online.w;

  t0 = clock::now();
  const BatchData data(counts, model_kernel, Vector::Constant(static_cast<Eigen::Index>(prm.p), prm.model_mu));
  BatchOptions bo;
  bo.l1_penalty = prm.l1_penalty;
  bo.max_outer = prm.batch_outer;
  bo.max_line_search = prm.batch_line_search;
  bo.tol = 0.0;
  out.batch = batch_fit(data, bo);
  out.batch_seconds = seconds(t0);
  out.w_batch = out.batch.w;

  const Vector model_mu = Vector::Constant(static_cast<Eigen::Index>(prm.p), prm.model_mu);
  out.methods.push_back({"online", std::move(online.losses)});
  const RateBounds wide{1e-300, 1e300};
  out.methods.push_back({"batch", run_tracker(counts, model_kernel, out.w_batch, model_mu, StepSize::zero(), wide).losses});
  out.methods.push_back(
      {"zero", run_tracker(counts, model_kernel, Matrix::Zero(out.w_true.rows(), out.w_true.cols()), model_mu,
                           StepSize::zero(), wide)
                   .losses});
  return out;
}

// ---------------------------------------------------------------------------
// Replication.

struct ReplicateOptions {
  std::string profile;
  std::size_t trials = 0;  // 0 means the profile default
  std::uint64_t seed_base = 1;
  double scale = 1.0;
  std::optional<double> delta;
  std::optional<std::size_t> actors;
  std::size_t workers = 0;  // 0 means hardware concurrency
};

inline std::size_t default_trials(const std::string& profile) {
  if (profile == "mismatch_exp" || profile == "mismatch_rect") return 100;
  if (profile == "blocknet") return 100;
  if (profile == "memestyle") return 1;
  throw ConfigError("unknown profile '" + profile + "' (expected mismatch_exp, mismatch_rect, blocknet, memestyle)");
}

/// Fully resolved parameters of a profile; every run parameter is fixed by this and the seed.
inline nlohmann::json profile_parameters(const ReplicateOptions& o) {
  require_config(o.scale > 0.0, "scale must be positive");
  nlohmann::json j;
  if (o.profile == "mismatch_exp" || o.profile == "mismatch_rect") {
    MismatchParams m;
    j = {{"horizon", m.horizon * o.scale}, {"delta", o.delta.value_or(m.delta)}, {"eta0", m.eta0},
         {"mu", m.mu}, {"self_excitation", m.self_excitation}, {"window", m.window},
         {"assumed_kernel", mismatch_assumed_kernel(o.profile == "mismatch_exp" ? MismatchKind::Exponential
                                                                                : MismatchKind::Rectangular)
                                .describe()}};
  } else if (o.profile == "blocknet") {
    BlocknetParams b;
    j = {{"p", o.actors.value_or(b.network.p)}, {"horizon", b.horizon * o.scale}, {"delta", o.delta.value_or(b.delta)},
         {"eta0", b.eta0}, {"rho0", b.rho0}, {"l1_penalty", b.l1_penalty}, {"mismatched_alpha", b.mismatched_alpha},
         {"window", b.window}, {"snapshots", b.snapshots}};
  } else if (o.profile == "memestyle") {
    MemestyleParams m;
    j = {{"p", o.actors.value_or(m.p)},
         {"events", static_cast<std::size_t>(std::llround(static_cast<double>(m.events) * o.scale))},
         {"delta", o.delta.value_or(m.delta)}, {"true_alpha", m.true_alpha}, {"model_alpha", m.model_alpha},
         {"model_mu", m.model_mu}, {"l1_penalty", m.l1_penalty}, {"batch_outer", m.batch_outer},
         {"batch_line_search", m.batch_line_search}, {"window", m.window}};
  } else {
    default_trials(o.profile);
  }
  return j;
}

/// Runs one trial of a profile and writes its artifacts into `dir`.
// (worse, better) method pairs; a braced list alone would become a JSON object.
inline nlohmann::json pair_list(std::initializer_list<std::pair<const char*, const char*>> pairs) {
  auto out = nlohmann::json::array();
  for (const auto& [a, b] : pairs) out.push_back(nlohmann::json::array({a, b}));
  return out;
}

inline nlohmann::json run_profile_trial(const std::string& profile, const nlohmann::json& prm, std::uint64_t seed,
                                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json result{{"seed", seed}};
  if (profile == "mismatch_exp" || profile == "mismatch_rect") {
    MismatchParams m;
    m.kind = profile == "mismatch_exp" ? MismatchKind::Exponential : MismatchKind::Rectangular;
    m.horizon = prm["horizon"];
    m.delta = prm["delta"];
    const auto trial = run_mismatch_trial(m, seed);
    write_table(dir / "trace.csv", trace_table(trial.methods, m.window, m.delta));
    for (const auto& mt : trial.methods) result["cumulative"][mt.name] = sum_of(mt.losses);
    result["events"] = trial.stream.size();
    result["reference"] = "oracle";
    result["pairs"] = pair_list({{"direct", "tracked"}});
  } else if (profile == "blocknet") {
    BlocknetParams b;
    b.network.p = prm["p"];
    b.horizon = prm["horizon"];
    b.delta = prm["delta"];
    const auto trial = run_blocknet_trial(b, seed);
    write_table(dir / "trace.csv", trace_table(trial.methods, b.window, b.delta));
    write_matrix_csv(dir / "W_true.csv", trial.w_true);
    for (const auto& net : trial.networks) write_matrix_csv(dir / ("W_" + net.name + ".csv"), net.w);
    // Snapshots scored on the whole stream with the true kernel.
    const BinnedCounts counts(trial.stream, b.delta);
    const BatchData data(counts, Kernel::exponential(std::exp(-1.0)), trial.mu_bar);
    Table bl;
    bl.columns = {"t"};
    for (const auto& net : trial.networks) bl.columns.push_back(net.name);
    bl.columns.push_back("true_w");
    const double floor = batch_loss_of(trial.w_true, data);
    const auto& first = trial.networks.front().snapshots;
    for (std::size_t i = 0; i < first.size(); ++i) {
      std::vector<double> row{static_cast<double>(first[i].t)};
      for (const auto& net : trial.networks) row.push_back(batch_loss_of(net.snapshots[i].w, data));
      row.push_back(floor);
      bl.rows.push_back(std::move(row));
    }
    write_table(dir / "batchloss.csv", bl);
    for (const auto& mt : trial.methods) result["cumulative"][mt.name] = sum_of(mt.losses);
    for (const auto& net : trial.networks) {
      result["auc_full"][net.name] = roc(net.w, trial.w_true, RocMode::FullSupport).auc;
      result["auc_top10"][net.name] = roc(net.w, trial.w_true, RocMode::Top10).auc;
    }
    result["events"] = trial.stream.size();
    result["clamps"] = trial.clamps;
    result["reference"] = "alg1_true";
    result["pairs"] = pair_list({{"ogd", "alg2"}, {"ogd_mis", "alg2_mis"}});
  } else if (profile == "memestyle") {
    MemestyleParams m;
    m.p = prm["p"];
    m.events = prm["events"];
    m.delta = prm["delta"];
    const auto trial = run_memestyle_trial(m, seed);
    write_table(dir / "trace.csv", trace_table(trial.methods, m.window, m.delta));
    write_matrix_csv(dir / "W_true.csv", trial.w_true);
    write_matrix_csv(dir / "W_online.csv", trial.w_online);
    write_matrix_csv(dir / "W_batch.csv", trial.w_batch);
    Table sig;
    sig.columns = {"threshold", "above", "below"};
    const double top = std::max(trial.w_online.maxCoeff(), 1e-12);
    for (int i = 1; i <= 50; ++i) {
      const double thr = top * static_cast<double>(i) / 51.0;
      const auto c = significance_count(trial.w_online, thr);
      sig.rows.push_back({thr, static_cast<double>(c.above), static_cast<double>(c.below)});
    }
    write_table(dir / "significance.csv", sig);
    for (const auto& mt : trial.methods) result["cumulative"][mt.name] = sum_of(mt.losses);
    result["events"] = trial.stream.size();
    result["eta0"] = trial.eta0;
    result["rho0"] = trial.rho0;
    result["seconds"] = {{"tune", trial.tune_seconds}, {"online", trial.online_seconds}, {"batch", trial.batch_seconds}};
    result["batch_objective"] = trial.batch.objective;
    result["reference"] = "batch";
    result["pairs"] = pair_list({{"online", "batch"}});
  } else {
    default_trials(profile);
  }
  std::ofstream(dir / "result.json") << result.dump(2) << '\n';
  return result;
}

inline std::string trial_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "trial_%03zu", i);
  return buf;
}

/// Runs all trials on a worker pool and writes manifest.json. Failed trials
/// are listed and excluded from aggregation.
inline nlohmann::json replicate(const ReplicateOptions& opts, const std::filesystem::path& out_dir) {
  const std::size_t trials = opts.trials ? opts.trials : default_trials(opts.profile);
  const auto prm = profile_parameters(opts);
  std::filesystem::create_directories(out_dir);
  std::size_t workers = opts.workers ? opts.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, trials);

  std::vector<std::string> errors(trials);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < trials;) {
      try {
        run_profile_trial(opts.profile, prm, opts.seed_base + i, out_dir / trial_name(i));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  nlohmann::json manifest{{"version", kVersion},  {"profile", opts.profile}, {"trials", trials},
                          {"seed_base", opts.seed_base}, {"scale", opts.scale},   {"parameters", prm}};
  manifest["seeds"] = nlohmann::json::array();
  manifest["completed"] = nlohmann::json::array();
  manifest["failed"] = nlohmann::json::array();
  for (std::size_t i = 0; i < trials; ++i) {
    manifest["seeds"].push_back(opts.seed_base + i);
    if (errors[i].empty()) manifest["completed"].push_back(trial_name(i));
    else manifest["failed"].push_back({{"trial", trial_name(i)}, {"error", errors[i]}});
  }
  manifest["failed_count"] = manifest["failed"].size();
  std::ofstream(out_dir / "manifest.json") << manifest.dump(2) << '\n';
  return manifest;
}

// ---------------------------------------------------------------------------
// Aggregation.

inline double mean_of(std::span<const double> v) { return v.empty() ? 0.0 : sum_of(v) / static_cast<double>(v.size()); }

inline double stddev_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

/// Reads manifest.json and the completed trials under `runs`, writes
/// regret.csv, percentiles.csv, roc_full.csv, roc_top10.csv, batchloss.csv.
inline void evaluate_runs(const std::filesystem::path& runs, const std::filesystem::path& out) {
  std::ifstream mf(runs / "manifest.json");
  if (!mf) throw DataError("no manifest.json in " + runs.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("manifest.json: ") + e.what());
  }
  std::filesystem::create_directories(out);
  std::vector<std::filesystem::path> dirs;
  for (const auto& name : manifest["completed"]) dirs.push_back(runs / name.get<std::string>());
  if (dirs.empty()) throw DataError("no completed trials in " + runs.string());

  std::vector<Table> traces;
  std::vector<nlohmann::json> results;
  for (const auto& d : dirs) {
    traces.push_back(read_table(d / "trace.csv"));
    std::ifstream rf(d / "result.json");
    results.push_back(nlohmann::json::parse(rf));
  }
  const auto& first = traces.front();
  for (const auto& t : traces)
    if (t.rows.size() != first.rows.size() || t.columns != first.columns)
      throw DataError("trial traces have different shapes");
  const std::string reference = results.front()["reference"];
  std::vector<std::string> methods;
  for (const auto& c : first.columns)
    if (c.rfind("cum_", 0) == 0) methods.push_back(c.substr(4));

  // Mean cumulative regret of each method against the reference method.
  Table regret;
  regret.columns = {"t"};
  for (const auto& m : methods)
    if (m != reference) regret.columns.push_back(m);
  const auto ref_col = first.index("cum_" + reference);
  for (std::size_t r = 0; r < first.rows.size(); ++r) {
    std::vector<double> row{first.rows[r][0]};
    for (const auto& m : methods) {
      if (m == reference) continue;
      const auto c = first.index("cum_" + m);
      std::vector<double> v;
      for (const auto& t : traces) v.push_back(t.rows[r][c] - t.rows[r][ref_col]);
      row.push_back(mean_of(v));
    }
    regret.rows.push_back(std::move(row));
  }
  write_table(out / "regret.csv", regret);

  // Percentile bands of moving-average differences for each (worse, better) pair.
  const std::vector<double> qs{5, 25, 50, 75, 95};
  Table pct;
  pct.columns = {"t"};
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& pr : results.front()["pairs"]) {
    const std::string a = pr[0], b = pr[1];
    if (std::find(methods.begin(), methods.end(), a) == methods.end()) continue;
    pairs.emplace_back(a, b);
    for (const double q : qs) pct.columns.push_back(a + "_minus_" + b + "_p" + std::to_string(static_cast<int>(q)));
  }
  for (std::size_t r = 0; r < first.rows.size(); ++r) {
    std::vector<double> row{first.rows[r][0]};
    bool defined = true;
    for (const auto& [a, b] : pairs) {
      const auto ca = first.index("ma_" + a), cb = first.index("ma_" + b);
      std::vector<double> v;
      for (const auto& t : traces) v.push_back(t.rows[r][ca] - t.rows[r][cb]);
      if (std::isnan(v.front())) defined = false;
      for (const double q : qs) row.push_back(defined ? percentile(v, q) : std::nan(""));
    }
    if (defined) pct.rows.push_back(std::move(row));
  }
  write_table(out / "percentiles.csv", pct);

  // ROC curves: per-trial AUC plus the curve at up to 101 points.
  for (const auto& [file, mode] : {std::pair{"roc_full.csv", RocMode::FullSupport}, std::pair{"roc_top10.csv", RocMode::Top10}}) {
    std::ofstream rf(out / file);
    rf << "method,trial,threshold,tpr,fpr,auc\n";
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      if (!std::filesystem::exists(dirs[i] / "W_true.csv") || !std::filesystem::exists(dirs[i] / "batchloss.csv")) continue;
      const Matrix w_true = read_matrix_csv(dirs[i] / "W_true.csv");
      for (const auto& m : methods) {
        const auto path = dirs[i] / ("W_" + m + ".csv");
        if (!std::filesystem::exists(path)) continue;
        const auto curve = roc(read_matrix_csv(path), w_true, mode);
        const std::size_t stride = std::max<std::size_t>(1, curve.tpr.size() / 100);
        for (std::size_t k = 0; k < curve.tpr.size(); ++k) {
          if (k % stride && k + 1 != curve.tpr.size()) continue;
          rf << m << ',' << i << ',' << (std::isinf(curve.thresholds[k]) ? std::string("inf") : fmt(curve.thresholds[k]))
             << ',' << fmt(curve.tpr[k]) << ',' << fmt(curve.fpr[k]) << ',' << fmt(curve.auc) << '\n';
        }
      }
    }
  }

  // Snapshot batch losses: mean and standard deviation across trials.
  std::ofstream bf(out / "batchloss.csv");
  bf << "t,method,mean,std\n";
  std::vector<Table> bl;
  for (const auto& d : dirs)
    if (std::filesystem::exists(d / "batchloss.csv")) bl.push_back(read_table(d / "batchloss.csv"));
  if (!bl.empty()) {
    for (std::size_t r = 0; r < bl.front().rows.size(); ++r)
      for (std::size_t c = 1; c < bl.front().columns.size(); ++c) {
        std::vector<double> v;
        for (const auto& t : bl)
          if (r < t.rows.size()) v.push_back(t.rows[r][c]);
        bf << fmt(bl.front().rows[r][0]) << ',' << bl.front().columns[c] << ',' << fmt(mean_of(v)) << ','
           << fmt(stddev_of(v)) << '\n';
      }
  }
}

}  // namespace hawkes
