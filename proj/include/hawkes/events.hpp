#pragma once

// Event streams and their discretization into bins of width delta.
//
// Time conventions: bin t (1-based) covers the half-open interval
// (delta*(t-1), delta*t]. An event at tau lands in bin ceil(tau/delta), so an
// event exactly on a bin edge closes the earlier bin. Events at tau == 0 are
// placed in bin 1.

#include <hawkes/common.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace hawkes {

struct Event {
  std::size_t actor = 0;
  double time = 0.0;

  friend bool operator==(const Event&, const Event&) = default;
};

class EventStream {
 public:
  EventStream() = default;

  /// Validates and stable-sorts by time. A horizon of 0 means "last event time".
  EventStream(std::vector<Event> events, std::size_t actors, double horizon = 0.0)
      : events_(std::move(events)), actors_(actors) {
    for (const auto& e : events_) {
      if (!(e.time >= 0.0) || !std::isfinite(e.time))
        throw DataError("event time must be finite and nonnegative");
      if (e.actor >= actors_)
        throw DataError("event actor " + std::to_string(e.actor) + " >= p = " +
                        std::to_string(actors_));
    }
    std::stable_sort(events_.begin(), events_.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
    const double last = events_.empty() ? 0.0 : events_.back().time;
    if (horizon < 0.0 || !std::isfinite(horizon)) throw DataError("horizon must be finite and >= 0");
    if (horizon > 0.0 && horizon < last) throw DataError("event time exceeds the stream horizon");
    horizon_ = horizon > 0.0 ? horizon : last;
  }

  std::span<const Event> events() const { return events_; }
  std::size_t actors() const { return actors_; }
  double horizon() const { return horizon_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

  std::vector<std::size_t> counts_per_actor() const {
    std::vector<std::size_t> n(actors_, 0);
    for (const auto& e : events_) ++n[e.actor];
    return n;
  }

  friend bool operator==(const EventStream&, const EventStream&) = default;

 private:
  std::vector<Event> events_;
  std::size_t actors_ = 0;
  double horizon_ = 0.0;
};

/// Index of the bin that closes at or after `time`. Ratios within 1e-9 of an
/// integer are snapped so that decimal edges like 0.3/0.1 land on the edge.
inline std::size_t bin_of(double time, double delta) {
  const double q = time / delta;
  const double r = std::nearbyint(q);
  const double b = std::abs(q - r) <= 1e-9 * std::max(1.0, std::abs(r)) ? r : std::ceil(q);
  return b < 1.0 ? std::size_t{1} : static_cast<std::size_t>(b);
}

/// Count data for bins t = 1..bins(). Each bin keeps the exact event times
/// because the dynamics use tau_n, not the bin edge.
class BinnedCounts {
 public:
  BinnedCounts() = default;

  BinnedCounts(const EventStream& stream, double delta) : delta_(delta), actors_(stream.actors()) {
    require_config(delta > 0.0 && std::isfinite(delta), "delta must be positive");
    const auto evs = stream.events();
    std::size_t bins = stream.horizon() > 0.0 ? bin_of(stream.horizon(), delta) : 0;
    if (!evs.empty()) bins = std::max(bins, bin_of(evs.back().time, delta));
    offsets_.assign(bins + 1, 0);
    events_.assign(evs.begin(), evs.end());
    for (const auto& e : events_) ++offsets_[bin_of(e.time, delta)];
    for (std::size_t t = 1; t <= bins; ++t) offsets_[t] += offsets_[t - 1];
  }

  double delta() const { return delta_; }
  std::size_t actors() const { return actors_; }
  std::size_t bins() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  double horizon() const { return delta_ * static_cast<double>(bins()); }
  std::size_t total() const { return events_.size(); }

  /// Events of bin t, 1 <= t <= bins().
  std::span<const Event> bin(std::size_t t) const {
    return std::span<const Event>(events_).subspan(offsets_[t - 1], offsets_[t] - offsets_[t - 1]);
  }

  /// Dense count vector x_t.
  Vector counts(std::size_t t) const {
    Vector x = Vector::Zero(static_cast<Eigen::Index>(actors_));
    for (const auto& e : bin(t)) x[static_cast<Eigen::Index>(e.actor)] += 1.0;
    return x;
  }

  /// Largest per-actor count in any bin.
  std::size_t max_count() const {
    std::size_t best = 0;
    std::vector<std::size_t> c(actors_, 0);
    for (std::size_t t = 1; t <= bins(); ++t) {
      const auto b = bin(t);
      for (const auto& e : b) best = std::max(best, ++c[e.actor]);
      for (const auto& e : b) c[e.actor] = 0;
    }
    return best;
  }

  std::size_t nonempty_bins() const {
    std::size_t n = 0;
    for (std::size_t t = 1; t <= bins(); ++t) n += offsets_[t] > offsets_[t - 1];
    return n;
  }

  /// All events, sorted by time.
  std::span<const Event> events() const { return events_; }

 private:
  double delta_ = 1.0;
  std::size_t actors_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<Event> events_;
};

inline BinnedCounts discretize(const EventStream& stream, double delta) {
  return BinnedCounts(stream, delta);
}

enum class EventFormat { Csv, Jsonl };

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::string buf(s);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::string buf(s);
  char* end = nullptr;
  const long long v = std::strtoll(buf.c_str(), &end, 10);
  if (end != buf.c_str() + buf.size()) return std::nullopt;
  return v;
}

inline DataError line_error(std::size_t line, const std::string& what) {
  return DataError("line " + std::to_string(line) + ": " + what);
}

// "# actors=5 horizon=100" style metadata written by write_events_csv.
inline void parse_metadata(std::string_view comment, std::optional<std::size_t>& actors,
                           std::optional<double>& horizon, std::size_t line) {
  std::istringstream in{std::string(comment)};
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    const auto key = tok.substr(0, eq);
    const auto val = std::string_view(tok).substr(eq + 1);
    if (key == "actors") {
      const auto v = parse_int(val);
      if (!v || *v < 0) throw line_error(line, "bad actors metadata");
      actors = static_cast<std::size_t>(*v);
    } else if (key == "horizon") {
      const auto v = parse_double(val);
      if (!v || *v < 0) throw line_error(line, "bad horizon metadata");
      horizon = *v;
    }
  }
}

inline EventStream finish_stream(std::vector<Event> events, std::optional<std::size_t> actors,
                                 std::optional<double> horizon, std::optional<std::size_t> p_hint) {
  std::size_t p = p_hint ? *p_hint : actors.value_or(0);
  if (!p_hint && !actors)
    for (const auto& e : events) p = std::max(p, e.actor + 1);
  return EventStream(std::move(events), p, horizon.value_or(0.0));
}

}  // namespace detail

/// Reads `time,actor` CSV or `{"t":..,"k":..}` JSONL. When `p` is given, actor
/// ids must be below it; otherwise p comes from an `actors=` metadata line or
/// is inferred as max actor + 1.
inline EventStream ingest(std::istream& in, EventFormat format,
                          std::optional<std::size_t> p = std::nullopt) {
  std::vector<Event> events;
  std::optional<std::size_t> actors;
  std::optional<double> horizon;
  std::string raw;
  std::size_t line = 0;
  bool header_seen = false;

  auto push = [&](double t, long long k) {
    if (t < 0.0) throw detail::line_error(line, "negative event time");
    if (k < 0) throw detail::line_error(line, "negative actor id");
    const auto actor = static_cast<std::size_t>(k);
    const auto limit = p ? p : actors;
    if (limit && actor >= *limit)
      throw detail::line_error(line, "actor " + std::to_string(actor) + " >= p = " + std::to_string(*limit));
    events.push_back({actor, t});
  };

  while (std::getline(in, raw)) {
    ++line;
    const auto s = detail::trim(raw);
    if (s.empty()) continue;
    if (format == EventFormat::Csv) {
      if (s.front() == '#') {
        detail::parse_metadata(s.substr(1), actors, horizon, line);
        continue;
      }
      const auto comma = s.find(',');
      if (comma == std::string_view::npos) throw detail::line_error(line, "expected 'time,actor'");
      const auto f0 = detail::trim(s.substr(0, comma));
      const auto f1 = detail::trim(s.substr(comma + 1));
      if (!header_seen && events.empty() && f0 == "time" && f1 == "actor") {
        header_seen = true;
        continue;
      }
      const auto t = detail::parse_double(f0);
      const auto k = detail::parse_int(f1);
      if (!t || !k) throw detail::line_error(line, "unparseable record '" + std::string(s) + "'");
      push(*t, *k);
    } else {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(s);
      } catch (const nlohmann::json::exception& e) {
        throw detail::line_error(line, std::string("invalid JSON: ") + e.what());
      }
      if (!j.is_object()) throw detail::line_error(line, "expected a JSON object");
      if (!j.contains("t") && !j.contains("k")) {
        if (j.contains("actors")) {
          if (!j["actors"].is_number_unsigned()) throw detail::line_error(line, "bad actors metadata");
          actors = j["actors"].get<std::size_t>();
        }
        if (j.contains("horizon")) {
          if (!j["horizon"].is_number()) throw detail::line_error(line, "bad horizon metadata");
          horizon = j["horizon"].get<double>();
        }
        continue;
      }
      if (!j.contains("t") || !j["t"].is_number() || !j.contains("k") || !j["k"].is_number_integer())
        throw detail::line_error(line, "record needs numeric 't' and integer 'k'");
      push(j["t"].get<double>(), j["k"].get<long long>());
    }
  }
  try {
    return detail::finish_stream(std::move(events), actors, horizon, p);
  } catch (const DataError& e) {
    throw DataError(std::string("stream: ") + e.what());
  }
}

inline EventStream ingest_string(const std::string& text, EventFormat format,
                                 std::optional<std::size_t> p = std::nullopt) {
  std::istringstream in(text);
  return ingest(in, format, p);
}

inline void write_events_csv(std::ostream& out, const EventStream& stream) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", stream.horizon());
  out << "# actors=" << stream.actors() << " horizon=" << buf << "\n";
  out << "time,actor\n";
  for (const auto& e : stream.events()) {
    std::snprintf(buf, sizeof buf, "%.17g", e.time);
    out << buf << ',' << e.actor << '\n';
  }
}

inline void write_events_jsonl(std::ostream& out, const EventStream& stream) {
  out << nlohmann::json{{"actors", stream.actors()}, {"horizon", stream.horizon()}}.dump() << '\n';
  for (const auto& e : stream.events()) out << nlohmann::json{{"t", e.time}, {"k", e.actor}}.dump() << '\n';
}

}  // namespace hawkes
