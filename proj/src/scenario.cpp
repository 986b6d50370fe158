#include "vesonet/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vesonet/dissemination.hpp"
#include "vesonet/error.hpp"
#include "vesonet/rng.hpp"

namespace vesonet {

using json = nlohmann::ordered_json;

std::string to_string(Policy policy) { return policy == Policy::vesonet ? "vesonet" : "baseline_no_reroute"; }

std::optional<Policy> policy_from_string(const std::string& name) {
  if (name == "vesonet") return Policy::vesonet;
  if (name == "baseline" || name == "baseline_no_reroute") return Policy::baseline;
  return std::nullopt;
}

namespace {

class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  // Reports keys of `obj` outside `allowed`.
  void keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
        errors_.push_back(join(path, it.key()) + ": unknown field");
    }
  }

  bool object(const json& obj, const std::string& path) {
    if (obj.is_object()) return true;
    errors_.push_back(path + ": expected an object");
    return false;
  }

  template <class T>
  void get(const json& obj, const std::string& path, const char* key, T& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    read(*it, join(path, key), out);
  }

  template <class T>
  void get(const json& obj, const std::string& path, const char* key, std::optional<T>& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    if (it->is_null()) {
      out.reset();
      return;
    }
    T v{};
    if (read(*it, join(path, key), v)) out = v;
  }

  void error(const std::string& path, const std::string& what) { errors_.push_back(path + ": " + what); }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  bool read(const json& v, const std::string& path, double& out) {
    if (!v.is_number()) return fail(path, "expected a number");
    out = v.get<double>();
    return true;
  }
  bool read(const json& v, const std::string& path, bool& out) {
    if (!v.is_boolean()) return fail(path, "expected true or false");
    out = v.get<bool>();
    return true;
  }
  bool read(const json& v, const std::string& path, std::string& out) {
    if (!v.is_string()) return fail(path, "expected a string");
    out = v.get<std::string>();
    return true;
  }
  template <class T>
    requires std::is_integral_v<T>
  bool read(const json& v, const std::string& path, T& out) {
    if (!v.is_number_integer()) return fail(path, "expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_unsigned()) {
        out = static_cast<T>(v.get<std::uint64_t>());
        return true;
      }
      const auto s = v.get<std::int64_t>();
      if (s < 0) return fail(path, "must be non-negative");
      out = static_cast<T>(s);
    } else {
      out = static_cast<T>(v.get<std::int64_t>());
    }
    return true;
  }

 private:
  bool fail(const std::string& path, const std::string& what) {
    errors_.push_back(path + ": " + what);
    return false;
  }
  std::vector<std::string>& errors_;
};

void read_grid(Reader& r, const json& g, GridSpec& grid) {
  const std::string p = "network.grid";
  if (!r.object(g, p)) return;
  r.keys(g, p, {"rows", "cols", "block_m", "speed_limit_mps", "speed_spread", "seed"});
  r.get(g, p, "rows", grid.rows);
  r.get(g, p, "cols", grid.cols);
  r.get(g, p, "block_m", grid.block_m);
  r.get(g, p, "speed_limit_mps", grid.speed_limit_mps);
  r.get(g, p, "speed_spread", grid.speed_spread);
  r.get(g, p, "seed", grid.seed);
}

void read_dqn(Reader& r, const json& d, DQNConfig& c) {
  const std::string p = "dqn";
  if (!r.object(d, p)) return;
  r.keys(d, p,
         {"gamma", "learning_rate", "epsilon_start", "epsilon_end", "epsilon_decay_steps", "buffer_capacity",
          "batch_size", "target_sync_period", "hidden", "max_actions", "cd_scale", "reward_mode", "rng_seed",
          "shared_policy"});
  r.get(d, p, "gamma", c.gamma);
  r.get(d, p, "learning_rate", c.learning_rate);
  r.get(d, p, "epsilon_start", c.epsilon_start);
  r.get(d, p, "epsilon_end", c.epsilon_end);
  r.get(d, p, "epsilon_decay_steps", c.epsilon_decay_steps);
  r.get(d, p, "buffer_capacity", c.buffer_capacity);
  r.get(d, p, "batch_size", c.batch_size);
  r.get(d, p, "target_sync_period", c.target_sync_period);
  r.get(d, p, "max_actions", c.max_actions);
  r.get(d, p, "cd_scale", c.cd_scale);
  r.get(d, p, "rng_seed", c.rng_seed);
  r.get(d, p, "shared_policy", c.shared_policy);
  if (auto it = d.find("hidden"); it != d.end()) {
    if (!it->is_array()) {
      r.error("dqn.hidden", "expected an array of layer widths");
    } else {
      c.hidden.clear();
      for (std::size_t i = 0; i < it->size(); ++i) {
        std::size_t w = 0;
        if (r.read((*it)[i], "dqn.hidden[" + std::to_string(i) + "]", w)) c.hidden.push_back(w);
      }
    }
  }
  std::string mode;
  r.get(d, p, "reward_mode", mode);
  if (mode == "increase") c.reward_mode = RewardMode::increase;
  else if (mode == "decrease") c.reward_mode = RewardMode::decrease;
  else if (!mode.empty()) r.error("dqn.reward_mode", "expected increase or decrease, got `" + mode + "`");
}

void read_embedding(Reader& r, const json& e, EmbeddingParams& m) {
  const std::string p = "content.embedding";
  if (!r.object(e, p)) return;
  r.keys(e, p,
         {"dimension", "walk_length", "walks_per_node", "window", "learning_rate", "epochs", "rng_seed", "init_scale",
          "full_softmax_limit", "negative_samples"});
  r.get(e, p, "dimension", m.dimension);
  r.get(e, p, "walk_length", m.walk_length);
  r.get(e, p, "walks_per_node", m.walks_per_node);
  r.get(e, p, "window", m.window);
  r.get(e, p, "learning_rate", m.learning_rate);
  r.get(e, p, "epochs", m.epochs);
  r.get(e, p, "rng_seed", m.rng_seed);
  r.get(e, p, "init_scale", m.init_scale);
  r.get(e, p, "full_softmax_limit", m.full_softmax_limit);
  r.get(e, p, "negative_samples", m.negative_samples);
}

}  // namespace

ScenarioLoad parse_scenario(const std::string& text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset to line/column.
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError("malformed JSON at line " + std::to_string(line) + ", column " + std::to_string(col), line, col);
  }

  ScenarioLoad out;
  Scenario& s = out.scenario;
  s.base_dir = base_dir;
  Reader r(out.errors);
  if (!r.object(doc, "scenario")) return out;
  r.keys(doc, "",
         {"network", "signal", "vehicles", "velocity_cap_mps", "rsus", "rsu_count", "accidents", "accident_count",
          "accident_start_tick", "accident_duration_ticks", "epsilon_s", "alpha", "dqn", "content", "cache", "radio",
          "requests", "index", "tick_duration_s", "run_length_ticks", "rng_seed", "policy"});

  if (auto it = doc.find("network"); it != doc.end() && r.object(*it, "network")) {
    r.keys(*it, "network", {"file", "grid"});
    r.get(*it, "network", "file", s.network_file);
    if (auto g = it->find("grid"); g != it->end()) read_grid(r, *g, s.grid);
  }
  if (auto it = doc.find("signal"); it != doc.end() && r.object(*it, "signal")) {
    r.keys(*it, "signal", {"green_s", "red_s"});
    r.get(*it, "signal", "green_s", s.signal_green_s);
    r.get(*it, "signal", "red_s", s.signal_red_s);
  }
  if (auto it = doc.find("vehicles"); it != doc.end() && r.object(*it, "vehicles")) {
    r.keys(*it, "vehicles", {"consumers", "providers", "meta"});
    r.get(*it, "vehicles", "consumers", s.consumers);
    r.get(*it, "vehicles", "providers", s.providers);
    r.get(*it, "vehicles", "meta", s.meta);
  }
  r.get(doc, "", "velocity_cap_mps", s.velocity_cap_mps);

  if (auto it = doc.find("rsus"); it != doc.end()) {
    if (!it->is_array()) {
      out.errors.push_back("rsus: expected an array");
    } else {
      for (std::size_t i = 0; i < it->size(); ++i) {
        const std::string p = "rsus[" + std::to_string(i) + "]";
        const json& e = (*it)[i];
        if (!r.object(e, p)) continue;
        r.keys(e, p, {"segment", "offset_m"});
        RsuPlacement place;
        if (!e.contains("segment")) out.errors.push_back(p + ".segment: required");
        r.get(e, p, "segment", place.segment);
        r.get(e, p, "offset_m", place.offset_m);
        s.rsus.push_back(place);
      }
    }
    if (!doc.contains("rsu_count")) s.rsu_count.reset();
  }
  r.get(doc, "", "rsu_count", s.rsu_count);

  if (auto it = doc.find("accidents"); it != doc.end()) {
    if (!it->is_array()) {
      out.errors.push_back("accidents: expected an array");
    } else {
      for (std::size_t i = 0; i < it->size(); ++i) {
        const std::string p = "accidents[" + std::to_string(i) + "]";
        const json& e = (*it)[i];
        if (!r.object(e, p)) continue;
        r.keys(e, p, {"segment", "start_tick", "duration_ticks"});
        Accident a;
        for (const char* k : {"segment", "start_tick", "duration_ticks"})
          if (!e.contains(k)) out.errors.push_back(p + "." + k + ": required");
        r.get(e, p, "segment", a.segment);
        r.get(e, p, "start_tick", a.start_tick);
        r.get(e, p, "duration_ticks", a.duration_ticks);
        s.accidents.push_back(a);
      }
    }
  }
  r.get(doc, "", "accident_count", s.accident_count);
  r.get(doc, "", "accident_start_tick", s.accident_start_tick);
  r.get(doc, "", "accident_duration_ticks", s.accident_duration_ticks);
  r.get(doc, "", "epsilon_s", s.epsilon_s);
  r.get(doc, "", "alpha", s.alpha);
  if (auto it = doc.find("dqn"); it != doc.end()) read_dqn(r, *it, s.dqn);

  if (auto it = doc.find("content"); it != doc.end() && r.object(*it, "content")) {
    const json& c = *it;
    r.keys(c, "content", {"log", "synthetic", "item_size_min_bytes", "item_size_max_bytes", "embedding"});
    r.get(c, "content", "log", s.consumption_log);
    if (auto g = c.find("synthetic"); g != c.end() && r.object(*g, "content.synthetic")) {
      const std::string p = "content.synthetic";
      r.keys(*g, p, {"users", "items", "clusters", "seed", "history_length", "intra_probability", "zipf_exponent"});
      r.get(*g, p, "users", s.synthetic.users);
      r.get(*g, p, "items", s.synthetic.items);
      r.get(*g, p, "clusters", s.synthetic.clusters);
      r.get(*g, p, "seed", s.synthetic.seed);
      r.get(*g, p, "history_length", s.synthetic.history_length);
      r.get(*g, p, "intra_probability", s.synthetic.intra_probability);
      r.get(*g, p, "zipf_exponent", s.synthetic.zipf_exponent);
    }
    r.get(c, "content", "item_size_min_bytes", s.item_size_min_bytes);
    r.get(c, "content", "item_size_max_bytes", s.item_size_max_bytes);
    if (auto e = c.find("embedding"); e != c.end()) read_embedding(r, *e, s.embedding);
  }
  if (auto it = doc.find("cache"); it != doc.end() && r.object(*it, "cache")) {
    r.keys(*it, "cache", {"capacity_bytes", "warm_top_p"});
    r.get(*it, "cache", "capacity_bytes", s.cache_capacity_bytes);
    r.get(*it, "cache", "warm_top_p", s.warm_top_p);
  }
  if (auto it = doc.find("radio"); it != doc.end() && r.object(*it, "radio")) {
    r.keys(*it, "radio", {"range_m", "ttl_hops", "v2v_rate_bytes_per_s", "rsu_rate_bytes_per_s", "rsu_latency_s", "flood"});
    r.get(*it, "radio", "range_m", s.radio_range_m);
    r.get(*it, "radio", "ttl_hops", s.ttl_hops);
    r.get(*it, "radio", "v2v_rate_bytes_per_s", s.v2v_rate_bytes_per_s);
    r.get(*it, "radio", "rsu_rate_bytes_per_s", s.rsu_rate_bytes_per_s);
    r.get(*it, "radio", "rsu_latency_s", s.rsu_latency_s);
    r.get(*it, "radio", "flood", s.flood);
  }
  if (auto it = doc.find("requests"); it != doc.end() && r.object(*it, "requests")) {
    r.keys(*it, "requests", {"rate_per_s", "retry_s", "max_retries", "deadline_s"});
    r.get(*it, "requests", "rate_per_s", s.request_rate_per_s);
    r.get(*it, "requests", "retry_s", s.retry_s);
    r.get(*it, "requests", "max_retries", s.max_retries);
    r.get(*it, "requests", "deadline_s", s.deadline_s);
  }
  if (auto it = doc.find("index"); it != doc.end() && r.object(*it, "index")) {
    r.keys(*it, "index", {"report_period_ticks", "staleness_periods"});
    r.get(*it, "index", "report_period_ticks", s.report_period_ticks);
    r.get(*it, "index", "staleness_periods", s.staleness_periods);
  }
  r.get(doc, "", "tick_duration_s", s.tick_duration_s);
  r.get(doc, "", "run_length_ticks", s.run_length_ticks);
  r.get(doc, "", "rng_seed", s.rng_seed);
  std::string policy;
  r.get(doc, "", "policy", policy);
  if (!policy.empty()) {
    if (auto p = policy_from_string(policy)) s.policy = *p;
    else out.errors.push_back("policy: expected vesonet or baseline_no_reroute, got `" + policy + "`");
  }
  return out;
}

ScenarioLoad load_scenario_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open scenario file " + file);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), std::filesystem::path(file).parent_path().string());
}

std::string scenario_to_json(const Scenario& s) {
  json doc;
  if (!s.network_file.empty()) {
    doc["network"]["file"] = s.network_file;
  } else {
    doc["network"]["grid"] = {{"rows", s.grid.rows},
                              {"cols", s.grid.cols},
                              {"block_m", s.grid.block_m},
                              {"speed_limit_mps", s.grid.speed_limit_mps},
                              {"speed_spread", s.grid.speed_spread},
                              {"seed", s.grid.seed}};
  }
  doc["signal"] = {{"green_s", s.signal_green_s}, {"red_s", s.signal_red_s}};
  doc["vehicles"] = {{"consumers", s.consumers}, {"providers", s.providers}, {"meta", s.meta}};
  doc["velocity_cap_mps"] = s.velocity_cap_mps;
  json rsus = json::array();
  for (const auto& p : s.rsus) rsus.push_back({{"segment", p.segment}, {"offset_m", p.offset_m}});
  doc["rsus"] = rsus;
  doc["rsu_count"] = s.rsu_count ? json(*s.rsu_count) : json(nullptr);
  json acc = json::array();
  for (const auto& a : s.accidents)
    acc.push_back({{"segment", a.segment}, {"start_tick", a.start_tick}, {"duration_ticks", a.duration_ticks}});
  doc["accidents"] = acc;
  doc["accident_count"] = s.accident_count ? json(*s.accident_count) : json(nullptr);
  doc["accident_start_tick"] = s.accident_start_tick;
  doc["accident_duration_ticks"] = s.accident_duration_ticks;
  doc["epsilon_s"] = s.epsilon_s;
  doc["alpha"] = s.alpha;
  const DQNConfig& d = s.dqn;
  doc["dqn"] = {{"gamma", d.gamma},
                {"learning_rate", d.learning_rate},
                {"epsilon_start", d.epsilon_start},
                {"epsilon_end", d.epsilon_end},
                {"epsilon_decay_steps", d.epsilon_decay_steps},
                {"buffer_capacity", d.buffer_capacity},
                {"batch_size", d.batch_size},
                {"target_sync_period", d.target_sync_period},
                {"hidden", d.hidden},
                {"max_actions", d.max_actions},
                {"cd_scale", d.cd_scale},
                {"reward_mode", d.reward_mode == RewardMode::increase ? "increase" : "decrease"},
                {"rng_seed", d.rng_seed},
                {"shared_policy", d.shared_policy}};
  json content;
  if (!s.consumption_log.empty()) content["log"] = s.consumption_log;
  content["synthetic"] = {{"users", s.synthetic.users},
                          {"items", s.synthetic.items},
                          {"clusters", s.synthetic.clusters},
                          {"seed", s.synthetic.seed},
                          {"history_length", s.synthetic.history_length},
                          {"intra_probability", s.synthetic.intra_probability},
                          {"zipf_exponent", s.synthetic.zipf_exponent}};
  content["item_size_min_bytes"] = s.item_size_min_bytes;
  content["item_size_max_bytes"] = s.item_size_max_bytes;
  const EmbeddingParams& e = s.embedding;
  content["embedding"] = {{"dimension", e.dimension},
                          {"walk_length", e.walk_length},
                          {"walks_per_node", e.walks_per_node},
                          {"window", e.window},
                          {"learning_rate", e.learning_rate},
                          {"epochs", e.epochs},
                          {"rng_seed", e.rng_seed},
                          {"init_scale", e.init_scale},
                          {"full_softmax_limit", e.full_softmax_limit},
                          {"negative_samples", e.negative_samples}};
  doc["content"] = content;
  doc["cache"] = {{"capacity_bytes", s.cache_capacity_bytes}, {"warm_top_p", s.warm_top_p}};
  doc["radio"] = {{"range_m", s.radio_range_m},
                  {"ttl_hops", s.ttl_hops},
                  {"v2v_rate_bytes_per_s", s.v2v_rate_bytes_per_s},
                  {"rsu_rate_bytes_per_s", s.rsu_rate_bytes_per_s},
                  {"rsu_latency_s", s.rsu_latency_s},
                  {"flood", s.flood}};
  doc["requests"] = {{"rate_per_s", s.request_rate_per_s},
                     {"retry_s", s.retry_s},
                     {"max_retries", s.max_retries},
                     {"deadline_s", s.deadline_s}};
  doc["index"] = {{"report_period_ticks", s.report_period_ticks}, {"staleness_periods", s.staleness_periods}};
  doc["tick_duration_s"] = s.tick_duration_s;
  doc["run_length_ticks"] = s.run_length_ticks;
  doc["rng_seed"] = s.rng_seed;
  doc["policy"] = to_string(s.policy);
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

namespace {

std::string resolve(const Scenario& s, const std::string& file) {
  if (file.empty() || s.base_dir.empty() || std::filesystem::path(file).is_absolute()) return file;
  return (std::filesystem::path(s.base_dir) / file).string();
}

}  // namespace

RoadNetwork build_network(const Scenario& s) {
  RoadNetwork raw = s.network_file.empty() ? make_grid(s.grid) : load_edge_list_file(resolve(s, s.network_file));
  // Rebuild with capped speeds so planned times match how fast vehicles actually drive.
  RoadNetwork net;
  net.default_signal = SignalCycle{s.signal_green_s, s.signal_red_s, 0.0};
  Rng phase(s.grid.seed, 0x7068617365);
  for (const Intersection& node : raw.intersections()) {
    Intersection copy = node;
    copy.signal = SignalCycle{s.signal_green_s, s.signal_red_s, phase.uniform(0.0, s.signal_green_s + s.signal_red_s)};
    net.add_intersection(copy);
  }
  for (SegmentId sid = 0; sid < raw.segment_count(); ++sid) {
    const RoadSegment& seg = raw.segment(sid);
    net.add_segment(seg.from, seg.to, seg.length_m, std::min(seg.speed_limit_mps, s.velocity_cap_mps));
  }
  return net;
}

std::vector<std::string> validate_scenario(const Scenario& s) {
  std::vector<std::string> errors;
  auto need = [&errors](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  need(s.consumers >= 0, "vehicles.consumers: must be >= 0");
  need(s.providers >= 0, "vehicles.providers: must be >= 0");
  need(s.meta >= 0, "vehicles.meta: must be >= 0");
  need(s.velocity_cap_mps > 0, "velocity_cap_mps: must be > 0");
  need(s.signal_green_s > 0, "signal.green_s: must be > 0");
  need(s.signal_red_s >= 0, "signal.red_s: must be >= 0");
  need(s.epsilon_s >= 0, "epsilon_s: must be >= 0");
  need(s.alpha >= 0 && s.alpha <= 1, "alpha: must lie in [0, 1]");
  need(s.tick_duration_s > 0, "tick_duration_s: must be > 0");
  need(s.run_length_ticks > 0, "run_length_ticks: must be > 0");
  need(s.item_size_min_bytes > 0, "content.item_size_min_bytes: must be > 0");
  need(s.item_size_max_bytes >= s.item_size_min_bytes, "content.item_size_max_bytes: must be >= item_size_min_bytes");
  need(s.cache_capacity_bytes >= 0, "cache.capacity_bytes: must be >= 0");
  need(s.warm_top_p >= 0, "cache.warm_top_p: must be >= 0");
  need(s.radio_range_m > 0, "radio.range_m: must be > 0");
  need(s.ttl_hops >= 1 && s.ttl_hops <= kMaxHops, "radio.ttl_hops: must lie in [1, 15]");
  need(s.v2v_rate_bytes_per_s > 0, "radio.v2v_rate_bytes_per_s: must be > 0");
  need(s.rsu_rate_bytes_per_s > 0, "radio.rsu_rate_bytes_per_s: must be > 0");
  need(s.rsu_latency_s >= 0, "radio.rsu_latency_s: must be >= 0");
  need(s.request_rate_per_s >= 0, "requests.rate_per_s: must be >= 0");
  need(s.request_rate_per_s * s.tick_duration_s <= 1, "requests.rate_per_s: at most one request per tick");
  need(s.retry_s > 0, "requests.retry_s: must be > 0");
  need(s.max_retries >= 0, "requests.max_retries: must be >= 0");
  need(s.deadline_s > 0, "requests.deadline_s: must be > 0");
  need(s.report_period_ticks > 0, "index.report_period_ticks: must be > 0");
  need(s.staleness_periods > 0, "index.staleness_periods: must be > 0");
  need(!s.rsu_count || *s.rsu_count >= 0, "rsu_count: must be >= 0");
  need(!s.accident_count || *s.accident_count >= 0, "accident_count: must be >= 0");
  need(s.accident_start_tick >= 0, "accident_start_tick: must be >= 0");
  need(s.accident_duration_ticks > 0, "accident_duration_ticks: must be > 0");
  need(s.synthetic.users > 0, "content.synthetic.users: must be > 0");
  need(s.synthetic.items > 1, "content.synthetic.items: must be > 1");
  need(s.synthetic.clusters > 0, "content.synthetic.clusters: must be > 0");
  need(s.synthetic.history_length >= 2, "content.synthetic.history_length: must be >= 2");
  need(s.embedding.dimension > 0, "content.embedding.dimension: must be > 0");
  need(s.embedding.epochs > 0, "content.embedding.epochs: must be > 0");
  need(s.embedding.learning_rate > 0, "content.embedding.learning_rate: must be > 0");
  for (const std::string& e : validate(s.dqn)) errors.push_back("dqn: " + e);
  if (s.network_file.empty()) {
    need(s.grid.rows >= 1 && s.grid.cols >= 1 && s.grid.rows * s.grid.cols >= 2,
         "network.grid: needs at least two intersections");
    need(s.grid.block_m > 0, "network.grid.block_m: must be > 0");
    need(s.grid.speed_limit_mps > 0, "network.grid.speed_limit_mps: must be > 0");
    need(s.grid.speed_spread >= 0 && s.grid.speed_spread < 1, "network.grid.speed_spread: must lie in [0, 1)");
  }
  if (!s.consumption_log.empty() && !std::filesystem::exists(resolve(s, s.consumption_log)))
    errors.push_back("content.log: file not found: " + s.consumption_log);

  // Referential checks need the network.
  if (!errors.empty() && s.network_file.empty() &&
      !(s.grid.rows >= 1 && s.grid.cols >= 1 && s.grid.block_m > 0 && s.grid.speed_limit_mps > 0 &&
        s.velocity_cap_mps > 0 && s.signal_green_s > 0))
    return errors;
  std::optional<RoadNetwork> net;
  try {
    net = build_network(s);
  } catch (const ParseError& e) {
    errors.push_back("network.file: " + std::string(e.what()) + " (line " + std::to_string(e.line) + ")");
  } catch (const Error& e) {
    errors.push_back("network: " + std::string(e.what()));
  }
  if (!net) return errors;
  if (net->intersection_count() < 2) errors.push_back("network: needs at least two intersections");
  for (std::size_t i = 0; i < s.rsus.size(); ++i) {
    const auto& p = s.rsus[i];
    const std::string at = "rsus[" + std::to_string(i) + "].segment";
    if (p.segment >= net->segment_count()) {
      errors.push_back(at + ": segment " + std::to_string(p.segment) + " does not exist");
    } else if (p.offset_m > net->segment(p.segment).length_m) {
      errors.push_back("rsus[" + std::to_string(i) + "].offset_m: beyond the segment's length");
    }
  }
  for (std::size_t i = 0; i < s.accidents.size(); ++i) {
    const auto& a = s.accidents[i];
    const std::string at = "accidents[" + std::to_string(i) + "]";
    if (a.segment >= net->segment_count())
      errors.push_back(at + ".segment: segment " + std::to_string(a.segment) + " does not exist");
    if (a.start_tick < 0) errors.push_back(at + ".start_tick: must be >= 0");
    if (a.duration_ticks <= 0) errors.push_back(at + ".duration_ticks: must be > 0");
  }
  if (s.accident_count && static_cast<std::size_t>(*s.accident_count) > net->segment_count())
    errors.push_back("accident_count: more than the network's segments");
  return errors;
}

std::vector<RsuPlacement> effective_rsus(const Scenario& s, const RoadNetwork& net) {
  if (!s.rsu_count) return s.rsus;
  // Farthest-point spread over segment midpoints, starting nearest the centroid.
  const std::size_t n = net.segment_count();
  std::vector<std::pair<double, double>> mid(n);
  double cx = 0, cy = 0;
  for (SegmentId i = 0; i < n; ++i) {
    const auto& seg = net.segment(i);
    const auto& a = net.intersection(seg.from);
    const auto& b = net.intersection(seg.to);
    mid[i] = {(a.x + b.x) / 2, (a.y + b.y) / 2};
    cx += mid[i].first / n;
    cy += mid[i].second / n;
  }
  auto d2 = [](std::pair<double, double> p, double x, double y) {
    return (p.first - x) * (p.first - x) + (p.second - y) * (p.second - y);
  };
  std::vector<RsuPlacement> out;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  const int want = std::min<int>(*s.rsu_count, static_cast<int>(n));
  for (int k = 0; k < want; ++k) {
    SegmentId pick = 0;
    for (SegmentId i = 1; i < n; ++i) {
      const bool better = k == 0 ? d2(mid[i], cx, cy) < d2(mid[pick], cx, cy) - 1e-9 : nearest[i] > nearest[pick] + 1e-9;
      if (better) pick = i;
    }
    out.push_back({pick, -1.0});
    for (SegmentId i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], d2(mid[i], mid[pick].first, mid[pick].second));
  }
  return out;
}

std::vector<Accident> effective_accidents(const Scenario& s, const RoadNetwork& net) {
  if (!s.accident_count) return s.accidents;
  Rng rng(s.rng_seed, 0x616363);
  std::vector<SegmentId> ids(net.segment_count());
  for (SegmentId i = 0; i < ids.size(); ++i) ids[i] = i;
  std::vector<Accident> out;
  for (int k = 0; k < *s.accident_count && !ids.empty(); ++k) {
    const std::size_t j = rng.below(ids.size());
    out.push_back({ids[j], s.accident_start_tick, s.accident_duration_ticks});
    ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(j));
  }
  std::sort(out.begin(), out.end(), [](const Accident& a, const Accident& b) { return a.segment < b.segment; });
  return out;
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::velocity: return "velocity";
    case SweepAxis::density: return "density";
    case SweepAxis::rsu_count: return "rsu_count";
    case SweepAxis::accidents: return "accidents";
    case SweepAxis::request_rate: return "request_rate";
  }
  return "?";
}

std::optional<SweepAxis> axis_from_string(const std::string& name) {
  for (SweepAxis a : {SweepAxis::velocity, SweepAxis::density, SweepAxis::rsu_count, SweepAxis::accidents,
                      SweepAxis::request_rate})
    if (to_string(a) == name) return a;
  return std::nullopt;
}

void apply_axis(Scenario& s, SweepAxis axis, double value) {
  auto whole = [&](const char* what) {
    if (value < 0 || value != std::floor(value)) throw ConfigError(std::string(what) + " values must be whole numbers >= 0");
    return static_cast<int>(value);
  };
  switch (axis) {
    case SweepAxis::velocity:
      if (!(value > 0)) throw ConfigError("velocity values must be positive");
      s.velocity_cap_mps = value;
      break;
    case SweepAxis::density: {
      const int total = whole("density");
      const int t = s.consumers + s.providers + s.meta;
      const double fc = t ? double(s.consumers) / t : 0.6, fp = t ? double(s.providers) / t : 0.3;
      int meta = static_cast<int>(std::lround(total * (1.0 - fc - fp)));
      if (total > 0 && meta == 0 && s.meta > 0) meta = 1;
      int providers = std::min(total - meta, static_cast<int>(std::lround(total * fp)));
      s.meta = meta;
      s.providers = providers;
      s.consumers = total - meta - providers;
      break;
    }
    case SweepAxis::rsu_count:
      s.rsu_count = whole("rsu_count");
      break;
    case SweepAxis::accidents:
      s.accident_count = whole("accidents");
      break;
    case SweepAxis::request_rate:
      if (value < 0) throw ConfigError("request_rate values must be >= 0");
      s.request_rate_per_s = value;
      break;
  }
}

}  // namespace vesonet
