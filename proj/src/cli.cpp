#include "provhunt/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>
#include <toml.hpp>

#include "provhunt/bench.hpp"
#include "provhunt/ingest.hpp"
#include "provhunt/querykit.hpp"
#include "provhunt/reprnet.hpp"
#include "provhunt/sampler.hpp"

extern char** environ;

namespace provhunt {

namespace {

// ---------------------------------------------------------------------------
// key registry

enum class Kind { Int, UInt, Double, Bool, String, IntList };

struct Key {
  std::string name;
  Kind kind;
  std::function<nlohmann::json(const AppConfig&)> get;
  std::function<void(AppConfig&, const nlohmann::json&)> set;
};

#define PH_KEY(name, kind, member)                                                      \
  Key {                                                                                 \
    name, kind, [](const AppConfig& c) { return nlohmann::json(c.member); },           \
        [](AppConfig& c, const nlohmann::json& v) { c.member = v.get<decltype(c.member)>(); } \
  }

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = {
      PH_KEY("seed", Kind::UInt, seed),
      PH_KEY("log.level", Kind::String, log_level),
      PH_KEY("paths.rules", Kind::String, rules_path),
      PH_KEY("ingest.window_ms", Kind::Int, window_ms),
      PH_KEY("ppg.versioning", Kind::Bool, ppg.versioning_enabled),
      PH_KEY("sampling.k", Kind::UInt, hunt.k),
      PH_KEY("sampling.max_nodes", Kind::UInt, hunt.max_nodes),
      PH_KEY("hunt.theta", Kind::Double, hunt.theta),
      PH_KEY("hunt.batch_pairs", Kind::UInt, hunt.batch_pairs),
      PH_KEY("hunt.stride", Kind::UInt, hunt.stride),
      PH_KEY("hunt.max_pois", Kind::UInt, hunt.max_pois),
      PH_KEY("hunt.exhaustive", Kind::Bool, exhaustive),
      PH_KEY("hunt.seed", Kind::UInt, hunt.seed),
      PH_KEY("train.tau", Kind::Double, train.tau),
      PH_KEY("train.epochs", Kind::Int, train.epochs),
      PH_KEY("train.batch", Kind::Int, train.batch),
      PH_KEY("train.lr", Kind::Double, train.lr),
      PH_KEY("train.beta1", Kind::Double, train.beta1),
      PH_KEY("train.beta2", Kind::Double, train.beta2),
      PH_KEY("train.adam_eps", Kind::Double, train.adam_eps),
      PH_KEY("train.perturb_ratio", Kind::Double, train.perturb_ratio),
      PH_KEY("train.corpus_size", Kind::UInt, train.corpus_size),
      PH_KEY("train.seed", Kind::UInt, train.seed),
      PH_KEY("train.negatives_per_anchor", Kind::Int, train.negatives_per_anchor),
      PH_KEY("train.min_nodes", Kind::UInt, train.min_nodes),
      PH_KEY("train.max_nodes", Kind::UInt, train.max_nodes),
      PH_KEY("train.hops", Kind::IntList, train.hops),
      PH_KEY("train.seed_attempts_per_graph", Kind::UInt, train.seed_attempts_per_graph),
      PH_KEY("train.negative_scan", Kind::UInt, train.negative_scan),
      Key{"train.precision", Kind::String,
          [](const AppConfig& c) { return nlohmann::json(c.train.precision == Precision::Float ? "float" : "double"); },
          [](AppConfig& c, const nlohmann::json& v) {
            const auto s = v.get<std::string>();
            if (s == "float") c.train.precision = Precision::Float;
            else if (s == "double") c.train.precision = Precision::Double;
            else throw Error("config", "train.precision must be \"float\" or \"double\"");
          }},
      PH_KEY("model.dim", Kind::Int, train.model.dim),
      PH_KEY("model.layers", Kind::Int, train.model.layers),
      PH_KEY("model.gate_degree", Kind::Int, train.model.gate_degree),
      PH_KEY("model.inter", Kind::Bool, train.model.inter),
      PH_KEY("model.seed", Kind::UInt, train.model.seed),
  };
  return keys;
}

#undef PH_KEY

// keys that follow the top-level seed unless set explicitly
const std::set<std::string> kSeedFollowers = {"hunt.seed", "train.seed", "model.seed"};

const Key* find_key(const std::string& name) {
  for (const auto& k : registry())
    if (k.name == name) return &k;
  return nullptr;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

nlohmann::json parse_raw(const Key& k, const std::string& raw, const std::string& origin) {
  const auto bad = [&](const std::string& why) {
    return Error("config", k.name + " (" + origin + "): " + why + ", got '" + raw + "'");
  };
  const auto s = trim(raw);
  switch (k.kind) {
    case Kind::Int: {
      std::int64_t v = 0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) throw bad("expected an integer");
      return v;
    }
    case Kind::UInt: {
      std::uint64_t v = 0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw bad("expected a non-negative integer");
      return v;
    }
    case Kind::Double: {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) throw bad("expected a number");
      return v;
    }
    case Kind::Bool: {
      std::string l = s;
      std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return char(std::tolower(c)); });
      if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
      if (l == "false" || l == "0" || l == "no" || l == "off") return false;
      throw bad("expected a boolean");
    }
    case Kind::String:
      return raw;
    case Kind::IntList: {
      std::string body = s;
      if (body.size() >= 2 && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
      nlohmann::json arr = nlohmann::json::array();
      std::size_t pos = 0;
      while (pos <= body.size()) {
        const auto comma = body.find(',', pos);
        const auto item = trim(body.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
        std::int64_t v = 0;
        const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || r.ec != std::errc() || r.ptr != item.data() + item.size())
          throw bad("expected comma-separated integers");
        arr.push_back(v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      return arr;
    }
  }
  throw bad("unsupported kind");
}

nlohmann::json from_toml(const Key& k, const toml::node& n, const std::string& origin) {
  const auto bad = [&](const std::string& why) { return Error("config", k.name + " (" + origin + "): " + why); };
  switch (k.kind) {
    case Kind::Int:
      if (const auto v = n.value_exact<std::int64_t>()) return *v;
      throw bad("expected an integer");
    case Kind::UInt:
      if (const auto v = n.value_exact<std::int64_t>(); v && *v >= 0) return std::uint64_t(*v);
      throw bad("expected a non-negative integer");
    case Kind::Double:
      if (n.is_integer() || n.is_floating_point()) return *n.value<double>();
      throw bad("expected a number");
    case Kind::Bool:
      if (const auto v = n.value_exact<bool>()) return *v;
      throw bad("expected a boolean");
    case Kind::String:
      if (const auto v = n.value_exact<std::string>()) return *v;
      throw bad("expected a string");
    case Kind::IntList: {
      const auto* arr = n.as_array();
      if (!arr) throw bad("expected an array of integers");
      nlohmann::json out = nlohmann::json::array();
      for (const auto& x : *arr) {
        const auto v = x.value_exact<std::int64_t>();
        if (!v) throw bad("expected an array of integers");
        out.push_back(*v);
      }
      return out;
    }
  }
  throw bad("unsupported kind");
}

struct Setting {
  nlohmann::json value;
  std::string source;  // "file", "env" or "flag"
};

void read_file_layer(const std::string& path, std::map<std::string, Setting>& out) {
  toml::table root;
  try {
    root = toml::parse_file(path);
  } catch (const toml::parse_error& e) {
    throw Error("config", path + ": " + std::string(e.description()));
  }
  const std::string origin = "file " + path;
  for (const auto& [section, node] : root) {
    const std::string sec(section.str());
    if (const auto* t = node.as_table()) {
      for (const auto& [k, v] : *t) {
        const auto name = sec + "." + std::string(k.str());
        const auto* key = find_key(name);
        if (!key) throw Error("config", path + ": unknown key '" + name + "'");
        out[name] = {from_toml(*key, v, origin), "file"};
      }
    } else {
      const auto* key = find_key(sec);
      if (!key) throw Error("config", path + ": unknown key '" + sec + "'");
      out[sec] = {from_toml(*key, node, origin), "file"};
    }
  }
}

void set_path(nlohmann::json& j, const std::string& dotted, nlohmann::json v) {
  auto* cur = &j;
  std::size_t pos = 0;
  for (auto dot = dotted.find('.'); dot != std::string::npos; dot = dotted.find('.', pos)) {
    cur = &(*cur)[dotted.substr(pos, dot - pos)];
    pos = dot + 1;
  }
  (*cur)[dotted.substr(pos)] = std::move(v);
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.push_back(k.name);
  return out;
}

std::string env_name(const std::string& key) {
  std::string s = "PROVHUNT_";
  for (const char c : key) s += c == '.' ? '_' : char(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::map<std::string, std::string> provhunt_environment() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e && *e; ++e) {
    const std::string kv(*e);
    const auto eq = kv.find('=');
    if (eq == std::string::npos || kv.rfind("PROVHUNT_", 0) != 0) continue;
    out[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return out;
}

bool AppConfig::overridden(const std::string& prefix) const {
  return std::any_of(origin.begin(), origin.end(), [&](const auto& kv) { return kv.first.rfind(prefix, 0) == 0; });
}

void AppConfig::validate() const {
  static const std::set<std::string> levels = {"trace", "debug", "info", "warn", "error", "off"};
  if (!levels.contains(log_level)) throw Error("config", "log.level must be one of trace|debug|info|warn|error|off");
  if (window_ms <= 0) throw Error("config", "ingest.window_ms must be > 0");
  try {
    hunt.validate();
    train.validate();
  } catch (const Error& e) {
    throw Error("config", e.what());
  }
}

AppConfig resolve_config(const ConfigSources& src) {
  std::map<std::string, Setting> layers;
  if (src.file) read_file_layer(*src.file, layers);

  for (const auto& [var, raw] : src.env) {
    if (var == "PROVHUNT_CONFIG") continue;
    const Key* key = nullptr;
    for (const auto& k : registry())
      if (env_name(k.name) == var) key = &k;
    if (!key) {
      spdlog::warn("config: ignoring unknown environment variable {}", var);
      continue;
    }
    layers[key->name] = {parse_raw(*key, raw, "env " + var), "env"};
  }
  for (const auto& [name, raw] : src.flags) {
    const auto* key = find_key(name);
    if (!key) throw Error("config", "unknown flag key '" + name + "'");
    layers[name] = {parse_raw(*key, raw, "flag"), "flag"};
  }

  AppConfig c;
  for (const auto& k : registry()) {
    const auto it = layers.find(k.name);
    if (it == layers.end()) continue;
    c.origin[k.name] = it->second.source;
    try {
      k.set(c, it->second.value);
    } catch (const nlohmann::json::exception&) {
      throw Error("config", k.name + " (" + it->second.source + "): value out of range");
    }
  }
  if (!layers.contains("hunt.seed")) c.hunt.seed = c.seed;
  if (!layers.contains("train.seed")) c.train.seed = c.seed;
  if (!layers.contains("model.seed")) c.train.model.seed = c.seed;

  if (!c.rules_path.empty()) {
    try {
      c.rules = std::make_shared<const AbstractionRules>(AbstractionRules::load(c.rules_path));
    } catch (const Error& e) {
      throw Error("config", std::string("paths.rules: ") + e.what());
    }
  }
  c.validate();

  nlohmann::json echo = nlohmann::json::object();
  for (const auto& k : registry()) set_path(echo, k.name, k.get(c));
  echo["sources"] = {{"file", src.file ? nlohmann::json(*src.file) : nlohmann::json(nullptr)},
                     {"overrides", c.origin}};
  c.echo = std::move(echo);
  return c;
}

nlohmann::json version_json() {
  return {{"name", "provhunt"},
          {"version", kVersion},
          {"ppg_format", kPpgFormatVersion},
          {"model_format", kModelFormatVersion}};
}

// ---------------------------------------------------------------------------
// subcommands

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("cli", "cannot write " + path);
  f << text;
  if (!f) throw Error("cli", "short write to " + path);
}

void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const std::string& path, const std::string& stage) {
  std::ifstream f(path);
  if (!f) throw Error(stage, "cannot open " + path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw Error(stage, path + ": " + e.what());
  }
}

std::vector<AuditEvent> read_events(const std::string& path) {
  auto res = parse_file(path);
  if (!res.issues.empty()) {
    spdlog::warn("ingest: {} malformed line(s) skipped in {}", res.issues.size(), path);
    for (std::size_t i = 0; i < std::min<std::size_t>(res.issues.size(), 5); ++i)
      spdlog::warn("ingest: {}:{}: {}", path, res.issues[i].line, res.issues[i].reason);
  }
  return std::move(res.events);
}

std::vector<std::string> read_poi_ids(const std::string& path) {
  const auto j = read_json(path, "querykit");
  const auto& arr = j.is_object() ? j.at("pois") : j;
  try {
    return arr.get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    throw Error("querykit", path + ": POI file must be a list of subject ids or an object with \"pois\"");
  }
}

std::vector<AttrGraph> read_queries(const std::string& path) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  if (files.empty()) throw Error("querykit", "no query graphs (*.json) in " + path);
  std::vector<AttrGraph> out;
  for (const auto& f : files) {
    auto g = load_graph(f.string());
    if (!g.label) g.label = f.stem().string();
    out.push_back(std::move(g));
  }
  return out;
}

std::map<std::string, bool> read_labels(const std::string& path, const PpgView& g, const HuntReport& r) {
  const auto j = read_json(path, "hunter");
  if (j.is_object() && j.contains("campaigns")) return label_verdicts(g, r, campaigns_from_labels(j));
  try {
    return j.get<std::map<std::string, bool>>();
  } catch (const nlohmann::json::exception&) {
    throw Error("hunter", path + ": labels must map graph ids to booleans or be a scenario labels.json");
  }
}

nlohmann::json memory_json(const MemoryReport& m) {
  return {{"total_bytes", m.total_bytes},
          {"fixed_overhead", m.fixed_overhead},
          {"node_bytes_sparse", m.node_bytes_sparse},
          {"node_bytes_extended", m.node_bytes_extended},
          {"sparse_subject_bytes", m.sparse_subject_bytes},
          {"sparse_object_bytes", m.sparse_object_bytes},
          {"ext_subject_bytes", m.ext_subject_bytes},
          {"ext_object_bytes", m.ext_object_bytes},
          {"id_map_bytes", m.id_map_bytes},
          {"name_table_bytes", m.name_table_bytes},
          {"version_index_bytes", m.version_index_bytes},
          {"node_count", m.node_count},
          {"edge_count", m.edge_count},
          {"exp_node_count", m.exp_node_count}};
}

struct Common {
  std::string config;
  std::string log_level;
  std::string seed;
  std::string rules;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "TOML config file (also PROVHUNT_CONFIG)")->check(CLI::ExistingFile);
  sub->add_option("--log-level", c.log_level, "trace|debug|info|warn|error|off");
  sub->add_option("--seed", c.seed, "Base seed for every randomized stage");
  sub->add_option("--rules", c.rules, "Abstraction rules TOML (default: built-in)")->check(CLI::ExistingFile);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto logger = std::make_shared<spdlog::logger>("provhunt", sink);
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);

  CLI::App app{"Provenance-graph threat hunting: compact graph storage, threat-graph sampling and graph matching.",
               "provhunt"};
  app.set_version_flag("--version", version_json().dump());
  app.require_subcommand(1);
  app.fallthrough(false);

  Common common;
  std::map<std::string, std::string> flags;
  // flag value holders
  std::vector<std::string> in_files;
  std::string in, out_path, stats_out, ppg_path, pois_path, patterns, queries, model_path, report_path, labels_path,
      curve_path, graph_path, suite = "all", window_ms, k, max_nodes, theta, stride, max_pois, epochs, corpus_size,
      dim, tau, lr;
  bool versioning = false, exhaustive = false;

  auto* ingest = app.add_subcommand("ingest", "Parse JSONL audit events and deduplicate them");
  add_common(ingest, common);
  ingest->add_option("--in", in_files, "Input JSONL files (merged by timestamp)")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", out_path, "Deduplicated JSONL output")->required();
  ingest->add_option("--window-ms", window_ms, "Network dedup window in milliseconds");
  ingest->add_option("--stats-out", stats_out, "Dedup statistics JSON");

  auto* build = app.add_subcommand("build-ppg", "Build a PPG checkpoint from deduplicated events");
  add_common(build, common);
  build->add_option("--in", in, "Deduplicated JSONL events")->required()->check(CLI::ExistingFile);
  build->add_option("--out", out_path, "PPG checkpoint")->required();
  build->add_flag("--versioning", versioning, "Enable node versioning");

  auto* stats = app.add_subcommand("stats", "Print PPG size and memory statistics");
  add_common(stats, common);
  stats->add_option("ppg", ppg_path, "PPG checkpoint")->required()->check(CLI::ExistingFile);
  stats->add_option("--out", out_path, "Write the statistics JSON here instead of stdout");

  auto* pois = app.add_subcommand("pois", "Match IoC patterns against events to find POI subjects");
  add_common(pois, common);
  pois->add_option("--in", in, "JSONL events")->required()->check(CLI::ExistingFile);
  pois->add_option("--patterns", patterns, "JSON list of {sbj, op, obj} patterns")->required()->check(CLI::ExistingFile);
  pois->add_option("--out", out_path, "POI JSON output")->required();

  auto* samp = app.add_subcommand("sample", "Sample threat graphs around POIs");
  add_common(samp, common);
  samp->add_option("--ppg", ppg_path, "PPG checkpoint")->required()->check(CLI::ExistingFile);
  samp->add_option("--pois", pois_path, "POI JSON")->required()->check(CLI::ExistingFile);
  samp->add_option("--k", k, "Hop budget");
  samp->add_option("--max-nodes", max_nodes, "Node cap per threat graph");
  samp->add_option("--out", out_path, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train the graph matching model on benign events");
  add_common(tr, common);
  tr->add_option("--benign", in, "Attack-free JSONL events")->required()->check(CLI::ExistingFile);
  tr->add_option("--out", out_path, "Model checkpoint")->required();
  tr->add_option("--curve", curve_path, "Per-epoch loss CSV");
  tr->add_option("--epochs", epochs, "Training epochs");
  tr->add_option("--corpus-size", corpus_size, "Benign corpus graphs");
  tr->add_option("--dim", dim, "Embedding width");
  tr->add_option("--tau", tau, "Loss temperature");
  tr->add_option("--lr", lr, "Learning rate");

  auto* emb = app.add_subcommand("embed", "Embed one graph with a trained model");
  add_common(emb, common);
  emb->add_option("--model", model_path, "Model checkpoint")->required()->check(CLI::ExistingFile);
  emb->add_option("--graph", graph_path, "Graph JSON")->required()->check(CLI::ExistingFile);
  emb->add_option("--out", out_path, "Write the embedding JSON here instead of stdout");

  auto* hn = app.add_subcommand("hunt", "Score threat graphs against query graphs (exit 2 when anything is flagged)");
  add_common(hn, common);
  hn->add_option("--ppg", ppg_path, "PPG checkpoint")->required()->check(CLI::ExistingFile);
  hn->add_option("--pois", pois_path, "POI JSON (required unless --exhaustive)")->check(CLI::ExistingFile);
  hn->add_option("--queries", queries, "Query graph JSON file or directory")->required()->check(CLI::ExistingPath);
  hn->add_option("--model", model_path, "Model checkpoint")->required()->check(CLI::ExistingFile);
  hn->add_option("--theta", theta, "Flag threshold on the best cosine score");
  hn->add_option("--k", k, "Hop budget");
  hn->add_option("--max-nodes", max_nodes, "Node cap per threat graph");
  hn->add_flag("--exhaustive", exhaustive, "Use every process as a POI");
  hn->add_option("--stride", stride, "Exhaustive mode: every stride-th process");
  hn->add_option("--max-pois", max_pois, "Exhaustive mode: cap on POIs (0 = none)");
  hn->add_option("--labels", labels_path, "Ground truth: {graph id: bool} or a scenario labels.json")
      ->check(CLI::ExistingFile);
  hn->add_option("--report", report_path, "Report JSON (default: stdout)");

  auto* bn = app.add_subcommand("bench", "Run the synthetic-range benchmark suites");
  add_common(bn, common);
  bn->add_option("--suite", suite, "all|smoke|memory|sampling|hunt");
  bn->add_option("--out", out_path, "Results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  const auto* sub = app.get_subcommands().front();
  const std::string cmd = sub->get_name();
  std::string stage = "config";
  try {
    ConfigSources src;
    src.env = provhunt_environment();
    if (!common.config.empty()) src.file = common.config;
    else if (const auto it = src.env.find("PROVHUNT_CONFIG"); it != src.env.end() && !it->second.empty())
      src.file = it->second;
    if (src.file && !std::filesystem::is_regular_file(*src.file))
      throw Error("config", "config file not found: " + *src.file);
    auto flag = [&](const char* key, const std::string& v) {
      if (!v.empty()) flags[key] = v;
    };
    flag("log.level", common.log_level);
    flag("seed", common.seed);
    flag("paths.rules", common.rules);
    flag("ingest.window_ms", window_ms);
    flag("sampling.k", k);
    flag("sampling.max_nodes", max_nodes);
    flag("hunt.theta", theta);
    flag("hunt.stride", stride);
    flag("hunt.max_pois", max_pois);
    flag("train.epochs", epochs);
    flag("train.corpus_size", corpus_size);
    flag("model.dim", dim);
    flag("train.tau", tau);
    flag("train.lr", lr);
    if (versioning) flags["ppg.versioning"] = "true";
    if (exhaustive) flags["hunt.exhaustive"] = "true";
    src.flags = flags;

    const auto cfg = resolve_config(src);
    spdlog::set_level(spdlog::level::from_str(cfg.log_level));
    if (cmd == "hunt" && !cfg.exhaustive && pois_path.empty())
      throw Error("config", "hunt needs --pois unless --exhaustive (or hunt.exhaustive) is set");
    if (cmd == "bench") {
      static const std::set<std::string> suites = {"all", "smoke", "memory", "sampling", "hunt"};
      if (!suites.contains(suite)) throw Error("config", "unknown suite '" + suite + "'");
    }

    stage = cmd;
    const auto t0 = Clock::now();
    nlohmann::json summary = {{"command", cmd}, {"config", cfg.echo}};
    const auto& rules = cfg.abstraction();
    int rc = kExitOk;

    if (cmd == "ingest") {
      std::vector<AuditEvent> events;
      for (const auto& f : in_files) {
        auto part = read_events(f);
        events.insert(events.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
      }
      if (in_files.size() > 1)
        std::stable_sort(events.begin(), events.end(),
                         [](const AuditEvent& a, const AuditEvent& b) { return a.ts < b.ts; });
      DedupStats st;
      const auto kept = deduplicate(events, st, cfg.window_ms);
      std::ofstream f(out_path);
      if (!f) throw Error("ingest", "cannot write " + out_path);
      for (const auto& e : kept) f << event_to_json_line(e) << '\n';
      if (!f) throw Error("ingest", "short write to " + out_path);
      summary["stats"] = {{"input_events", st.input_events},
                          {"s1_removed", st.s1_removed},
                          {"s2_removed", st.s2_removed},
                          {"remaining", st.remaining},
                          {"conserved", st.conserved()}};
      summary["out"] = out_path;
      if (!stats_out.empty()) write_json(stats_out, summary);
    } else if (cmd == "build-ppg") {
      const auto events = read_events(in);
      const auto ppg = build_ppg(events, cfg.ppg, rules);
      ppg.save(out_path);
      summary["events"] = events.size();
      summary["nodes"] = ppg.node_count();
      summary["edges"] = ppg.edge_count();
      summary["memory"] = memory_json(ppg.memory_report());
      summary["out"] = out_path;
    } else if (cmd == "stats") {
      const auto ppg = Ppg::load(ppg_path, rules);
      summary["ppg"] = ppg_path;
      summary["memory"] = memory_json(ppg.memory_report());
      if (!out_path.empty()) write_json(out_path, summary);
    } else if (cmd == "pois") {
      const auto events = read_events(in);
      const auto pats = load_patterns(patterns);
      const auto res = match_pois(events, pats);
      nlohmann::json matches = nlohmann::json::array();
      for (const auto& m : res.log) matches.push_back({{"event", m.event}, {"pattern", m.pattern}});
      nlohmann::json doc = {{"config", cfg.echo}, {"pois", res.subject_ids}, {"matches", matches}};
      write_json(out_path, doc);
      summary["pois"] = res.subject_ids.size();
      summary["matches"] = res.log.size();
      summary["out"] = out_path;
    } else if (cmd == "sample") {
      const auto ppg = Ppg::load(ppg_path, rules);
      const auto g = ppg.snapshot();
      const auto ps = resolve_pois(g, read_poi_ids(pois_path));
      const auto graphs = sample(g, ps, cfg.hunt.sampling());
      std::filesystem::create_directories(out_path);
      nlohmann::json index = nlohmann::json::array();
      for (std::size_t i = 0; i < graphs.size(); ++i) {
        const auto name = fmt::format("tg_{:04d}.json", i);
        auto j = threat_graph_to_json(graphs[i]);
        j["config"] = cfg.echo;
        write_json((std::filesystem::path(out_path) / name).string(), j);
        std::vector<std::string> seeds;
        for (const auto s : graphs[i].seeds) seeds.push_back(g.id(s));
        index.push_back({{"file", name},
                         {"seeds", seeds},
                         {"nodes", graphs[i].graph.nodes.size()},
                         {"edges", graphs[i].graph.edges.size()},
                         {"truncated", graphs[i].truncated}});
      }
      summary["graphs"] = index;
      write_json((std::filesystem::path(out_path) / "index.json").string(), summary);
    } else if (cmd == "train") {
      DedupStats st;
      const auto events = deduplicate(read_events(in), st, cfg.window_ms);
      const auto ppg = build_ppg(events, cfg.ppg, rules);
      stage = "trainer";
      const auto corpus = sample_benign_corpus(ppg.snapshot(), cfg.train);
      const auto pairs = build_pairs(corpus, cfg.train);
      const auto res = train(cfg.train, corpus, pairs, [](int epoch, double loss) {
        spdlog::info("trainer: epoch {} loss {:.6f}", epoch, loss);
      });
      res.model.save(out_path);
      if (!curve_path.empty()) {
        std::string csv = "epoch,loss\n";
        for (std::size_t i = 0; i < res.epoch_loss.size(); ++i) csv += fmt::format("{},{:.9g}\n", i + 1, res.epoch_loss[i]);
        write_text(curve_path, csv);
      }
      const auto sep = pair_separation(res.model, corpus, pairs);
      summary["corpus"] = corpus.size();
      summary["relaxed_pairs"] = std::count(pairs.relaxed.begin(), pairs.relaxed.end(), true);
      summary["epoch_loss"] = res.epoch_loss;
      summary["mean_pos_sim"] = sep.mean_pos;
      summary["mean_neg_sim"] = sep.mean_neg;
      summary["model_hash"] = res.model.hash();
      summary["out"] = out_path;
    } else if (cmd == "embed") {
      const auto model = ReprModel::load(model_path);
      const auto g = load_graph(graph_path);
      const auto e = embed(model, init_features(g));
      summary["model_hash"] = model.hash();
      summary["graph"] = graph_path;
      summary["dim"] = e.size();
      summary["embedding"] = std::vector<double>(e.data(), e.data() + e.size());
      if (!out_path.empty()) write_json(out_path, summary);
    } else if (cmd == "hunt") {
      const auto ppg = Ppg::load(ppg_path, rules);
      const auto g = ppg.snapshot();
      const auto qs = read_queries(queries);
      const auto model = ReprModel::load(model_path);
      HuntReport rep;
      if (cfg.exhaustive) {
        if (!pois_path.empty()) spdlog::warn("hunter: --pois ignored in exhaustive mode");
        rep = hunt_exhaustive(g, qs, model, cfg.hunt);
      } else {
        rep = hunt(g, resolve_pois(g, read_poi_ids(pois_path)), qs, model, cfg.hunt);
      }
      if (!labels_path.empty()) rep.metrics = evaluate(rep, read_labels(labels_path, g, rep));
      auto doc = report_to_json(rep);
      doc["config"]["effective"] = cfg.echo;
      if (!report_path.empty()) write_json(report_path, doc);
      else summary["report"] = doc;
      summary["graphs"] = rep.verdicts.size();
      summary["flagged"] = rep.flag_count();
      summary["evaluation"] = doc["evaluation"];
      if (rep.flag_count() > 0) rc = kExitFlagged;
    } else if (cmd == "bench") {
      SuiteOptions opt;
      opt.suite = suite;
      opt.seed = cfg.seed;
      opt.out_dir = out_path;
      opt.config_echo = cfg.echo;
      // the suite picks its own training scale unless training keys were configured
      if (cfg.overridden("train.") || cfg.overridden("model.")) opt.train = cfg.train;
      if (cfg.overridden("hunt.") || cfg.overridden("sampling.")) opt.hunt = cfg.hunt;
      summary["results"] = run_suite(opt);
      summary["out"] = out_path;
    }
    summary["seconds"] = seconds_since(t0);
    out << summary.dump(2) << '\n';
    return rc;
  } catch (const Error& e) {
    err << "provhunt: error: " << e.what() << '\n';
    return e.stage() == "config" ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "provhunt: error: " << stage << ": " << e.what() << '\n';
    return stage == "config" ? kExitUsage : kExitRuntime;
  }
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace provhunt
