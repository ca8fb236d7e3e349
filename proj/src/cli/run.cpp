#include "khgt/cli/run.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "khgt/data/dataset.hpp"
#include "khgt/data/subgraph.hpp"
#include "khgt/data/synthetic.hpp"
#include "khgt/errors.hpp"
#include "khgt/eval/evaluator.hpp"
#include "khgt/eval/relevance.hpp"
#include "khgt/random.hpp"
#include "khgt/trainer/checkpoint.hpp"
#include "khgt/trainer/reference.hpp"

namespace khgt::cli {

namespace fs = std::filesystem;

namespace {

struct RunConfig {
  std::string data_dir = "data";
  std::string out = "out";
  std::uint64_t seed = 0;
  std::string target_behavior = "last";
  std::uint32_t topk = 10;
  std::uint32_t workers = 1;
  std::string checkpoint;  // empty: <out>/model.ckpt
  std::string users;       // recommend: comma-separated ids
  std::uint32_t export_nodes = 5;
  double eps = 1e-5;
  std::string variant = "full";
  std::uint32_t item_cap = 10;
  std::uint32_t min_co_count = 2;
  trainer::TrainConfig train;
  data::SyntheticSpec synth;
};

struct Field {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ValidationError("invalid value '" + text + "' for " + key);
  return value;
}

template <typename T>
std::string format_number(T value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

template <typename T>
Field number(std::string name, std::string help, T RunConfig::*member) {
  return {name, std::move(help), [member, name](RunConfig& c, const std::string& v) { c.*member = parse_number<T>(name, v); },
          [member](const RunConfig& c) { return format_number(c.*member); }};
}

template <typename T>
Field train_number(std::string name, std::string help, T trainer::TrainConfig::*member) {
  return {name, std::move(help),
          [member, name](RunConfig& c, const std::string& v) { c.train.*member = parse_number<T>(name, v); },
          [member](const RunConfig& c) { return format_number(c.train.*member); }};
}

template <typename T>
Field synth_number(std::string name, std::string help, T data::SyntheticSpec::*member) {
  return {name, std::move(help),
          [member, name](RunConfig& c, const std::string& v) { c.synth.*member = parse_number<T>(name, v); },
          [member](const RunConfig& c) { return format_number(c.synth.*member); }};
}

Field text(std::string name, std::string help, std::string RunConfig::*member) {
  return {std::move(name), std::move(help), [member](RunConfig& c, const std::string& v) { c.*member = v; },
          [member](const RunConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
  using T = trainer::TrainConfig;
  using S = data::SyntheticSpec;
  static const std::vector<Field> all{
      text("data-dir", "directory with interactions.tsv, optional items.tsv and dims", &RunConfig::data_dir),
      text("out", "output directory", &RunConfig::out),
      number("seed", "root seed of every random stream", &RunConfig::seed),
      text("target-behavior", "target behavior index, or 'last'", &RunConfig::target_behavior),
      number("topk", "recommendations per user", &RunConfig::topk),
      number("workers", "evaluation threads", &RunConfig::workers),
      text("checkpoint", "checkpoint path (default <out>/model.ckpt)", &RunConfig::checkpoint),
      text("users", "comma-separated user ids for recommend", &RunConfig::users),
      number("export-nodes", "users and items sampled by export-attention", &RunConfig::export_nodes),
      number("eps", "finite-difference step for gradcheck", &RunConfig::eps),
      text("variant", "full, ga, mr, bf, ti, kg or target-only", &RunConfig::variant),
      number("item-cap", "max neighbors per item and relation", &RunConfig::item_cap),
      number("min-co-count", "common users needed for a co-interaction edge", &RunConfig::min_co_count),
      train_number("dim", "embedding size d", &T::dim),
      train_number("heads", "attention heads H", &T::heads),
      train_number("channels", "base transform channels M", &T::channels),
      train_number("layers", "propagation layers L", &T::layers),
      train_number("learning-rate", "Adam step size", &T::learning_rate),
      train_number("decay", "learning-rate factor per epoch", &T::decay),
      train_number("batch-size", "users per step", &T::batch_size),
      train_number("pairs-per-user", "positive/negative pairs per user and step", &T::pairs_per_user),
      train_number("reg-weight", "L2 weight on all parameters", &T::reg_weight),
      train_number("epochs", "training epochs", &T::epochs),
      train_number("subgraph-nodes", "nodes per sampled sub-graph (0: full graph)", &T::subgraph_nodes),
      train_number("restart-prob", "random-walk restart probability", &T::restart_prob),
      train_number("time-resolution", "seconds per time slot", &T::time_resolution),
      train_number("dropout", "dropout on type aggregates during training", &T::dropout),
      synth_number("synth-users", "synthetic users", &S::users),
      synth_number("synth-items", "synthetic items", &S::items),
      synth_number("synth-behaviors", "synthetic behavior types", &S::behaviors),
      synth_number("synth-latent-dim", "synthetic latent factor size", &S::latent_dim),
      synth_number("synth-noise", "noise on the target propensity", &S::noise),
      synth_number("synth-correlation", "auxiliary/target propensity mixture", &S::correlation),
      synth_number("synth-categories", "synthetic item categories", &S::categories),
      synth_number("synth-target-min", "min target items per user", &S::target_min),
      synth_number("synth-target-max", "max target items per user", &S::target_max),
      synth_number("synth-aux-min", "min items per user and auxiliary behavior", &S::auxiliary_min),
      synth_number("synth-aux-max", "max items per user and auxiliary behavior", &S::auxiliary_max),
      synth_number("synth-start-time", "first synthetic timestamp", &S::start_time),
  };
  return all;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config file not found: " + path);
  std::map<std::string, std::string> values;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(path + ":" + std::to_string(number) + ": expected key=value");
    values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return values;
}

const Field& field_named(const std::string& name) {
  for (const auto& f : fields())
    if (f.name == name) return f;
  throw ValidationError("unknown configuration key '" + name + "'");
}

void write_run_config(const RunConfig& c, const std::string& command) {
  std::ofstream out(fs::path(c.out) / "run_config");
  out << "# khgt " << command << "\n";
  for (const auto& f : fields()) out << f.name << '=' << f.get(c) << '\n';
}

struct Corpus {
  data::InteractionLog log;
  std::vector<std::uint32_t> categories;
};

std::map<std::string, std::uint32_t> read_dims(const fs::path& path) {
  std::map<std::string, std::uint32_t> dims;
  for (const auto& [k, v] : read_config_file(path.string())) dims[k] = parse_number<std::uint32_t>(k, v);
  return dims;
}

Corpus load_corpus(const RunConfig& c) {
  const fs::path dir(c.data_dir);
  const fs::path interactions = dir / "interactions.tsv";
  if (!fs::exists(interactions)) throw ValidationError("interaction file not found: " + interactions.string());
  data::LogDims dims;
  if (fs::exists(dir / "dims")) {
    const auto d = read_dims(dir / "dims");
    auto take = [&](const char* key) { return d.count(key) ? d.at(key) : 0u; };
    dims = {take("users"), take("items"), take("behaviors")};
  }
  Corpus corpus;
  std::ifstream in(interactions);
  try {
    corpus.log = data::parse_interactions(in, dims);
  } catch (const ParseError& e) {
    throw ValidationError(interactions.string() + ": " + e.what());
  }
  const fs::path categories = dir / "items.tsv";
  if (fs::exists(categories)) {
    std::ifstream cin(categories);
    try {
      corpus.categories = data::parse_item_categories(cin, corpus.log.num_items);
    } catch (const ParseError& e) {
      throw ValidationError(categories.string() + ": " + e.what());
    }
  } else {
    corpus.categories.assign(corpus.log.num_items, 0);
  }
  return corpus;
}

std::uint32_t target_behavior(const RunConfig& c, const data::InteractionLog& log) {
  if (c.target_behavior == "last") return log.num_behaviors - 1;
  const auto k = parse_number<std::uint32_t>("target-behavior", c.target_behavior);
  if (k >= log.num_behaviors)
    throw ValidationError("target behavior " + std::to_string(k) + " is not below K=" + std::to_string(log.num_behaviors));
  return k;
}

/// Applies --variant to the training config; returns true for the target-only data variant.
bool apply_variant(RunConfig& c) {
  model::Variant v;
  bool target_only = false;
  if (c.variant == "full") {
  } else if (c.variant == "ga") {
    v.attentive_aggregation = false;
  } else if (c.variant == "mr") {
    v.mutual_attention = false;
  } else if (c.variant == "bf") {
    v.gated_fusion = false;
  } else if (c.variant == "ti") {
    v.temporal = false;
  } else if (c.variant == "kg") {
    v.item_relations = false;
  } else if (c.variant == "target-only") {
    target_only = true;
  } else {
    throw ValidationError("unknown variant '" + c.variant + "'");
  }
  c.train.variant = v;
  return target_only;
}

data::Dataset load_dataset(RunConfig& c) {
  const bool target_only = apply_variant(c);
  const Corpus corpus = load_corpus(c);
  data::DatasetOptions options;
  options.target_behavior = target_behavior(c, corpus.log);
  options.time_resolution = c.train.time_resolution;
  options.item_graph = {c.item_cap, c.min_co_count, derive_seed(c.seed, "item_graph")};
  options.target_only = target_only;
  return data::build_dataset(corpus.log, corpus.categories, options);
}

fs::path checkpoint_path(const RunConfig& c) {
  return c.checkpoint.empty() ? fs::path(c.out) / "model.ckpt" : fs::path(c.checkpoint);
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  body(out);
}

eval::EvalConfig eval_config(const RunConfig& c) {
  eval::EvalConfig e;
  e.seed = derive_seed(c.seed, "eval");
  e.workers = std::max<std::uint32_t>(1, c.workers);
  e.variant = c.train.variant;
  return e;
}

void print_summary(std::ostream& out, const eval::MetricsReport& r) {
  out << "test users: " << r.all.count << "\n";
  out << std::fixed << std::setprecision(4);
  for (std::uint32_t n : eval::kCutoffs) out << "HR@" << n << " = " << r.all.hr_at(n) << "  NDCG@" << n << " = " << r.all.ndcg_at(n) << "\n";
  out << std::defaultfloat;
}

int cmd_synth(RunConfig& c, std::ostream& out) {
  const data::SyntheticCorpus corpus = data::generate_synthetic(c.synth, derive_seed(c.seed, "synth"));
  const fs::path dir(c.out);
  write_file(dir / "interactions.tsv", [&](std::ostream& o) { data::write_interactions(o, corpus.log); });
  write_file(dir / "items.tsv", [&](std::ostream& o) { data::write_item_categories(o, corpus.categories); });
  write_file(dir / "dims", [&](std::ostream& o) {
    o << "users=" << corpus.log.num_users << "\nitems=" << corpus.log.num_items << "\nbehaviors=" << corpus.log.num_behaviors
      << "\n";
  });
  out << "wrote " << corpus.log.records.size() << " interactions to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_prepare(RunConfig& c, std::ostream& out) {
  const data::Dataset ds = load_dataset(c);
  std::ostringstream s;
  const auto& ui = ds.interactions;
  s << "users=" << ui.num_users << "\nitems=" << ui.num_items << "\nbehaviors=" << ui.num_behaviors
    << "\nrelations=" << ds.item_relations.num_relations() << "\ntarget_behavior=" << ds.split.target_behavior
    << "\ntrain_records=" << ds.split.train.records.size() << "\ntest_users=" << ds.split.test.size() << "\n";
  for (std::uint32_t k = 0; k < ui.num_behaviors; ++k) s << "edges_behavior_" << k << "=" << ui.by_user[k].num_edges() << "\n";
  for (std::uint32_t r = 0; r < ds.item_relations.num_relations(); ++r)
    s << "edges_relation_" << r << "=" << ds.item_relations.relations[r].num_edges() << "\n";
  write_file(fs::path(c.out) / "graph_stats.txt", [&](std::ostream& o) { o << s.str(); });
  out << s.str();
  return kExitOk;
}

int cmd_train(RunConfig& c, std::ostream& out, std::ostream& err) {
  const data::Dataset ds = load_dataset(c);
  for (const auto& note : trainer::check(c.train)) err << "note: " << note << "\n";
  const trainer::TrainResult result =
      trainer::train(c.train, ds.split, ds.interactions, ds.item_relations, [&](const trainer::EpochStats& e) {
        out << "epoch " << e.epoch << " loss " << e.mean_loss << " hinge " << e.mean_hinge << " lr " << e.learning_rate
            << "\n";
      });
  const fs::path dir(c.out);
  trainer::save_checkpoint(checkpoint_path(c), result.params);
  write_file(dir / "loss_history.csv", [&](std::ostream& o) { trainer::write_loss_history(o, result.history); });
  eval::MetricsReport report;
  try {
    report = eval::evaluate(result.params, ds.interactions, ds.item_relations, ds.split, eval_config(c));
  } catch (const ValidationError& e) {
    err << "note: evaluation skipped: " << e.what() << "\n";
    return kExitOk;
  }
  write_file(dir / "metrics.csv", [&](std::ostream& o) { eval::write_metrics_csv(o, report); });
  print_summary(out, report);
  return kExitOk;
}

int cmd_evaluate(RunConfig& c, std::ostream& out) {
  const fs::path ckpt = checkpoint_path(c);
  if (!fs::exists(ckpt)) throw ValidationError("checkpoint not found: " + ckpt.string());
  const data::Dataset ds = load_dataset(c);
  const model::ModelParams params = trainer::load_checkpoint(ckpt);
  const eval::MetricsReport report = eval::evaluate(params, ds.interactions, ds.item_relations, ds.split, eval_config(c));
  write_file(fs::path(c.out) / "metrics.csv", [&](std::ostream& o) { eval::write_metrics_csv(o, report); });
  print_summary(out, report);
  return kExitOk;
}

std::vector<std::uint32_t> parse_id_list(const std::string& text) {
  std::vector<std::uint32_t> ids;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (!part.empty()) ids.push_back(parse_number<std::uint32_t>("users", part));
  }
  return ids;
}

int cmd_recommend(RunConfig& c, std::ostream& out) {
  const fs::path ckpt = checkpoint_path(c);
  if (!fs::exists(ckpt)) throw ValidationError("checkpoint not found: " + ckpt.string());
  const std::vector<std::uint32_t> users = parse_id_list(c.users);
  if (users.empty()) throw ValidationError("recommend needs --users");
  if (c.topk == 0) throw ValidationError("topk must be positive");
  const data::Dataset ds = load_dataset(c);
  const model::ModelParams params = trainer::load_checkpoint(ckpt);
  for (auto u : users)
    if (u >= ds.interactions.num_users) throw ValidationError("user " + std::to_string(u) + " is out of range");
  const model::PreparedGraph graph =
      model::prepare_graph(data::full_view(ds.interactions, ds.item_relations), params.hyper);
  model::ForwardOptions options;
  options.variant = c.train.variant;
  const model::EncodedGraph enc = model::encode_values(params, graph, options);
  const auto seen = data::target_items_by_user(ds.split.train, ds.split.target_behavior);
  const numerics::Tensor& z = params.at(model::names::kScore);

  std::ostringstream s;
  s << "user\trank\titem\tscore\n" << std::setprecision(6);
  for (auto u : users) {
    std::vector<std::pair<double, std::uint32_t>> ranked;
    for (std::uint32_t j = 0; j < ds.interactions.num_items; ++j) {
      if (std::binary_search(seen[u].begin(), seen[u].end(), j)) continue;
      ranked.emplace_back(model::score(enc.users.row(u), enc.items.row(j), z.data()), j);
    }
    const std::size_t k = std::min<std::size_t>(c.topk, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), ranked.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    for (std::size_t r = 0; r < k; ++r) s << u << '\t' << r + 1 << '\t' << ranked[r].second << '\t' << ranked[r].first << '\n';
  }
  write_file(fs::path(c.out) / "recommendations.tsv", [&](std::ostream& o) { o << s.str(); });
  out << s.str();
  return kExitOk;
}

std::vector<std::uint32_t> sample_ids(std::uint32_t total, std::uint32_t count, Rng& rng) {
  std::vector<std::uint32_t> ids(total);
  std::iota(ids.begin(), ids.end(), 0u);
  rng.shuffle(ids.begin(), ids.end());
  ids.resize(std::min(count, total));
  std::sort(ids.begin(), ids.end());
  return ids;
}

int cmd_export(RunConfig& c, std::ostream& out) {
  const fs::path ckpt = checkpoint_path(c);
  if (!fs::exists(ckpt)) throw ValidationError("checkpoint not found: " + ckpt.string());
  const data::Dataset ds = load_dataset(c);
  const model::ModelParams params = trainer::load_checkpoint(ckpt);
  const model::PreparedGraph graph =
      model::prepare_graph(data::full_view(ds.interactions, ds.item_relations), params.hyper);
  Rng rng(c.seed, "export");
  const auto users = sample_ids(ds.interactions.num_users, c.export_nodes, rng);
  const auto items = sample_ids(ds.interactions.num_items, c.export_nodes, rng);
  std::ofstream relevance(fs::path(c.out) / "relevance.csv");
  std::ofstream gates(fs::path(c.out) / "gates.csv");
  eval::export_relevance(params, graph, c.train.variant, users, items, relevance, gates);
  out << "wrote relevance.csv and gates.csv for " << users.size() << " users and " << items.size() << " items\n";
  return kExitOk;
}

int cmd_gradcheck(RunConfig& c, std::ostream& out) {
  const numerics::GradCheckResult r = trainer::check_tiny_gradients(c.eps, c.seed);
  out << "max relative error: " << std::scientific << std::setprecision(3) << r.max_relative_error << std::defaultfloat
      << " (worst " << r.worst_parameter << "[" << r.worst_index << "], " << r.entries_checked << " entries)\n";
  return r.max_relative_error < 1e-4 ? kExitOk : kExitRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-enhanced hierarchical graph transformer for multi-behavior recommendation", "khgt"};
  app.fallthrough();
  app.require_subcommand(1, 1);
  std::string config_path;
  app.add_option("--config", config_path, "key=value file; flags win");
  std::map<std::string, std::string> raw;
  for (const auto& f : fields()) app.add_option("--" + f.name, raw[f.name], f.help);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"prepare", "validate data and write graph statistics"},
      {"train", "train, then write model.ckpt, loss_history.csv and metrics.csv"},
      {"evaluate", "leave-one-out evaluation of a checkpoint"},
      {"recommend", "top-K items for --users"},
      {"export-attention", "write relevance.csv and gates.csv"},
      {"gradcheck", "finite-difference check on the tiny reference instance"},
      {"synth", "write a synthetic corpus to --out"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return kExitValidation;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    RunConfig c;
    if (!config_path.empty()) {
      for (const auto& [key, value] : read_config_file(config_path)) {
        const auto& field = field_named(key);
        if (app.count("--" + key) == 0) field.set(c, value);
      }
    }
    for (const auto& f : fields())
      if (app.count("--" + f.name) > 0) f.set(c, raw[f.name]);
    apply_variant(c);
    c.train.seed = c.seed;
    fs::create_directories(c.out);
    write_run_config(c, command);

    if (command == "synth") return cmd_synth(c, out);
    if (command == "prepare") return cmd_prepare(c, out);
    if (command == "train") return cmd_train(c, out, err);
    if (command == "evaluate") return cmd_evaluate(c, out);
    if (command == "recommend") return cmd_recommend(c, out);
    if (command == "export-attention") return cmd_export(c, out);
    if (command == "gradcheck") return cmd_gradcheck(c, out);
    err << app.help();
    return kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const RangeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace khgt::cli
