#pragma once

// Command implementations behind the relx CLI: split, mine, expand, train, predict,
// eval, rank. Each command checks its outputs up front, writes them, and records a
// JSON run manifest next to its primary output.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relx/corpus.hpp"
#include "relx/error.hpp"
#include "relx/eval.hpp"
#include "relx/expand.hpp"
#include "relx/krimp.hpp"
#include "relx/model.hpp"
#include "relx/synthetic.hpp"
#include "relx/trainer.hpp"

namespace relx {

inline constexpr std::string_view kVersion = "0.1.0";

struct PipelineConfig {
  // paths
  std::string corpus;
  std::string train_corpus;
  std::string test_corpus;
  std::string vocabulary;
  std::string code_table;
  std::string expanded_corpus;
  std::string expanded_test_corpus;
  std::string expansion_report;
  std::string train_input;
  std::string checkpoint;
  std::string predictions;
  std::string metrics;
  std::string pr_curve;
  std::string borda;
  std::string stopwords;
  std::string pretrained;
  std::vector<std::string> metrics_inputs;
  // corpus / krimp
  std::size_t min_frequency = 100;
  std::size_t minsup = 2;
  bool prune = false;
  std::size_t candidate_cap = kDefaultCandidateCap;
  // expansion
  std::size_t k = 7;
  std::string metric = "jaccard";
  bool all_tie_branches = false;
  bool expand_test = false;
  // training
  TrainConfig train;
  EncoderConfig encoder;
  bool float32 = false;
  // evaluation
  std::vector<std::size_t> p_at{100, 200, 300};
  std::string label = "run";
  // split
  double train_fraction = 0.8;
  // synthetic corpus
  std::size_t synthetic_sentences = 600;
  // global
  bool force = false;
  bool deterministic = false;
};

// ---------------------------------------------------------------------------
// Field registry: one name per PipelineConfig field, shared by the config file, the
// CLI flags (kebab-case) and the manifest snapshot.

struct ConfigField {
  std::string name;
  bool is_flag = false;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<nlohmann::json(const PipelineConfig&)> get;
};

namespace detail {

inline std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v[0] == '-') throw Error("option '" + key + "' expects a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(out);
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw Error("option '" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on" || v.empty()) return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("option '" + key + "' expects true/false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream in(v);
  std::string piece;
  while (std::getline(in, piece, ',')) {
    while (!piece.empty() && piece.front() == ' ') piece.erase(piece.begin());
    while (!piece.empty() && piece.back() == ' ') piece.pop_back();
    if (!piece.empty()) out.push_back(piece);
  }
  return out;
}

}  // namespace detail

inline const std::vector<ConfigField>& config_fields() {
  using C = PipelineConfig;
  using J = nlohmann::json;
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> f;
    auto path = [&f](std::string name, std::string C::*m) {
      f.push_back({name, false, [m](C& c, const std::string& v) { c.*m = v; },
                   [m](const C& c) { return J(c.*m); }});
    };
    auto size = [&f](std::string name, std::function<std::size_t&(C&)> ref) {
      f.push_back({name, false, [name, ref](C& c, const std::string& v) { ref(c) = detail::parse_size(name, v); },
                   [ref](const C& c) { return J(ref(const_cast<C&>(c))); }});
    };
    auto real = [&f](std::string name, std::function<double&(C&)> ref) {
      f.push_back({name, false, [name, ref](C& c, const std::string& v) { ref(c) = detail::parse_real(name, v); },
                   [ref](const C& c) { return J(ref(const_cast<C&>(c))); }});
    };
    auto flag = [&f](std::string name, bool C::*m) {
      f.push_back({name, true, [name, m](C& c, const std::string& v) { c.*m = detail::parse_bool(name, v); },
                   [m](const C& c) { return J(c.*m); }});
    };

    path("corpus", &C::corpus);
    path("train_corpus", &C::train_corpus);
    path("test_corpus", &C::test_corpus);
    path("vocabulary", &C::vocabulary);
    path("code_table", &C::code_table);
    path("expanded_corpus", &C::expanded_corpus);
    path("expanded_test_corpus", &C::expanded_test_corpus);
    path("expansion_report", &C::expansion_report);
    path("train_input", &C::train_input);
    path("checkpoint", &C::checkpoint);
    path("predictions", &C::predictions);
    path("metrics", &C::metrics);
    path("pr_curve", &C::pr_curve);
    path("borda", &C::borda);
    path("stopwords", &C::stopwords);
    path("pretrained", &C::pretrained);
    f.push_back({"metrics_inputs", false,
                 [](C& c, const std::string& v) {
                   for (auto& p : detail::split_list(v)) c.metrics_inputs.push_back(p);
                 },
                 [](const C& c) { return J(c.metrics_inputs); }});

    size("min_frequency", [](C& c) -> std::size_t& { return c.min_frequency; });
    size("minsup", [](C& c) -> std::size_t& { return c.minsup; });
    flag("prune", &C::prune);
    size("candidate_cap", [](C& c) -> std::size_t& { return c.candidate_cap; });

    size("k", [](C& c) -> std::size_t& { return c.k; });
    f.push_back({"metric", false,
                 [](C& c, const std::string& v) {
                   if (!parse_metric(v)) throw Error("option 'metric' expects cosine or jaccard, got '" + v + "'");
                   c.metric = v;
                 },
                 [](const C& c) { return J(c.metric); }});
    flag("all_tie_branches", &C::all_tie_branches);
    flag("expand_test", &C::expand_test);

    f.push_back({"mode", false,
                 [](C& c, const std::string& v) {
                   auto m = parse_train_mode(v);
                   if (!m) throw Error("option 'mode' expects att|att-adv|max-adv|lattadv-att|lattadv-max, got '" + v + "'");
                   c.train.mode = *m;
                 },
                 [](const C& c) { return J(std::string(to_string(c.train.mode))); }});
    real("learning_rate", [](C& c) -> double& { return c.train.learning_rate; });
    size("batch_size", [](C& c) -> std::size_t& { return c.train.batch_size; });
    size("epochs", [](C& c) -> std::size_t& { return c.train.max_epochs; });
    f.push_back({"stage_epochs", false,
                 [](C& c, const std::string& v) { c.train.stage_epochs = detail::parse_size("stage_epochs", v); },
                 [](const C& c) { return c.train.stage_epochs ? J(*c.train.stage_epochs) : J(nullptr); }});
    real("weight_decay", [](C& c) -> double& { return c.train.weight_decay; });
    real("dropout_rate", [](C& c) -> double& { return c.encoder.dropout_rate; });
    real("epsilon", [](C& c) -> double& { return c.train.epsilon; });
    f.push_back({"seed", false,
                 [](C& c, const std::string& v) { c.train.seed = detail::parse_size("seed", v); },
                 [](const C& c) { return J(c.train.seed); }});
    size("word_dim", [](C& c) -> std::size_t& { return c.encoder.word_dim; });
    size("position_dim", [](C& c) -> std::size_t& { return c.encoder.position_dim; });
    size("filters", [](C& c) -> std::size_t& { return c.encoder.filters; });
    size("window", [](C& c) -> std::size_t& { return c.encoder.window; });
    size("max_relations", [](C& c) -> std::size_t& { return c.encoder.max_relations; });
    size("max_length", [](C& c) -> std::size_t& { return c.encoder.max_length; });
    flag("float32", &C::float32);

    f.push_back({"p_at", false,
                 [](C& c, const std::string& v) {
                   c.p_at.clear();
                   for (auto& p : detail::split_list(v)) {
                     auto n = detail::parse_size("p_at", p);
                     if (n == 0) throw Error("option 'p_at' values must be positive");
                     c.p_at.push_back(n);
                   }
                 },
                 [](const C& c) { return J(c.p_at); }});
    path("label", &C::label);
    real("train_fraction", [](C& c) -> double& { return c.train_fraction; });
    size("synthetic_sentences", [](C& c) -> std::size_t& { return c.synthetic_sentences; });
    flag("force", &C::force);
    flag("deterministic", &C::deterministic);
    return f;
  }();
  return fields;
}

inline const ConfigField* find_field(const std::string& name) {
  for (const auto& f : config_fields())
    if (f.name == name) return &f;
  return nullptr;
}

/// Flat "key = value" lines; '#' starts a comment. Unknown keys are errors.
inline void apply_config_text(PipelineConfig& config, std::istream& in, const std::string& source = "config") {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "config", "expected key = value in " + source);
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto* field = find_field(key);
    if (!field) throw ParseError(line_no, key, "unknown configuration key in " + source);
    field->set(config, value);
  }
}

inline void load_config_file(PipelineConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config file '" + path + "'");
  apply_config_text(config, in, path);
}

inline nlohmann::json config_snapshot(const PipelineConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : config_fields()) j[f.name] = f.get(config);
  return j;
}

inline TrainConfig effective_train_config(const PipelineConfig& c) {
  TrainConfig t = c.train;
  t.dropout_rate = c.encoder.dropout_rate;
  return t;
}

// ---------------------------------------------------------------------------
// Files and manifests

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
inline std::string file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

inline void require_input(const std::string& path, const std::string& what) {
  if (path.empty()) throw Error("missing required path: --" + what);
  if (!std::filesystem::exists(path)) throw Error(what + " file '" + path + "' does not exist");
}

inline void require_output_path(const std::string& path, const std::string& what) {
  if (path.empty()) throw Error("missing required output path: --" + what);
}

inline std::string manifest_path(const std::string& primary_output) { return primary_output + ".manifest.json"; }

/// Refuses existing outputs unless forced, and creates parent directories.
inline void prepare_outputs(const PipelineConfig& config, const std::vector<std::string>& outputs) {
  for (const auto& out : outputs) {
    if (out.empty()) continue;
    if (!config.force && std::filesystem::exists(out))
      throw Error("output '" + out + "' exists; pass --force to overwrite");
    const auto parent = std::filesystem::path(out).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
  }
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

class RunManifest {
 public:
  RunManifest(std::string command, const PipelineConfig& config)
      : command_(std::move(command)), config_(config), start_(std::chrono::steady_clock::now()) {
    json_["command"] = command_;
    json_["version"] = kVersion;
    json_["seed"] = config.train.seed;
    json_["config"] = config_snapshot(config);
    json_["inputs"] = nlohmann::json::object();
  }

  void add_input(const std::string& path) { json_["inputs"][path] = file_checksum(path); }
  nlohmann::json& extra() { return json_; }

  void write(const std::string& path) {
    if (config_.deterministic) {
      json_["wall_clock_seconds"] = nullptr;
    } else {
      json_["wall_clock_seconds"] =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
    auto out = open_output(path);
    out << json_.dump(2) << '\n';
  }

 private:
  std::string command_;
  const PipelineConfig& config_;
  std::chrono::steady_clock::time_point start_;
  nlohmann::json json_;
};

inline std::vector<SentenceInstance> load_nonempty_corpus(const std::string& path) {
  auto instances = load_corpus(path);
  if (instances.empty()) throw Error("corpus '" + path + "' is empty");
  return instances;
}

inline void save_corpus(const std::string& path, const std::vector<SentenceInstance>& instances) {
  auto out = open_output(path);
  write_corpus(out, instances);
}

// ---------------------------------------------------------------------------
// Commands. Each returns the process exit status; errors propagate as exceptions.

/// Seeded 80:20-style split by entity pair, so no pair appears on both sides.
inline int cmd_split(const PipelineConfig& config, std::ostream& log = std::cout) {
  require_input(config.corpus, "corpus");
  require_output_path(config.train_corpus, "train-corpus");
  require_output_path(config.test_corpus, "test-corpus");
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0))
    throw DomainError("train_fraction must lie in (0, 1)");
  prepare_outputs(config, {config.train_corpus, config.test_corpus, manifest_path(config.train_corpus)});
  RunManifest manifest("split", config);
  manifest.add_input(config.corpus);

  const auto instances = load_nonempty_corpus(config.corpus);
  std::set<std::pair<std::string, std::string>> pair_set;
  for (const auto& s : instances)
    if (s.has_pair()) pair_set.emplace(s.head_mention().entity_id, s.tail_mention().entity_id);
  std::vector<std::pair<std::string, std::string>> pairs(pair_set.begin(), pair_set.end());
  Rng rng(mix_seed(config.train.seed, 0x5b117ULL));
  rng.shuffle(pairs);
  const auto n_train = static_cast<std::size_t>(std::llround(config.train_fraction * static_cast<double>(pairs.size())));
  std::set<std::pair<std::string, std::string>> train_pairs(pairs.begin(),
                                                            pairs.begin() + static_cast<std::ptrdiff_t>(n_train));

  std::vector<SentenceInstance> train, test;
  for (const auto& s : instances) {
    if (!s.has_pair() || train_pairs.contains({s.head_mention().entity_id, s.tail_mention().entity_id}))
      train.push_back(s);
    else
      test.push_back(s);
  }
  save_corpus(config.train_corpus, train);
  save_corpus(config.test_corpus, test);
  manifest.extra()["stats"] = {{"pairs", pairs.size()},
                               {"train_pairs", n_train},
                               {"train_sentences", train.size()},
                               {"test_sentences", test.size()}};
  manifest.write(manifest_path(config.train_corpus));
  log << "split: " << train.size() << " train / " << test.size() << " test sentences over " << pairs.size()
      << " entity pairs\n";
  return 0;
}

/// Vocabulary + transactions + MDL code table from the training corpus.
inline int cmd_mine(const PipelineConfig& config, std::ostream& log = std::cout) {
  require_input(config.train_corpus, "train-corpus");
  require_output_path(config.vocabulary, "vocabulary");
  require_output_path(config.code_table, "code-table");
  prepare_outputs(config, {config.vocabulary, config.code_table, manifest_path(config.code_table)});
  RunManifest manifest("mine", config);
  manifest.add_input(config.train_corpus);

  const auto instances = load_nonempty_corpus(config.train_corpus);
  std::unordered_set<std::string> stopwords;
  if (!config.stopwords.empty()) {
    require_input(config.stopwords, "stopwords");
    manifest.add_input(config.stopwords);
    stopwords = load_stopwords(config.stopwords);
  }
  const auto vocab = build_vocabulary(instances, config.min_frequency, stopwords);
  const auto db = to_transactions(instances, vocab);
  if (db.empty()) throw Error("no transactions: every sentence lost all words to the vocabulary threshold");

  KrimpOptions options{config.minsup, config.prune, config.candidate_cap};
  KrimpTrace trace;
  const auto ct = build_code_table(db, vocab.size(), options, &trace);
  const double baseline = standard_length(db, vocab.size());
  const double ratio = compression_ratio(db, ct);

  {
    auto out = open_output(config.vocabulary);
    write_vocabulary(out, vocab);
  }
  {
    auto out = open_output(config.code_table);
    write_code_table(out, ct);
  }
  std::size_t items = 0;
  for (const auto& t : db) items += t.items.size();
  manifest.extra()["stats"] = {{"vocabulary_size", vocab.size()},
                               {"transactions", db.size()},
                               {"transaction_items", items},
                               {"candidates_tested", trace.candidates_tested},
                               {"accepted", trace.accepted},
                               {"pruned", trace.pruned},
                               {"code_table_size", ct.size()},
                               {"standard_bits", baseline},
                               {"code_table_bits", ct.encoded_size()},
                               {"compression_ratio", ratio}};
  manifest.write(manifest_path(config.code_table));
  log << "mine: " << vocab.size() << " words, " << db.size() << " transactions, " << trace.candidates_tested
      << " candidates, " << trace.accepted << " accepted; L = " << ct.encoded_size() << " bits (standard "
      << baseline << "), ratio " << ratio << '\n';
  return 0;
}

/// Appends template sentences generated from the code table to the training corpus.
inline int cmd_expand(const PipelineConfig& config, std::ostream& log = std::cout) {
  require_input(config.train_corpus, "train-corpus");
  require_input(config.vocabulary, "vocabulary");
  require_input(config.code_table, "code-table");
  require_output_path(config.expanded_corpus, "expanded-corpus");
  require_output_path(config.expansion_report, "expansion-report");
  if (config.expand_test) {
    require_input(config.test_corpus, "test-corpus");
    require_output_path(config.expanded_test_corpus, "expanded-test-corpus");
  }
  prepare_outputs(config, {config.expanded_corpus, config.expansion_report, manifest_path(config.expanded_corpus),
                           config.expand_test ? config.expanded_test_corpus : std::string()});
  RunManifest manifest("expand", config);
  manifest.add_input(config.train_corpus);
  manifest.add_input(config.vocabulary);
  manifest.add_input(config.code_table);

  const auto instances = load_corpus(config.train_corpus);
  const auto vocab = load_vocabulary(config.vocabulary);
  CodeTable ct;
  {
    std::ifstream in(config.code_table);
    ct = read_code_table(in);
  }
  for (const auto& e : ct.entries())
    for (Item i : e.itemset)
      if (i >= vocab.size()) throw Error("code table item " + std::to_string(i) + " is not in the vocabulary");
  const auto lex = build_entity_lexicon(instances, vocab);
  if (lex.empty()) throw Error("no entity lexicon: no mention name matches a vocabulary word");

  ExpandOptions options;
  options.k = config.k;
  options.metric = *parse_metric(config.metric);
  options.all_tie_branches = config.all_tie_branches;
  const auto templates = default_templates();

  auto result = expand_database(instances, ct, lex, templates, options);
  // k = 0 is the unexpanded baseline: the report still lists what IDEAL bases would add.
  const auto& written = config.k == 0 ? instances : result.instances;
  save_corpus(config.expanded_corpus, written);
  {
    auto out = open_output(config.expansion_report);
    write_expansion_report(out, result.generated, vocab);
  }
  nlohmann::json stats = {{"input_sentences", instances.size()},
                          {"generated", result.generated.size()},
                          {"output_sentences", written.size()}};
  if (config.expand_test) {
    manifest.add_input(config.test_corpus);
    const auto test = load_corpus(config.test_corpus);
    auto test_lex = build_entity_lexicon(test, vocab);
    auto test_result = expand_database(test, ct, test_lex, templates, options);
    const auto& test_written = config.k == 0 ? test : test_result.instances;
    save_corpus(config.expanded_test_corpus, test_written);
    stats["test_input_sentences"] = test.size();
    stats["test_output_sentences"] = test_written.size();
  }
  manifest.extra()["stats"] = stats;
  manifest.write(manifest_path(config.expanded_corpus));
  log << "expand: k=" << config.k << " metric=" << config.metric << ": " << instances.size() << " -> "
      << written.size() << " sentences (" << result.generated.size() << " generated instances reported)\n";
  return 0;
}

namespace detail {

template <std::floating_point Real>
nlohmann::json stage_json(const StageResult<Real>& s) {
  return {{"stage", s.stage_index},
          {"aggregation", to_string(s.aggregation)},
          {"perturbed", s.perturbed},
          {"epoch_losses", s.epoch_losses}};
}

inline void write_config_text(const std::string& path, const EncoderConfig& e, const TrainConfig& t) {
  auto out = open_output(path);
  const auto ej = to_json(e);
  for (const auto& [k, v] : ej.items()) out << k << " = " << v.dump() << '\n';
  out << "learning_rate = " << t.learning_rate << '\n'
      << "batch_size = " << t.batch_size << '\n'
      << "max_epochs = " << t.max_epochs << '\n'
      << "stage_epochs = " << t.epochs_per_stage() << '\n'
      << "weight_decay = " << t.weight_decay << '\n'
      << "epsilon = " << t.epsilon << '\n'
      << "seed = " << t.seed << '\n'
      << "mode = " << to_string(t.mode) << '\n';
}

template <std::floating_point Real>
int run_train(const PipelineConfig& config, const std::string& input, std::ostream& log) {
  const std::vector<std::string> stage_paths = {config.checkpoint + ".stage1", config.checkpoint + ".stage2"};
  const bool leveled = config.train.mode == TrainMode::LattadvAtt || config.train.mode == TrainMode::LattadvMax;
  std::vector<std::string> outputs{config.checkpoint, manifest_path(config.checkpoint), config.checkpoint + ".config.txt"};
  if (leveled) outputs.insert(outputs.end(), stage_paths.begin(), stage_paths.end());
  prepare_outputs(config, outputs);

  RunManifest manifest("train", config);
  manifest.add_input(input);
  manifest.add_input(config.vocabulary);

  const auto instances = load_nonempty_corpus(input);
  const auto vocab = load_vocabulary(config.vocabulary);
  EncoderConfig encoder = config.encoder;
  std::vector<std::string> labels;
  for (const auto& s : instances) labels.push_back(s.relation_label);
  RelationIndex relations(labels);
  if (relations.size() > encoder.max_relations)
    throw Error("training data has " + std::to_string(relations.size()) + " relations; max_relations is " +
                std::to_string(encoder.max_relations));
  const auto bags = index_bags(instances, vocab, relations, encoder);
  if (bags.empty()) throw Error("training corpus has no sentence with a head/tail pair");

  const auto train_config = effective_train_config(config);
  ModelBundle<Real> bundle;
  bundle.model = PcnnModel<Real>(encoder, vocab.size() + 1);
  bundle.relations = relations;
  bundle.words = vocab.words();
  bundle.inference = inference_aggregation(train_config.mode);
  Rng init_rng(train_config.seed);
  bundle.model.initialize(init_rng);
  if (!config.pretrained.empty()) {
    require_input(config.pretrained, "pretrained");
    manifest.add_input(config.pretrained);
    const auto matched = bundle.model.load_pretrained(load_pretrained_vectors(config.pretrained), bundle.words);
    log << "train: " << matched << " embedding rows loaded from pretrained vectors\n";
  }

  const auto stages = train(bundle.model, std::span<const IndexedBag>(bags), train_config, false);

  for (std::size_t i = 0; i + 1 < stages.size(); ++i) {
    ModelBundle<Real> stage_bundle = bundle;
    restore(stage_bundle.model, stages[i].checkpoint);
    auto out = open_output(stage_paths.at(i));
    out << to_json(stage_bundle).dump() << '\n';
  }
  {
    auto out = open_output(config.checkpoint);
    out << to_json(bundle).dump() << '\n';
  }
  write_config_text(config.checkpoint + ".config.txt", encoder, train_config);

  std::string data_hash = manifest.extra()["inputs"][input];
  manifest.extra()["dataset_checksum"] = data_hash;
  manifest.extra()["mode"] = to_string(train_config.mode);
  manifest.extra()["epsilon"] = train_config.epsilon;
  manifest.extra()["precision"] = precision_name<Real>();
  manifest.extra()["train_config"] = {{"learning_rate", train_config.learning_rate},
                                      {"batch_size", train_config.batch_size},
                                      {"max_epochs", train_config.max_epochs},
                                      {"stage_epochs", train_config.epochs_per_stage()},
                                      {"weight_decay", train_config.weight_decay},
                                      {"dropout_rate", train_config.dropout_rate},
                                      {"epsilon", train_config.epsilon},
                                      {"seed", train_config.seed},
                                      {"mode", to_string(train_config.mode)}};
  manifest.extra()["bags"] = bags.size();
  manifest.extra()["relations"] = relations.names();
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& s : stages) trace.push_back(stage_json(s));
  manifest.extra()["stages"] = trace;
  manifest.write(manifest_path(config.checkpoint));
  for (const auto& s : stages) {
    log << "train: stage " << s.stage_index << " (" << to_string(s.aggregation) << (s.perturbed ? ", adversarial" : "")
        << ") loss " << (s.epoch_losses.empty() ? 0.0 : s.epoch_losses.front()) << " -> "
        << (s.epoch_losses.empty() ? 0.0 : s.epoch_losses.back()) << '\n';
  }
  return 0;
}

template <std::floating_point Real>
int run_predict(const PipelineConfig& config, const nlohmann::json& checkpoint, std::ostream& log) {
  const auto bundle = bundle_from_json<Real>(checkpoint);
  const auto instances = load_corpus(config.test_corpus);
  const auto vocab = bundle.vocabulary();
  const auto bags = index_pair_bags(instances, vocab, bundle.model.config());
  const auto preds = predict(bundle.model, bundle.relations, std::span<const IndexedBag>(bags), bundle.inference);
  auto out = open_output(config.predictions);
  write_predictions(out, preds);
  log << "predict: " << bags.size() << " entity pairs, " << preds.size() << " scored facts\n";
  return 0;
}

}  // namespace detail

inline int cmd_train(const PipelineConfig& config, std::ostream& log = std::cout) {
  const std::string input = config.train_input.empty() ? config.train_corpus : config.train_input;
  require_input(input, config.train_input.empty() ? "train-corpus" : "train-input");
  require_input(config.vocabulary, "vocabulary");
  require_output_path(config.checkpoint, "checkpoint");
  return config.float32 ? detail::run_train<float>(config, input, log) : detail::run_train<double>(config, input, log);
}

inline int cmd_predict(const PipelineConfig& config, std::ostream& log = std::cout) {
  require_input(config.checkpoint, "checkpoint");
  require_input(config.test_corpus, "test-corpus");
  require_output_path(config.predictions, "predictions");
  prepare_outputs(config, {config.predictions, manifest_path(config.predictions)});
  RunManifest manifest("predict", config);
  manifest.add_input(config.checkpoint);
  manifest.add_input(config.test_corpus);
  nlohmann::json checkpoint;
  {
    std::ifstream in(config.checkpoint);
    try {
      checkpoint = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error("cannot parse checkpoint '" + config.checkpoint + "': " + e.what());
    }
  }
  const int status = checkpoint_precision(checkpoint) == "float32" ? detail::run_predict<float>(config, checkpoint, log)
                                                                    : detail::run_predict<double>(config, checkpoint, log);
  manifest.write(manifest_path(config.predictions));
  return status;
}

inline int cmd_eval(const PipelineConfig& config, std::ostream& log = std::cout) {
  require_input(config.predictions, "predictions");
  require_input(config.test_corpus, "test-corpus");
  require_output_path(config.metrics, "metrics");
  prepare_outputs(config, {config.metrics, config.pr_curve, manifest_path(config.metrics)});
  RunManifest manifest("eval", config);
  manifest.add_input(config.predictions);
  manifest.add_input(config.test_corpus);

  std::vector<Prediction> preds;
  {
    std::ifstream in(config.predictions);
    preds = read_predictions(in);
  }
  const auto gold = gold_facts(load_corpus(config.test_corpus));
  const auto ranked = mark_correct(preds, gold);
  std::vector<std::size_t> p_at = config.p_at;
  for (auto n : default_p_at())
    if (std::find(p_at.begin(), p_at.end(), n) == p_at.end()) p_at.push_back(n);
  const auto report = evaluate(ranked, gold.size(), p_at);
  {
    auto out = open_output(config.metrics);
    write_metrics_row(out, config.label, report, 0);
  }
  if (!config.pr_curve.empty()) {
    auto out = open_output(config.pr_curve);
    write_pr_curve(out, report.pr_points);
  }
  nlohmann::json p_json = nlohmann::json::object();
  for (auto& [n, v] : report.p_at) p_json["P@" + std::to_string(n)] = v;
  manifest.extra()["metrics"] = {{"auc", report.auc},
                                 {"max_f1", report.max_f1},
                                 {"mean_precision", report.mean_precision},
                                 {"precision_at", p_json},
                                 {"gold_facts", gold.size()},
                                 {"predictions", preds.size()}};
  manifest.write(manifest_path(config.metrics));
  log << "eval: AUC " << format_fixed(report.auc, 3) << ", max F1 " << format_fixed(report.max_f1, 3);
  for (auto n : config.p_at) log << ", P@" << n << ' ' << format_fixed(report.p_at.at(n), 3);
  log << '\n';
  return 0;
}

inline int cmd_rank(const PipelineConfig& config, std::ostream& log = std::cout) {
  if (config.metrics_inputs.empty()) throw Error("rank needs --metrics-inputs");
  require_output_path(config.borda, "borda");
  for (const auto& p : config.metrics_inputs) require_input(p, "metrics-inputs");
  prepare_outputs(config, {config.borda, manifest_path(config.borda)});
  RunManifest manifest("rank", config);
  std::vector<BordaRow> rows;
  for (const auto& p : config.metrics_inputs) {
    manifest.add_input(p);
    std::ifstream in(p);
    for (auto& row : read_metrics(in)) rows.push_back(std::move(row));
  }
  const auto ranked = borda_rank(std::move(rows));
  {
    auto out = open_output(config.borda);
    for (const auto& row : ranked)
      write_metrics_row(out, row.k_label.empty() ? row.label : row.label + "|" + row.k_label, row.report, row.borda);
  }
  manifest.write(manifest_path(config.borda));
  for (const auto& row : ranked) log << "rank: " << row.borda << '\t' << row.label << '\n';
  return 0;
}

/// Writes a seeded synthetic corpus to `corpus`.
inline int cmd_synth(const PipelineConfig& config, std::ostream& log = std::cout) {
  require_output_path(config.corpus, "corpus");
  prepare_outputs(config, {config.corpus});
  SyntheticOptions options;
  options.sentences = config.synthetic_sentences;
  options.seed = config.train.seed;
  save_corpus(config.corpus, make_synthetic_corpus(options));
  log << "synth: " << options.sentences << " sentences written to " << config.corpus << '\n';
  return 0;
}

}  // namespace relx
