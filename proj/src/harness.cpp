#include "gencat/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <thread>

#include "gencat/rng.hpp"
#include "gencat/selection.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace gencat {

namespace {

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw config_error("config section '" + path + "' must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw config_error("unknown config key: " + path + "." + it.key());
  }
}

template <typename T>
void read_field(const json& j, const std::string& path, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw config_error("config key " + path + "." + key + ": " + e.what());
  }
}

CorpusFormat format_from_string(const std::string& name) {
  if (name == "jsonl") return CorpusFormat::Jsonl;
  if (name == "csv") return CorpusFormat::Csv;
  throw config_error("data.format must be jsonl or csv, got: " + name);
}

std::string to_string(CorpusFormat format) {
  return format == CorpusFormat::Jsonl ? "jsonl" : "csv";
}

ResponseRule rule_from_string(const std::string& name) {
  if (name == "1pl") return ResponseRule::OnePl;
  if (name == "kc-mastery") return ResponseRule::KcMastery;
  throw config_error("data.synth.rule must be 1pl or kc-mastery, got: " + name);
}

std::string to_string(ResponseRule rule) {
  return rule == ResponseRule::OnePl ? "1pl" : "kc-mastery";
}

void parse_data(const json& j, DataSection& out) {
  check_keys(j, "data", {"source", "dir", "format", "binarize_threshold", "synth", "split"});
  read_field(j, "data", "source", out.source);
  read_field(j, "data", "dir", out.dir);
  if (j.contains("format")) out.format = format_from_string(j.at("format").get<std::string>());
  read_field(j, "data", "binarize_threshold", out.binarize_threshold);
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    check_keys(s, "data.synth",
               {"n_students", "n_questions", "n_kcs", "density", "rule", "ability_sd",
                "difficulty_sd", "max_kcs_per_question"});
    read_field(s, "data.synth", "n_students", out.synth.n_students);
    read_field(s, "data.synth", "n_questions", out.synth.n_questions);
    read_field(s, "data.synth", "n_kcs", out.synth.n_kcs);
    read_field(s, "data.synth", "density", out.synth.density);
    if (s.contains("rule")) out.synth.rule = rule_from_string(s.at("rule").get<std::string>());
    read_field(s, "data.synth", "ability_sd", out.synth.ability_sd);
    read_field(s, "data.synth", "difficulty_sd", out.synth.difficulty_sd);
    read_field(s, "data.synth", "max_kcs_per_question", out.synth.max_kcs_per_question);
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    check_keys(s, "data.split",
               {"girt_fraction", "train_ratio", "val_ratio", "test_ratio", "heldout_size",
                "min_candidates"});
    read_field(s, "data.split", "girt_fraction", out.split.girt_fraction);
    read_field(s, "data.split", "train_ratio", out.split.train_ratio);
    read_field(s, "data.split", "val_ratio", out.split.val_ratio);
    read_field(s, "data.split", "test_ratio", out.split.test_ratio);
    read_field(s, "data.split", "heldout_size", out.split.heldout_size);
    read_field(s, "data.split", "min_candidates", out.split.min_candidates);
  }
}

void parse_backbone(const json& j, BackboneConfig& out) {
  check_keys(j, "backbone", {"h", "layers", "heads", "max_seq", "init_std"});
  read_field(j, "backbone", "h", out.h);
  read_field(j, "backbone", "layers", out.layers);
  read_field(j, "backbone", "heads", out.heads);
  read_field(j, "backbone", "max_seq", out.max_seq);
  read_field(j, "backbone", "init_std", out.init_std);
}

void parse_girt(const json& j, GirtSection& out) {
  check_keys(j, "girt", {"latent_dim", "projection_hidden", "prompt_template", "train"});
  read_field(j, "girt", "latent_dim", out.latent_dim);
  read_field(j, "girt", "projection_hidden", out.projection_hidden);
  read_field(j, "girt", "prompt_template", out.prompt_template);
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "girt.train",
               {"lambda", "epochs", "batch_size", "grad_accum", "lr_backbone", "lr_latent",
                "warmup_fraction", "weight_decay"});
    read_field(t, "girt.train", "lambda", out.train.lambda);
    read_field(t, "girt.train", "epochs", out.train.epochs);
    read_field(t, "girt.train", "batch_size", out.train.batch_size);
    read_field(t, "girt.train", "grad_accum", out.train.grad_accum);
    read_field(t, "girt.train", "lr_backbone", out.train.lr_backbone);
    read_field(t, "girt.train", "lr_latent", out.train.lr_latent);
    read_field(t, "girt.train", "warmup_fraction", out.train.warmup_fraction);
    read_field(t, "girt.train", "weight_decay", out.train.weight_decay);
  }
}

void parse_dpo(const json& j, DpoConfig& out) {
  check_keys(j, "dpo",
             {"beta", "m_pairs", "tau", "epochs", "batch_size", "lr", "warmup_fraction"});
  read_field(j, "dpo", "beta", out.beta);
  read_field(j, "dpo", "m_pairs", out.m_pairs);
  read_field(j, "dpo", "tau", out.tau);
  read_field(j, "dpo", "epochs", out.epochs);
  read_field(j, "dpo", "batch_size", out.batch_size);
  read_field(j, "dpo", "lr", out.lr);
  read_field(j, "dpo", "warmup_fraction", out.warmup_fraction);
}

void parse_scorer(const json& j, ScorerSection& out) {
  check_keys(j, "scorer", {"prompt_template", "binarize_targets", "train"});
  read_field(j, "scorer", "prompt_template", out.prompt_template);
  read_field(j, "scorer", "binarize_targets", out.binarize_targets);
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "scorer.train", {"epochs", "batch_size", "lr", "warmup_fraction"});
    read_field(t, "scorer.train", "epochs", out.train.epochs);
    read_field(t, "scorer.train", "batch_size", out.train.batch_size);
    read_field(t, "scorer.train", "lr", out.train.lr);
    read_field(t, "scorer.train", "warmup_fraction", out.train.warmup_fraction);
  }
}

void parse_irt(const json& j, IrtConfig& out) {
  check_keys(j, "irt", {"prior_sd", "max_sweeps", "tol"});
  read_field(j, "irt", "prior_sd", out.prior_sd);
  read_field(j, "irt", "max_sweeps", out.max_sweeps);
  read_field(j, "irt", "tol", out.tol);
}

void parse_cat(const json& j, CatSection& out) {
  check_keys(j, "cat",
             {"selectors", "t_max", "embed_dim", "workers", "n_samples", "lambda",
              "epochs_per_step", "max_update_epochs", "update_lr", "length_normalize",
              "generation"});
  read_field(j, "cat", "selectors", out.selectors);
  read_field(j, "cat", "t_max", out.t_max);
  read_field(j, "cat", "embed_dim", out.embed_dim);
  read_field(j, "cat", "workers", out.workers);
  read_field(j, "cat", "n_samples", out.session.n_samples);
  read_field(j, "cat", "lambda", out.session.lambda);
  read_field(j, "cat", "epochs_per_step", out.session.epochs_per_step);
  read_field(j, "cat", "max_update_epochs", out.session.max_update_epochs);
  read_field(j, "cat", "update_lr", out.session.update_lr);
  read_field(j, "cat", "length_normalize", out.session.length_normalize);
  if (j.contains("generation")) {
    const json& g = j.at("generation");
    check_keys(g, "cat.generation", {"temperature", "top_p", "top_k", "max_new_tokens", "greedy"});
    read_field(g, "cat.generation", "temperature", out.session.generation.temperature);
    read_field(g, "cat.generation", "top_p", out.session.generation.top_p);
    read_field(g, "cat.generation", "top_k", out.session.generation.top_k);
    read_field(g, "cat.generation", "max_new_tokens", out.session.generation.max_new_tokens);
    read_field(g, "cat.generation", "greedy", out.session.generation.greedy);
  }
}

void parse_eval(const json& j, EvalSection& out) {
  check_keys(j, "eval", {"folds", "alpha"});
  read_field(j, "eval", "folds", out.folds);
  read_field(j, "eval", "alpha", out.alpha);
}

PromptTemplate girt_template(const std::string& name) {
  if (name == "compact") return PromptTemplate::compact();
  if (name == "standard") return PromptTemplate::standard();
  return PromptTemplate::load(name);
}

std::string scorer_template(const std::string& name) {
  if (name == "compact") return ScoringModel::compact_template();
  if (name == "standard") return ScoringModel::standard_template();
  throw config_error("scorer.prompt_template must be compact or standard, got: " + name);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  check_keys(doc, "(root)",
             {"seed", "data", "backbone", "girt", "dpo", "scorer", "irt", "cat", "eval"});
  ExperimentConfig cfg;
  read_field(doc, "(root)", "seed", cfg.seed);
  if (doc.contains("data")) parse_data(doc.at("data"), cfg.data);
  if (doc.contains("backbone")) parse_backbone(doc.at("backbone"), cfg.backbone);
  if (doc.contains("girt")) parse_girt(doc.at("girt"), cfg.girt);
  if (doc.contains("dpo")) parse_dpo(doc.at("dpo"), cfg.dpo);
  if (doc.contains("scorer")) parse_scorer(doc.at("scorer"), cfg.scorer);
  if (doc.contains("irt")) parse_irt(doc.at("irt"), cfg.irt);
  if (doc.contains("cat")) parse_cat(doc.at("cat"), cfg.cat);
  if (doc.contains("eval")) parse_eval(doc.at("eval"), cfg.eval);

  // Per-stage seeds derive from the single top-level seed; thresholds are
  // declared once under data and propagated.
  cfg.data.split.seed = hash_seed(cfg.seed, "split");
  cfg.backbone.seed = hash_seed(cfg.seed, "backbone");
  cfg.girt.train.seed = hash_seed(cfg.seed, "girt");
  cfg.girt.train.binarize_threshold = cfg.data.binarize_threshold;
  cfg.dpo.seed = hash_seed(cfg.seed, "dpo");
  cfg.scorer.train.seed = hash_seed(cfg.seed, "scorer");
  cfg.cat.session.seed = hash_seed(cfg.seed, "cat");
  cfg.cat.session.binarize_threshold = cfg.data.binarize_threshold;

  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read config file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw parse_error("invalid JSON in " + path + ": " + e.what());
  }
  return from_json(doc);
}

ordered_json ExperimentConfig::resolved() const {
  ordered_json doc;
  doc["seed"] = seed;
  doc["data"] = {{"source", data.source},
                 {"dir", data.dir},
                 {"format", to_string(data.format)},
                 {"binarize_threshold", data.binarize_threshold},
                 {"synth",
                  {{"n_students", data.synth.n_students},
                   {"n_questions", data.synth.n_questions},
                   {"n_kcs", data.synth.n_kcs},
                   {"density", data.synth.density},
                   {"rule", to_string(data.synth.rule)},
                   {"ability_sd", data.synth.ability_sd},
                   {"difficulty_sd", data.synth.difficulty_sd},
                   {"max_kcs_per_question", data.synth.max_kcs_per_question}}},
                 {"split",
                  {{"girt_fraction", data.split.girt_fraction},
                   {"train_ratio", data.split.train_ratio},
                   {"val_ratio", data.split.val_ratio},
                   {"test_ratio", data.split.test_ratio},
                   {"heldout_size", data.split.heldout_size},
                   {"min_candidates", data.split.min_candidates}}}};
  doc["backbone"] = {{"h", backbone.h},
                     {"layers", backbone.layers},
                     {"heads", backbone.heads},
                     {"max_seq", backbone.max_seq},
                     {"init_std", backbone.init_std}};
  doc["girt"] = {{"latent_dim", girt.latent_dim},
                 {"projection_hidden", girt.projection_hidden},
                 {"prompt_template", girt.prompt_template},
                 {"train",
                  {{"lambda", girt.train.lambda},
                   {"epochs", girt.train.epochs},
                   {"batch_size", girt.train.batch_size},
                   {"grad_accum", girt.train.grad_accum},
                   {"lr_backbone", girt.train.lr_backbone},
                   {"lr_latent", girt.train.lr_latent},
                   {"warmup_fraction", girt.train.warmup_fraction},
                   {"weight_decay", girt.train.weight_decay}}}};
  doc["dpo"] = {{"beta", dpo.beta},
                {"m_pairs", dpo.m_pairs},
                {"tau", dpo.tau},
                {"epochs", dpo.epochs},
                {"batch_size", dpo.batch_size},
                {"lr", dpo.lr},
                {"warmup_fraction", dpo.warmup_fraction}};
  doc["scorer"] = {{"prompt_template", scorer.prompt_template},
                   {"binarize_targets", scorer.binarize_targets},
                   {"train",
                    {{"epochs", scorer.train.epochs},
                     {"batch_size", scorer.train.batch_size},
                     {"lr", scorer.train.lr},
                     {"warmup_fraction", scorer.train.warmup_fraction}}}};
  doc["irt"] = {{"prior_sd", irt.prior_sd}, {"max_sweeps", irt.max_sweeps}, {"tol", irt.tol}};
  doc["cat"] = {{"selectors", cat.selectors},
                {"t_max", cat.t_max},
                {"embed_dim", cat.embed_dim},
                {"workers", cat.workers},
                {"n_samples", cat.session.n_samples},
                {"lambda", cat.session.lambda},
                {"epochs_per_step", cat.session.epochs_per_step},
                {"max_update_epochs", cat.session.max_update_epochs},
                {"update_lr", cat.session.update_lr},
                {"length_normalize", cat.session.length_normalize},
                {"generation",
                 {{"temperature", cat.session.generation.temperature},
                  {"top_p", cat.session.generation.top_p},
                  {"top_k", cat.session.generation.top_k},
                  {"max_new_tokens", cat.session.generation.max_new_tokens},
                  {"greedy", cat.session.generation.greedy}}}};
  doc["eval"] = {{"folds", eval.folds}, {"alpha", eval.alpha}};
  return doc;
}

void ExperimentConfig::validate() const {
  if (data.source != "synthetic" && data.source != "directory")
    throw config_error("data.source must be synthetic or directory, got: " + data.source);
  if (data.source == "directory" && data.dir.empty())
    throw config_error("data.dir is required when data.source is directory");
  if (!(data.binarize_threshold > 0.0 && data.binarize_threshold <= 1.0))
    throw config_error("data.binarize_threshold must lie in (0,1]");
  girt.train.validate();
  if (girt.latent_dim <= 0) throw config_error("girt.latent_dim must be positive");
  girt_template(girt.prompt_template).validate();
  dpo.validate();
  scorer.train.validate();
  scorer_template(scorer.prompt_template);
  if (cat.selectors.empty()) throw config_error("cat.selectors must not be empty");
  for (const auto& name : cat.selectors) selector_from_string(name);
  if (cat.t_max <= 0) throw config_error("cat.t_max must be positive");
  if (cat.embed_dim <= 0) throw config_error("cat.embed_dim must be positive");
  if (cat.workers <= 0) throw config_error("cat.workers must be positive");
  cat.session.validate();
  if (eval.folds < 2) throw config_error("eval.folds must be at least 2");
  if (!(eval.alpha > 0.0 && eval.alpha < 1.0)) throw config_error("eval.alpha must lie in (0,1)");
}

void apply_override(json& doc, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw config_error("override must have the form dotted.path=value, got: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  std::vector<std::string> parts;
  size_t start = 0;
  while (true) {
    const size_t dot = path.find('.', start);
    parts.push_back(path.substr(start, dot == std::string::npos ? dot : dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (const auto& p : parts)
    if (p.empty()) throw config_error("override path has an empty segment: " + path);

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;  // bare strings need no quoting
  }

  json* node = &doc;
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    json& child = (*node)[parts[i]];
    if (!child.is_object() && !child.is_null())
      throw config_error("override path " + path + " crosses the non-object key " + parts[i]);
    node = &child;
  }
  (*node)[parts.back()] = value;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

namespace {

void write_resolved_config(const ExperimentConfig& config, const std::string& run_dir) {
  fs::create_directories(run_dir);
  const std::string path = run_dir + "/config.json";
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << config.resolved().dump(2) << '\n';
}

Corpus stage_corpus(const ExperimentConfig& config, const std::string& run_dir) {
  if (config.data.source == "directory")
    return load_corpus(config.data.dir, config.data.format);
  const std::string dir = run_dir + "/data";
  if (!fs::exists(dir + "/questions.json"))
    throw missing_artifact_error("no corpus under " + dir + "; run the synth stage first");
  return load_corpus(dir, config.data.format);
}

SplitPlan stage_split(const std::string& run_dir) {
  const std::string path = run_dir + "/split.json";
  if (!fs::exists(path))
    throw missing_artifact_error("no split plan at " + path + "; run the split stage first");
  return load_split(path);
}

GirtModel stage_girt_model(const std::string& run_dir) {
  if (!fs::exists(run_dir + "/girt/girt.json"))
    throw missing_artifact_error("no trained model under " + run_dir +
                                 "/girt; run the train_girt stage first");
  return GirtModel::load(run_dir + "/girt");
}

// Simulation runs on the aligned model when the dpo stage has produced one.
GirtModel stage_simulation_model(const std::string& run_dir) {
  if (fs::exists(run_dir + "/dpo/girt.json")) return GirtModel::load(run_dir + "/dpo");
  return stage_girt_model(run_dir);
}

std::vector<IrtItem> stage_item_bank(const std::string& run_dir) {
  const std::string path = run_dir + "/irt/item_bank.json";
  if (!fs::exists(path))
    throw missing_artifact_error("no item bank at " + path + "; run the fit_irt stage first");
  return load_item_bank(path);
}

ScoringModel stage_scorer(const std::string& run_dir) {
  if (!fs::exists(run_dir + "/scorer/scorer.json"))
    throw missing_artifact_error("no scorer under " + run_dir +
                                 "/scorer; run the train_scorer stage first");
  return ScoringModel::load(run_dir + "/scorer");
}

std::optional<double> safe_auc(const std::vector<double>& probs,
                               const std::vector<int>& outcomes) {
  bool pos = false, neg = false;
  for (int y : outcomes) (y ? pos : neg) = true;
  if (!pos || !neg || probs.empty()) return std::nullopt;
  return auc(probs, outcomes);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) throw numeric_error("pearson undefined for constant input");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

void run_synth(const ExperimentConfig& config, const std::string& run_dir) {
  config.validate();
  if (config.data.source != "synthetic")
    throw config_error("synth stage needs data.source = synthetic, got: " + config.data.source);
  write_resolved_config(config, run_dir);

  SynthResult result = synthesize_corpus(config.data.synth, hash_seed(config.seed, "synth"));
  const std::string dir = run_dir + "/data";
  fs::create_directories(dir);
  save_corpus(result.corpus, dir, config.data.format);

  ordered_json truth = {{"ability", result.truth.ability},
                        {"item_difficulty", result.truth.item_difficulty},
                        {"kc_difficulty", result.truth.kc_difficulty},
                        {"mastery", result.truth.mastery}};
  std::ofstream out(dir + "/truth.json");
  if (!out) throw io_error("cannot write " + dir + "/truth.json");
  out << truth.dump(2) << '\n';
}

void run_split(const ExperimentConfig& config, const std::string& run_dir) {
  config.validate();
  write_resolved_config(config, run_dir);
  Corpus corpus = stage_corpus(config, run_dir);
  SplitPlan plan = greedy_set_cover_split(corpus, config.data.split);
  save_split(plan, run_dir + "/split.json");
}

void run_train_girt(const ExperimentConfig& config, const std::string& run_dir) {
  config.validate();
  write_resolved_config(config, run_dir);
  Corpus corpus = stage_corpus(config, run_dir);
  SplitPlan plan = stage_split(run_dir);

  GirtModel model = GirtModel::init(config.backbone, config.girt.latent_dim,
                                    config.girt.projection_hidden, corpus, plan.girt_group,
                                    girt_template(config.girt.prompt_template),
                                    hash_seed(config.seed, "girt-init"));
  auto responses = girt_train_responses(corpus, plan);
  auto history = fit(model, corpus, responses, config.girt.train);

  fs::create_directories(run_dir + "/girt");
  model.save(run_dir + "/girt");
  save_loss_history(history, run_dir + "/girt/loss_history.csv");
}

void run_align_dpo(const ExperimentConfig& config, const std::string& run_dir) {
  config.validate();
  write_resolved_config(config, run_dir);
  Corpus corpus = stage_corpus(config, run_dir);
  SplitPlan plan = stage_split(run_dir);
  GirtModel model = stage_girt_model(run_dir);

  auto responses = girt_train_responses(corpus, plan);
  auto pairs = build_pairs(model, corpus, responses, config.dpo);
  fs::create_directories(run_dir + "/dpo");
  save_pairs(pairs, run_dir + "/dpo/pairs.jsonl");

  DpoResult result = dpo_fit(model, pairs, corpus, config.dpo);
  model.save(run_dir + "/dpo");

  ordered_json history = {{"n_pairs", pairs.size()}, {"epoch_loss", result.epoch_loss}};
  if (!pairs.empty())
    history["implicit_reward_accuracy"] =
        implicit_reward_accuracy(model, result.reference, pairs, corpus);
  std::ofstream out(run_dir + "/dpo/history.json");
  if (!out) throw io_error("cannot write " + run_dir + "/dpo/history.json");
  out << history.dump(2) << '\n';
}

void run_train_scorer(const ExperimentConfig& config, const std::string& run_dir) {
  config.validate();
  write_resolved_config(config, run_dir);
  Corpus corpus = stage_corpus(config, run_dir);
  SplitPlan plan = stage_split(run_dir);

  ScoringModel model = ScoringModel::init(config.backbone, hash_seed(config.seed, "scorer-init"));
  model.set_prompt_template(scorer_template(config.scorer.prompt_template));
  const Corpus target_corpus = config.scorer.binarize_targets
                                   ? binarize_scores(corpus, config.data.binarize_threshold)
                                   : corpus;
  auto train = girt_train_responses(target_corpus, plan);
  auto history = scorer_fit(model, target_corpus, train, config.scorer.train);
  fs::create_directories(run_dir + "/scorer");
  model.save(run_dir + "/scorer");

  // Held-out check on the girt group's test partition.
  std::vector<double> predicted, actual;
  for (const auto& sid : plan.girt_group)
    for (const auto& qid : plan.by_student.at(sid).test)
      if (const StudentResponse* r = corpus.find_response(sid, qid)) {
        predicted.push_back(model.score(corpus.question(qid), r->code));
        actual.push_back(r->score);
      }
  ordered_json metrics = {{"train_bce", history}};
  metrics["test_pearson"] = nullptr;
  if (predicted.size() >= 2) {
    try {
      metrics["test_pearson"] = pearson(predicted, actual);
    } catch (const Error&) {
      // constant targets: leave null
    }
  }
  std::ofstream out(run_dir + "/scorer/metrics.json");
  if (!out) throw io_error("cannot write " + run_dir + "/scorer/metrics.json");
  out << metrics.dump(2) << '\n';
}

void run_fit_irt(const ExperimentConfig& config, const std::string& run_dir) {
  config.validate();
  write_resolved_config(config, run_dir);
  Corpus corpus = stage_corpus(config, run_dir);
  SplitPlan plan = stage_split(run_dir);

  // The proxy model is calibrated on the girt group only; cat-group students
  // stay unseen.
  Corpus binary = binarize_scores(corpus, config.data.binarize_threshold);
  std::set<std::string> girt_students(plan.girt_group.begin(), plan.girt_group.end());
  std::vector<const StudentResponse*> responses;
  for (const auto& r : binary.responses)
    if (girt_students.count(r.student_id)) responses.push_back(&r);
  if (responses.empty())
    throw validation_error("no girt-group responses available for IRT calibration");
  IrtCalibration cal = calibrate(responses, config.irt);

  // Questions never answered by the calibration group fall back to the prior
  // mean difficulty so the bank covers the whole corpus.
  std::set<std::string> known;
  for (const auto& item : cal.items) known.insert(item.question_id);
  for (const auto& q : corpus.questions)
    if (!known.count(q.id)) cal.items.push_back({q.id, 0.0});
  std::sort(cal.items.begin(), cal.items.end(),
            [](const IrtItem& a, const IrtItem& b) { return a.question_id < b.question_id; });

  fs::create_directories(run_dir + "/irt");
  save_item_bank(cal.items, run_dir + "/irt/item_bank.json");
  ordered_json abilities = ordered_json::object();
  for (const auto& a : cal.abilities) abilities[a.student_id] = a.theta;
  std::ofstream out(run_dir + "/irt/abilities.json");
  if (!out) throw io_error("cannot write " + run_dir + "/irt/abilities.json");
  out << abilities.dump(2) << '\n';
}

void run_simulate(const ExperimentConfig& config, const std::string& run_dir) {
  config.validate();
  write_resolved_config(config, run_dir);
  Corpus corpus = stage_corpus(config, run_dir);
  SplitPlan plan = stage_split(run_dir);
  if (plan.cat_group.empty()) throw validation_error("split plan has no cat-group students");
  GirtModel model = stage_simulation_model(run_dir);

  IrtCalibration bank;
  bank.items = stage_item_bank(run_dir);
  ReplayOracle oracle(corpus);
  HashedBagEmbedder embedder(config.cat.embed_dim);

  std::optional<ScoringModel> scorer;
  for (const auto& name : config.cat.selectors)
    if (selector_from_string(name) == Selector::Uncertainty && !scorer)
      scorer = stage_scorer(run_dir);

  fs::create_directories(run_dir + "/sim");
  const size_t n_students = plan.cat_group.size();
  const int workers = std::min<int>(config.cat.workers, static_cast<int>(n_students));
  for (const auto& name : config.cat.selectors) {
    CatConfig session_cfg = config.cat.session;
    session_cfg.selector = selector_from_string(name);

    std::vector<ordered_json> results(n_students);
    // Sessions are independent; each worker runs against its own model
    // snapshot, so results do not depend on the worker count or schedule.
    auto simulate_student = [&](size_t idx, GirtModel& m, const StepContext& ctx) {
      const std::string& sid = plan.cat_group[idx];
      const StudentSplit& sp = plan.by_student.at(sid);
      if (static_cast<int>(sp.train.size()) < config.cat.t_max)
        throw config_error("cat.t_max exceeds the candidate pool of student " + sid);

      std::vector<IrtItem> heldout;
      std::vector<int> outcomes;
      for (const auto& qid : sp.test) {
        heldout.push_back({qid, bank.b_of(qid)});
        const StudentResponse* r = corpus.find_response(sid, qid);
        if (!r)
          throw validation_error("held-out question " + qid + " has no response from " + sid);
        outcomes.push_back(r->score >= config.data.binarize_threshold ? 1 : 0);
      }

      CatSession session =
          init_session(sid, sp.train, m, hash_seed(config.cat.session.seed, name, sid));
      auto trajectory =
          run_session(session, m, corpus, oracle, session_cfg, ctx, config.cat.t_max, heldout);

      std::vector<std::string> administered;
      for (const auto& item : session.administered) administered.push_back(item.question_id);
      std::vector<std::vector<double>> predictions;
      for (const auto& point : trajectory) predictions.push_back(point.heldout_predictions);

      results[idx] = {{"administered", administered},
                      {"heldout", sp.test},
                      {"outcomes", outcomes},
                      {"predictions", predictions}};
    };

    if (workers <= 1) {
      StepContext ctx;
      ctx.embedder = &embedder;
      ctx.irt = &bank;
      if (scorer) ctx.scorer = &*scorer;
      for (size_t i = 0; i < n_students; ++i) simulate_student(i, model, ctx);
    } else {
      std::atomic<size_t> next{0};
      std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            GirtModel local_model = model;
            std::optional<ScoringModel> local_scorer = scorer;
            StepContext ctx;
            ctx.embedder = &embedder;
            ctx.irt = &bank;
            if (local_scorer) ctx.scorer = &*local_scorer;
            for (size_t i = next.fetch_add(1); i < n_students; i = next.fetch_add(1))
              simulate_student(i, local_model, ctx);
          } catch (...) {
            errors[static_cast<size_t>(w)] = std::current_exception();
          }
        });
      }
      for (auto& thread : pool) thread.join();
      for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    }

    ordered_json students = ordered_json::object();
    for (size_t i = 0; i < n_students; ++i) students[plan.cat_group[i]] = std::move(results[i]);

    ordered_json doc = {
        {"selector", name}, {"t_max", config.cat.t_max}, {"students", students}};
    const std::string path = run_dir + "/sim/" + name + ".json";
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path);
    out << doc.dump() << '\n';
  }
}

ordered_json run_evaluate(const ExperimentConfig& config, const std::string& run_dir) {
  config.validate();
  write_resolved_config(config, run_dir);
  Corpus corpus = stage_corpus(config, run_dir);

  std::vector<std::string> question_ids;
  for (const auto& q : corpus.questions) question_ids.push_back(q.id);

  ordered_json selectors_report = ordered_json::object();
  // fold -> selector -> per-t AUC (pooled within the fold), for comparisons.
  std::map<std::string, std::vector<std::optional<double>>> final_fold_auc;
  std::map<std::string, int> fold_of;
  std::vector<std::string> csv_rows;
  int t_max = 0;

  for (const auto& name : config.cat.selectors) {
    const std::string path = run_dir + "/sim/" + name + ".json";
    if (!fs::exists(path))
      throw missing_artifact_error("no simulation output at " + path +
                                   "; run the simulate stage first");
    std::ifstream in(path);
    json doc;
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw parse_error("invalid JSON in " + path + ": " + e.what());
    }
    t_max = doc.at("t_max").get<int>();
    const json& students = doc.at("students");

    if (fold_of.empty()) {
      std::vector<std::string> sids;
      for (auto it = students.begin(); it != students.end(); ++it) sids.push_back(it.key());
      fold_of = kfold_assignment(sids, std::min<int>(config.eval.folds,
                                                     static_cast<int>(sids.size())),
                                 hash_seed(config.seed, "folds"));
    }

    ordered_json per_t = ordered_json::array();
    std::vector<std::optional<double>> fold_auc_final(
        static_cast<size_t>(config.eval.folds), std::nullopt);
    std::vector<std::vector<std::string>> administered;
    for (auto it = students.begin(); it != students.end(); ++it)
      administered.push_back(it->at("administered").get<std::vector<std::string>>());

    for (int t = 1; t <= t_max; ++t) {
      std::vector<double> pool;
      std::vector<int> pool_y;
      std::map<int, std::pair<std::vector<double>, std::vector<int>>> per_fold;
      for (auto it = students.begin(); it != students.end(); ++it) {
        auto preds = it->at("predictions")
                         .at(static_cast<size_t>(t - 1))
                         .get<std::vector<double>>();
        auto ys = it->at("outcomes").get<std::vector<int>>();
        pool.insert(pool.end(), preds.begin(), preds.end());
        pool_y.insert(pool_y.end(), ys.begin(), ys.end());
        auto& bucket = per_fold[fold_of.at(it.key())];
        bucket.first.insert(bucket.first.end(), preds.begin(), preds.end());
        bucket.second.insert(bucket.second.end(), ys.begin(), ys.end());
      }
      const double acc = accuracy(pool, pool_y);
      const auto a = safe_auc(pool, pool_y);
      ordered_json row = {{"t", t}, {"accuracy", acc}};
      row["auc"] = a ? ordered_json(*a) : ordered_json(nullptr);
      per_t.push_back(row);
      csv_rows.push_back(name + "," + std::to_string(t) + "," + std::to_string(acc) + "," +
                         (a ? std::to_string(*a) : std::string()));
      if (t == t_max)
        for (const auto& [fold, bucket] : per_fold)
          if (fold >= 0 && fold < static_cast<int>(fold_auc_final.size()))
            fold_auc_final[static_cast<size_t>(fold)] = safe_auc(bucket.first, bucket.second);
    }

    auto exposure = exposure_rates(administered, question_ids);
    std::vector<double> exposure_values;
    for (const auto& [qid, pct] : exposure) exposure_values.push_back(pct);
    auto overlaps = overlap_rates(administered);

    ordered_json fold_json = ordered_json::array();
    for (const auto& a : fold_auc_final)
      fold_json.push_back(a ? ordered_json(*a) : ordered_json(nullptr));
    selectors_report[name] = {
        {"per_t", per_t},
        {"fold_auc_final", fold_json},
        {"exposure_median", median(exposure_values)},
        {"overlap_mean", overlaps.empty() ? 0.0 : mean(overlaps)}};
    final_fold_auc[name] = fold_auc_final;
  }

  // Paired comparison of every generative selector against the random
  // baseline over common folds at the final step.
  ordered_json comparisons = ordered_json::array();
  auto random_it = final_fold_auc.find("random");
  if (random_it != final_fold_auc.end()) {
    for (const auto& name : config.cat.selectors) {
      if (name == "random") continue;
      const auto& mine = final_fold_auc.at(name);
      std::vector<double> a, b;
      for (size_t f = 0; f < mine.size(); ++f)
        if (mine[f] && random_it->second[f]) {
          a.push_back(*mine[f]);
          b.push_back(*random_it->second[f]);
        }
      if (a.size() < 2) continue;
      TTestResult test = paired_t_test(a, b, config.eval.alpha);
      comparisons.push_back({{"selector", name},
                             {"baseline", "random"},
                             {"t", t_max},
                             {"delta_auc", mean(a) - mean(b)},
                             {"t_stat", test.t_stat},
                             {"p_value", test.p_value},
                             {"significant", test.significant}});
    }
  }

  ordered_json report = {{"t_max", t_max},
                         {"selectors", selectors_report},
                         {"comparisons", comparisons}};
  {
    std::ofstream out(run_dir + "/report.json");
    if (!out) throw io_error("cannot write " + run_dir + "/report.json");
    out << report.dump(2) << '\n';
  }
  {
    std::ofstream out(run_dir + "/report.csv");
    if (!out) throw io_error("cannot write " + run_dir + "/report.csv");
    out << "selector,t,accuracy,auc\n";
    for (const auto& row : csv_rows) out << row << '\n';
  }
  return report;
}

std::vector<std::string> stage_names() {
  return {"synth",        "split",   "train_girt", "align_dpo",
          "train_scorer", "fit_irt", "simulate",   "evaluate"};
}

void run_stage(const std::string& stage, const ExperimentConfig& config,
               const std::string& run_dir) {
  if (stage == "pipeline") {
    for (const auto& name : stage_names()) {
      if (name == "synth" && config.data.source != "synthetic") continue;
      run_stage(name, config, run_dir);
    }
    return;
  }
  if (stage == "synth") return run_synth(config, run_dir);
  if (stage == "split") return run_split(config, run_dir);
  if (stage == "train_girt") return run_train_girt(config, run_dir);
  if (stage == "align_dpo") return run_align_dpo(config, run_dir);
  if (stage == "train_scorer") return run_train_scorer(config, run_dir);
  if (stage == "fit_irt") return run_fit_irt(config, run_dir);
  if (stage == "simulate") return run_simulate(config, run_dir);
  if (stage == "evaluate") {
    run_evaluate(config, run_dir);
    return;
  }
  throw config_error("unknown stage: " + stage + " (expected pipeline or one of " +
                     [] {
                       std::string s;
                       for (const auto& n : stage_names()) s += n + " ";
                       return s;
                     }() +
                     ")");
}

}  // namespace gencat
