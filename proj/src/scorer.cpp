#include "gencat/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

using nlohmann::json;
using nlohmann::ordered_json;

namespace gencat {

void ScorerConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0) throw config_error("epochs and batch size must be positive");
  if (!(lr > 0.0)) throw config_error("learning rate must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0))
    throw config_error("warmup fraction must lie in [0,1]");
}

double scorer_bce(double predicted, double score) {
  if (!(score >= 0.0 && score <= 1.0)) throw validation_error("target score outside [0,1]");
  const double p = std::clamp(predicted, 1e-6, 1.0 - 1e-6);
  return -(score * std::log(p) + (1.0 - score) * std::log(1.0 - p));
}

ScoringModel ScoringModel::init(const BackboneConfig& config, uint64_t seed) {
  ScoringModel model;
  BackboneConfig bcfg = config;
  bcfg.seed = hash_seed(seed, "scorer");
  model.backbone_ = TransformerLm(bcfg);
  model.template_ = compact_template();
  model.verdict_correct_ = CharTokenizer::char_to_id('1');
  model.verdict_incorrect_ = CharTokenizer::char_to_id('0');
  return model;
}

void ScoringModel::set_prompt_template(const std::string& tmpl) {
  if (tmpl.find("{question}") == std::string::npos || tmpl.find("{code}") == std::string::npos)
    throw config_error("scoring template needs {question} and {code} slots");
  template_ = tmpl;
}

std::string ScoringModel::compact_template() { return "{question}\n{code}\nscore:"; }

std::string ScoringModel::standard_template() {
  return "Score the student written code for the following problem by only outputting a "
         "single integer between 0 and 1.\n"
         "The problem is: {question}\n"
         "The student code is: {code}\n"
         "The score is:";
}

namespace {

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  const size_t pos = text.find(from);
  if (pos != std::string::npos) text.replace(pos, from.size(), to);
  return text;
}

}  // namespace

std::string ScoringModel::render_prompt(const Question& question,
                                        const std::string& code) const {
  return replace_once(replace_once(template_, "{question}", question.text), "{code}", code);
}

std::vector<int> ScoringModel::prompt_tokens(const Question& question,
                                             const std::string& code) const {
  std::vector<int> tokens{CharTokenizer::kBos};
  for (int id : backbone_.tokenizer().encode(render_prompt(question, code)))
    tokens.push_back(id);
  return tokens;
}

double ScoringModel::score(const Question& question, const std::string& code) const {
  auto tokens = prompt_tokens(question, code);
  Mat lg = backbone_.logits(backbone_.embed_tokens(tokens));
  const double l1 = lg(lg.rows() - 1, verdict_correct_);
  const double l0 = lg(lg.rows() - 1, verdict_incorrect_);
  const double m = std::max(l1, l0);
  const double e1 = std::exp(l1 - m), e0 = std::exp(l0 - m);
  return e1 / (e0 + e1);
}

std::vector<double> scorer_fit(ScoringModel& model, const Corpus& corpus,
                               const std::vector<const StudentResponse*>& responses,
                               const ScorerConfig& config) {
  config.validate();
  if (responses.empty()) throw validation_error("no scorer training responses");

  nn::AdamWConfig opt_cfg;
  opt_cfg.lr = config.lr;
  nn::AdamW opt(opt_cfg);

  const size_t window = static_cast<size_t>(config.batch_size);
  const size_t steps_per_epoch = (responses.size() + window - 1) / window;
  const double warmup_steps =
      config.warmup_fraction * static_cast<double>(steps_per_epoch * config.epochs);
  const int id1 = model.verdict_correct();
  const int id0 = model.verdict_incorrect();

  std::vector<size_t> order(responses.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> history;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(hash_seed(config.seed, "scorer-epoch", static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double sum_loss = 0.0;
    size_t done = 0;
    while (done < order.size()) {
      const size_t take = std::min(window, order.size() - done);
      const double inv = 1.0 / static_cast<double>(take);

      for (size_t b = 0; b < take; ++b) {
        const StudentResponse& r = *responses[order[done + b]];
        const Question& q = corpus.question(r.question_id);
        auto tokens = model.prompt_tokens(q, r.code);

        const double loss = model.backbone().apply_logit_loss(
            model.backbone().embed_tokens(tokens),
            [&](const Mat& lg, Mat& d_logits) {
              const long last = lg.rows() - 1;
              const double diff = lg(last, id1) - lg(last, id0);
              const double p = 1.0 / (1.0 + std::exp(-diff));
              // d(BCE)/d(l1) = p_clamped-free form: (p - a), mirrored on l0.
              d_logits(last, id1) = (p - r.score) * inv;
              d_logits(last, id0) = (r.score - p) * inv;
              return scorer_bce(p, r.score);
            },
            true, &tokens);
        if (!std::isfinite(loss))
          throw numeric_error("non-finite scorer loss on (" + r.student_id + ", " +
                              r.question_id + ")");
        sum_loss += loss;
      }

      ++step;
      const double lr_scale =
          warmup_steps > 0.0 ? std::min(1.0, static_cast<double>(step) / warmup_steps) : 1.0;
      opt.step(model.backbone().params(), lr_scale);
      nn::zero_grads(model.backbone().params());
      done += take;
    }
    history.push_back(sum_loss / static_cast<double>(order.size()));
  }
  return history;
}

void ScoringModel::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  backbone_.save(dir + "/backbone");
  ordered_json manifest = {{"version", "1"},
                           {"verdict_correct", verdict_correct_},
                           {"verdict_incorrect", verdict_incorrect_},
                           {"template", template_}};
  std::ofstream out(dir + "/scorer.json");
  if (!out) throw io_error("cannot write scorer manifest in " + dir);
  out << manifest.dump(2) << '\n';
}

ScoringModel ScoringModel::load(const std::string& dir) {
  std::ifstream in(dir + "/scorer.json");
  if (!in) throw missing_artifact_error("scorer manifest not found in " + dir);
  json manifest = json::parse(in);
  ScoringModel model;
  model.backbone_ = TransformerLm::load(dir + "/backbone");
  model.verdict_correct_ = manifest.at("verdict_correct").get<int>();
  model.verdict_incorrect_ = manifest.at("verdict_incorrect").get<int>();
  model.set_prompt_template(manifest.at("template").get<std::string>());
  return model;
}

}  // namespace gencat
