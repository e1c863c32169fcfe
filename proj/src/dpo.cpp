#include "gencat/dpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

using nlohmann::json;
using nlohmann::ordered_json;

namespace gencat {

void DpoConfig::validate() const {
  if (!(beta > 0.0)) throw config_error("beta must be positive");
  if (m_pairs <= 0) throw config_error("m_pairs must be positive");
  if (!(tau >= 0.0)) throw config_error("tau must be non-negative");
  if (epochs <= 0 || batch_size <= 0) throw config_error("epochs and batch size must be positive");
  if (!(lr > 0.0)) throw config_error("learning rate must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0))
    throw config_error("warmup fraction must lie in [0,1]");
}

double response_likelihood(double score, double predicted) {
  if (!(score >= 0.0 && score <= 1.0)) throw validation_error("score outside [0,1]");
  const double p = std::clamp(predicted, 1e-6, 1.0 - 1e-6);
  return std::pow(p, score) * std::pow(1.0 - p, 1.0 - score);
}

std::vector<PreferencePair> build_pairs(const GirtModel& model, const Corpus& corpus,
                                        const std::vector<const StudentResponse*>& responses,
                                        const DpoConfig& config) {
  config.validate();

  // Co-responders within the partition, grouped by question.
  std::map<std::string, std::vector<const StudentResponse*>> by_question;
  for (const auto* r : responses) by_question[r->question_id].push_back(r);

  std::vector<PreferencePair> out;
  for (const auto* r : responses) {
    const Question& q = corpus.question(r->question_id);
    const double a_hat = model.predicted_correctness(r->student_id, q);
    const double own = response_likelihood(r->score, a_hat);

    std::vector<PreferencePair> candidates;
    for (const auto* other : by_question[r->question_id]) {
      if (other->student_id == r->student_id) continue;
      if (other->code == r->code) continue;
      const double gap = own - response_likelihood(other->score, a_hat);
      if (gap > config.tau)
        candidates.push_back({r->student_id, r->question_id, other->student_id, r->code,
                              other->code, gap});
    }
    std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
      if (a.gap != b.gap) return a.gap > b.gap;
      return a.other_student_id < b.other_student_id;
    });
    std::set<std::string> seen_codes;
    int kept = 0;
    for (auto& c : candidates) {
      if (kept >= config.m_pairs) break;
      if (!seen_codes.insert(c.dispreferred_code).second) continue;
      out.push_back(std::move(c));
      ++kept;
    }
  }
  return out;
}

namespace {

std::vector<int> code_targets(const TransformerLm& backbone, const std::string& code) {
  std::vector<int> targets = backbone.tokenizer().encode(code);
  targets.push_back(CharTokenizer::kEos);
  return targets;
}

struct PairLogps {
  double policy_pref, policy_dis, ref_pref, ref_dis;
  // Cached prompts/targets so the gradient pass can reuse them.
  AssembledPrompt policy_prompt;
  std::vector<int> pref_targets, dis_targets;
};

PairLogps pair_logps(const GirtModel& model, const TransformerLm& reference,
                     const PreferencePair& pair, const Corpus& corpus) {
  const Question& q = corpus.question(pair.question_id);
  Vec mastery = model.mastery_of(pair.student_id);
  PairLogps lp;
  lp.policy_prompt = model.prompt_for(q, mastery);
  AssembledPrompt ref_prompt = assemble_prompt(q, mastery, model.kcs(), model.embedder(),
                                               reference, model.prompt_template());
  lp.pref_targets = code_targets(model.backbone(), pair.preferred_code);
  lp.dis_targets = code_targets(model.backbone(), pair.dispreferred_code);
  lp.policy_pref =
      model.backbone().sequence_log_prob(lp.policy_prompt.embeddings, lp.pref_targets).total;
  lp.policy_dis =
      model.backbone().sequence_log_prob(lp.policy_prompt.embeddings, lp.dis_targets).total;
  lp.ref_pref = reference.sequence_log_prob(ref_prompt.embeddings, lp.pref_targets).total;
  lp.ref_dis = reference.sequence_log_prob(ref_prompt.embeddings, lp.dis_targets).total;
  return lp;
}

double margin_u(const PairLogps& lp) {
  return (lp.policy_pref - lp.ref_pref) - (lp.policy_dis - lp.ref_dis);
}

}  // namespace

double dpo_pair_loss(const GirtModel& model, const TransformerLm& reference,
                     const PreferencePair& pair, const Corpus& corpus, double beta) {
  const double u = margin_u(pair_logps(model, reference, pair, corpus));
  // -log sigmoid(beta*u), computed stably.
  const double x = beta * u;
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double implicit_reward_accuracy(const GirtModel& model, const TransformerLm& reference,
                                const std::vector<PreferencePair>& pairs,
                                const Corpus& corpus) {
  if (pairs.empty()) throw validation_error("implicit-reward accuracy over empty pair set");
  int hits = 0;
  for (const auto& pair : pairs)
    if (margin_u(pair_logps(model, reference, pair, corpus)) > 0.0) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

DpoResult dpo_fit(GirtModel& model, const std::vector<PreferencePair>& pairs,
                  const Corpus& corpus, const DpoConfig& config) {
  config.validate();
  DpoResult result;
  result.reference = model.backbone();  // post-SFT snapshot
  if (pairs.empty()) {
    std::cerr << "dpo_fit: empty pair set, nothing to align\n";
    return result;
  }

  nn::AdamWConfig opt_cfg;
  opt_cfg.lr = config.lr;
  nn::AdamW opt(opt_cfg);

  const size_t window = static_cast<size_t>(config.batch_size);
  const size_t steps_per_epoch = (pairs.size() + window - 1) / window;
  const double warmup_steps =
      config.warmup_fraction * static_cast<double>(steps_per_epoch * config.epochs);

  std::vector<size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(hash_seed(config.seed, "dpo", static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double sum_loss = 0.0;
    size_t done = 0;
    while (done < order.size()) {
      const size_t take = std::min(window, order.size() - done);
      const double inv = 1.0 / static_cast<double>(take);

      for (size_t b = 0; b < take; ++b) {
        const PreferencePair& pair = pairs[order[done + b]];
        PairLogps lp = pair_logps(model, result.reference, pair, corpus);
        const double u = margin_u(lp);
        const double x = config.beta * u;
        const double loss =
            x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
        if (!std::isfinite(loss))
          throw numeric_error("non-finite DPO loss on (" + pair.student_id + ", " +
                              pair.question_id + ")");
        sum_loss += loss;

        // d(loss)/d(policy logp) = -sigmoid(-x)*beta for y+, +... for y-.
        // teacher_forced_nll backprops the NLL = -logp, flipping the signs.
        const double coeff = config.beta / (1.0 + std::exp(x));
        model.backbone().teacher_forced_nll(lp.policy_prompt.embeddings, lp.pref_targets,
                                            coeff * inv, true, nullptr);
        model.backbone().teacher_forced_nll(lp.policy_prompt.embeddings, lp.dis_targets,
                                            -coeff * inv, true, nullptr);
      }

      ++step;
      const double lr_scale =
          warmup_steps > 0.0 ? std::min(1.0, static_cast<double>(step) / warmup_steps) : 1.0;
      opt.step(model.backbone().params(), lr_scale);
      nn::zero_grads(model.backbone().params());
      done += take;
    }
    result.epoch_loss.push_back(sum_loss / static_cast<double>(order.size()));
  }
  return result;
}

void save_pairs(const std::vector<PreferencePair>& pairs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write preference pairs: " + path);
  for (const auto& p : pairs) {
    ordered_json line = {{"student_id", p.student_id},
                         {"question_id", p.question_id},
                         {"other_student_id", p.other_student_id},
                         {"preferred", p.preferred_code},
                         {"dispreferred", p.dispreferred_code},
                         {"gap", p.gap}};
    out << line.dump() << '\n';
  }
}

std::vector<PreferencePair> load_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw missing_artifact_error("preference pairs not found: " + path);
  std::vector<PreferencePair> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw parse_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    out.push_back({j.at("student_id").get<std::string>(), j.at("question_id").get<std::string>(),
                   j.at("other_student_id").get<std::string>(),
                   j.at("preferred").get<std::string>(), j.at("dispreferred").get<std::string>(),
                   j.at("gap").get<double>()});
  }
  return out;
}

}  // namespace gencat
