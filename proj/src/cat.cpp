#include "gencat/cat.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

using nlohmann::ordered_json;

namespace gencat {

const StudentResponse& ReplayOracle::response(const std::string& student_id,
                                              const std::string& question_id) const {
  const StudentResponse* r = corpus_.find_response(student_id, question_id);
  if (!r)
    throw missing_artifact_error("no recorded response for (" + student_id + ", " +
                                 question_id + ")");
  return *r;
}

Selector selector_from_string(const std::string& name) {
  if (name == "uncertainty") return Selector::Uncertainty;
  if (name == "diversity") return Selector::Diversity;
  if (name == "information") return Selector::Information;
  if (name == "irt-fisher") return Selector::IrtFisher;
  if (name == "random") return Selector::Random;
  throw config_error("unknown selector: " + name +
                     " (expected uncertainty|diversity|information|irt-fisher|random)");
}

std::string to_string(Selector selector) {
  switch (selector) {
    case Selector::Uncertainty: return "uncertainty";
    case Selector::Diversity: return "diversity";
    case Selector::Information: return "information";
    case Selector::IrtFisher: return "irt-fisher";
    case Selector::Random: return "random";
  }
  throw config_error("unknown selector value");
}

void CatConfig::validate() const {
  if (n_samples <= 0) throw config_error("n_samples must be positive");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw config_error("lambda must lie in [0,1]");
  if (epochs_per_step <= 0 || max_update_epochs < epochs_per_step)
    throw config_error("step schedule must be positive with max >= per-step epochs");
  if (!(update_lr > 0.0)) throw config_error("update learning rate must be positive");
  if (!(binarize_threshold > 0.0 && binarize_threshold <= 1.0))
    throw config_error("binarize threshold must lie in (0,1]");
  generation.validate();
}

CatSession init_session(const std::string& student_id, std::vector<std::string> candidates,
                        const GirtModel& model, uint64_t seed) {
  if (candidates.empty()) throw validation_error("empty candidate pool");
  auto students = model.latent_students();
  if (students.empty()) throw validation_error("latent table is empty");

  CatSession session;
  session.student_id = student_id;
  session.candidates = std::move(candidates);
  std::sort(session.candidates.begin(), session.candidates.end());
  session.seed = seed;

  Vec mean = Vec::Zero(model.projection().latent_dim());
  for (const auto& sid : students) mean += model.latent(sid).value.col(0);
  mean /= static_cast<double>(students.size());
  session.z.init_const(static_cast<int>(mean.size()), 1, 0.0);
  session.z.value = mean;
  return session;
}

namespace {

std::vector<int> code_targets(const TransformerLm& backbone, const std::string& code) {
  std::vector<int> targets = backbone.tokenizer().encode(code);
  targets.push_back(CharTokenizer::kEos);
  return targets;
}

// Mean total loss and (optionally) its z-gradient over administered items.
double administered_loss(const CatSession& session, GirtModel& model, const Corpus& corpus,
                         const CatConfig& config, const Vec& z, Vec* d_z) {
  if (session.administered.empty()) throw validation_error("no administered responses yet");
  const double inv = 1.0 / static_cast<double>(session.administered.size());
  double total = 0.0;
  if (d_z) *d_z = Vec::Zero(z.size());
  for (const auto& item : session.administered) {
    const Question& q = corpus.question(item.question_id);
    KnowledgeProjection::Cache pcache;
    Vec theta = model.projection().project(z, pcache);
    AssembledPrompt prompt = model.prompt_for(q, theta);
    auto targets = code_targets(model.backbone(), item.code);

    double sft;
    Vec d_theta = Vec::Zero(theta.size());
    if (d_z) {
      Mat d_prompt;
      sft = model.backbone().teacher_forced_nll(prompt.embeddings, targets,
                                                (1.0 - config.lambda) * inv, false, &d_prompt);
      accumulate_mastery_grad(d_prompt, prompt, model.embedder(), d_theta);
    } else {
      sft = -model.backbone().sequence_log_prob(prompt.embeddings, targets).total;
    }
    const double a = item.score >= config.binarize_threshold ? 1.0 : 0.0;
    const double kc = kc_alignment_loss(theta, q, model.kcs(), a,
                                        d_z ? &d_theta : nullptr, config.lambda * inv);
    if (d_z) {
      *d_z += model.projection().backward(d_theta, pcache);
      nn::zero_grads(model.projection().params());
    }
    total += inv * ((1.0 - config.lambda) * sft + config.lambda * kc);
  }
  if (!std::isfinite(total)) throw numeric_error("non-finite session loss");
  return total;
}

}  // namespace

double session_loss(const CatSession& session, GirtModel& model, const Corpus& corpus,
                    const CatConfig& config) {
  return administered_loss(session, model, corpus, config, session.z.value.col(0), nullptr);
}

void update_latent(CatSession& session, GirtModel& model, const Corpus& corpus,
                   const CatConfig& config) {
  config.validate();
  if (session.administered.empty()) return;
  const int t = static_cast<int>(session.administered.size());
  const int epochs = std::min(config.epochs_per_step * t, config.max_update_epochs);

  const Vec z0 = session.z.value.col(0);
  const double loss_before = administered_loss(session, model, corpus, config, z0, nullptr);

  double lr = config.update_lr;
  for (int attempt = 0; attempt < 7; ++attempt) {
    Vec z = z0;
    nn::AdamWConfig opt_cfg;
    opt_cfg.lr = lr;
    opt_cfg.weight_decay = 0.0;
    nn::AdamW opt(opt_cfg);
    nn::Param zp;
    zp.init_const(static_cast<int>(z.size()), 1, 0.0);
    zp.value = z;
    for (int e = 0; e < epochs; ++e) {
      Vec d_z;
      administered_loss(session, model, corpus, config, zp.value.col(0), &d_z);
      zp.grad = d_z;
      opt.step({&zp});
      zp.zero_grad();
    }
    const double loss_after =
        administered_loss(session, model, corpus, config, zp.value.col(0), nullptr);
    if (loss_after <= loss_before + 1e-6) {
      session.z.value = zp.value;
      return;
    }
    lr *= 0.5;  // backoff and retry from the starting point
  }
  // All attempts increased the objective; keep the current estimate.
}

void step(CatSession& session, GirtModel& model, const Corpus& corpus,
          const ResponseOracle& oracle, const CatConfig& config, const StepContext& ctx) {
  config.validate();
  if (session.candidates.empty()) throw validation_error("candidate pool exhausted");
  const int t_next = static_cast<int>(session.administered.size()) + 1;

  std::vector<double> scores;
  scores.reserve(session.candidates.size());

  // Ability estimate for the IRT baseline, shared across candidates.
  double theta_hat = 0.0;
  if (config.selector == Selector::IrtFisher) {
    if (!ctx.irt) throw config_error("irt-fisher selector needs a calibrated item bank");
    std::vector<std::pair<double, int>> admin;
    for (const auto& item : session.administered)
      admin.push_back({ctx.irt->b_of(item.question_id),
                       item.score >= config.binarize_threshold ? 1 : 0});
    theta_hat = update_ability(admin);
  }
  Rng random_rng(hash_seed(session.seed, "random", static_cast<uint64_t>(t_next)));

  for (const auto& qid : session.candidates) {
    const Question& q = corpus.question(qid);
    switch (config.selector) {
      case Selector::IrtFisher:
        scores.push_back(fisher_info(theta_hat, ctx.irt->b_of(qid)));
        break;
      case Selector::Random:
        scores.push_back(random_rng.uniform());
        break;
      default: {
        Vec theta = model.projection().project(session.z.value.col(0));
        AssembledPrompt prompt = model.prompt_for(q, theta);
        GenerationConfig gen = config.generation;
        gen.seed = hash_seed(session.seed, "samples", static_cast<uint64_t>(t_next), qid);
        SampledResponses samples{qid,
                                 model.backbone().sample(prompt.embeddings, gen,
                                                         config.n_samples)};
        if (config.selector == Selector::Uncertainty) {
          if (!ctx.scorer) throw config_error("uncertainty selector needs a scorer");
          scores.push_back(uncertainty_score(samples, *ctx.scorer, q));
        } else if (config.selector == Selector::Diversity) {
          if (!ctx.embedder) throw config_error("diversity selector needs a code embedder");
          scores.push_back(diversity_score(samples, *ctx.embedder));
        } else {
          scores.push_back(information_score(model, q, session.z.value.col(0), samples,
                                             config.length_normalize));
        }
      }
    }
  }

  const std::string chosen = select_next(session.candidates, scores);
  const double chosen_score =
      scores[static_cast<size_t>(std::find(session.candidates.begin(),
                                           session.candidates.end(), chosen) -
                                 session.candidates.begin())];

  const StudentResponse& observed = oracle.response(session.student_id, chosen);
  session.administered.push_back({t_next, chosen, observed.code, observed.score, chosen_score});
  session.candidates.erase(
      std::find(session.candidates.begin(), session.candidates.end(), chosen));

  update_latent(session, model, corpus, config);
}

std::vector<TrajectoryPoint> run_session(CatSession& session, GirtModel& model,
                                         const Corpus& corpus, const ResponseOracle& oracle,
                                         const CatConfig& config, const StepContext& ctx,
                                         int t_max, const std::vector<IrtItem>& heldout) {
  if (t_max < 0 || t_max > static_cast<int>(session.candidates.size()))
    throw validation_error("t_max must lie in [0, |candidates|]");
  std::vector<TrajectoryPoint> trajectory;
  for (int t = 1; t <= t_max; ++t) {
    step(session, model, corpus, oracle, config, ctx);
    TrajectoryPoint point;
    point.t = t;
    point.question_id = session.administered.back().question_id;
    point.selector_score = session.administered.back().selector_score;
    point.z = session.z.value.col(0);
    if (ctx.irt && !heldout.empty()) {
      std::vector<std::pair<double, int>> admin;
      for (const auto& item : session.administered)
        admin.push_back({ctx.irt->b_of(item.question_id),
                         item.score >= config.binarize_threshold ? 1 : 0});
      point.heldout_predictions = proxy_evaluate(admin, heldout);
    }
    trajectory.push_back(std::move(point));
  }
  return trajectory;
}

void save_trajectory(const std::vector<TrajectoryPoint>& trajectory, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write trajectory: " + path);
  for (const auto& point : trajectory) {
    ordered_json line = {{"t", point.t},
                         {"question_id", point.question_id},
                         {"selector_score", point.selector_score},
                         {"z", std::vector<double>(point.z.begin(), point.z.end())},
                         {"heldout_predictions", point.heldout_predictions}};
    out << line.dump() << '\n';
  }
}

}  // namespace gencat
