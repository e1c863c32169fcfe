#include "gencat/girt.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

using nlohmann::json;
using nlohmann::ordered_json;

namespace gencat {

void TrainConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw config_error("lambda must lie in [0,1]");
  if (epochs <= 0) throw config_error("epochs must be positive");
  if (batch_size <= 0 || grad_accum <= 0)
    throw config_error("batch size and accumulation steps must be positive");
  if (!(lr_backbone > 0.0) || !(lr_latent > 0.0))
    throw config_error("learning rates must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0))
    throw config_error("warmup fraction must lie in [0,1]");
  if (!(binarize_threshold > 0.0 && binarize_threshold <= 1.0))
    throw config_error("binarize threshold must lie in (0,1]");
}

GirtModel GirtModel::init(const BackboneConfig& backbone_config, int latent_dim,
                          const std::vector<int>& projection_hidden, const Corpus& corpus,
                          const std::vector<std::string>& students, PromptTemplate tmpl,
                          uint64_t seed) {
  if (latent_dim <= 0) throw config_error("latent dimension must be positive");
  tmpl.validate();

  GirtModel model;
  BackboneConfig bcfg = backbone_config;
  bcfg.seed = hash_seed(seed, "backbone");
  model.backbone_ = TransformerLm(bcfg);
  model.kcs_ = KcIndex(corpus);
  Rng prng(hash_seed(seed, "projection"));
  model.projection_ =
      KnowledgeProjection(latent_dim, projection_hidden, model.kcs_.size(), prng);
  model.embedder_ = MasteryEmbedder::from_backbone(model.backbone_);
  model.template_ = std::move(tmpl);

  std::vector<std::string> sorted = students;
  std::sort(sorted.begin(), sorted.end());
  Rng lrng(hash_seed(seed, "latents"));
  for (const auto& sid : sorted) {
    if (!corpus.has_student(sid)) throw validation_error("unknown student in latent init: " + sid);
    nn::Param z;
    z.init(latent_dim, 1, lrng, 0.1);
    model.latents_.emplace(sid, std::move(z));
  }
  return model;
}

bool GirtModel::has_latent(const std::string& student_id) const {
  return latents_.count(student_id) > 0;
}

nn::Param& GirtModel::latent(const std::string& student_id) {
  auto it = latents_.find(student_id);
  if (it == latents_.end()) throw validation_error("no latent entry for student " + student_id);
  return it->second;
}

const nn::Param& GirtModel::latent(const std::string& student_id) const {
  auto it = latents_.find(student_id);
  if (it == latents_.end()) throw validation_error("no latent entry for student " + student_id);
  return it->second;
}

std::vector<std::string> GirtModel::latent_students() const {
  std::vector<std::string> out;
  out.reserve(latents_.size());
  for (const auto& [sid, _] : latents_) out.push_back(sid);
  return out;
}

void GirtModel::add_latent(const std::string& student_id, const Vec& z) {
  if (z.size() != projection_.latent_dim())
    throw validation_error("latent dimension mismatch for student " + student_id);
  nn::Param p;
  p.init_const(static_cast<int>(z.size()), 1, 0.0);
  p.value = z;
  latents_[student_id] = std::move(p);
}

Vec GirtModel::mastery_of(const std::string& student_id) const {
  return projection_.project(latent(student_id).value.col(0));
}

double GirtModel::predicted_correctness(const std::string& student_id,
                                        const Question& question) const {
  Vec theta = mastery_of(student_id);
  double sum = 0.0;
  for (const auto& kc : question.kc_ids) sum += theta(kcs_.at(kc));
  return sum / static_cast<double>(question.kc_ids.size());
}

AssembledPrompt GirtModel::prompt_for(const Question& question, const Vec& mastery) const {
  return assemble_prompt(question, mastery, kcs_, embedder_, backbone_, template_);
}

double kc_alignment_loss(const Vec& mastery, const Question& question, const KcIndex& kcs,
                         double binary_score, Vec* d_mastery, double grad_scale) {
  if (question.kc_ids.empty())
    throw validation_error("KC-alignment loss needs at least one KC on " + question.id);
  if (binary_score != 0.0 && binary_score != 1.0)
    throw validation_error("KC-alignment loss expects a binary score");

  const double n = static_cast<double>(question.kc_ids.size());
  double sum = 0.0;
  for (const auto& kc : question.kc_ids) sum += mastery(kcs.at(kc));
  const double a_hat = std::clamp(sum / n, 1e-6, 1.0 - 1e-6);
  const double loss =
      -(binary_score * std::log(a_hat) + (1.0 - binary_score) * std::log(1.0 - a_hat));
  if (d_mastery) {
    // d(loss)/d(a_hat) spread uniformly over the participating KCs.
    const double d_ahat = (a_hat - binary_score) / (a_hat * (1.0 - a_hat));
    for (const auto& kc : question.kc_ids) (*d_mastery)(kcs.at(kc)) += grad_scale * d_ahat / n;
  }
  return loss;
}

namespace {

std::vector<int> code_targets(const TransformerLm& backbone, const std::string& code) {
  std::vector<int> targets = backbone.tokenizer().encode(code);
  targets.push_back(CharTokenizer::kEos);
  return targets;
}

}  // namespace

double sft_loss(const GirtModel& model, const StudentResponse& response,
                const Question& question) {
  Vec mastery = model.mastery_of(response.student_id);
  AssembledPrompt prompt = model.prompt_for(question, mastery);
  auto targets = code_targets(model.backbone(), response.code);
  return -model.backbone().sequence_log_prob(prompt.embeddings, targets).total;
}

double total_loss(const GirtModel& model, const StudentResponse& response,
                  const Question& question, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw config_error("lambda must lie in [0,1]");
  const double sft = sft_loss(model, response, question);
  const double kc = kc_alignment_loss(model.mastery_of(response.student_id), question,
                                      model.kcs(), response.score);
  return (1.0 - lambda) * sft + lambda * kc;
}

std::vector<const StudentResponse*> girt_train_responses(const Corpus& corpus,
                                                         const SplitPlan& plan) {
  std::vector<const StudentResponse*> out;
  for (const auto& sid : plan.girt_group) {
    const auto& split = plan.by_student.at(sid);
    for (const auto& qid : split.train) {
      const StudentResponse* r = corpus.find_response(sid, qid);
      if (r) out.push_back(r);
    }
  }
  return out;
}

std::vector<EpochStats> fit(GirtModel& model, const Corpus& corpus,
                            const std::vector<const StudentResponse*>& responses,
                            const TrainConfig& config) {
  config.validate();
  if (responses.empty()) throw validation_error("no training responses");
  for (const auto* r : responses)
    if (!model.has_latent(r->student_id))
      throw validation_error("training response for student without latent: " + r->student_id);

  nn::AdamWConfig backbone_cfg;
  backbone_cfg.lr = config.lr_backbone;
  backbone_cfg.weight_decay = config.weight_decay;
  nn::AdamWConfig knowledge_cfg;
  knowledge_cfg.lr = config.lr_latent;
  knowledge_cfg.weight_decay = 0.0;

  nn::AdamW opt_backbone(backbone_cfg);
  nn::AdamW opt_projection(knowledge_cfg);
  std::map<std::string, nn::AdamW> opt_latent;

  const size_t window = static_cast<size_t>(config.batch_size) *
                        static_cast<size_t>(config.grad_accum);
  const size_t steps_per_epoch = (responses.size() + window - 1) / window;
  const double total_steps = static_cast<double>(steps_per_epoch * config.epochs);
  const double warmup_steps = config.warmup_fraction * total_steps;

  std::vector<size_t> order(responses.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochStats> history;
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(hash_seed(config.seed, "epoch", static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double sum_sft = 0.0, sum_kc = 0.0;
    size_t done = 0;
    while (done < order.size()) {
      const size_t take = std::min(window, order.size() - done);
      const double inv = 1.0 / static_cast<double>(take);
      std::vector<std::string> touched;

      for (size_t b = 0; b < take; ++b) {
        const StudentResponse& r = *responses[order[done + b]];
        const Question& q = corpus.question(r.question_id);
        nn::Param& z = model.latent(r.student_id);
        touched.push_back(r.student_id);

        KnowledgeProjection::Cache pcache;
        Vec theta = model.projection().project(z.value.col(0), pcache);
        AssembledPrompt prompt = model.prompt_for(q, theta);
        auto targets = code_targets(model.backbone(), r.code);

        Mat d_prompt;
        const double sft = model.backbone().teacher_forced_nll(
            prompt.embeddings, targets, (1.0 - config.lambda) * inv, true, &d_prompt);

        Vec d_theta = Vec::Zero(theta.size());
        accumulate_mastery_grad(d_prompt, prompt, model.embedder(), d_theta);

        const double a = r.score >= config.binarize_threshold ? 1.0 : 0.0;
        const double kc = kc_alignment_loss(theta, q, model.kcs(), a, &d_theta,
                                            config.lambda * inv);

        Vec dz = model.projection().backward(d_theta, pcache);
        z.grad += dz;

        const double sample_total = (1.0 - config.lambda) * sft + config.lambda * kc;
        if (!std::isfinite(sample_total))
          throw numeric_error("non-finite loss at epoch " + std::to_string(epoch) +
                              " on (" + r.student_id + ", " + r.question_id + ")");
        sum_sft += sft;
        sum_kc += kc;
      }

      ++step;
      const double lr_scale =
          warmup_steps > 0.0 ? std::min(1.0, static_cast<double>(step) / warmup_steps) : 1.0;
      opt_backbone.step(model.backbone().params(), lr_scale);
      opt_projection.step(model.projection().params(), lr_scale);
      std::sort(touched.begin(), touched.end());
      touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
      for (const auto& sid : touched) {
        auto [it, _] = opt_latent.try_emplace(sid, knowledge_cfg);
        nn::Param& z = model.latent(sid);
        it->second.step({&z}, lr_scale);
        z.zero_grad();
      }
      nn::zero_grads(model.backbone().params());
      nn::zero_grads(model.projection().params());
      done += take;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.sft = sum_sft / static_cast<double>(order.size());
    stats.kc = sum_kc / static_cast<double>(order.size());
    stats.total = (1.0 - config.lambda) * stats.sft + config.lambda * stats.kc;
    history.push_back(stats);
  }
  return history;
}

void save_loss_history(const std::vector<EpochStats>& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write loss history: " + path);
  out << "epoch,sft,kc,total\n";
  out.precision(17);
  for (const auto& e : history)
    out << e.epoch << ',' << e.sft << ',' << e.kc << ',' << e.total << '\n';
}

void GirtModel::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  backbone_.save(dir + "/backbone");
  projection_.save(dir + "/projection.bin");

  std::vector<std::string> students = latent_students();
  ordered_json manifest = {
      {"version", "1"},
      {"latent_dim", projection_.latent_dim()},
      {"students", students},
      {"kc_ids", kcs_.ids()},
      {"kc_names", json::array()},
      {"template", {{"body", template_.body}, {"kc_block", template_.kc_block}}},
      {"anchor_true", std::vector<double>(embedder_.anchor_true().begin(),
                                          embedder_.anchor_true().end())},
      {"anchor_false", std::vector<double>(embedder_.anchor_false().begin(),
                                           embedder_.anchor_false().end())},
  };
  for (int i = 0; i < kcs_.size(); ++i) manifest["kc_names"].push_back(kcs_.name(i));
  std::ofstream mf(dir + "/girt.json");
  if (!mf) throw io_error("cannot write model manifest in " + dir);
  mf << manifest.dump(2) << '\n';

  std::ofstream lat(dir + "/latents.bin", std::ios::binary);
  if (!lat) throw io_error("cannot write latent table in " + dir);
  for (const auto& sid : students) {
    const Mat& z = latents_.at(sid).value;
    lat.write(reinterpret_cast<const char*>(z.data()),
              static_cast<std::streamsize>(sizeof(double) * z.size()));
  }
}

GirtModel GirtModel::load(const std::string& dir) {
  std::ifstream mf(dir + "/girt.json");
  if (!mf) throw missing_artifact_error("model manifest not found in " + dir);
  json manifest = json::parse(mf);

  GirtModel model;
  model.backbone_ = TransformerLm::load(dir + "/backbone");
  model.projection_ = KnowledgeProjection::load(dir + "/projection.bin");
  model.kcs_ = KcIndex(manifest.at("kc_ids").get<std::vector<std::string>>(),
                       manifest.at("kc_names").get<std::vector<std::string>>());
  model.template_.body = manifest.at("template").at("body").get<std::string>();
  model.template_.kc_block = manifest.at("template").at("kc_block").get<std::string>();
  model.template_.validate();

  auto at = manifest.at("anchor_true").get<std::vector<double>>();
  auto af = manifest.at("anchor_false").get<std::vector<double>>();
  model.embedder_ = MasteryEmbedder(Eigen::Map<const Vec>(at.data(), static_cast<long>(at.size())),
                                    Eigen::Map<const Vec>(af.data(), static_cast<long>(af.size())));

  const int dim = manifest.at("latent_dim").get<int>();
  auto students = manifest.at("students").get<std::vector<std::string>>();
  std::ifstream lat(dir + "/latents.bin", std::ios::binary);
  if (!lat) throw missing_artifact_error("latent table not found in " + dir);
  for (const auto& sid : students) {
    Vec z(dim);
    lat.read(reinterpret_cast<char*>(z.data()),
             static_cast<std::streamsize>(sizeof(double) * dim));
    if (!lat) throw parse_error("truncated latent table in " + dir);
    model.add_latent(sid, z);
  }
  return model;
}

}  // namespace gencat
