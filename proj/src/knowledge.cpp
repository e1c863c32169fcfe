#include "gencat/knowledge.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

using nlohmann::json;
using nlohmann::ordered_json;

namespace gencat {

KcIndex::KcIndex(const Corpus& corpus) {
  for (const auto& kc : corpus.kcs) {  // corpus.kcs is sorted by id
    index_[kc.id] = static_cast<int>(ids_.size());
    ids_.push_back(kc.id);
    names_.push_back(kc.name);
  }
}

KcIndex::KcIndex(std::vector<std::string> ids, std::vector<std::string> names)
    : ids_(std::move(ids)), names_(std::move(names)) {
  if (ids_.size() != names_.size()) throw config_error("KC id/name lists differ in length");
  for (size_t i = 0; i < ids_.size(); ++i) index_[ids_[i]] = static_cast<int>(i);
  if (index_.size() != ids_.size()) throw validation_error("duplicate KC id in index");
}

int KcIndex::at(const std::string& kc_id) const {
  auto it = index_.find(kc_id);
  if (it == index_.end()) throw validation_error("KC id not in index: " + kc_id);
  return it->second;
}

KnowledgeProjection::KnowledgeProjection(int latent_dim, const std::vector<int>& hidden,
                                         int n_kcs, Rng& rng) {
  if (latent_dim <= 0 || n_kcs <= 0)
    throw config_error("projection dimensions must be positive");
  std::vector<int> sizes;
  sizes.push_back(latent_dim);
  for (int h : hidden) sizes.push_back(h);
  sizes.push_back(n_kcs);
  mlp_ = nn::Mlp(sizes, rng, 0.3);
}

Vec KnowledgeProjection::project(const Vec& z) const {
  Cache scratch;
  return project(z, scratch);
}

Vec KnowledgeProjection::project(const Vec& z, Cache& cache) const {
  if (z.size() != latent_dim())
    throw numeric_error("latent dimension mismatch: got " + std::to_string(z.size()) +
                        ", want " + std::to_string(latent_dim()));
  if (!z.allFinite()) throw numeric_error("latent vector has non-finite entries");
  Mat logits = mlp_.forward(z, cache.mlp);
  cache.theta = (1.0 / (1.0 + (-logits.col(0).array()).exp())).matrix();
  return cache.theta;
}

Vec KnowledgeProjection::backward(const Vec& d_theta, const Cache& cache) {
  Vec d_logits =
      (d_theta.array() * cache.theta.array() * (1.0 - cache.theta.array())).matrix();
  Mat dz = mlp_.backward(d_logits, cache.mlp);
  return dz.col(0);
}

void KnowledgeProjection::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write projection checkpoint: " + path);
  auto sizes = mlp_.layer_sizes();
  ordered_json header = {{"sizes", sizes}, {"version", "1"}};
  const std::string hs = header.dump();
  const uint64_t n = hs.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  nn::write_params(out, params());
}

KnowledgeProjection KnowledgeProjection::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw missing_artifact_error("projection checkpoint not found: " + path);
  uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  std::string hs(n, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(n));
  if (!in) throw parse_error("truncated projection checkpoint: " + path);
  json header = json::parse(hs);
  auto sizes = header.at("sizes").get<std::vector<int>>();
  if (sizes.size() < 2) throw parse_error("bad projection checkpoint header: " + path);
  KnowledgeProjection proj;
  Rng rng(0);
  std::vector<int> hidden(sizes.begin() + 1, sizes.end() - 1);
  proj = KnowledgeProjection(sizes.front(), hidden, sizes.back(), rng);
  nn::read_params(in, proj.params());
  return proj;
}

MasteryEmbedder::MasteryEmbedder(Vec anchor_true, Vec anchor_false)
    : anchor_true_(std::move(anchor_true)), anchor_false_(std::move(anchor_false)) {
  if (anchor_true_.size() != anchor_false_.size() || anchor_true_.size() == 0)
    throw config_error("mastery anchors must share a positive dimension");
}

MasteryEmbedder MasteryEmbedder::from_backbone(const TransformerLm& backbone) {
  const auto& tok = backbone.tokenizer();
  return MasteryEmbedder(backbone.token_embedding(tok.true_anchor_id()),
                         backbone.token_embedding(tok.false_anchor_id()));
}

Vec MasteryEmbedder::embed(double theta_k) const {
  if (!(theta_k >= 0.0 && theta_k <= 1.0))
    throw validation_error("mastery value outside [0,1]: " + std::to_string(theta_k));
  return theta_k * anchor_true_ + (1.0 - theta_k) * anchor_false_;
}

double MasteryEmbedder::grad_theta(const Vec& d_embedding) const {
  return (anchor_true_ - anchor_false_).dot(d_embedding);
}

namespace {
constexpr const char* kKcBegin = "{kc_begin}";
constexpr const char* kKcEnd = "{kc_end}";

size_t count_occurrences(const std::string& hay, const std::string& needle) {
  size_t count = 0;
  for (size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + needle.size()))
    ++count;
  return count;
}

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  for (size_t pos = text.find(from); pos != std::string::npos;
       pos = text.find(from, pos + to.size()))
    text.replace(pos, from.size(), to);
  return text;
}

}  // namespace

PromptTemplate PromptTemplate::parse(const std::string& text) {
  const size_t begin = text.find(kKcBegin);
  const size_t end = text.find(kKcEnd);
  if (begin == std::string::npos || end == std::string::npos || end < begin)
    throw parse_error("prompt template needs a {kc_begin}...{kc_end} block");
  PromptTemplate tmpl;
  const size_t body_start = begin + std::string(kKcBegin).size();
  tmpl.kc_block = text.substr(body_start, end - body_start);
  // Strip one leading newline from the block and the markers from the body.
  if (!tmpl.kc_block.empty() && tmpl.kc_block.front() == '\n') tmpl.kc_block.erase(0, 1);
  std::string body = text.substr(0, begin) + "{kc_blocks}" +
                     text.substr(end + std::string(kKcEnd).size());
  // Drop the newline that followed {kc_end} in line-oriented files.
  tmpl.body = replace_all(body, "{kc_blocks}\n", "{kc_blocks}");
  tmpl.validate();
  return tmpl;
}

PromptTemplate PromptTemplate::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open prompt template: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void PromptTemplate::validate() const {
  if (count_occurrences(body, "{question}") != 1)
    throw parse_error("prompt template body must contain {question} exactly once");
  if (count_occurrences(body, "{kc_blocks}") != 1)
    throw parse_error("prompt template body must contain the KC block exactly once");
  if (count_occurrences(kc_block, "{kc_mastery}") != 1)
    throw parse_error("prompt template KC block must contain {kc_mastery} exactly once");
}

PromptTemplate PromptTemplate::compact() {
  PromptTemplate tmpl;
  tmpl.body = "{question}\n{kc_blocks}ans:";
  tmpl.kc_block = "kc {kc_name}={kc_mastery}\n";
  return tmpl;
}

PromptTemplate PromptTemplate::standard() {
  PromptTemplate tmpl;
  tmpl.body =
      "You generate plausible student-written code given a programming problem and "
      "the student knowledge of knowledge components (KCs) that are related to the "
      "problem. Correctness is not required.\n"
      "The programming problem is: {question}\n"
      "{kc_blocks}"
      "The code that the student writes to solve this problem based on their "
      "knowledge of these KCs is:";
  tmpl.kc_block =
      "The KC {kc_index} is: {kc_name}.\n"
      "The student has knowledge of {kc_name}: {kc_mastery}.\n";
  return tmpl;
}

AssembledPrompt assemble_prompt(const Question& question, const Vec& mastery,
                                const KcIndex& kcs, const MasteryEmbedder& embedder,
                                const TransformerLm& backbone, const PromptTemplate& tmpl) {
  tmpl.validate();
  if (mastery.size() != kcs.size())
    throw validation_error("mastery vector size does not match KC index");
  if (embedder.dim() != backbone.hidden_dim())
    throw validation_error("mastery embedder dimension does not match backbone");

  // Render text with a sentinel character standing in for each mastery slot;
  // the sentinel is \x7f-free since templates are plain ASCII, so use \t only
  // if absent. Safer: render pieces around slots explicitly.
  std::string blocks_text;
  std::vector<size_t> slot_offsets;  // offsets within blocks_text
  for (size_t i = 0; i < question.kc_ids.size(); ++i) {
    const int kc = kcs.at(question.kc_ids[i]);
    std::string block = tmpl.kc_block;
    block = replace_all(block, "{kc_index}", std::to_string(i + 1));
    block = replace_all(block, "{kc_name}", kcs.name(kc));
    const size_t pos = block.find("{kc_mastery}");
    slot_offsets.push_back(blocks_text.size() + pos);
    block.replace(pos, std::string("{kc_mastery}").size(), "\x01");
    blocks_text += block;
  }
  std::string body = replace_all(tmpl.body, "{question}", question.text);
  const size_t blocks_at = body.find("{kc_blocks}");
  body.replace(blocks_at, std::string("{kc_blocks}").size(), blocks_text);

  const CharTokenizer& tok = backbone.tokenizer();
  AssembledPrompt out;
  out.tokens.push_back(CharTokenizer::kBos);
  for (char c : body) {
    if (c == '\x01') {
      out.slot_positions.push_back(static_cast<long>(out.tokens.size()));
      out.tokens.push_back(CharTokenizer::kPlaceholder);
    } else {
      out.tokens.push_back(CharTokenizer::char_to_id(c));
    }
  }
  if (out.slot_positions.size() != question.kc_ids.size())
    throw validation_error("template produced " + std::to_string(out.slot_positions.size()) +
                           " mastery slots for " + std::to_string(question.kc_ids.size()) +
                           " KCs");

  for (const auto& kc_id : question.kc_ids) out.kc_slots.push_back(kcs.at(kc_id));

  out.embeddings = backbone.embed_tokens(out.tokens);
  for (size_t i = 0; i < out.slot_positions.size(); ++i) {
    const double theta_k = mastery(out.kc_slots[i]);
    out.embeddings.row(out.slot_positions[i]) = embedder.embed(theta_k).transpose();
  }
  (void)tok;
  return out;
}

void accumulate_mastery_grad(const Mat& d_prompt, const AssembledPrompt& prompt,
                             const MasteryEmbedder& embedder, Vec& d_theta) {
  for (size_t i = 0; i < prompt.slot_positions.size(); ++i) {
    const Vec d_row = d_prompt.row(prompt.slot_positions[i]).transpose();
    d_theta(prompt.kc_slots[i]) += embedder.grad_theta(d_row);
  }
}

}  // namespace gencat
