#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "gencat/dpo.hpp"

using namespace gencat;

namespace {

GirtModel tiny_model(const Corpus& corpus, uint64_t seed = 11) {
  BackboneConfig bcfg;
  bcfg.h = 16;
  bcfg.layers = 1;
  bcfg.heads = 2;
  return GirtModel::init(bcfg, 2, {8}, corpus, corpus.students, PromptTemplate::compact(),
                         seed);
}

// Pins every mastery value to sigmoid(bias) by zeroing the projection's final
// weight and setting its bias.
void pin_mastery(GirtModel& model, double theta) {
  auto ps = model.projection().params();
  ps[ps.size() - 2]->value.setZero();
  ps[ps.size() - 1]->value.setConstant(std::log(theta / (1.0 - theta)));
}

std::vector<const StudentResponse*> all_responses(const Corpus& corpus) {
  std::vector<const StudentResponse*> out;
  for (const auto& r : corpus.responses) out.push_back(&r);
  return out;
}

}  // namespace

TEST_CASE("continuous-Bernoulli likelihood closed forms") {
  CHECK(response_likelihood(1.0, 0.7) == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(response_likelihood(0.0, 0.7) == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(response_likelihood(0.5, 0.5) == doctest::Approx(0.5).epsilon(1e-9));
  // Clamping keeps endpoints finite and positive.
  CHECK(response_likelihood(1.0, 1.0) > 0.0);
  CHECK(response_likelihood(0.0, 0.0) > 0.0);
  CHECK_THROWS_AS(response_likelihood(1.2, 0.5), Error);
}

TEST_CASE("pair construction keeps the top-M gaps above tau") {
  // Scores chosen so the owner's likelihood is 0.9 and the co-responders' are
  // 0.85, 0.7, 0.6, 0.2 when predicted correctness is pinned to 0.9:
  // a = (ln L + ln 10) / ln 9 inverts L = 0.9^a * 0.1^(1-a).
  auto score_for = [](double lik) { return (std::log(lik) + std::log(10.0)) / std::log(9.0); };
  Corpus corpus = build_corpus(
      {"s0", "s1", "s2", "s3", "s4"}, {{"q1", "q1 plus a b", {"A"}}}, {{"A", "arith"}},
      {{"s0", "q1", "c-own", 1.0, {}},
       {"s1", "q1", "c-085", score_for(0.85), {}},
       {"s2", "q1", "c-070", score_for(0.70), {}},
       {"s3", "q1", "c-060", score_for(0.60), {}},
       {"s4", "q1", "c-020", score_for(0.20), {}}});
  GirtModel model = tiny_model(corpus);
  pin_mastery(model, 0.9);
  REQUIRE(model.predicted_correctness("s0", corpus.question("q1")) ==
          doctest::Approx(0.9).epsilon(1e-12));

  DpoConfig cfg;  // tau = 0.1, m_pairs = 3
  auto pairs = build_pairs(model, corpus, all_responses(corpus), cfg);

  std::vector<const PreferencePair*> own;
  for (const auto& p : pairs)
    if (p.student_id == "s0") own.push_back(&p);
  REQUIRE(own.size() == 3);
  CHECK(own[0]->dispreferred_code == "c-020");
  CHECK(own[0]->gap == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(own[1]->dispreferred_code == "c-060");
  CHECK(own[1]->gap == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(own[2]->dispreferred_code == "c-070");
  CHECK(own[2]->gap == doctest::Approx(0.2).epsilon(1e-9));
  for (const auto& p : pairs) {
    CHECK(p.gap > cfg.tau);
    CHECK(p.preferred_code != p.dispreferred_code);
  }

  // tau = 1.0 filters everything: the gap is strictly below 1.
  DpoConfig strict = cfg;
  strict.tau = 1.0;
  CHECK(build_pairs(model, corpus, all_responses(corpus), strict).empty());
}

TEST_CASE("a question answered by one student yields no pairs") {
  Corpus corpus = build_corpus({"s1"}, {{"q1", "q1 plus a b", {"A"}}}, {{"A", "arith"}},
                               {{"s1", "q1", "code", 1.0, {}}});
  GirtModel model = tiny_model(corpus);
  CHECK(build_pairs(model, corpus, all_responses(corpus), DpoConfig{}).empty());
}

TEST_CASE("pair construction agrees with a brute-force oracle") {
  SynthConfig scfg;
  scfg.n_students = 8;
  scfg.n_questions = 6;
  scfg.n_kcs = 3;
  scfg.density = 0.8;
  Corpus corpus = synthesize_corpus(scfg, 41).corpus;
  GirtModel model = tiny_model(corpus, 7);

  DpoConfig cfg;
  cfg.m_pairs = 2;
  cfg.tau = 0.05;
  auto pairs = build_pairs(model, corpus, all_responses(corpus), cfg);

  std::map<std::pair<std::string, std::string>, int> per_sample;
  for (const auto& p : pairs) {
    ++per_sample[{p.student_id, p.question_id}];
    // Oracle: the emitted gap must match the double-loop computation exactly.
    const Question& q = corpus.question(p.question_id);
    const double a_hat = model.predicted_correctness(p.student_id, q);
    const StudentResponse* own = corpus.find_response(p.student_id, p.question_id);
    const StudentResponse* other = corpus.find_response(p.other_student_id, p.question_id);
    REQUIRE(own != nullptr);
    REQUIRE(other != nullptr);
    const double gap = response_likelihood(own->score, a_hat) -
                       response_likelihood(other->score, a_hat);
    CHECK(p.gap == doctest::Approx(gap).epsilon(1e-12));
    CHECK(gap > cfg.tau);
  }
  for (const auto& [key, count] : per_sample) CHECK(count <= cfg.m_pairs);

  // Brute-force count: every qualifying candidate (after code dedup, capped
  // at M) must be represented.
  for (const auto& r : corpus.responses) {
    const Question& q = corpus.question(r.question_id);
    const double a_hat = model.predicted_correctness(r.student_id, q);
    const double own_lik = response_likelihood(r.score, a_hat);
    std::set<std::string> codes;
    for (const auto& other : corpus.responses) {
      if (other.question_id != r.question_id) continue;
      if (other.student_id == r.student_id || other.code == r.code) continue;
      if (own_lik - response_likelihood(other.score, a_hat) > cfg.tau)
        codes.insert(other.code);
    }
    const int expect = std::min<int>(cfg.m_pairs, static_cast<int>(codes.size()));
    CHECK(per_sample[{r.student_id, r.question_id}] == expect);
  }
}

TEST_CASE("per-pair DPO loss at initialization is log 2") {
  Corpus corpus = build_corpus(
      {"s1", "s2"}, {{"q1", "q1 plus a b", {"A"}}}, {{"A", "arith"}},
      {{"s1", "q1", "a+b", 1.0, {}}, {"s2", "q1", "a-b", 0.0, {}}});
  GirtModel model = tiny_model(corpus);
  TransformerLm reference = model.backbone();  // identical snapshot
  PreferencePair pair{"s1", "q1", "s2", "a+b", "a-b", 0.5};
  CHECK(dpo_pair_loss(model, reference, pair, corpus, 0.5) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("dpo_fit freezes knowledge, lowers loss and raises margins") {
  Corpus corpus = build_corpus(
      {"s1", "s2", "s3"}, {{"q1", "q1 plus a b", {"A"}}, {"q2", "q2 xor a b", {"A"}}},
      {{"A", "arith"}},
      {{"s1", "q1", "a+b", 1.0, {}},
       {"s2", "q1", "a-b", 0.0, {}},
       {"s3", "q1", "b", 0.0, {}},
       {"s1", "q2", "a^b", 1.0, {}},
       {"s2", "q2", "a", 0.0, {}}});
  GirtModel model = tiny_model(corpus, 23);
  pin_mastery(model, 0.8);

  DpoConfig cfg;
  cfg.tau = 0.05;
  cfg.epochs = 8;
  cfg.batch_size = 64;  // full batch: the first epoch's mean is the init loss
  cfg.seed = 2;
  auto pairs = build_pairs(model, corpus, all_responses(corpus), cfg);
  REQUIRE(!pairs.empty());

  const std::string proj_before = nn::params_checksum(
      static_cast<const GirtModel&>(model).projection().params());
  const Mat z_before = model.latent("s1").value;

  DpoResult result = dpo_fit(model, pairs, corpus, cfg);
  REQUIRE(result.epoch_loss.size() == 8);
  CHECK(result.epoch_loss.back() < result.epoch_loss.front());
  CHECK(result.epoch_loss.front() == doctest::Approx(std::log(2.0)).epsilon(1e-6));

  // Freeze contract: latent table and projection bit-identical.
  CHECK(nn::params_checksum(static_cast<const GirtModel&>(model).projection().params()) ==
        proj_before);
  CHECK((model.latent("s1").value - z_before).norm() == 0.0);

  CHECK(implicit_reward_accuracy(model, result.reference, pairs, corpus) > 0.6);

  // Determinism: a fresh run from the same state reproduces the backbone.
  GirtModel model2 = tiny_model(corpus, 23);
  pin_mastery(model2, 0.8);
  DpoResult r2 = dpo_fit(model2, pairs, corpus, cfg);
  CHECK(model2.backbone().checksum() == model.backbone().checksum());
  CHECK(r2.epoch_loss.back() == doctest::Approx(result.epoch_loss.back()).epsilon(1e-12));
}

TEST_CASE("empty pair set is a no-op") {
  Corpus corpus = build_corpus({"s1"}, {{"q1", "q1 plus a b", {"A"}}}, {{"A", "arith"}},
                               {{"s1", "q1", "code", 1.0, {}}});
  GirtModel model = tiny_model(corpus);
  const std::string before = model.backbone().checksum();
  DpoResult result = dpo_fit(model, {}, corpus, DpoConfig{});
  CHECK(result.epoch_loss.empty());
  CHECK(model.backbone().checksum() == before);
}

TEST_CASE("pair JSONL round trip") {
  std::vector<PreferencePair> pairs = {
      {"s1", "q1", "s2", "a+b", "a-b", 0.7},
      {"s1", "q1", "s3", "a+b", "a\nnewline \"quoted\"", 0.25}};
  const std::string path = "/tmp/gencat_test_pairs.jsonl";
  save_pairs(pairs, path);
  auto back = load_pairs(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].dispreferred_code == pairs[1].dispreferred_code);
  CHECK(back[0].gap == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(back[0].other_student_id == "s2");
}
