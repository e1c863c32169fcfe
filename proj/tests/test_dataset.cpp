#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gencat/dataset.hpp"

using namespace gencat;
namespace fs = std::filesystem;

namespace {

Corpus tiny_corpus() {
  std::vector<KnowledgeComponent> kcs = {{"A", "loops"}, {"B", "arrays"}};
  std::vector<Question> questions = {
      {"q1", "first question", {"A"}},
      {"q2", "second question", {"A"}},
      {"q3", "third question", {"B"}},
  };
  std::vector<StudentResponse> responses = {
      {"s1", "q1", "int f(){return 1;}", 1.0, {}},
      {"s1", "q2", "int f(){return 2;}", 0.5, {}},
      {"s1", "q3", "int f(){return 3;}", 0.0, {}},
  };
  return build_corpus({"s1"}, questions, kcs, responses);
}

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("gencat_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("minimal valid corpus loads") {
  auto dir = temp_dir("load_min");
  std::ofstream(dir / "questions.json")
      << R"([{"id": "q1", "text": "write add", "kcs": ["A"]}])";
  std::ofstream(dir / "kcs.json") << R"([{"id": "A", "name": "arith"}])";
  std::ofstream(dir / "responses.jsonl")
      << R"({"student_id": "s1", "question_id": "q1", "code": "x+y", "score": 1.0})" << "\n";
  Corpus c = load_corpus(dir.string(), CorpusFormat::Jsonl);
  CHECK(c.responses.size() == 1);
  CHECK(c.students.size() == 1);
  CHECK(c.questions.size() == 1);
}

TEST_CASE("score out of range is rejected") {
  auto dir = temp_dir("load_bad_score");
  std::ofstream(dir / "questions.json")
      << R"([{"id": "q1", "text": "write add", "kcs": ["A"]}])";
  std::ofstream(dir / "kcs.json") << R"([{"id": "A", "name": "arith"}])";
  std::ofstream(dir / "responses.jsonl")
      << R"({"student_id": "s1", "question_id": "q1", "code": "x", "score": 1.2})" << "\n";
  CHECK_THROWS_AS(load_corpus(dir.string(), CorpusFormat::Jsonl), Error);
}

TEST_CASE("malformed jsonl reports line number") {
  auto dir = temp_dir("load_bad_line");
  std::ofstream(dir / "questions.json")
      << R"([{"id": "q1", "text": "t", "kcs": ["A"]}])";
  std::ofstream(dir / "kcs.json") << R"([{"id": "A", "name": "arith"}])";
  std::ofstream(dir / "responses.jsonl")
      << R"({"student_id": "s1", "question_id": "q1", "code": "x", "score": 1.0})" << "\n"
      << "{not json\n";
  try {
    load_corpus(dir.string(), CorpusFormat::Jsonl);
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
}

TEST_CASE("unknown KC reference is rejected") {
  CHECK_THROWS_AS(build_corpus({"s1"}, {{"q1", "text", {"Z"}}}, {{"A", "arith"}},
                               {{"s1", "q1", "c", 1.0, {}}}),
                  Error);
}

TEST_CASE("duplicate response without timestamp rejected, with timestamp keeps earliest") {
  std::vector<KnowledgeComponent> kcs = {{"A", "arith"}};
  std::vector<Question> questions = {{"q1", "t", {"A"}}};
  CHECK_THROWS_AS(build_corpus({"s1"}, questions, kcs,
                               {{"s1", "q1", "first", 1.0, {}}, {"s1", "q1", "second", 0.0, {}}}),
                  Error);
  Corpus c = build_corpus({"s1"}, questions, kcs,
                          {{"s1", "q1", "late", 0.0, std::string("2024-02-01")},
                           {"s1", "q1", "early", 1.0, std::string("2024-01-01")}});
  REQUIRE(c.responses.size() == 1);
  CHECK(c.responses[0].code == "early");
}

TEST_CASE("paper-scale corpus shape is preserved") {
  SynthConfig cfg;
  cfg.n_students = 246;
  cfg.n_questions = 50;
  cfg.n_kcs = 18;
  cfg.density = 0.881;  // ~10834 of 12300 pairs
  auto synth = synthesize_corpus(cfg, 3);
  CHECK(synth.corpus.students.size() == 246);
  CHECK(synth.corpus.questions.size() == 50);
  CHECK(synth.corpus.responses.size() > 10000);
  CHECK(synth.corpus.responses.size() < 12300);
}

TEST_CASE("binarize rule") {
  Corpus c = tiny_corpus();  // scores 1.0, 0.5, 0.0
  Corpus b1 = binarize_scores(c, 1.0);
  CHECK(b1.responses[0].score == 1.0);
  CHECK(b1.responses[1].score == 0.0);
  Corpus b2 = binarize_scores(c, 0.5);
  CHECK(b2.responses[0].score == 1.0);
  CHECK(b2.responses[1].score == 1.0);
  CHECK(b2.responses[2].score == 0.0);
  // Original untouched.
  CHECK(c.responses[1].score == 0.5);
  // Idempotent.
  Corpus b2b = binarize_scores(b2, 0.5);
  for (size_t i = 0; i < b2.responses.size(); ++i)
    CHECK(b2.responses[i].score == b2b.responses[i].score);
  CHECK_THROWS_AS(binarize_scores(c, 0.0), Error);
}

TEST_CASE("save/load round trip (jsonl and csv)") {
  SynthConfig cfg;
  cfg.n_students = 8;
  cfg.n_questions = 6;
  cfg.n_kcs = 3;
  Corpus c = synthesize_corpus(cfg, 11).corpus;
  // Make one code string exercise csv quoting.
  c.responses[0].code = "line1\nwith \"quotes\", commas";
  for (auto format : {CorpusFormat::Jsonl, CorpusFormat::Csv}) {
    auto dir = temp_dir(format == CorpusFormat::Jsonl ? "rt_jsonl" : "rt_csv");
    save_corpus(c, dir.string(), format);
    Corpus back = load_corpus(dir.string(), format);
    REQUIRE(back.responses.size() == c.responses.size());
    for (size_t i = 0; i < c.responses.size(); ++i) {
      CHECK(back.responses[i].student_id == c.responses[i].student_id);
      CHECK(back.responses[i].question_id == c.responses[i].question_id);
      CHECK(back.responses[i].code == c.responses[i].code);
      CHECK(back.responses[i].score == doctest::Approx(c.responses[i].score).epsilon(1e-12));
    }
    CHECK(back.questions.size() == c.questions.size());
    CHECK(back.kcs.size() == c.kcs.size());
  }
}

TEST_CASE("greedy cover matches brute-force minimum on the spec example") {
  // Student answered {A}, {A}, {B}: cover must be one A-question + the B-question.
  std::vector<KnowledgeComponent> kcs = {{"A", "loops"}, {"B", "arrays"}};
  std::vector<Question> questions = {
      {"q1", "t1", {"A"}}, {"q2", "t2", {"A"}}, {"q3", "t3", {"B"}}};
  std::vector<StudentResponse> responses = {
      {"s1", "q1", "c", 1.0, {}}, {"s1", "q2", "c", 1.0, {}}, {"s1", "q3", "c", 1.0, {}}};
  Corpus c = build_corpus({"s1"}, questions, kcs, responses);
  SplitConfig cfg;
  cfg.girt_fraction = 1.0;
  cfg.val_ratio = 0.34;  // force one val item
  cfg.test_ratio = 0.0;
  SplitPlan plan = greedy_set_cover_split(c, cfg);
  const auto& s = plan.by_student.at("s1");
  // Brute force: minimum cover has size 2 ({q1 or q2} + q3); greedy picks q1 by id.
  std::set<std::string> train(s.train.begin(), s.train.end());
  CHECK(train.count("q1") == 1);
  CHECK(train.count("q3") == 1);
  CHECK(s.train.size() + s.val.size() + s.test.size() == 3);
  CHECK(s.val.size() == 1);
}

TEST_CASE("single student single question forces train") {
  Corpus c = build_corpus({"s1"}, {{"q1", "t", {"A"}}}, {{"A", "x"}},
                          {{"s1", "q1", "c", 1.0, {}}});
  SplitConfig cfg;
  cfg.girt_fraction = 1.0;
  SplitPlan plan = greedy_set_cover_split(c, cfg);
  const auto& s = plan.by_student.at("s1");
  CHECK(s.train == std::vector<std::string>{"q1"});
  CHECK(s.val.empty());
  CHECK(s.test.empty());
}

TEST_CASE("cat student below minimum candidate pool is reassigned") {
  SynthConfig scfg;
  scfg.n_students = 10;
  scfg.n_questions = 25;
  scfg.n_kcs = 4;
  Corpus c = synthesize_corpus(scfg, 5).corpus;
  SplitConfig cfg;
  cfg.girt_fraction = 0.5;
  cfg.heldout_size = 5;
  cfg.min_candidates = 30;  // 25 answered - 5 heldout = 20 < 30 -> reassign
  SplitPlan plan = greedy_set_cover_split(c, cfg);
  CHECK(plan.cat_group.empty());
  CHECK(plan.girt_group.size() == 10);

  cfg.min_candidates = 10;
  SplitPlan plan2 = greedy_set_cover_split(c, cfg);
  CHECK(plan2.cat_group.size() == 5);
}

TEST_CASE("split KC coverage invariant holds for all students") {
  SynthConfig scfg;
  scfg.n_students = 40;
  scfg.n_questions = 30;
  scfg.n_kcs = 6;
  scfg.density = 0.85;
  Corpus c = synthesize_corpus(scfg, 17).corpus;
  SplitConfig cfg;
  cfg.girt_fraction = 0.7;
  cfg.heldout_size = 5;
  cfg.min_candidates = 10;
  cfg.seed = 99;
  SplitPlan plan = greedy_set_cover_split(c, cfg);
  for (const auto& [sid, s] : plan.by_student) {
    std::set<std::string> train_kcs;
    for (const auto& qid : s.train)
      for (const auto& k : c.question(qid).kc_ids) train_kcs.insert(k);
    auto check_covered = [&](const std::vector<std::string>& qids) {
      for (const auto& qid : qids)
        for (const auto& k : c.question(qid).kc_ids) CHECK(train_kcs.count(k) == 1);
    };
    check_covered(s.val);
    check_covered(s.test);
    // Per-student lists disjoint.
    std::set<std::string> all;
    size_t total = 0;
    for (const auto* lst : {&s.train, &s.val, &s.test}) {
      for (const auto& q : *lst) all.insert(q);
      total += lst->size();
    }
    CHECK(all.size() == total);
  }
  // girt and cat groups are disjoint.
  std::set<std::string> girt(plan.girt_group.begin(), plan.girt_group.end());
  for (const auto& sid : plan.cat_group) CHECK(girt.count(sid) == 0);
}

TEST_CASE("split is deterministic and round-trips through json") {
  SynthConfig scfg;
  scfg.n_students = 15;
  scfg.n_questions = 12;
  scfg.n_kcs = 4;
  Corpus c = synthesize_corpus(scfg, 23).corpus;
  SplitConfig cfg;
  cfg.girt_fraction = 0.6;
  cfg.heldout_size = 3;
  cfg.min_candidates = 4;
  cfg.seed = 7;
  SplitPlan a = greedy_set_cover_split(c, cfg);
  SplitPlan b = greedy_set_cover_split(c, cfg);
  CHECK(a.girt_group == b.girt_group);
  CHECK(a.cat_group == b.cat_group);
  for (const auto& [sid, s] : a.by_student) {
    CHECK(s.train == b.by_student.at(sid).train);
    CHECK(s.val == b.by_student.at(sid).val);
    CHECK(s.test == b.by_student.at(sid).test);
  }
  auto dir = temp_dir("split_rt");
  save_split(a, (dir / "split.json").string());
  SplitPlan back = load_split((dir / "split.json").string());
  CHECK(back.girt_group == a.girt_group);
  CHECK(back.by_student.at(a.girt_group[0]).train == a.by_student.at(a.girt_group[0]).train);
}

TEST_CASE("synthesis determinism and counts") {
  SynthConfig cfg;
  cfg.n_students = 200;
  cfg.n_questions = 50;
  cfg.n_kcs = 8;
  cfg.density = 1.0;
  auto a = synthesize_corpus(cfg, 7);
  auto b = synthesize_corpus(cfg, 7);
  REQUIRE(a.corpus.responses.size() == 10000);  // 200 x 50 at density 1
  REQUIRE(b.corpus.responses.size() == 10000);
  for (size_t i = 0; i < a.corpus.responses.size(); ++i) {
    CHECK(a.corpus.responses[i].code == b.corpus.responses[i].code);
    CHECK(a.corpus.responses[i].score == b.corpus.responses[i].score);
  }
  CHECK_THROWS_AS(synthesize_corpus(SynthConfig{}, 1), Error);
}

TEST_CASE("1PL rule with theta=b gives ~50% correctness") {
  SynthConfig cfg;
  cfg.n_students = 60;
  cfg.n_questions = 60;
  cfg.n_kcs = 3;
  cfg.rule = ResponseRule::OnePl;
  cfg.ability_sd = 0.0;     // theta = 0 for everyone
  cfg.difficulty_sd = 0.0;  // b = 0 for every item
  auto synth = synthesize_corpus(cfg, 31);
  double correct = 0;
  for (const auto& r : synth.corpus.responses)
    if (r.score == 1.0) correct += 1;
  double rate = correct / static_cast<double>(synth.corpus.responses.size());
  CHECK(rate > 0.46);
  CHECK(rate < 0.54);
}
