#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "han/cohort.hpp"
#include "han/corpus.hpp"
#include "han/csv.hpp"
#include "han/embed.hpp"
#include "han/error.hpp"
#include "han/rng.hpp"
#include "han/sha256.hpp"
#include "han/timeparse.hpp"
#include "testutil.hpp"

using namespace han;
using testutil::TempDir;

// ------------------------------------------------------------------ rng ---

TEST_CASE("uniform01 stays in [0,1) and below() respects its bound") {
  Rng rng(123);
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(rng.below(7) < 7);
  }
}

TEST_CASE("identical seeds replay, different seeds diverge") {
  Rng a(99), b(99), c(100);
  bool diverged = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    diverged |= va != c.next_u64();
  }
  CHECK(diverged);
}

TEST_CASE("shuffle is a permutation and below() is visibly uniform") {
  Rng rng(5);
  std::vector<int> v(100);
  for (int i = 0; i < 100; ++i) v[i] = i;
  auto w = v;
  rng.shuffle(w);
  CHECK(w != v);  // 100! permutations; identity would be a miracle
  auto sorted = w;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == v);

  std::vector<int> hits(10, 0);
  for (int i = 0; i < 100000; ++i) ++hits[rng.below(10)];
  for (const int h : hits) {
    CHECK(h > 9000);
    CHECK(h < 11000);
  }
}

TEST_CASE("mix_seed separates streams by tag") {
  CHECK(mix_seed(1, 2) != mix_seed(1, 3));
  CHECK(mix_seed(1, 2) != mix_seed(2, 2));
  CHECK(mix_seed(7, 1, 2) != mix_seed(7, 2, 1));
}

// --------------------------------------------------------------- sha256 ---

TEST_CASE("sha256 matches published test vectors") {
  CHECK(sha256_hex(std::string{}) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex(std::string{"abc"}) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex(std::string{
            "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq"}) ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
  // Incremental hashing across an awkward block boundary.
  Sha256 h;
  const std::string m(1000000, 'a');
  h.update(m.data(), 617);
  h.update(m.data() + 617, m.size() - 617);
  CHECK(h.hex_digest() ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("sha256_file equals in-memory hash") {
  TempDir tmp("sha");
  testutil::write_text(tmp.file("x.bin"), "contents\n");
  CHECK(sha256_file(tmp.file("x.bin")) == sha256_hex(std::string("contents\n")));
}

// ------------------------------------------------------------------ csv ---

TEST_CASE("csv quoting round-trips commas, quotes and newlines") {
  const csv::Row row = {"plain", "with,comma", "with \"quote\"", "multi\nline",
                        ""};
  std::string joined = csv::join(row);
  const auto parsed = csv::parse_line(joined, "test");
  CHECK(parsed == row);
}

TEST_CASE("csv rejects malformed quoting") {
  CHECK_THROWS_AS(csv::parse_line("a,\"unterminated", "test"), ParseError);
  CHECK_THROWS_AS(csv::parse_line("a,\"x\"y,b", "test"), ParseError);
}

TEST_CASE("csv read_file skips blank lines and strips CR") {
  TempDir tmp("csv");
  testutil::write_text(tmp.file("t.csv"), "a,b\r\n\n1,2\n");
  const auto rows = csv::read_file(tmp.file("t.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == csv::Row{"a", "b"});
  CHECK(rows[1] == csv::Row{"1", "2"});
}

// ------------------------------------------------------------ timeparse ---

TEST_CASE("timestamps round-trip and match known epochs") {
  CHECK(parse_utc("1970-01-01T00:00:00Z") == 0);
  CHECK(parse_utc("2009-01-01T00:00:00Z") == 1230768000);
  CHECK(parse_utc("2100-03-01T00:00:00Z") == 4107542400LL);  // post-2038
  CHECK(format_utc(951827696) == "2000-02-29T12:34:56Z");    // leap day
  Rng rng(17);
  for (int i = 0; i < 2000; ++i) {
    const auto t = static_cast<std::int64_t>(rng.below(8000000000ULL)) -
                   1000000000LL;
    CHECK(parse_utc(format_utc(t)) == t);
  }
}

TEST_CASE("malformed timestamps are rejected") {
  for (const char* bad :
       {"2009-13-01T00:00:00Z", "2009-02-29T00:00:00Z", "2009-01-01 00:00:00Z",
        "2009-01-01T24:00:00Z", "2009-01-01T00:00:00", "09-01-01T00:00:00Z",
        "2009-01-01T00:00:60Z", "2009-00-10T00:00:00Z"}) {
    CHECK_THROWS_AS(parse_utc(bad), ParseError);
  }
}

// --------------------------------------------------------------- corpus ---

TEST_CASE("tokenizer lowercases, splits punctuation, and segments sentences") {
  corpus::RawNote note;
  note.note_id = "n1";
  note.text = "Pt c/o SOB. HR 120, afebrile!\nPlan: repeat X-ray?  Stable";
  const auto p = corpus::preprocess_note(note);
  REQUIRE(p.sentences.size() == 4);
  CHECK(p.sentences[0] ==
        std::vector<std::string>{"pt", "c", "/", "o", "sob", "."});
  CHECK(p.sentences[1] == std::vector<std::string>{"hr", "120", ",",
                                                   "afebrile", "!"});
  CHECK(p.sentences[2] == std::vector<std::string>{"plan", ":", "repeat", "x",
                                                   "-", "ray", "?"});
  CHECK(p.sentences[3] == std::vector<std::string>{"stable"});
}

TEST_CASE("terminal punctuation only splits before whitespace") {
  corpus::RawNote note;
  note.note_id = "n1";
  note.text = "temp 98.6 taken at 10.30pm. done";
  const auto p = corpus::preprocess_note(note);
  REQUIRE(p.sentences.size() == 2);  // "98.6" and "10.30pm" keep their dots
  CHECK(p.sentences[0] == std::vector<std::string>{"temp", "98", ".", "6",
                                                   "taken", "at", "10", ".",
                                                   "30pm", "."});
  CHECK(p.sentences[1] == std::vector<std::string>{"done"});
}

TEST_CASE("render_note inverts preprocess_note") {
  corpus::RawNote note;
  note.note_id = "n1";
  note.text = "Pt c/o SOB. HR 120!\nPlan: repeat?  Stable";
  const auto p = corpus::preprocess_note(note);
  const std::string rendered = corpus::render_note(p);
  corpus::RawNote again;
  again.note_id = "n1";
  again.text = rendered;
  const auto p2 = corpus::preprocess_note(again);
  CHECK(p2.sentences == p.sentences);
  CHECK(corpus::render_note(p2) == rendered);  // fixed point
}

TEST_CASE("filter_patients drops minors, error notes, and emptied patients") {
  std::vector<corpus::RawPatient> ps(3);
  ps[0].patient_id = "adult";
  ps[0].age = 18;
  ps[0].notes.resize(2);
  ps[0].notes[0].note_id = "a";
  ps[0].notes[0].text = "ok";
  ps[0].notes[1].note_id = "b";
  ps[0].notes[1].is_error = true;
  ps[0].notes[1].text = "bad";
  ps[1].patient_id = "minor";
  ps[1].age = 17;
  ps[1].notes.resize(1);
  ps[1].notes[0].note_id = "c";
  ps[1].notes[0].text = "ok";
  ps[2].patient_id = "only-errors";
  ps[2].age = 40;
  ps[2].notes.resize(1);
  ps[2].notes[0].note_id = "d";
  ps[2].notes[0].is_error = true;
  ps[2].notes[0].text = "bad";

  const auto kept = corpus::filter_patients(ps);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].patient_id == "adult");
  REQUIRE(kept[0].notes.size() == 1);
  CHECK(kept[0].notes[0].note_id == "a");
}

TEST_CASE("burst segmentation: inclusive window anchored at first note") {
  auto note = [](const char* id, std::int64_t t) {
    corpus::ProcessedNote n;
    n.note_id = id;
    n.charttime = t;
    n.sentences = {{"x"}};
    return n;
  };
  // Window 3600s. 0 and 3600 join (inclusive); 3601 anchors a new burst even
  // though it is within 3600 of the *previous* note — the window is measured
  // from the anchor.
  const auto bursts = corpus::segment_bursts(
      {note("a", 3601), note("b", 0), note("c", 3600), note("d", 7200)}, 3600);
  REQUIRE(bursts.size() == 2);
  CHECK(bursts[0].start_time == 0);
  REQUIRE(bursts[0].notes.size() == 2);
  CHECK(bursts[0].notes[0].note_id == "b");
  CHECK(bursts[0].notes[1].note_id == "c");
  CHECK(bursts[1].start_time == 3601);
  REQUIRE(bursts[1].notes.size() == 2);
  CHECK(bursts[1].notes[0].note_id == "a");
  CHECK(bursts[1].notes[1].note_id == "d");
}

TEST_CASE("burst invariants hold over random timelines") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(40));
    std::vector<corpus::ProcessedNote> notes(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      notes[static_cast<std::size_t>(i)].note_id = std::to_string(i);
      notes[static_cast<std::size_t>(i)].charttime =
          static_cast<std::int64_t>(rng.below(50000));
      notes[static_cast<std::size_t>(i)].sentences = {{"x"}};
    }
    const std::int64_t window = 1 + static_cast<std::int64_t>(rng.below(7200));
    const auto bursts = corpus::segment_bursts(notes, window);

    std::size_t total = 0;
    std::int64_t prev_start = -1;
    std::set<std::string> seen;
    for (const auto& b : bursts) {
      REQUIRE(!b.notes.empty());
      CHECK(b.start_time == b.notes.front().charttime);
      CHECK(b.start_time > prev_start);
      prev_start = b.start_time;
      for (const auto& nt : b.notes) {
        CHECK(nt.charttime >= b.start_time);
        CHECK(nt.charttime <= b.start_time + window);
        CHECK(seen.insert(nt.note_id).second);
      }
      for (std::size_t i = 1; i < b.notes.size(); ++i)
        CHECK(b.notes[i - 1].charttime <= b.notes[i].charttime);
      total += b.notes.size();
    }
    CHECK(total == notes.size());
  }
}

TEST_CASE("corpus jsonl round-trips and validates") {
  TempDir tmp("corpus");
  std::vector<corpus::RawPatient> ps(2);
  ps[0].patient_id = "p1";
  ps[0].age = 63;
  ps[0].notes.resize(1);
  ps[0].notes[0].note_id = "n1";
  ps[0].notes[0].charttime = parse_utc("2104-07-21T09:00:00Z");
  ps[0].notes[0].text = "line one\nline \"two\", quoted";
  ps[1].patient_id = "p2";
  ps[1].age = 80;
  ps[1].notes.resize(1);
  ps[1].notes[0].note_id = "n2";
  ps[1].notes[0].is_error = true;
  ps[1].notes[0].text = "x";

  corpus::write_corpus(ps, tmp.file("c.jsonl"));
  const auto back = corpus::load_corpus(tmp.file("c.jsonl"));
  REQUIRE(back.size() == 2);
  CHECK(back[0].patient_id == "p1");
  CHECK(back[0].age == 63);
  CHECK(back[0].notes[0].charttime == ps[0].notes[0].charttime);
  CHECK(back[0].notes[0].text == ps[0].notes[0].text);
  CHECK(back[1].notes[0].is_error);

  testutil::write_text(tmp.file("bad.jsonl"), "{\"patient_id\":\"p\"\n");
  CHECK_THROWS_AS(corpus::load_corpus(tmp.file("bad.jsonl")), ParseError);
  try {
    corpus::load_corpus(tmp.file("bad.jsonl"));
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }

  // Duplicate patient ids are structural corruption, not a parse problem.
  testutil::write_text(
      tmp.file("dup.jsonl"),
      R"({"patient_id":"p","age":30,"notes":[]})" "\n"
      R"({"patient_id":"p","age":31,"notes":[]})" "\n");
  CHECK_THROWS_AS(corpus::load_corpus(tmp.file("dup.jsonl")), ValidationError);
}

TEST_CASE("build_sequences drops empty notes and patients without text") {
  std::vector<corpus::RawPatient> ps(2);
  ps[0].patient_id = "has-text";
  ps[0].age = 50;
  ps[0].notes.resize(2);
  ps[0].notes[0].note_id = "n1";
  ps[0].notes[0].charttime = 0;
  ps[0].notes[0].text = "some words here";
  ps[0].notes[1].note_id = "n2";
  ps[0].notes[1].charttime = 10;
  ps[0].notes[1].text = "   \n  ";  // tokenizes to nothing
  ps[1].patient_id = "blank";
  ps[1].age = 50;
  ps[1].notes.resize(1);
  ps[1].notes[0].note_id = "n3";
  ps[1].notes[0].charttime = 0;
  ps[1].notes[0].text = " ";

  const auto seqs = corpus::build_sequences(ps, 3600);
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].patient_id == "has-text");
  REQUIRE(seqs[0].bursts.size() == 1);
  CHECK(seqs[0].bursts[0].notes.size() == 1);
}

// ----------------------------------------------------------- embeddings ---

TEST_CASE("embedding load: lookups, OOV zeros, duplicate warning") {
  TempDir tmp("emb");
  testutil::write_text(tmp.file("v.txt"),
                       "3 2\nalpha 1.5 -2.0\nbeta 0.25 0.5\nalpha 7.0 8.0\n");
  const auto table = embed::load_embeddings(tmp.file("v.txt"));
  CHECK(table.dim() == 2);
  CHECK(table.contains("alpha"));
  CHECK(!table.contains("gamma"));
  CHECK(table.lookup("alpha")[0] == 7.0);  // last duplicate wins
  CHECK(table.lookup("beta")[1] == 0.5);
  CHECK(table.lookup("gamma")[0] == 0.0);
  CHECK(table.lookup("gamma")[1] == 0.0);
  REQUIRE(table.warnings().size() == 1);
  CHECK(table.warnings()[0].find("alpha") != std::string::npos);
}

TEST_CASE("embedding parse errors name the line") {
  TempDir tmp("emb2");
  testutil::write_text(tmp.file("a.txt"), "2 3\nw1 1 2 3\nw2 1 2\n");
  CHECK_THROWS_AS(embed::load_embeddings(tmp.file("a.txt")), ParseError);
  testutil::write_text(tmp.file("b.txt"), "1 2\nw1 1 oops\n");
  CHECK_THROWS_AS(embed::load_embeddings(tmp.file("b.txt")), ParseError);
  testutil::write_text(tmp.file("c.txt"), "5 2\nw1 1 2\n");
  CHECK_THROWS_AS(embed::load_embeddings(tmp.file("c.txt")), ParseError);
}

TEST_CASE("embedding checksum tracks content, write round-trips") {
  TempDir tmp("emb3");
  const std::vector<std::string> vocab = {"a", "b"};
  embed::write_embeddings(vocab, {1.0, 2.0, 3.0, 4.0}, 2, tmp.file("w.txt"));
  const auto t1 = embed::load_embeddings(tmp.file("w.txt"));
  CHECK(t1.lookup("b")[1] == 4.0);
  embed::write_embeddings(vocab, {1.0, 2.0, 3.0, 4.5}, 2, tmp.file("w2.txt"));
  const auto t2 = embed::load_embeddings(tmp.file("w2.txt"));
  CHECK(t1.checksum() != t2.checksum());
  const auto t3 = embed::load_embeddings(tmp.file("w.txt"));
  CHECK(t1.checksum() == t3.checksum());
}

// --------------------------------------------------------------- cohort ---

TEST_CASE("labels derive from exact code matches; absent patients negative") {
  TempDir tmp("coh");
  cohort::write_diagnoses(
      {{"p1", "428.0"}, {"p1", "584.9"}, {"p2", "428.0"}, {"p9", "042"}},
      tmp.file("d.csv"));
  const auto diag = cohort::load_diagnoses(tmp.file("d.csv"));
  CHECK(diag.has("p1", "428.0"));
  CHECK(!diag.has("p1", "042"));
  CHECK(diag.count("428.0") == 2);

  const auto labels =
      cohort::derive_labels(diag, {"p1", "p2", "p3"}, {"428.0", "042"});
  CHECK(labels.at(0, 0) == 1);
  CHECK(labels.at(1, 0) == 1);
  CHECK(labels.at(2, 0) == 0);
  CHECK(labels.at(0, 1) == 0);  // p9 not in cohort, p1 lacks 042
  CHECK(labels.positives(0) == 2);
  CHECK(labels.positives(1) == 0);
}

TEST_CASE("task table rejects duplicate codes") {
  TempDir tmp("coh2");
  testutil::write_text(tmp.file("t.csv"),
                       "name,icd9,organ_system\nA,1.0,c\nB,1.0,c\n");
  CHECK_THROWS_AS(cohort::load_tasks(tmp.file("t.csv")), ValidationError);
}

TEST_CASE("pos_weight implements round-half-away total/n_pos/2") {
  CHECK(cohort::pos_weight(1, 4) == 2);       // 2.0
  CHECK(cohort::pos_weight(3, 9) == 2);       // 1.5 rounds up
  CHECK(cohort::pos_weight(5, 11) == 1);      // 1.1 rounds down
  CHECK(cohort::pos_weight(2, 10) == 3);      // 2.5 rounds away
  CHECK(cohort::pos_weight(100, 100) == 1);   // floor at one
  CHECK(cohort::pos_weight(34, 31360) == 461);
  CHECK(cohort::pos_weight(233, 31360) == 67);
  CHECK_THROWS_AS(cohort::pos_weight(0, 10), ValidationError);
  CHECK_THROWS_AS(cohort::pos_weight(11, 10), ValidationError);

  // Exhaustive agreement with floating-point round-half-away-from-zero.
  for (std::int64_t total = 1; total <= 400; ++total) {
    for (std::int64_t n = 1; n <= total; ++n) {
      const double exact = static_cast<double>(total) / n / 2.0;
      const auto expect = static_cast<std::int64_t>(std::floor(exact + 0.5));
      CHECK(cohort::pos_weight(n, total) == expect);
    }
  }
}

TEST_CASE("prevalence tiers: top-k by count then code, low range inclusive") {
  TempDir tmp("coh3");
  std::vector<std::pair<std::string, std::string>> pairs;
  // System "c": code counts c1=5, c2=4, c3=4, c4=3, c5=2, c6=1.
  const std::vector<std::pair<std::string, int>> counts = {
      {"c1", 5}, {"c2", 4}, {"c3", 4}, {"c4", 3}, {"c5", 2}, {"c6", 1}};
  for (const auto& [code, n] : counts)
    for (int i = 0; i < n; ++i)
      pairs.emplace_back("p" + code + std::to_string(i), code);
  cohort::write_diagnoses(pairs, tmp.file("d.csv"));
  const auto diag = cohort::load_diagnoses(tmp.file("d.csv"));
  std::map<std::string, std::string> sys;
  for (const auto& [code, n] : counts) sys[code] = "c";

  const auto tiers = cohort::prevalence_tiers(diag, sys, 2, 3, 2);
  REQUIRE(tiers.count("c"));
  CHECK(tiers.at("c").high == std::vector<std::string>{"c1", "c2"});
  CHECK(tiers.at("c").low == std::vector<std::string>{"c4", "c5"});

  CHECK_THROWS_AS(cohort::prevalence_tiers(diag, sys, 2, 3, 7),
                  ValidationError);
}

TEST_CASE("split: determinism, disjointness, largest-remainder sizes") {
  std::vector<std::string> ids;
  for (int i = 0; i < 83; ++i) ids.push_back("p" + std::to_string(i));

  const auto s1 = cohort::split(ids, 0.7, 0.1, 0.2, 42);
  const auto s2 = cohort::split(ids, 0.7, 0.1, 0.2, 42);
  CHECK(s1.train == s2.train);
  CHECK(s1.val == s2.val);
  CHECK(s1.test == s2.test);
  const auto s3 = cohort::split(ids, 0.7, 0.1, 0.2, 43);
  CHECK(s1.train != s3.train);

  // 83 * (0.7, 0.1, 0.2) = (58.1, 8.3, 16.6): floors (58, 8, 16) leave one
  // seat; test has the largest remainder.
  CHECK(s1.train.size() == 58);
  CHECK(s1.val.size() == 8);
  CHECK(s1.test.size() == 17);

  for (int seed = 0; seed < 200; ++seed) {
    const auto s = cohort::split(ids, 0.5, 0.25, 0.25,
                                 static_cast<std::uint64_t>(seed));
    std::set<std::string> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == ids.size());
    CHECK(s.train.size() + s.val.size() + s.test.size() == ids.size());
    // 83 * (0.5, 0.25, 0.25) = (41.5, 20.75, 20.75): floors (41,20,20) leave
    // two seats; all remainders tie at 0.5/0.75/0.75 -> val and test win.
    CHECK(s.train.size() == 41);
    CHECK(s.val.size() == 21);
    CHECK(s.test.size() == 21);
  }

  CHECK_THROWS_AS(cohort::split(ids, 0.8, 0.1, 0.2, 1), ValidationError);
  CHECK_THROWS_AS(cohort::split({}, 0.7, 0.1, 0.2, 1), ValidationError);
}
