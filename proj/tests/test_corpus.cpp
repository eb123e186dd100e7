#include <fstream>
#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "spancrf/corpus.hpp"
#include "support/tempdir.hpp"

using namespace spancrf;

TEST_CASE("strip_leading_id") {
  REQUIRE(strip_leading_id("68771,Love doing makeup on all ages") ==
          "Love doing makeup on all ages");
  REQUIRE(strip_leading_id("Love makeup") == "Love makeup");
  REQUIRE(strip_leading_id("12,a,b") == "a,b");
  REQUIRE(strip_leading_id(",starts with comma") == ",starts with comma");
  REQUIRE(strip_leading_id("12x,not a pure id") == "12x,not a pure id");
  REQUIRE(strip_leading_id("123") == "123");
}

namespace {

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  for (const auto& line : lines) out << line << "\n";
}

}  // namespace

TEST_CASE("load_dataset") {
  testsupport::TempDir tmp;

  SECTION("two valid lines load in order") {
    const std::string path = tmp.file("ok.jsonl");
    write_lines(path, {
        R"({"id":"a","subject":"X","text":"hello there","spans":[{"event_type":"consumer_use","start":0,"end":5}]})",
        R"({"id":"b","subject":"Y","text":"68771,Love doing makeup on all ages","spans":[]})",
    });
    const auto records = load_dataset(path);
    REQUIRE(records.size() == 2);
    REQUIRE(records[0].id == "a");
    REQUIRE(records[0].gold_spans.size() == 1);
    REQUIRE(records[1].text == "Love doing makeup on all ages");
  }

  SECTION("span past the end of the text names the record") {
    const std::string path = tmp.file("bad_span.jsonl");
    write_lines(path, {
        R"({"id":"r7","subject":"X","text":"abc","spans":[{"event_type":"consumer_use","start":0,"end":9}]})",
    });
    REQUIRE_THROWS_WITH(load_dataset(path), Catch::Matchers::ContainsSubstring("r7"));
  }

  SECTION("empty file gives an empty list") {
    const std::string path = tmp.file("empty.jsonl");
    write_lines(path, {});
    REQUIRE(load_dataset(path).empty());
  }

  SECTION("parse error cites the line number") {
    const std::string path = tmp.file("broken.jsonl");
    write_lines(path, {
        R"({"id":"a","subject":"X","text":"ok","spans":[]})",
        "{not json",
    });
    REQUIRE_THROWS_WITH(load_dataset(path), Catch::Matchers::ContainsSubstring(":2"));
  }

  SECTION("overlapping gold spans are rejected") {
    const std::string path = tmp.file("overlap.jsonl");
    write_lines(path, {
        R"({"id":"a","subject":"X","text":"abcdef","spans":[{"event_type":"consumer_use","start":0,"end":4},{"event_type":"consumer_needs","start":2,"end":6}]})",
    });
    REQUIRE_THROWS_AS(load_dataset(path), DataError);

    LoadOptions lenient;
    lenient.keep_first_overlap = true;
    const auto records = load_dataset(path, lenient);
    REQUIRE(records[0].gold_spans.size() == 1);
    REQUIRE(records[0].gold_spans[0].start == 0);
    REQUIRE(records[0].gold_spans[0].end == 4);
  }

  SECTION("span offsets are scalar offsets, not bytes") {
    const std::string path = tmp.file("unicode.jsonl");
    // two-codepoint emoji-free multibyte text: "héllo" is 5 scalars, 6 bytes
    write_lines(path, {
        R"({"id":"u","subject":"X","text":"héllo","spans":[{"event_type":"consumer_use","start":0,"end":5}]})",
    });
    const auto records = load_dataset(path);
    REQUIRE(records[0].gold_spans[0].end == 5);
  }

  SECTION("missing file") {
    REQUIRE_THROWS_AS(load_dataset(tmp.file("nope.jsonl")), DataError);
  }
}

TEST_CASE("kfold_split") {
  SECTION("exact division") {
    const auto folds = kfold_split(10, 5, 1);
    REQUIRE(folds.size() == 5);
    std::set<int> all;
    for (const auto& fold : folds) {
      REQUIRE(fold.valid.size() == 2);
      REQUIRE(fold.train.size() == 8);
      for (int idx : fold.valid) {
        REQUIRE(all.insert(idx).second);  // pairwise disjoint
      }
    }
    REQUIRE(all.size() == 10);
  }

  SECTION("remainder distribution") {
    const auto folds = kfold_split(11, 5, 1);
    std::multiset<std::size_t> sizes;
    for (const auto& fold : folds) sizes.insert(fold.valid.size());
    REQUIRE(sizes == std::multiset<std::size_t>{3, 2, 2, 2, 2});
  }

  SECTION("train and valid partition the indices") {
    const auto folds = kfold_split(23, 4, 99);
    for (const auto& fold : folds) {
      std::set<int> train(fold.train.begin(), fold.train.end());
      std::set<int> valid(fold.valid.begin(), fold.valid.end());
      REQUIRE(train.size() + valid.size() == 23);
      for (int idx : valid) REQUIRE_FALSE(train.count(idx));
    }
  }

  SECTION("deterministic for a fixed seed") {
    const auto a = kfold_split(17, 5, 7);
    const auto b = kfold_split(17, 5, 7);
    for (std::size_t f = 0; f < a.size(); ++f) {
      REQUIRE(a[f].valid == b[f].valid);
      REQUIRE(a[f].train == b[f].train);
    }
    const auto c = kfold_split(17, 5, 8);
    bool any_different = false;
    for (std::size_t f = 0; f < a.size(); ++f) {
      if (a[f].valid != c[f].valid) any_different = true;
    }
    REQUIRE(any_different);
  }

  SECTION("errors") {
    REQUIRE_THROWS_AS(kfold_split(3, 5, 1), DataError);
    REQUIRE_THROWS_AS(kfold_split(10, 1, 1), DataError);
  }
}

TEST_CASE("build_input") {
  const std::vector<Record> records = {{"1", "X", "ab", {}}};
  const Vocab vocab = build_vocab(records);

  SECTION("direct layout") {
    const ModelInput input = build_input("X", "ab", vocab, 16);
    REQUIRE(input.tokens == std::vector<int>{Vocab::kCls, vocab.id_of(U'X'), Vocab::kSep,
                                             vocab.id_of(U'a'), vocab.id_of(U'b'),
                                             Vocab::kSep});
    REQUIRE(input.taggable == std::vector<std::uint8_t>{0, 0, 0, 1, 1, 0});
    REQUIRE(input.text_offset == 3);
    REQUIRE(input.n_taggable() == 2);
  }

  SECTION("truncation drops text tail and keeps the final SEP") {
    const ModelInput input = build_input("X", "ab", vocab, 5);
    REQUIRE(input.tokens == std::vector<int>{Vocab::kCls, vocab.id_of(U'X'), Vocab::kSep,
                                             vocab.id_of(U'a'), Vocab::kSep});
    REQUIRE(input.n_taggable() == 1);
  }

  SECTION("empty text has no taggable positions") {
    const ModelInput input = build_input("X", "", vocab, 16);
    REQUIRE(input.tokens == std::vector<int>{Vocab::kCls, vocab.id_of(U'X'), Vocab::kSep,
                                             Vocab::kSep});
    REQUIRE(input.n_taggable() == 0);
  }

  SECTION("subject never fits: error") {
    REQUIRE_THROWS_AS(build_input("XXXX", "ab", vocab, 6), DataError);
  }

  SECTION("taggable count is min(text length, room)") {
    for (int max_len = 6; max_len < 12; ++max_len) {
      const ModelInput input = build_input("X", "abab", vocab, max_len);
      REQUIRE(input.n_taggable() == std::min(4, max_len - 4));
    }
  }

  SECTION("unseen characters map to UNK") {
    const ModelInput input = build_input("X", "aQ", vocab, 16);
    REQUIRE(input.tokens[4] == Vocab::kUnk);
  }
}

TEST_CASE("build_vocab is deterministic and counts reserved ids") {
  const std::vector<Record> records = {{"1", "b", "a", {}}, {"2", "a", "b", {}}};
  const Vocab vocab = build_vocab(records);
  REQUIRE(vocab.size() == 6);  // a, b + 4 reserved
  REQUIRE(vocab.id_of(U'a') == 4);
  REQUIRE(vocab.id_of(U'b') == 5);
  REQUIRE(vocab.id_of(U'z') == Vocab::kUnk);

  const Vocab again = build_vocab(records);
  REQUIRE(again.chars() == vocab.chars());
}
