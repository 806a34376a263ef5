#include <doctest.h>

#include <set>

#include "causal_rag/parallel.hpp"
#include "causal_rag/rng.hpp"
#include "causal_rag/text.hpp"

using namespace causal_rag;

TEST_CASE("whitespace and case helpers") {
  CHECK(text::trim("  a b \t") == "a b");
  CHECK(text::collapse_whitespace(" a \n\t b  c ") == "a b c");
  CHECK(text::normalize("Caused  BY") == "caused by");
  CHECK(text::split_whitespace(" x  y ") == std::vector<std::string>{"x", "y"});
  CHECK(text::contains_normalized("Fever is  CAUSED by flu", "caused by"));
}

TEST_CASE("phrase tokens strip edge punctuation only") {
  CHECK(text::phrase_tokens("Mishandling of weapons,") == std::vector<std::string>{"mishandling", "of", "weapons"});
  CHECK(text::phrase_tokens("troglitazone-induced (liver)") ==
        std::vector<std::string>{"troglitazone-induced", "liver"});
  CHECK(text::phrase_tokens(" -- ... ").empty());
}

TEST_CASE("utf8 decoding counts code points") {
  CHECK(text::utf8_to_code_points("caf\xc3\xa9").size() == 4);
  CHECK(text::utf8_to_code_points("\xe2\x86\x92x") == std::u32string{U'→', U'x'});
}

TEST_CASE("sha256 known vectors") {
  CHECK(text::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(text::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("fnv1a64 known vectors") {
  CHECK(text::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(text::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("utc timestamp shape") {
  const auto ts = text::utc_timestamp();
  CHECK(ts.size() == 20);
  CHECK(ts.back() == 'Z');
  CHECK(ts[10] == 'T');
}

TEST_CASE("seeded rng is reproducible and salt-sensitive") {
  SeededRng a(7, "caused by");
  SeededRng b(7, "caused by");
  SeededRng c(7, "lead to");
  const auto sa = a.sample_indices(100, 10);
  CHECK(sa == b.sample_indices(100, 10));
  CHECK(sa != c.sample_indices(100, 10));
  CHECK(std::set<std::size_t>(sa.begin(), sa.end()).size() == 10);
}

TEST_CASE("sample_indices clamps and stays in range") {
  SeededRng r(1);
  CHECK(r.sample_indices(3, 10).size() == 3);
  CHECK(r.sample_indices(0, 5).empty());
  for (int i = 0; i < 200; ++i) CHECK(r.below(7) < 7);
  CHECK_THROWS(r.below(0));
}

TEST_CASE("below is roughly uniform") {
  SeededRng r(42);
  std::vector<int> hist(5, 0);
  for (int i = 0; i < 50000; ++i) ++hist[r.below(5)];
  for (int h : hist) CHECK(std::abs(h - 10000) < 500);
}

TEST_CASE("parallel_for covers every index once and rethrows") {
  for (std::size_t bound : {1u, 2u, 8u}) {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), bound, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  }
  CHECK_THROWS_AS(parallel_for(10, 4,
                               [](std::size_t i) {
                                 if (i == 3) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}
