#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "causal_rag/corpus.hpp"
#include "causal_rag/error.hpp"
#include "doctest_util.hpp"

using causal_rag::testing::kind_of;
using namespace causal_rag;

namespace {

DatasetSplit read(const std::string& content, DatasetFormat format, const std::string& name = "t") {
  std::istringstream in(content);
  return read_dataset(in, format, name);
}

}  // namespace

TEST_CASE("tagged sentence with one pair") {
  const auto s = parse_tagged_sentence("Highly viscous <cause> lavas </cause> lead to a violent <effect> eruption </effect>.",
                                       "li", 0);
  REQUIRE(s.pairs.size() == 1);
  CHECK(s.pairs[0] == CauseEffectPair{"lavas", "eruption"});
  // markers are dropped without re-spacing
  CHECK(s.raw_text == "Highly viscous lavas lead to a violent eruption .");
  CHECK(s.id == "li-000000");
  CHECK(s.causal());
}

TEST_CASE("suffix connective sentence") {
  const auto s = parse_tagged_sentence(
      "the onset of <cause> troglitazone </cause> -induced <effect> liver injury </effect> is insidious", "ade", 3);
  REQUIRE(s.pairs.size() == 1);
  CHECK(s.pairs[0] == CauseEffectPair{"troglitazone", "liver injury"});
  CHECK(s.raw_text.find("<") == std::string::npos);
}

TEST_CASE("untagged sentence is non-causal") {
  const auto s = parse_tagged_sentence("The meeting started at noon.", "x", 1);
  CHECK_FALSE(s.causal());
  CHECK(s.raw_text == "The meeting started at noon.");
}

TEST_CASE("one cause, several effects") {
  const auto s = parse_tagged_sentence(
      "<effect>Paralysis</effect> or <effect>convulsions</effect> are caused by <cause>hormone deficiencies and imbalances</cause>.",
      "li", 0);
  REQUIRE(s.pairs.size() == 2);
  CHECK(s.pairs[0] == CauseEffectPair{"hormone deficiencies and imbalances", "Paralysis"});
  CHECK(s.pairs[1] == CauseEffectPair{"hormone deficiencies and imbalances", "convulsions"});
}

TEST_CASE("tag errors") {
  CHECK(kind_of([] { parse_tagged_sentence("<cause>a <effect>b</effect></cause>", "x", 0); }) == ErrorKind::NestedTags);
  CHECK(kind_of([] { parse_tagged_sentence("<cause>a b", "x", 0); }) == ErrorKind::UnbalancedTags);
  CHECK(kind_of([] { parse_tagged_sentence("a </effect> b", "x", 0); }) == ErrorKind::UnbalancedTags);
  CHECK(kind_of([] { parse_tagged_sentence("<cause>  </cause> <effect>b</effect>", "x", 0); }) == ErrorKind::EmptyPhrase);
  CHECK(kind_of([] { parse_tagged_sentence("<cause>a</cause> only", "x", 0); }) == ErrorKind::UnpairedTags);
  CHECK(kind_of([] {
          parse_tagged_sentence("<cause>a</cause> <cause>b</cause> <effect>c</effect> <effect>d</effect>", "x", 0);
        }) == ErrorKind::UnpairedTags);
}

TEST_CASE("strip_tags removes markup only") {
  CHECK(strip_tags("<cause>a</cause>  and <effect>b</effect> ") == "a and b");
  CHECK(strip_tags("x < y") == "x < y");
}

TEST_CASE("render_tagged round-trips through the parser") {
  const std::vector<CauseEffectPair> pairs{{"heavy rain", "flooding"}};
  const std::string tagged = render_tagged("The flooding was caused by heavy rain.", pairs);
  const auto s = parse_tagged_sentence(tagged, "x", 0);
  CHECK(s.pairs == pairs);
  CHECK(s.raw_text == "The flooding was caused by heavy rain.");
}

TEST_CASE("make_sentence rejects phrases missing from the text") {
  CHECK(kind_of([] { make_sentence("x-1", "Fever is caused by flu.", {{"cold", "Fever"}}, "x"); }) ==
        ErrorKind::MalformedRecord);
}

TEST_CASE("Li-format corpus with 786 records") {
  // 105 sentences with two effects, 86 with one, 595 untagged.
  std::ostringstream file;
  std::size_t causal_written = 0;
  for (std::size_t i = 0; i < 786; ++i) {
    if (i % 4 == 1 && causal_written < 191) {
      if (causal_written < 105) {
        file << "<cause>factor " << i << "</cause> causes <effect>outcome a" << i << "</effect> and <effect>outcome b" << i
             << "</effect>.\n";
      } else {
        file << "<cause>factor " << i << "</cause> causes <effect>outcome " << i << "</effect>.\n";
      }
      ++causal_written;
    } else {
      file << "Plain sentence number " << i << " without causality.\n";
    }
  }
  REQUIRE(causal_written == 191);
  const auto split = read(file.str(), DatasetFormat::li, "li");
  CHECK(split.counts == SplitCounts{786, 191, 595});
  const auto stats = dataset_stats(split);
  CHECK(stats.triplet_count == 296);
  CHECK(gold_triplets(split).size() == 296);
  CHECK(stats.pairs_histogram.at(2) == 105);
  CHECK(stats.pairs_histogram.at(1) == 86);
}

TEST_CASE("Li-format explicit pair list") {
  const auto split = read("<cause>Smoking</cause> and <cause>pollution</cause> lead to <effect>asthma</effect>\t"
                          "Smoking => asthma || pollution => asthma\n",
                          DatasetFormat::li);
  REQUIRE(split.instances[0].sentence.pairs.size() == 2);
  CHECK(split.instances[0].label == 1);
}

TEST_CASE("SemEval blocks") {
  const std::string content =
      "1\t\"The <e1>fire</e1> was caused by a <e2>spark</e2>.\"\n"
      "Cause-Effect(e2,e1)\n"
      "Comment: ok\n\n"
      "2\t\"The <e1>cat</e1> sat on the <e2>mat</e2>.\"\n"
      "Other\n\n";
  const auto split = read(content, DatasetFormat::semeval, "semeval");
  REQUIRE(split.instances.size() == 2);
  CHECK(split.instances[0].label == 1);
  CHECK(split.instances[0].sentence.pairs[0] == CauseEffectPair{"spark", "fire"});
  CHECK(split.instances[0].sentence.raw_text == "The fire was caused by a spark.");
  CHECK(split.instances[1].label == 0);
  CHECK(kind_of([] { read("1\t\"no markup\"\nOther\n", DatasetFormat::semeval); }) == ErrorKind::MalformedRecord);
}

TEST_CASE("ADE relation and negative lines") {
  const std::string content =
      "10|Liver injury after troglitazone therapy.|Liver injury|0|12|troglitazone|19|31\n"
      "10|Liver injury after troglitazone therapy.|injury|6|12|troglitazone|19|31\n"
      "11 NEG The patient recovered fully.\n";
  const auto split = read(content, DatasetFormat::ade, "ade");
  REQUIRE(split.instances.size() == 2);
  CHECK(split.instances[0].sentence.pairs.size() == 2);
  CHECK(split.instances[0].sentence.pairs[0] == CauseEffectPair{"troglitazone", "Liver injury"});
  CHECK(split.instances[1].label == 0);
}

TEST_CASE("canonical JSONL round trip") {
  const auto split = read(
      "{\"text\":\"Fever is caused by flu.\",\"label\":1,\"pairs\":[{\"cause\":\"flu\",\"effect\":\"Fever\"}]}\n"
      "{\"text\":\"The sky is blue.\",\"label\":0}\n",
      DatasetFormat::jsonl, "j");
  std::ostringstream out;
  write_canonical_jsonl(split, out);
  const auto again = read(out.str(), DatasetFormat::jsonl, "j");
  REQUIRE(again.instances.size() == 2);
  CHECK(again.instances[0].sentence.id == "j-000000");
  CHECK(again.instances[0].sentence.pairs == split.instances[0].sentence.pairs);
  CHECK(again.instances[0].sentence.tagged_text == split.instances[0].sentence.tagged_text);
  std::ostringstream out2;
  write_canonical_jsonl(again, out2);
  CHECK(out.str() == out2.str());
}

TEST_CASE("JSONL validation errors carry the line number") {
  try {
    read("{\"text\":\"a\",\"label\":0}\n{\"text\":\"b\",\"label\":1}\n", DatasetFormat::jsonl);
    FAIL("expected MalformedRecord");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MalformedRecord);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK(kind_of([] { read("{\"id\":\"a\",\"text\":\"x\",\"label\":0}\n{\"id\":\"a\",\"text\":\"y\",\"label\":0}\n",
                          DatasetFormat::jsonl); }) == ErrorKind::MalformedRecord);
  CHECK(kind_of([] { read("\n\n", DatasetFormat::jsonl); }) == ErrorKind::EmptyDataset);
  CHECK(kind_of([] { parse_dataset_format("xml"); }) == ErrorKind::UnknownFormat);
}

TEST_CASE("load_dataset reports missing files") {
  CHECK(kind_of([] { load_dataset("/nonexistent/file.jsonl", DatasetFormat::jsonl); }) == ErrorKind::IoError);
}
