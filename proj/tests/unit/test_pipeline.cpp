#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "nowcast/error.hpp"
#include "nowcast/pipeline.hpp"
#include "nowcast/synthetic.hpp"
#include "scratch.hpp"

using namespace nowcast;
namespace fs = std::filesystem;

namespace {

SyntheticConfig small_config(std::uint64_t seed) {
  SyntheticConfig c;
  c.seed = seed;
  c.months = 12;
  c.docs_per_month = 15;
  c.survey_per_month = 60;
  return c;
}

RunConfig config_for(const fs::path& dir) {
  RunConfig c;
  c.corpus = dir / "corpus.jsonl";
  c.survey = dir / "survey.csv";
  c.output_dir = dir / "run";
  c.references = {{"truth", dir / "truth.csv"}};
  return c;
}

std::string corpus_bytes(const SyntheticData& data) {
  std::ostringstream out;
  write_corpus(out, data.corpus);
  return out.str();
}

}  // namespace

TEST(Synthetic, DeterministicInSeed) {
  const auto a = generate_synthetic(small_config(1));
  const auto b = generate_synthetic(small_config(1));
  const auto c = generate_synthetic(small_config(2));
  EXPECT_EQ(corpus_bytes(a), corpus_bytes(b));
  EXPECT_NE(corpus_bytes(a), corpus_bytes(c));
  EXPECT_EQ(a.truth.values, b.truth.values);
}

TEST(Synthetic, ConstantWaveformIsZero) {
  auto config = small_config(3);
  config.waveform = Waveform::kConstant;
  const auto data = generate_synthetic(config);
  ASSERT_EQ(data.truth.values.size(), 12u);
  for (double v : data.truth.values) EXPECT_EQ(v, 0.0);
}

TEST(Synthetic, ShapeAndOutlierRate) {
  const auto config = small_config(4);
  const auto data = generate_synthetic(config);
  EXPECT_EQ(data.corpus.size(), 12u * 15u);
  EXPECT_EQ(data.survey.size(), 12u * 60u);
  EXPECT_EQ(data.economic.size(), data.corpus.size());
  const auto economic = static_cast<double>(std::count(data.economic.begin(), data.economic.end(), true));
  EXPECT_NEAR(1.0 - economic / static_cast<double>(data.corpus.size()), 0.3, 0.1);
  const auto lex = synthetic_lexicon(config);
  EXPECT_EQ(lex.topic.size(), config.topic_words);
  EXPECT_EQ(lex.positive.size(), config.sentiment_words);
}

TEST(Synthetic, RejectsDegenerateConfigs) {
  auto c = small_config(5);
  c.months = 1;
  EXPECT_THROW(generate_synthetic(c), InvalidArgument);
  c = small_config(5);
  c.topic_words = 0;
  EXPECT_THROW(generate_synthetic(c), InvalidArgument);
  c = small_config(5);
  c.outlier_rate = 1.5;
  EXPECT_THROW(generate_synthetic(c), InvalidArgument);
  EXPECT_THROW(parse_waveform("square"), InvalidArgument);
}

TEST(Pipeline, ConfigJsonRoundTripAndValidation) {
  const auto base = fs::path("/data");
  const auto c = RunConfig::from_json(
      R"({"corpus":"c.jsonl","survey":"/abs/s.csv","bucket":"week","nu":0.2,"seed":9,
          "references":{"gdp":"gdp.csv"},"filter":false})",
      base);
  EXPECT_EQ(c.corpus, base / "c.jsonl");
  EXPECT_EQ(c.survey, fs::path("/abs/s.csv"));
  EXPECT_EQ(c.bucket, BucketUnit::kWeek);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_FALSE(c.filter);
  ASSERT_EQ(c.references.size(), 1u);
  const auto again = RunConfig::from_json(c.to_json());
  EXPECT_EQ(again.to_json(), c.to_json());
  EXPECT_THROW(RunConfig::from_json(R"({"nu":0.1,"typo":1})"), Error);
  auto bad = c;
  bad.nu = 0.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Pipeline, MissingSurveyNamesPath) {
  const Scratch dir("missing_survey");
  write_synthetic(generate_synthetic(small_config(6)), dir.path());
  auto config = config_for(dir.path());
  config.survey = dir.path() / "nope.csv";
  try {
    run_pipeline(config);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "train-outlier");
    EXPECT_NE(std::string(e.what()).find("nope.csv"), std::string::npos);
  }
}

TEST(Pipeline, RerunIsByteIdentical) {
  const Scratch dir("rerun");
  write_synthetic(generate_synthetic(small_config(7)), dir.path());
  const auto config = config_for(dir.path());
  run_pipeline(config);
  std::map<std::string, std::string> first;
  for (const auto& entry : fs::directory_iterator(config.output_dir)) {
    first[entry.path().filename().string()] = read_file(entry.path());
  }
  run_pipeline(config);
  for (const auto& [name, bytes] : first) {
    EXPECT_EQ(read_file(config.output_dir / name), bytes) << name;
  }
  for (const char* name : {artifact::kTfidf, artifact::kOcsvm, artifact::kRidge, artifact::kScored,
                           artifact::kIndexFiltered, artifact::kIndexUnfiltered, artifact::kReport,
                           artifact::kMeta}) {
    EXPECT_TRUE(first.count(name)) << name;
  }
  const auto meta = nlohmann::json::parse(first.at(artifact::kMeta));
  EXPECT_EQ(meta.at("run_id").get<std::string>().size(), 16u);
}

TEST(Pipeline, StagesResumeFromArtifacts) {
  const Scratch dir("stages");
  write_synthetic(generate_synthetic(small_config(8)), dir.path());
  const auto config = config_for(dir.path());
  EXPECT_THROW(stage_score(config), StageError);
  stage_train_outlier(config);
  stage_train_sentiment(config);
  stage_score(config);
  stage_index(config);
  const std::string staged = read_file(config.output_dir / artifact::kIndexFiltered);
  run_pipeline(config);
  EXPECT_EQ(read_file(config.output_dir / artifact::kIndexFiltered), staged);
}

TEST(Pipeline, ScoredJsonlRoundTrip) {
  const Scratch dir("scored");
  write_synthetic(generate_synthetic(small_config(9)), dir.path());
  const auto config = config_for(dir.path());
  run_pipeline(config);
  std::ifstream in(config.output_dir / artifact::kScored);
  const auto scored = read_scored(in);
  ASSERT_FALSE(scored.empty());
  std::ostringstream out;
  write_scored(out, scored);
  EXPECT_EQ(out.str(), read_file(config.output_dir / artifact::kScored));
}

TEST(Pipeline, TableScoresReplaceRidge) {
  const Scratch dir("table");
  write_synthetic(generate_synthetic(small_config(10)), dir.path());
  auto config = config_for(dir.path());
  run_pipeline(config);
  std::ifstream in(config.output_dir / artifact::kScored);
  const auto scored = read_scored(in);
  std::ostringstream tsv;
  for (const auto& s : scored) {
    if (s.inlier) tsv << s.sentence.id << '\t' << 1.0 << '\n';
  }
  write_file(dir.path() / "scores.tsv", tsv.str());
  config.scores = dir.path() / "scores.tsv";
  config.output_dir = dir.path() / "run_table";
  run_pipeline(config);
  std::ifstream idx(config.output_dir / artifact::kIndexFiltered);
  const auto series = read_index_csv(idx, BucketUnit::kMonth);
  for (double v : series.values) EXPECT_EQ(v, 1.0);
  EXPECT_FALSE(fs::exists(config.output_dir / artifact::kIndexUnfiltered));
}

TEST(Pipeline, ContributionsFromRun) {
  const Scratch dir("contrib");
  write_synthetic(generate_synthetic(small_config(11)), dir.path());
  const auto config = config_for(dir.path());
  run_pipeline(config);
  const std::vector<std::string> terms = {"tax increase", "zzzz"};
  const auto series = run_contributions(config.output_dir, terms, BucketUnit::kMonth, {});
  ASSERT_EQ(series.size(), 2u);
  EXPECT_EQ(series[0].term, "tax increase");
  for (double v : series[1].values) EXPECT_EQ(v, 0.0);
}

TEST(Pipeline, FnvKnownValues) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}
