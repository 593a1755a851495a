#include <sstream>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "nowcast/corpus.hpp"
#include "nowcast/error.hpp"

using namespace nowcast;

namespace {

SurveyParseResult parse(const std::string& text) {
  std::istringstream in(text);
  return parse_survey(in);
}

const std::string kHeader = "region,occupation,condition,reason,month\n";

}  // namespace

TEST(Calendar, ParsesDatesAndTruncatesTime) {
  EXPECT_EQ(parse_date("2020-02-29"), (Date{2020, 2, 29}));
  EXPECT_EQ(parse_date("2020-02-29T23:59:59+09:00"), (Date{2020, 2, 29}));
  EXPECT_EQ(parse_date("2020-02-29 08:00"), (Date{2020, 2, 29}));
  EXPECT_THROW(parse_date("2019-02-29"), ParseError);
  EXPECT_THROW(parse_date("2020-13-01"), ParseError);
  EXPECT_THROW(parse_date("20200101"), ParseError);
  EXPECT_EQ(parse_month("2008-01"), (Date{2008, 1, 1}));
  EXPECT_THROW(parse_month("2008-1"), ParseError);
}

TEST(Calendar, IsoWeekLabels) {
  EXPECT_EQ(bucket_of({2020, 12, 31}, BucketUnit::kWeek).label(), "2020-W53");
  EXPECT_EQ(bucket_of({2021, 1, 3}, BucketUnit::kWeek).label(), "2020-W53");
  EXPECT_EQ(bucket_of({2021, 1, 4}, BucketUnit::kWeek).label(), "2021-W01");
  EXPECT_EQ(bucket_of({2019, 12, 30}, BucketUnit::kWeek).label(), "2020-W01");
  const Bucket w = bucket_of({2021, 1, 6}, BucketUnit::kWeek);
  EXPECT_EQ(Date::from_days(w.start), (Date{2021, 1, 4}));
}

TEST(Calendar, LabelsRoundTripForEveryUnit) {
  gen::Rng rng(7);
  for (int k = 0; k < 500; ++k) {
    const Date d = Date::from_days(Date{2000, 1, 1}.days() + std::chrono::days{gen::index(rng, 0, 12000)});
    for (BucketUnit unit : {BucketUnit::kDay, BucketUnit::kWeek, BucketUnit::kMonth}) {
      const Bucket b = bucket_of(d, unit);
      EXPECT_EQ(parse_bucket_label(b.label(), unit), b);
      EXPECT_LE(b.start, d.days());
      EXPECT_LT(d.days(), b.end());
      EXPECT_EQ(bucket_of(Date::from_days(b.end()), unit), b.next());
    }
  }
}

TEST(Survey, ParsesTaxiDriverRow) {
  const auto r = parse(kHeader + "Hokkaido,taxi driver,×,\"sales are declining, customers are few\",2008-01\n");
  ASSERT_EQ(r.responses.size(), 1u);
  EXPECT_TRUE(r.errors.empty());
  EXPECT_EQ(r.responses[0].region, "Hokkaido");
  EXPECT_EQ(r.responses[0].occupation, "taxi driver");
  EXPECT_EQ(r.responses[0].condition, Condition::kVeryBad);
  EXPECT_EQ(r.responses[0].reason, "sales are declining, customers are few");
  EXPECT_EQ(r.responses[0].month, (Date{2008, 1, 1}));
}

TEST(Survey, UnknownConditionIsRecordError) {
  const auto r = parse(kHeader + "Kanto,retailer,?,busy,2008-01\nKanto,retailer,○,busy,2008-01\n");
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].line, 2u);
  EXPECT_EQ(r.responses.size(), 1u);
}

TEST(Survey, EmptyStreamYieldsNothing) {
  const auto r = parse("");
  EXPECT_TRUE(r.responses.empty());
  EXPECT_TRUE(r.errors.empty());
}

TEST(Survey, EmptyReasonSkippedWithWarning) {
  const auto r = parse(kHeader + "Kanto,retailer,□,   ,2008-01\n");
  EXPECT_TRUE(r.responses.empty());
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.warnings[0].line, 2u);
}

TEST(Survey, AliasesAndMultilineReason) {
  const auto r = parse(kHeader + "Kinki,hotel,vg,\"line one\nline two\",2009-03\nKinki,hotel,b,quiet,2009-03\n");
  ASSERT_EQ(r.responses.size(), 2u);
  EXPECT_EQ(r.responses[0].condition, Condition::kVeryGood);
  EXPECT_EQ(r.responses[0].reason, "line one\nline two");
  EXPECT_EQ(r.responses[1].condition, Condition::kBad);
}

TEST(Survey, BadMonthAndFieldCountReportLines) {
  const auto r = parse(kHeader + "a,b,○,fine,2009-13\na,b,○\n");
  ASSERT_EQ(r.errors.size(), 2u);
  EXPECT_EQ(r.errors[0].line, 2u);
  EXPECT_EQ(r.errors[1].line, 3u);
}

TEST(Survey, WrongHeaderThrows) {
  EXPECT_THROW(parse("region,job,condition,reason,month\n"), ParseError);
}

TEST(Survey, WriteThenParseRoundTrips) {
  std::vector<SurveyResponse> rows = {
      {"Kanto", "taxi driver", Condition::kGood, "more \"tourists\", busy", {2010, 5, 1}},
      {"Kyushu", "retailer", Condition::kVeryBad, "empty shop", {2010, 6, 1}}};
  std::ostringstream out;
  write_survey(out, rows);
  const auto r = parse(out.str());
  ASSERT_EQ(r.responses.size(), 2u);
  EXPECT_EQ(r.responses[0].reason, rows[0].reason);
  EXPECT_EQ(r.responses[1].condition, Condition::kVeryBad);
}

TEST(Corpus, LoadsJsonLines) {
  std::istringstream in(
      "{\"id\":\"a\",\"date\":\"2020-01-05\",\"title\":\"T\",\"body\":\"B。\"}\n\n"
      "{\"id\":\"b\",\"date\":\"2020-01-06T09:00:00\",\"body\":\"C\"}\n");
  const auto docs = load_corpus(in);
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[1].date, (Date{2020, 1, 6}));
  EXPECT_EQ(docs[1].title, "");
}

TEST(Corpus, RejectsDuplicatesAndBadDates) {
  std::istringstream dup(
      "{\"id\":\"a\",\"date\":\"2020-01-05\",\"body\":\"x\"}\n{\"id\":\"a\",\"date\":\"2020-01-05\",\"body\":\"y\"}\n");
  try {
    load_corpus(dup);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream bad("{\"id\":\"a\",\"date\":\"2020-02-30\",\"body\":\"x\"}\n");
  EXPECT_THROW(load_corpus(bad), ParseError);
}

TEST(Segment, SplitsOnIdeographicFullStop) {
  const auto s = segment_text({"d", {2020, 1, 1}, "", "A。B。"});
  EXPECT_EQ(s, (std::vector<std::string>{"A。", "B。"}));
}

TEST(Segment, TitleIsOwnSegment) {
  const auto s = segment_text({"d", {2020, 1, 1}, "T", "A。"});
  EXPECT_EQ(s, (std::vector<std::string>{"T", "A。"}));
}

TEST(Segment, EmptyDocumentHasNoSegments) {
  EXPECT_TRUE(segment_text({"d", {2020, 1, 1}, "", ""}).empty());
}

TEST(Segment, AsciiPeriodNeedsFollowingSpace) {
  const auto s = segment_text({"d", {2020, 1, 1}, "", "Prices rose 3.5 percent. Sales fell.Again"});
  EXPECT_EQ(s, (std::vector<std::string>{"Prices rose 3.5 percent. ", "Sales fell.Again"}));
}

TEST(Segment, RejoiningBodyReproducesIt) {
  gen::Rng rng(11);
  const std::vector<std::string> pieces = {"。", ". ", "x", "東京", " ", ".", "\n", "ab"};
  for (int k = 0; k < 2000; ++k) {
    std::string body;
    const std::size_t n = gen::index(rng, 0, 12);
    for (std::size_t j = 0; j < n; ++j) body += pieces[gen::index(rng, 0, pieces.size() - 1)];
    const bool blank = body.find_first_not_of(" \n") == std::string::npos;
    const Document doc{"d", {2020, 1, 1}, "title", body};
    const auto segs = segment_text(doc);
    ASSERT_FALSE(segs.empty());
    EXPECT_EQ(segs[0], "title");
    std::string joined;
    for (std::size_t j = 1; j < segs.size(); ++j) joined += segs[j];
    EXPECT_EQ(joined, blank ? std::string() : body) << "body: [" << body << "]";
  }
}

TEST(Tokenize, WhitespaceSplit) {
  EXPECT_EQ(tokenize("increase tax"), (std::vector<std::string>{"increase", "tax"}));
}

TEST(Tokenize, CjkBigrams) {
  EXPECT_EQ(tokenize("東京五輪"), (std::vector<std::string>{"東京", "京五", "五輪"}));
  EXPECT_EQ(tokenize("税"), (std::vector<std::string>{"税"}));
}

TEST(Tokenize, PunctuationOnly) { EXPECT_TRUE(tokenize("。").empty()); }

TEST(Tokenize, MixedScriptsAndFolding) {
  EXPECT_EQ(tokenize("ＧＤＰは2.5%増"),
            (std::vector<std::string>{"gdp", "は", "2", "5", "増"}));
  EXPECT_EQ(tokenize("Tax-Increase!"), (std::vector<std::string>{"tax", "increase"}));
  EXPECT_EQ(tokenize("café 1×2"), (std::vector<std::string>{"café", "1", "2"}));
}

TEST(Tokenize, DeterministicOnRandomUtf8) {
  gen::Rng rng(5);
  const std::vector<std::string> pieces = {"a", "Z", "9", "東", "京", "。", " ", "、", "ア", "ー",
                                           "\xff", "\xe3\x81", "é", "税金"};
  for (int k = 0; k < 2000; ++k) {
    std::string text;
    const std::size_t n = gen::index(rng, 0, 15);
    for (std::size_t j = 0; j < n; ++j) text += pieces[gen::index(rng, 0, pieces.size() - 1)];
    const auto a = tokenize(text);
    EXPECT_EQ(a, tokenize(text));
    for (const auto& t : a) EXPECT_FALSE(t.empty());
  }
}

TEST(Sentences, EveryAdmittedSentenceHasTokens) {
  const Document doc{"d7", {2020, 3, 4}, "。", "東京五輪。 。 Sales rose. !!! . ok"};
  const auto sentences = segment_sentences(doc);
  ASSERT_EQ(sentences.size(), 3u);
  for (const auto& s : sentences) {
    EXPECT_GE(s.tokens.size(), 1u);
    EXPECT_EQ(s.doc_id, "d7");
    EXPECT_EQ(s.date, (Date{2020, 3, 4}));
  }
  EXPECT_EQ(sentences[0].id, "d7:1");
  EXPECT_EQ(sentences[0].text, "東京五輪。 ");
}
