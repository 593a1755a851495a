#include "nowcast/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "nowcast/error.hpp"

namespace nowcast {

namespace {

constexpr std::array kTopic = {
    "tax",       "increase",  "sales",     "prices",   "orders",    "demand",    "customers",
    "profits",   "inventory", "exports",   "wages",    "shipments", "revenue",   "production",
    "consumers", "retail",    "factory",   "business", "market",    "spending",  "investment",
    "budget",    "costs",     "employment", "economy", "interest",  "housing",   "tourism",
    "contracts", "bookings",  "margins",   "payroll"};

constexpr std::array kPositive = {
    "strong",    "improving", "robust",  "growing", "recovering", "brisk",   "healthy",
    "solid",     "rising",    "upbeat",  "busy",    "favorable",  "buoyant", "firm",
    "expanding", "lively"};

constexpr std::array kNegative = {
    "weak",      "declining", "sluggish", "falling", "slowing",   "poor",     "stagnant",
    "shrinking", "gloomy",    "soft",     "dull",    "worsening", "depressed", "fragile",
    "slumping",  "tepid"};

constexpr std::array kOther = {
    "football", "match",   "goal",    "striker", "rain",     "snow",    "storm",   "forecast",
    "concert",  "actor",   "film",    "museum",  "garden",   "festival", "league", "coach",
    "weather",  "typhoon", "stadium", "drama",   "novel",    "painting", "anime",  "recipe",
    "hiking",   "temple",  "marathon", "tennis", "baseball", "orchestra"};

constexpr std::array kFunction = {"the", "a", "of", "in", "and", "this", "with", "for", "at", "is"};

constexpr std::array kRegions = {"Hokkaido", "Tohoku", "Kanto", "Chubu", "Kinki",
                                 "Chugoku",  "Shikoku", "Kyushu", "Okinawa"};
constexpr std::array kOccupations = {"taxi driver", "retailer", "hotel manager", "restaurant owner",
                                     "factory worker", "realtor", "travel agent"};

template <std::size_t N>
std::vector<std::string> take(const std::array<const char*, N>& list, std::size_t k,
                              const char* name) {
  if (k == 0 || k > N) {
    throw InvalidArgument(std::string("synthetic: ") + name + " lexicon size must be in [1, " +
                          std::to_string(N) + "]");
  }
  return {list.begin(), list.begin() + static_cast<std::ptrdiff_t>(k)};
}

class SentenceWriter {
 public:
  SentenceWriter(const SyntheticLexicon& lex, std::mt19937_64& rng) : lex_(lex), rng_(rng) {}

  const std::string& pick(const std::vector<std::string>& words) {
    std::uniform_int_distribution<std::size_t> d(0, words.size() - 1);
    return words[d(rng_)];
  }
  bool coin(double p) { return std::bernoulli_distribution(std::clamp(p, 0.0, 1.0))(rng_); }
  std::size_t between(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  /// Topic words mixed with sentiment words, each positive with probability
  /// `p_positive`.
  std::string economic(double p_positive, double phrase_rate) {
    std::vector<std::string> words;
    const std::size_t n_topic = between(2, 3);
    for (std::size_t k = 0; k < n_topic; ++k) words.push_back(pick(lex_.topic));
    const std::size_t n_sent = between(1, 2);
    for (std::size_t k = 0; k < n_sent; ++k) {
      words.push_back(pick(coin(p_positive) ? lex_.positive : lex_.negative));
    }
    const std::size_t n_func = between(1, 3);
    for (std::size_t k = 0; k < n_func; ++k) words.push_back(pick(lex_.function));
    std::shuffle(words.begin(), words.end(), rng_);
    if (coin(phrase_rate)) words.insert(words.begin() + between(0, words.size()), "tax increase");
    return join(words);
  }

  /// Off-topic words plus sentiment words of a single polarity.
  std::string off_topic(bool positive) {
    std::vector<std::string> words;
    const std::size_t n_other = between(3, 5);
    for (std::size_t k = 0; k < n_other; ++k) words.push_back(pick(lex_.other));
    const std::size_t n_sent = between(1, 2);
    for (std::size_t k = 0; k < n_sent; ++k) {
      words.push_back(pick(positive ? lex_.positive : lex_.negative));
    }
    const std::size_t n_func = between(1, 3);
    for (std::size_t k = 0; k < n_func; ++k) words.push_back(pick(lex_.function));
    std::shuffle(words.begin(), words.end(), rng_);
    return join(words);
  }

 private:
  static std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
      if (!out.empty()) out += ' ';
      out += w;
    }
    return out;
  }

  const SyntheticLexicon& lex_;
  std::mt19937_64& rng_;
};

}  // namespace

Waveform parse_waveform(std::string_view text) {
  if (text == "sine") return Waveform::kSine;
  if (text == "constant") return Waveform::kConstant;
  throw InvalidArgument("unknown waveform '" + std::string(text) + "' (sine|constant)");
}

std::string_view to_string(Waveform w) { return w == Waveform::kSine ? "sine" : "constant"; }

SyntheticLexicon synthetic_lexicon(const SyntheticConfig& config) {
  SyntheticLexicon lex;
  lex.topic = take(kTopic, config.topic_words, "topic");
  lex.positive = take(kPositive, config.sentiment_words, "sentiment");
  lex.negative = take(kNegative, config.sentiment_words, "sentiment");
  lex.other = take(kOther, config.other_words, "non-economic");
  lex.function = {kFunction.begin(), kFunction.end()};
  for (const char* w : {"tax", "increase"}) {
    if (std::find(lex.topic.begin(), lex.topic.end(), w) == lex.topic.end()) {
      throw InvalidArgument("synthetic: topic lexicon must keep 'tax' and 'increase'");
    }
  }
  return lex;
}

SyntheticData generate_synthetic(const SyntheticConfig& config) {
  if (config.months < 2) throw InvalidArgument("synthetic: months must be at least 2");
  if (config.docs_per_month == 0 || config.sentences_per_doc == 0 || config.survey_per_month == 0) {
    throw InvalidArgument("synthetic: per-month counts must be positive");
  }
  for (double rate : {config.outlier_rate, config.phrase_rate}) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw InvalidArgument("synthetic: rates must lie in [0, 1]");
  }
  if (!(config.label_noise >= 0.0) || !(config.period > 0.0)) {
    throw InvalidArgument("synthetic: label_noise must be >= 0 and period > 0");
  }
  const SyntheticLexicon lex = synthetic_lexicon(config);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SentenceWriter writer(lex, rng);
  const std::vector<std::string> regions(kRegions.begin(), kRegions.end());
  const std::vector<std::string> occupations(kOccupations.begin(), kOccupations.end());

  SyntheticData data;
  data.truth.name = "truth";
  Bucket month = bucket_of(config.start, BucketUnit::kMonth);
  std::size_t doc_counter = 0;
  for (std::size_t m = 0; m < config.months; ++m, month = month.next()) {
    double s = config.level;
    if (config.waveform == Waveform::kSine) {
      s = config.amplitude *
          std::sin(2.0 * std::numbers::pi * static_cast<double>(m) / config.period);
    }
    s = std::clamp(s, -1.0, 1.0);
    data.truth.buckets.push_back(month);
    data.truth.values.push_back(s);
    const Date first = Date::from_days(month.start);
    const auto month_days = static_cast<unsigned>((month.end() - month.start).count());

    for (std::size_t k = 0; k < config.survey_per_month; ++k) {
      const double rating = std::clamp(std::round(2.0 * s + config.label_noise * normal(rng)), -2.0, 2.0);
      SurveyResponse r;
      r.region = writer.pick(regions);
      r.occupation = writer.pick(occupations);
      r.condition = static_cast<Condition>(2 - static_cast<int>(rating));
      r.reason = writer.economic((1.0 + rating / 2.0) / 2.0, config.phrase_rate) + ".";
      r.month = first;
      data.survey.push_back(std::move(r));
    }

    const double mood = std::tanh(normal(rng));
    for (std::size_t k = 0; k < config.docs_per_month; ++k) {
      Document doc;
      doc.id = "d" + std::to_string(++doc_counter);
      doc.date = Date{first.year, first.month, 1 + static_cast<unsigned>(writer.between(0, month_days - 1))};
      const bool economic = !writer.coin(config.outlier_rate);
      const bool positive = writer.coin((1.0 + mood) / 2.0);
      auto sentence = [&] {
        return economic ? writer.economic((1.0 + s) / 2.0, config.phrase_rate)
                        : writer.off_topic(positive);
      };
      doc.title = sentence();
      for (std::size_t j = 0; j < config.sentences_per_doc; ++j) {
        if (j > 0) doc.body += ' ';
        doc.body += sentence() + ".";
      }
      data.corpus.push_back(std::move(doc));
      data.economic.push_back(economic);
    }
  }
  return data;
}

}  // namespace nowcast
