#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nowcast/calendar.hpp"
#include "nowcast/corpus.hpp"
#include "nowcast/index.hpp"

namespace nowcast {

/// Shape of the planted monthly sentiment.
enum class Waveform { kSine, kConstant };
Waveform parse_waveform(std::string_view text);
std::string_view to_string(Waveform w);

struct SyntheticConfig {
  std::uint64_t seed = 0;
  std::size_t months = 24;
  Date start{2019, 1, 1};
  std::size_t docs_per_month = 40;
  std::size_t sentences_per_doc = 4;
  std::size_t survey_per_month = 120;
  Waveform waveform = Waveform::kSine;
  double amplitude = 1.0;  // sine amplitude; also clipped to [-1, 1]
  double period = 12.0;    // months per sine cycle
  double level = 0.0;      // value of the constant waveform
  double outlier_rate = 0.3;  // share of documents drawn from the non-economic lexicon
  double label_noise = 0.5;   // sd of the survey rating noise
  double phrase_rate = 0.1;   // chance an economic sentence carries "tax increase"
  /// Number of words taken from each built-in lexicon.
  std::size_t topic_words = 24;
  std::size_t sentiment_words = 12;  // per polarity
  std::size_t other_words = 24;
};

struct SyntheticData {
  std::vector<Document> corpus;
  std::vector<SurveyResponse> survey;
  ReferenceSeries truth;             // planted value per month, in [-1, 1]
  std::vector<bool> economic;        // per corpus document
};

/// Builds a labeled survey, a dated news corpus with injected non-economic
/// documents, and the planted monthly signal. Survey ratings are
/// round(2 s + noise) clipped to the 5-point scale; every sentiment word in
/// an economic sentence is positive with probability (1 + s) / 2 where s is
/// the month's planted value (for survey reasons, the rating / 2 instead).
/// Non-economic documents carry sentiment words whose polarity follows an
/// unrelated monthly mood. Throws InvalidArgument for months < 2, lexicon
/// sizes of zero or beyond the built-in lists, or rates outside [0, 1].
SyntheticData generate_synthetic(const SyntheticConfig& config);

/// The built-in lexicons, for tests that need to know the ground truth.
struct SyntheticLexicon {
  std::vector<std::string> topic;
  std::vector<std::string> positive;
  std::vector<std::string> negative;
  std::vector<std::string> other;
  std::vector<std::string> function;
};
SyntheticLexicon synthetic_lexicon(const SyntheticConfig& config);

}  // namespace nowcast
