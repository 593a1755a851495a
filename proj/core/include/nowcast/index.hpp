#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nowcast/calendar.hpp"
#include "nowcast/corpus.hpp"
#include "nowcast/outlier.hpp"
#include "nowcast/sentiment.hpp"
#include "nowcast/vectorize.hpp"

namespace nowcast {

/// A sentence after the outlier filter and the scorer have seen it.
struct ScoredSentence {
  Sentence sentence;
  std::optional<double> score;     // absent only for table-scored outliers
  std::optional<double> decision;  // absent when no filter ran
  bool inlier = true;
};

using Scorer = std::variant<std::reference_wrapper<const RidgeModel>,
                            std::reference_wrapper<const ScoreTable>>;

/// Runs the filter (if any) and the scorer over every sentence. Ridge
/// scoring scores all sentences; table scoring requires an entry for every
/// sentence that passes the filter and throws InvalidArgument listing the
/// missing ids otherwise. `features` may be null only when there is no
/// filter and the scorer is a table.
std::vector<ScoredSentence> score_sentences(std::span<const Sentence> sentences,
                                            const TfidfModel* features,
                                            const OneClassSvmModel* filter, const Scorer& scorer);

/// Which sentences a series is built from.
enum class Variant { kFiltered, kUnfiltered };
Variant parse_variant(std::string_view text);
std::string_view to_string(Variant v);

struct SeriesView {
  std::span<const Bucket> buckets;
  std::span<const double> values;
};

/// Per-bucket mean sentence score. Only buckets with at least one sentence
/// appear; buckets are strictly increasing.
struct IndexSeries {
  BucketUnit unit = BucketUnit::kMonth;
  std::vector<Bucket> buckets;
  std::vector<double> values;
  std::vector<std::size_t> n_sentences;

  SeriesView view() const { return {buckets, values}; }
};

/// Mean score per bucket over the sentences selected by `variant`.
IndexSeries aggregate_index(std::span<const ScoredSentence> scored, BucketUnit unit,
                            Variant variant = Variant::kFiltered);

/// Segment, filter, score and aggregate in one call.
IndexSeries compute_index(std::span<const Document> corpus, const Tokenizer& tokenizer,
                          const TfidfModel* features, const OneClassSvmModel* filter,
                          const Scorer& scorer, BucketUnit unit);

void write_index_csv(std::ostream& out, const IndexSeries& series);
IndexSeries read_index_csv(std::istream& in, BucketUnit unit);

/// Monthly external series (survey DI, GDP, PMI, ...).
struct ReferenceSeries {
  std::string name;
  std::vector<Bucket> buckets;
  std::vector<double> values;

  SeriesView view() const { return {buckets, values}; }
};

/// Reads `month,value`; blank values are treated as missing and skipped.
ReferenceSeries read_reference_csv(std::istream& in, std::string name);
void write_reference_csv(std::ostream& out, const ReferenceSeries& series);

/// Weight per condition in `Condition` order (◎ ○ □ △ ×).
using DiWeights = std::array<double, 5>;
inline constexpr DiWeights kDefaultDiWeights = {1.0, 0.75, 0.5, 0.25, 0.0};

/// 100 × sum_k share_k × weight_k over the responses dated in `month`.
/// Throws InvalidArgument when no response falls in that month.
double compute_di(std::span<const SurveyResponse> responses, const Date& month,
                  const DiWeights& weights = kDefaultDiWeights);

/// DI for every month present in `responses`.
ReferenceSeries di_series(std::span<const SurveyResponse> responses,
                          const DiWeights& weights = kDefaultDiWeights);

/// Sample Pearson correlation. Throws InvalidArgument for fewer than two
/// points, mismatched lengths or a constant series.
double pearson(std::span<const double> a, std::span<const double> b);

/// Pearson over the buckets present in both series.
double pearson(const SeriesView& a, const SeriesView& b);

}  // namespace nowcast
