#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nowcast/calendar.hpp"
#include "nowcast/index.hpp"

namespace nowcast {

/// How repeated matches of a term inside one sentence are counted.
enum class OccurrenceMode { kPerOccurrence, kOncePerSentence };

/// Start positions of non-overlapping, left-to-right matches of `term`
/// in `tokens`; at most one position in kOncePerSentence mode.
std::vector<std::size_t> find_occurrences(std::span<const std::string> tokens,
                                          std::span<const std::string> term,
                                          OccurrenceMode mode = OccurrenceMode::kPerOccurrence);

/// Equal-share attribution of a sentence score to a (possibly compound) term:
///   c * k * p_s / N_s
/// with c matches of a k-token term in a sentence of N_s tokens.
/// Throws InvalidArgument for an empty term or an empty sentence.
double sentence_contribution_uniform(std::span<const std::string> tokens, double score,
                                     std::span<const std::string> term,
                                     OccurrenceMode mode = OccurrenceMode::kPerOccurrence);

/// L layers × H heads of n×n row-stochastic attention matrices, stored
/// row-major as [layer][head][row][col]. Position 0 is the summary token.
struct AttentionStack {
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::size_t size = 0;
  std::vector<double> data;

  double at(std::size_t l, std::size_t h, std::size_t i, std::size_t j) const {
    return data[((l * heads + h) * size + i) * size + j];
  }
  /// Throws InvalidArgument unless the shape matches and every row is a
  /// probability vector within 1e-6.
  void validate() const;
};

/// Attention rollout from the summary token: per layer the head mean A is
/// mixed with the identity (A/2 + I/2) and row-normalized, the layers are
/// composed last-to-first, and row 0 of the product is returned (length n,
/// sums to 1).
std::vector<double> attention_rollout(const AttentionStack& stack);

/// Rollout mass on the content tokens of one sentence.
struct RolloutWeights {
  std::vector<std::string> tokens;
  std::vector<double> weights;
};

bool is_special_token(std::string_view token);

/// Drops position 0 and special tokens ([CLS], [SEP], [PAD], <s>, </s>, ...)
/// from a full rollout row.
RolloutWeights content_weights(std::span<const std::string> tokens,
                               std::span<const double> rollout_row);

/// Attention-proportional attribution:
///   p_s * (sum of r over the matched positions) / (sum of r over all tokens)
/// The rollout's content tokens must equal `tokens`; otherwise throws
/// InvalidArgument.
double sentence_contribution_rollout(std::span<const std::string> tokens, double score,
                                     std::span<const std::string> term,
                                     const RolloutWeights& rollout,
                                     OccurrenceMode mode = OccurrenceMode::kPerOccurrence);

enum class ContributionMethod { kUniform, kRollout };
ContributionMethod parse_method(std::string_view text);

using RolloutTable = std::unordered_map<std::string, RolloutWeights>;

struct ContributionOptions {
  ContributionMethod method = ContributionMethod::kUniform;
  OccurrenceMode mode = OccurrenceMode::kPerOccurrence;
  Variant variant = Variant::kFiltered;
  const RolloutTable* rollout = nullptr;  // required for kRollout
};

/// p_{t,w} per bucket: mean over every surviving sentence of the bucket of
/// its contribution to `term` (zero when the term is absent). Covers every
/// bucket holding a surviving sentence.
struct ContributionSeries {
  std::string term;
  BucketUnit unit = BucketUnit::kMonth;
  std::vector<Bucket> buckets;
  std::vector<double> values;
  std::vector<std::size_t> n_hits;
};

ContributionSeries contribution_series(std::span<const ScoredSentence> scored,
                                       std::span<const std::string> term_tokens,
                                       BucketUnit unit, const ContributionOptions& options = {});

void write_contribution_csv(std::ostream& out, std::span<const ContributionSeries> series);

/// One line of the attention file.
struct AttentionRecord {
  std::string sentence_id;
  std::vector<std::string> tokens;
  AttentionStack stack;
};

/// Reads attention records: either one JSON object per line or a single JSON
/// array of objects with keys `sentence_id`, `tokens`, `attn` (L×H×n×n).
std::vector<AttentionRecord> load_attention(std::istream& in);

/// Rollout content weights keyed by sentence id.
RolloutTable build_rollout_table(std::span<const AttentionRecord> records);

}  // namespace nowcast
