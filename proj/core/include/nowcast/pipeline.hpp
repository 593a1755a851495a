#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nowcast/calendar.hpp"
#include "nowcast/contribution.hpp"
#include "nowcast/error.hpp"
#include "nowcast/index.hpp"
#include "nowcast/synthetic.hpp"

namespace nowcast {

/// A failure inside one pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause)
      : Error(stage + ": " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct ReferenceInput {
  std::string name;
  std::filesystem::path path;
};

struct RunConfig {
  std::filesystem::path corpus;      // JSONL documents
  std::filesystem::path survey;      // labeled survey CSV
  std::filesystem::path output_dir = "run";
  std::filesystem::path scores;      // optional TSV; replaces the ridge scorer
  std::filesystem::path attention;   // optional attention records
  std::vector<ReferenceInput> references;
  BucketUnit bucket = BucketUnit::kMonth;
  double nu = 0.1;
  double ocsvm_tol = 1e-6;
  std::vector<double> lambda_grid{std::begin(kDefaultLambdaGrid), std::end(kDefaultLambdaGrid)};
  std::size_t min_df = 2;
  std::uint64_t seed = 0;
  DiWeights di_weights = kDefaultDiWeights;
  bool filter = true;

  /// Relative paths in the file are resolved against `base_dir`.
  static RunConfig from_json(std::string_view text, const std::filesystem::path& base_dir = {});
  std::string to_json() const;
  /// Throws InvalidArgument for out-of-range settings.
  void validate() const;
};

/// Artifact file names inside the output directory.
namespace artifact {
inline constexpr const char* kTfidf = "tfidf.json";
inline constexpr const char* kOcsvm = "ocsvm.json";
inline constexpr const char* kRidge = "ridge.json";
inline constexpr const char* kSentimentReport = "sentiment_report.json";
inline constexpr const char* kScored = "scored.jsonl";
inline constexpr const char* kIndexFiltered = "index_filtered.csv";
inline constexpr const char* kIndexUnfiltered = "index_unfiltered.csv";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kMeta = "meta.json";
inline constexpr const char* kAttention = "attention.jsonl";
inline constexpr const char* kReferencePrefix = "reference_";
}  // namespace artifact

/// Each stage reads its inputs (and earlier artifacts) and writes its own
/// artifacts; failures surface as StageError naming the stage.
void stage_train_outlier(const RunConfig& config);
void stage_train_sentiment(const RunConfig& config);
void stage_score(const RunConfig& config);
void stage_index(const RunConfig& config);

/// train-outlier → train-sentiment → score → index.
void run_pipeline(const RunConfig& config);

void write_scored(std::ostream& out, std::span<const ScoredSentence> scored);
std::vector<ScoredSentence> read_scored(std::istream& in);

/// Reads the whole file; throws Error naming the path when it cannot be opened.
std::string read_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_file(const std::filesystem::path& path, std::string_view content);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view data);

/// Contribution series for `terms` over the scored sentences of a run.
std::vector<ContributionSeries> run_contributions(const std::filesystem::path& run_dir,
                                                  std::span<const std::string> terms,
                                                  BucketUnit unit,
                                                  const ContributionOptions& options);

/// Writes corpus.jsonl, survey.csv and truth.csv into `dir`.
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace nowcast
