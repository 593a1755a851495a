#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nowcast/contribution.hpp"
#include "nowcast/index.hpp"

namespace nowcast {

/// Immutable data behind the HTTP API.
class ServedState {
 public:
  ServedState(std::string run_id, std::vector<ScoredSentence> scored,
              std::vector<ReferenceSeries> references,
              std::optional<RolloutTable> rollout = std::nullopt);

  /// Loads meta.json, scored.jsonl, the reference CSVs listed in the meta
  /// and attention.jsonl when present.
  static ServedState load(const std::filesystem::path& run_dir);

  const std::string& run_id() const { return run_id_; }
  const std::vector<ScoredSentence>& scored() const { return scored_; }
  /// Null when the variant is unavailable (table scores that skip outliers
  /// leave no unfiltered series).
  const IndexSeries* index(BucketUnit unit, Variant variant) const;
  const ReferenceSeries* reference(std::string_view name) const;
  const std::map<std::string, ReferenceSeries, std::less<>>& references() const { return references_; }
  const RolloutTable* rollout() const { return rollout_ ? &*rollout_ : nullptr; }

 private:
  std::string run_id_;
  std::vector<ScoredSentence> scored_;
  std::map<std::string, ReferenceSeries, std::less<>> references_;
  std::optional<RolloutTable> rollout_;
  std::map<std::pair<BucketUnit, Variant>, IndexSeries> indices_;
};

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

using QueryParams = std::multimap<std::string, std::string>;

/// Pure request handler for GET requests:
///   /api/v1/index?from&to&bucket&variant
///   /api/v1/contribution?term&from&to&bucket&method&variant
///   /api/v1/reference?name
///   /api/v1/meta
///   /api/v1/debug/decomposition?from&to&bucket&variant
/// Series bodies are {"buckets": [...], "values": [...], "n": [...]} with
/// null values for empty buckets inside the range; errors are {"error": ...}.
HttpResponse handle_request(const ServedState& state, std::string_view path,
                            const QueryParams& params);

/// Maximum number of buckets a single response may span.
inline constexpr std::size_t kMaxBuckets = 2000;

/// Thin HTTP front end over handle_request.
class HttpServer {
 public:
  explicit HttpServer(const ServedState& state);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace nowcast
