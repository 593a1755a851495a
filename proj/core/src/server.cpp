#include "nowcast/server.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <httplib.h>
#include <json.hpp>

#include "nowcast/error.hpp"
#include "nowcast/pipeline.hpp"

namespace nowcast {

namespace fs = std::filesystem;
using json = nlohmann::json;

ServedState::ServedState(std::string run_id, std::vector<ScoredSentence> scored,
                         std::vector<ReferenceSeries> references,
                         std::optional<RolloutTable> rollout)
    : run_id_(std::move(run_id)), scored_(std::move(scored)), rollout_(std::move(rollout)) {
  for (auto& r : references) {
    auto name = r.name;
    references_.emplace(std::move(name), std::move(r));
  }
  for (BucketUnit unit : {BucketUnit::kDay, BucketUnit::kWeek, BucketUnit::kMonth}) {
    for (Variant v : {Variant::kFiltered, Variant::kUnfiltered}) {
      try {
        indices_.emplace(std::pair{unit, v}, aggregate_index(scored_, unit, v));
      } catch (const InvalidArgument&) {
        if (v == Variant::kFiltered) throw;
      }
    }
  }
}

ServedState ServedState::load(const fs::path& run_dir) {
  const json meta = json::parse(read_file(run_dir / artifact::kMeta));
  std::vector<ScoredSentence> scored;
  {
    std::ifstream in(run_dir / artifact::kScored, std::ios::binary);
    if (!in) throw Error("cannot open '" + (run_dir / artifact::kScored).string() + "'");
    scored = read_scored(in);
  }
  std::vector<ReferenceSeries> refs;
  for (const auto& name : meta.at("references")) {
    const auto n = name.get<std::string>();
    std::ifstream in(run_dir / (std::string(artifact::kReferencePrefix) + n + ".csv"), std::ios::binary);
    if (!in) throw Error("missing reference artifact for '" + n + "'");
    refs.push_back(read_reference_csv(in, n));
  }
  std::optional<RolloutTable> rollout;
  if (fs::exists(run_dir / artifact::kAttention)) {
    std::ifstream in(run_dir / artifact::kAttention, std::ios::binary);
    rollout = build_rollout_table(load_attention(in));
  }
  return ServedState(meta.at("run_id").get<std::string>(), std::move(scored), std::move(refs),
                     std::move(rollout));
}

const IndexSeries* ServedState::index(BucketUnit unit, Variant variant) const {
  const auto it = indices_.find({unit, variant});
  return it == indices_.end() ? nullptr : &it->second;
}

const ReferenceSeries* ServedState::reference(std::string_view name) const {
  const auto it = references_.find(name);
  return it == references_.end() ? nullptr : &it->second;
}

namespace {

struct HttpError {
  int status;
  std::string message;
};

HttpResponse error_response(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

std::optional<std::string> param(const QueryParams& params, const std::string& key) {
  const auto it = params.find(key);
  if (it == params.end()) return std::nullopt;
  return it->second;
}

BucketUnit bucket_param(const QueryParams& params) {
  const auto text = param(params, "bucket").value_or("month");
  try {
    return parse_bucket_unit(text);
  } catch (const Error&) {
    throw HttpError{400, "unknown bucket '" + text + "' (day|week|month)"};
  }
}

const IndexSeries& index_of(const ServedState& state, BucketUnit unit, Variant variant) {
  const IndexSeries* s = state.index(unit, variant);
  if (s == nullptr) {
    throw HttpError{404, "variant '" + std::string(to_string(variant)) + "' is not available for this run"};
  }
  return *s;
}

Variant variant_param(const QueryParams& params) {
  const auto text = param(params, "variant").value_or("filtered");
  try {
    return parse_variant(text);
  } catch (const Error&) {
    throw HttpError{404, "unknown variant '" + text + "'"};
  }
}

// Accepts a bucket label of the requested unit or any date inside one.
std::optional<Bucket> bound_param(const QueryParams& params, const std::string& key,
                                  BucketUnit unit) {
  const auto text = param(params, key);
  if (!text || text->empty()) return std::nullopt;
  try {
    return parse_bucket_label(*text, unit);
  } catch (const Error&) {
  }
  try {
    return bucket_of(parse_month_or_date(*text), unit);
  } catch (const Error&) {
    throw HttpError{400, "invalid '" + key + "' value '" + *text + "'"};
  }
}

// Buckets from..to (clamped to the data) with nulls for gaps.
json windowed(std::span<const Bucket> buckets, std::span<const double> values,
              std::span<const std::size_t> counts, const QueryParams& params, BucketUnit unit) {
  const auto from = bound_param(params, "from", unit);
  const auto to = bound_param(params, "to", unit);
  if (from && to && *to < *from) throw HttpError{400, "'from' is after 'to'"};
  json out = {{"buckets", json::array()}, {"values", json::array()}, {"n", json::array()}};
  if (buckets.empty()) return out;
  const Bucket first = from ? std::max(*from, buckets.front()) : buckets.front();
  const Bucket last = to ? std::min(*to, buckets.back()) : buckets.back();
  if (last < first) return out;
  std::size_t span = 0;
  for (Bucket b = first; !(last < b); b = b.next()) {
    if (++span > kMaxBuckets) {
      throw HttpError{400, "range spans more than " + std::to_string(kMaxBuckets) + " buckets"};
    }
  }
  auto it = std::lower_bound(buckets.begin(), buckets.end(), first);
  for (Bucket b = first; !(last < b); b = b.next()) {
    out["buckets"].push_back(b.label());
    if (it != buckets.end() && *it == b) {
      const auto k = static_cast<std::size_t>(it - buckets.begin());
      out["values"].push_back(values[k]);
      out["n"].push_back(counts[k]);
      ++it;
    } else {
      out["values"].push_back(nullptr);
      out["n"].push_back(0);
    }
  }
  return out;
}

json index_body(const ServedState& state, const QueryParams& params) {
  const BucketUnit unit = bucket_param(params);
  const Variant variant = variant_param(params);
  const IndexSeries& s = index_of(state, unit, variant);
  json body = windowed(s.buckets, s.values, s.n_sentences, params, unit);
  body["run_id"] = state.run_id();
  body["bucket"] = std::string(to_string(unit));
  body["variant"] = std::string(to_string(variant));
  return body;
}

json contribution_body(const ServedState& state, const QueryParams& params) {
  const auto term = param(params, "term").value_or("");
  const auto tokens = tokenize(term);
  if (tokens.empty()) throw HttpError{400, "'term' must contain at least one token"};
  const BucketUnit unit = bucket_param(params);
  ContributionOptions options;
  options.variant = variant_param(params);
  const auto method = param(params, "method").value_or("uniform");
  try {
    options.method = parse_method(method);
  } catch (const Error&) {
    throw HttpError{400, "unknown method '" + method + "' (uniform|rollout)"};
  }
  if (const auto mode = param(params, "occurrences")) {
    if (*mode == "each") options.mode = OccurrenceMode::kPerOccurrence;
    else if (*mode == "once") options.mode = OccurrenceMode::kOncePerSentence;
    else throw HttpError{400, "unknown occurrences mode '" + *mode + "' (each|once)"};
  }
  ContributionSeries series;
  if (options.method == ContributionMethod::kRollout) {
    if (state.rollout() == nullptr) {
      throw HttpError{409, "rollout needs attention data, and this run was loaded without any"};
    }
    options.rollout = state.rollout();
    try {
      series = contribution_series(state.scored(), tokens, unit, options);
    } catch (const InvalidArgument& e) {
      throw HttpError{409, std::string("attention data is incomplete: ") + e.what()};
    }
  } else {
    series = contribution_series(state.scored(), tokens, unit, options);
  }
  json body = windowed(series.buckets, series.values, series.n_hits, params, unit);
  body["run_id"] = state.run_id();
  body["term"] = term;
  body["tokens"] = tokens;
  body["method"] = method;
  body["bucket"] = std::string(to_string(unit));
  body["variant"] = std::string(to_string(options.variant));
  return body;
}

json reference_body(const ServedState& state, const QueryParams& params) {
  const auto name = param(params, "name");
  if (!name || name->empty()) throw HttpError{400, "'name' is required"};
  const ReferenceSeries* r = state.reference(*name);
  if (r == nullptr) throw HttpError{404, "unknown reference '" + *name + "'"};
  json body = {{"name", r->name}, {"buckets", json::array()}, {"values", r->values}};
  for (const auto& b : r->buckets) body["buckets"].push_back(b.label());
  return body;
}

json meta_body(const ServedState& state) {
  const IndexSeries& month = *state.index(BucketUnit::kMonth, Variant::kFiltered);
  json refs = json::array();
  for (const auto& [name, _] : state.references()) refs.push_back(name);
  json variants = json::array();
  for (Variant v : {Variant::kFiltered, Variant::kUnfiltered}) {
    if (state.index(BucketUnit::kMonth, v) != nullptr) variants.push_back(std::string(to_string(v)));
  }
  std::size_t inliers = 0;
  for (const auto& s : state.scored()) inliers += s.inlier ? 1 : 0;
  json body = {{"run_id", state.run_id()},
               {"variants", variants},
               {"buckets", {"day", "week", "month"}},
               {"methods", state.rollout() ? json{"uniform", "rollout"} : json{"uniform"}},
               {"references", refs},
               {"attention", state.rollout() != nullptr},
               {"n_sentences", state.scored().size()},
               {"n_inliers", inliers},
               {"max_buckets", kMaxBuckets}};
  body["range"] = month.buckets.empty()
                      ? json(nullptr)
                      : json{{"from", month.buckets.front().label()}, {"to", month.buckets.back().label()}};
  return body;
}

// Sum of uniform contributions over every distinct token next to the index.
json decomposition_body(const ServedState& state, const QueryParams& params) {
  const BucketUnit unit = bucket_param(params);
  const Variant variant = variant_param(params);
  const IndexSeries& index = index_of(state, unit, variant);
  std::set<std::string> vocabulary;
  for (const auto& s : state.scored()) {
    if (variant == Variant::kUnfiltered || s.inlier) vocabulary.insert(s.sentence.tokens.begin(), s.sentence.tokens.end());
  }
  std::vector<double> sums(index.buckets.size(), 0.0);
  ContributionOptions options;
  options.variant = variant;
  for (const auto& token : vocabulary) {
    const std::string term[] = {token};
    const ContributionSeries c = contribution_series(state.scored(), term, unit, options);
    for (std::size_t k = 0; k < c.buckets.size(); ++k) sums[k] += c.values[k];
  }
  json body = windowed(index.buckets, index.values, index.n_sentences, params, unit);
  json contribution_sum = json::array();
  json abs_error = json::array();
  std::size_t k = 0;
  for (const auto& label : body["buckets"]) {
    const Bucket b = parse_bucket_label(label.get<std::string>(), unit);
    while (k < index.buckets.size() && index.buckets[k] < b) ++k;
    if (k < index.buckets.size() && index.buckets[k] == b) {
      contribution_sum.push_back(sums[k]);
      abs_error.push_back(std::abs(sums[k] - index.values[k]));
    } else {
      contribution_sum.push_back(nullptr);
      abs_error.push_back(nullptr);
    }
  }
  body["contribution_sum"] = contribution_sum;
  body["abs_error"] = abs_error;
  body["vocabulary_size"] = vocabulary.size();
  body["run_id"] = state.run_id();
  return body;
}

}  // namespace

HttpResponse handle_request(const ServedState& state, std::string_view path,
                            const QueryParams& params) {
  try {
    if (path == "/api/v1/index") return {200, index_body(state, params).dump()};
    if (path == "/api/v1/contribution") return {200, contribution_body(state, params).dump()};
    if (path == "/api/v1/reference") return {200, reference_body(state, params).dump()};
    if (path == "/api/v1/meta") return {200, meta_body(state).dump()};
    if (path == "/api/v1/debug/decomposition") return {200, decomposition_body(state, params).dump()};
    return error_response(404, "no such endpoint '" + std::string(path) + "'");
  } catch (const HttpError& e) {
    return error_response(e.status, e.message);
  } catch (const InvalidArgument& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

struct HttpServer::Impl {
  const ServedState& state;
  httplib::Server server;
};

HttpServer::HttpServer(const ServedState& state) : impl_(new Impl{state, {}}) {
  impl_->server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  impl_->server.Get(R"(/api/v1/.*)", [this](const httplib::Request& req, httplib::Response& res) {
    QueryParams params(req.params.begin(), req.params.end());
    const HttpResponse r = handle_request(impl_->state, req.path, params);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace nowcast
