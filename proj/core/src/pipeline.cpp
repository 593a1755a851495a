#include "nowcast/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "nowcast/outlier.hpp"
#include "nowcast/sentiment.hpp"
#include "nowcast/vectorize.hpp"

namespace nowcast {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

fs::path resolve(const fs::path& base, const std::string& value) {
  if (value.empty()) return {};
  fs::path p(value);
  return p.is_relative() && !base.empty() ? base / p : p;
}

// Settings that shape results; paths are excluded so a run id survives moves.
json settings_json(const RunConfig& c) {
  return {{"bucket", std::string(to_string(c.bucket))},
          {"nu", c.nu},
          {"ocsvm_tol", c.ocsvm_tol},
          {"lambda_grid", c.lambda_grid},
          {"min_df", c.min_df},
          {"seed", c.seed},
          {"di_weights", c.di_weights},
          {"filter", c.filter}};
}

template <typename F>
void run_stage(const char* name, F&& body) {
  try {
    body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::vector<SurveyResponse> load_survey_file(const fs::path& path) {
  if (path.empty()) throw InvalidArgument("no survey file configured");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open survey file '" + path.string() + "'");
  SurveyParseResult parsed = parse_survey(in);
  for (const auto& issue : parsed.errors) {
    std::cerr << "warning: " << path.string() << ": line " << issue.line << ": " << issue.message
              << " (record rejected)\n";
  }
  for (const auto& issue : parsed.warnings) {
    std::cerr << "warning: " << path.string() << ": line " << issue.line << ": " << issue.message
              << '\n';
  }
  if (parsed.responses.empty()) throw InvalidArgument("survey file '" + path.string() + "' has no usable records");
  return std::move(parsed.responses);
}

std::vector<Document> load_corpus_file(const fs::path& path) {
  if (path.empty()) throw InvalidArgument("no corpus file configured");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus file '" + path.string() + "'");
  try {
    auto docs = load_corpus(in);
    if (docs.empty()) throw InvalidArgument("corpus is empty");
    return docs;
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::vector<std::vector<std::string>> survey_tokens(std::span<const SurveyResponse> survey) {
  const BigramTokenizer tokenizer;
  std::vector<std::vector<std::string>> docs;
  docs.reserve(survey.size());
  for (const auto& r : survey) docs.push_back(tokenizer.tokenize(r.reason));
  return docs;
}

TfidfModel load_tfidf(const fs::path& dir) {
  return TfidfModel::from_json(read_file(dir / artifact::kTfidf));
}

std::vector<ScoredSentence> load_scored(const fs::path& dir) {
  std::ifstream in(dir / artifact::kScored, std::ios::binary);
  if (!in) throw Error("cannot open '" + (dir / artifact::kScored).string() + "'; run the score stage first");
  return read_scored(in);
}

template <typename Series>
std::string to_csv(void (*writer)(std::ostream&, const Series&), const Series& s) {
  std::ostringstream out;
  writer(out, s);
  return out.str();
}

json nullable(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

RunConfig RunConfig::from_json(std::string_view text, const fs::path& base_dir) {
  RunConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ParseError("config must be a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "corpus") c.corpus = resolve(base_dir, value.get<std::string>());
      else if (key == "survey") c.survey = resolve(base_dir, value.get<std::string>());
      else if (key == "output_dir") c.output_dir = resolve(base_dir, value.get<std::string>());
      else if (key == "scores") c.scores = resolve(base_dir, value.get<std::string>());
      else if (key == "attention") c.attention = resolve(base_dir, value.get<std::string>());
      else if (key == "references") {
        for (const auto& [name, path] : value.items()) {
          c.references.push_back({name, resolve(base_dir, path.get<std::string>())});
        }
      } else if (key == "bucket") c.bucket = parse_bucket_unit(value.get<std::string>());
      else if (key == "nu") c.nu = value.get<double>();
      else if (key == "ocsvm_tol") c.ocsvm_tol = value.get<double>();
      else if (key == "lambda_grid") c.lambda_grid = value.get<std::vector<double>>();
      else if (key == "min_df") c.min_df = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "di_weights") c.di_weights = value.get<DiWeights>();
      else if (key == "filter") c.filter = value.get<bool>();
      else throw ParseError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string RunConfig::to_json() const {
  json j = settings_json(*this);
  j["corpus"] = corpus.string();
  j["survey"] = survey.string();
  j["output_dir"] = output_dir.string();
  if (!scores.empty()) j["scores"] = scores.string();
  if (!attention.empty()) j["attention"] = attention.string();
  json refs = json::object();
  for (const auto& r : references) refs[r.name] = r.path.string();
  j["references"] = refs;
  return j.dump(2);
}

void RunConfig::validate() const {
  if (!(nu > 0.0 && nu <= 1.0)) throw InvalidArgument("nu must lie in (0, 1]");
  if (!(ocsvm_tol > 0.0)) throw InvalidArgument("ocsvm_tol must be positive");
  if (lambda_grid.empty()) throw InvalidArgument("lambda_grid must not be empty");
  for (double l : lambda_grid) {
    if (!(l > 0.0)) throw InvalidArgument("lambda_grid values must be positive");
  }
  if (min_df == 0) throw InvalidArgument("min_df must be at least 1");
  for (double w : di_weights) {
    if (!(w >= 0.0 && w <= 1.0)) throw InvalidArgument("di_weights must lie in [0, 1]");
  }
  for (const auto& r : references) {
    if (r.name.empty() || r.name.find_first_of("/\\") != std::string::npos) {
      throw InvalidArgument("reference names must be non-empty and contain no path separators");
    }
    if (r.name == "di") throw InvalidArgument("reference name 'di' is reserved for the survey DI");
  }
}

void write_scored(std::ostream& out, std::span<const ScoredSentence> scored) {
  for (const auto& s : scored) {
    const json j = {{"id", s.sentence.id},
                    {"doc_id", s.sentence.doc_id},
                    {"date", s.sentence.date.str()},
                    {"text", s.sentence.text},
                    {"tokens", s.sentence.tokens},
                    {"score", nullable(s.score)},
                    {"decision", nullable(s.decision)},
                    {"inlier", s.inlier}};
    out << j.dump() << '\n';
  }
}

std::vector<ScoredSentence> read_scored(std::istream& in) {
  std::vector<ScoredSentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      ScoredSentence s;
      s.sentence.id = j.at("id").get<std::string>();
      s.sentence.doc_id = j.at("doc_id").get<std::string>();
      s.sentence.date = parse_date(j.at("date").get<std::string>());
      s.sentence.text = j.at("text").get<std::string>();
      s.sentence.tokens = j.at("tokens").get<std::vector<std::string>>();
      if (!j.at("score").is_null()) s.score = j["score"].get<double>();
      if (!j.at("decision").is_null()) s.decision = j["decision"].get<double>();
      s.inlier = j.at("inlier").get<bool>();
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid scored sentence: ") + e.what(), line_no);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return out;
}

void stage_train_outlier(const RunConfig& config) {
  run_stage("train-outlier", [&] {
    config.validate();
    const auto survey = load_survey_file(config.survey);
    const auto docs = survey_tokens(survey);
    const TfidfModel tfidf = fit_tfidf(docs, config.min_df);
    std::vector<SparseVector> vectors;
    vectors.reserve(docs.size());
    for (const auto& d : docs) vectors.push_back(tfidf.transform(d));
    OcsvmOptions options;
    options.nu = config.nu;
    options.tol = config.ocsvm_tol;
    options.seed = config.seed;
    const OneClassSvmModel model = train_ocsvm(vectors, options);
    write_file(config.output_dir / artifact::kTfidf, tfidf.to_json());
    write_file(config.output_dir / artifact::kOcsvm, model.to_json());
  });
}

void stage_train_sentiment(const RunConfig& config) {
  run_stage("train-sentiment", [&] {
    config.validate();
    const auto survey = load_survey_file(config.survey);
    const TfidfModel tfidf = load_tfidf(config.output_dir);
    const auto docs = survey_tokens(survey);
    std::vector<SparseVector> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < survey.size(); ++i) {
      x.push_back(tfidf.transform(docs[i]));
      y.push_back(encode_label(survey[i].condition));
    }
    const SentimentFit fit = fit_sentiment(x, y, config.lambda_grid, config.seed);
    json report = {{"lambda", fit.report.lambda},
                   {"validation_mse", json::array()},
                   {"test_mse", fit.report.test_mse},
                   {"baseline_test_mse", fit.report.baseline_test_mse},
                   {"n_train", fit.report.n_train},
                   {"n_valid", fit.report.n_valid},
                   {"n_test", fit.report.n_test}};
    for (const auto& [lambda, m] : fit.report.validation_mse) {
      report["validation_mse"].push_back({{"lambda", lambda}, {"mse", m}});
    }
    write_file(config.output_dir / artifact::kRidge, fit.model.to_json());
    write_file(config.output_dir / artifact::kSentimentReport, report.dump(2) + "\n");
  });
}

void stage_score(const RunConfig& config) {
  run_stage("score", [&] {
    config.validate();
    const auto docs = load_corpus_file(config.corpus);
    const BigramTokenizer tokenizer;
    const auto sentences = segment_corpus(docs, tokenizer);
    const TfidfModel tfidf = load_tfidf(config.output_dir);
    std::optional<OneClassSvmModel> filter;
    if (config.filter) filter = OneClassSvmModel::from_json(read_file(config.output_dir / artifact::kOcsvm));
    std::vector<ScoredSentence> scored;
    if (!config.scores.empty()) {
      std::ifstream in(config.scores, std::ios::binary);
      if (!in) throw Error("cannot open score file '" + config.scores.string() + "'");
      const ScoreLoadResult loaded = load_scores(in);
      for (const auto& w : loaded.warnings) {
        std::cerr << "warning: " << config.scores.string() << ": line " << w.line << ": "
                  << w.message << '\n';
      }
      scored = score_sentences(sentences, &tfidf, filter ? &*filter : nullptr,
                               std::cref(loaded.table));
    } else {
      const RidgeModel ridge = RidgeModel::from_json(read_file(config.output_dir / artifact::kRidge));
      scored = score_sentences(sentences, &tfidf, filter ? &*filter : nullptr, std::cref(ridge));
    }
    std::ostringstream out;
    write_scored(out, scored);
    write_file(config.output_dir / artifact::kScored, out.str());
    if (!config.attention.empty()) {
      write_file(config.output_dir / artifact::kAttention, read_file(config.attention));
    }
  });
}

void stage_index(const RunConfig& config) {
  run_stage("index", [&] {
    config.validate();
    const fs::path& dir = config.output_dir;
    const auto scored = load_scored(dir);
    if (scored.empty()) throw InvalidArgument("no scored sentences");
    const IndexSeries filtered = aggregate_index(scored, config.bucket, Variant::kFiltered);
    write_file(dir / artifact::kIndexFiltered, to_csv(&write_index_csv, filtered));
    // Table scores may skip outliers, leaving no unfiltered series.
    const bool all_scored = std::all_of(scored.begin(), scored.end(),
                                        [](const ScoredSentence& s) { return s.score.has_value(); });
    std::optional<IndexSeries> unfiltered;
    if (all_scored) {
      unfiltered = aggregate_index(scored, config.bucket, Variant::kUnfiltered);
      write_file(dir / artifact::kIndexUnfiltered, to_csv(&write_index_csv, *unfiltered));
    } else {
      fs::remove(dir / artifact::kIndexUnfiltered);
    }

    std::vector<ReferenceSeries> refs;
    std::string fingerprint = settings_json(config).dump();
    if (!config.survey.empty()) {
      const auto survey = load_survey_file(config.survey);
      refs.push_back(di_series(survey, config.di_weights));
      refs.back().name = "di";
    }
    for (const auto& r : config.references) {
      std::ifstream in(r.path, std::ios::binary);
      if (!in) throw Error("cannot open reference '" + r.name + "' at '" + r.path.string() + "'");
      refs.push_back(read_reference_csv(in, r.name));
    }
    for (const auto& r : refs) {
      write_file(dir / (std::string(artifact::kReferencePrefix) + r.name + ".csv"),
                 to_csv(&write_reference_csv, r));
    }

    json correlations = json::object();
    json variants = json::array();
    for (const IndexSeries* series : std::array<const IndexSeries*, 2>{&filtered, unfiltered ? &*unfiltered : nullptr}) {
      if (series == nullptr) continue;
      const Variant variant = series == &filtered ? Variant::kFiltered : Variant::kUnfiltered;
      variants.push_back(std::string(to_string(variant)));
      json row = json::object();
      for (const auto& r : refs) {
        // Correlations only make sense against monthly references.
        try {
          if (config.bucket != BucketUnit::kMonth) throw InvalidArgument("index is not monthly");
          row[r.name] = pearson(series->view(), r.view());
        } catch (const InvalidArgument& e) {
          row[r.name] = {{"error", e.what()}};
        }
      }
      correlations[std::string(to_string(variant))] = row;
    }
    json report = {{"correlations", correlations}};
    if (fs::exists(dir / artifact::kSentimentReport)) {
      report["sentiment"] = json::parse(read_file(dir / artifact::kSentimentReport));
    }
    write_file(dir / artifact::kReport, report.dump(2) + "\n");

    for (const fs::path& p : {config.corpus, config.survey, config.scores, config.attention}) {
      if (!p.empty()) fingerprint += fnv1a_hex(read_file(p));
    }
    for (const auto& r : refs) fingerprint += r.name + to_csv(&write_reference_csv, r);
    std::size_t n_inliers = 0;
    std::pair<Bucket, Bucket> scored_range{bucket_of(scored.front().sentence.date, config.bucket),
                                           bucket_of(scored.front().sentence.date, config.bucket)};
    for (const auto& s : scored) {
      n_inliers += s.inlier ? 1 : 0;
      const Bucket b = bucket_of(s.sentence.date, config.bucket);
      scored_range.first = std::min(scored_range.first, b);
      scored_range.second = std::max(scored_range.second, b);
    }
    json names = json::array();
    for (const auto& r : refs) names.push_back(r.name);
    const json meta = {{"run_id", fnv1a_hex(fingerprint)},
                       {"bucket", std::string(to_string(config.bucket))},
                       {"variants", variants},
                       {"from", scored_range.first.label()},
                       {"to", scored_range.second.label()},
                       {"n_sentences", scored.size()},
                       {"n_inliers", n_inliers},
                       {"filter", config.filter},
                       {"scorer", config.scores.empty() ? "ridge" : "table"},
                       {"references", names},
                       {"attention", !config.attention.empty()},
                       {"settings", settings_json(config)}};
    write_file(dir / artifact::kMeta, meta.dump(2) + "\n");
  });
}

void run_pipeline(const RunConfig& config) {
  stage_train_outlier(config);
  stage_train_sentiment(config);
  stage_score(config);
  stage_index(config);
}

std::vector<ContributionSeries> run_contributions(const fs::path& run_dir,
                                                  std::span<const std::string> terms,
                                                  BucketUnit unit,
                                                  const ContributionOptions& options) {
  const auto scored = load_scored(run_dir);
  const BigramTokenizer tokenizer;
  std::vector<ContributionSeries> out;
  for (const auto& term : terms) {
    const auto tokens = tokenizer.tokenize(term);
    if (tokens.empty()) throw InvalidArgument("term '" + term + "' has no tokens");
    ContributionSeries s = contribution_series(scored, tokens, unit, options);
    s.term = term;
    out.push_back(std::move(s));
  }
  return out;
}

void write_synthetic(const SyntheticData& data, const fs::path& dir) {
  std::ostringstream corpus, survey, truth;
  write_corpus(corpus, data.corpus);
  write_survey(survey, data.survey);
  write_reference_csv(truth, data.truth);
  write_file(dir / "corpus.jsonl", corpus.str());
  write_file(dir / "survey.csv", survey.str());
  write_file(dir / "truth.csv", truth.str());
}

}  // namespace nowcast
