#include "nowcast/index.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>

#include "csv.hpp"
#include "nowcast/error.hpp"

namespace nowcast {

std::vector<ScoredSentence> score_sentences(std::span<const Sentence> sentences,
                                            const TfidfModel* features,
                                            const OneClassSvmModel* filter, const Scorer& scorer) {
  const bool needs_features =
      filter != nullptr || std::holds_alternative<std::reference_wrapper<const RidgeModel>>(scorer);
  if (needs_features && features == nullptr) {
    throw InvalidArgument("score_sentences: tfidf model required for filtering or ridge scoring");
  }
  std::vector<ScoredSentence> out;
  out.reserve(sentences.size());
  std::vector<std::string> missing;
  for (const auto& s : sentences) {
    ScoredSentence scored{s, std::nullopt, std::nullopt, true};
    SparseVector v;
    if (needs_features) v = features->transform(s.tokens);
    if (filter != nullptr) {
      scored.decision = filter->decision(v);
      scored.inlier = *scored.decision >= 0.0;
    }
    if (const auto* ridge = std::get_if<std::reference_wrapper<const RidgeModel>>(&scorer)) {
      scored.score = ridge->get().predict(v);
    } else {
      const ScoreTable& table = std::get<std::reference_wrapper<const ScoreTable>>(scorer).get();
      scored.score = table.find(s.id);
      if (!scored.score && scored.inlier) missing.push_back(s.id);
    }
    out.push_back(std::move(scored));
  }
  if (!missing.empty()) {
    std::string msg = "score table lacks " + std::to_string(missing.size()) + " sentence id(s):";
    for (std::size_t k = 0; k < missing.size() && k < 20; ++k) msg += " " + missing[k];
    if (missing.size() > 20) msg += " ...";
    throw InvalidArgument(msg);
  }
  return out;
}

Variant parse_variant(std::string_view text) {
  if (text == "filtered") return Variant::kFiltered;
  if (text == "unfiltered") return Variant::kUnfiltered;
  throw InvalidArgument("unknown variant '" + std::string(text) + "'");
}

std::string_view to_string(Variant v) {
  return v == Variant::kFiltered ? "filtered" : "unfiltered";
}

IndexSeries aggregate_index(std::span<const ScoredSentence> scored, BucketUnit unit,
                            Variant variant) {
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
  };
  std::map<Bucket, Acc> acc;
  for (const auto& s : scored) {
    if (variant == Variant::kFiltered && !s.inlier) continue;
    if (!s.score) {
      throw InvalidArgument("sentence '" + s.sentence.id + "' has no score");
    }
    auto& a = acc[bucket_of(s.sentence.date, unit)];
    a.sum += *s.score;
    ++a.n;
  }
  IndexSeries series;
  series.unit = unit;
  for (const auto& [bucket, a] : acc) {
    series.buckets.push_back(bucket);
    series.values.push_back(a.sum / static_cast<double>(a.n));
    series.n_sentences.push_back(a.n);
  }
  return series;
}

IndexSeries compute_index(std::span<const Document> corpus, const Tokenizer& tokenizer,
                          const TfidfModel* features, const OneClassSvmModel* filter,
                          const Scorer& scorer, BucketUnit unit) {
  if (corpus.empty()) throw InvalidArgument("compute_index: empty corpus");
  const auto sentences = segment_corpus(corpus, tokenizer);
  const auto scored = score_sentences(sentences, features, filter, scorer);
  return aggregate_index(scored, unit, Variant::kFiltered);
}

void write_index_csv(std::ostream& out, const IndexSeries& series) {
  out << "bucket,value,n_sentences\n";
  char buf[64];
  for (std::size_t i = 0; i < series.buckets.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", series.values[i]);
    out << series.buckets[i].label() << ',' << buf << ',' << series.n_sentences[i] << '\n';
  }
}

namespace {

double parse_double(std::string_view text, std::size_t line) {
  text = detail::trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty() || !std::isfinite(v)) {
    throw ParseError("unparseable number '" + std::string(text) + "'", line);
  }
  return v;
}

void require_increasing(const std::vector<Bucket>& buckets, std::size_t line) {
  if (buckets.size() >= 2 && !(buckets[buckets.size() - 2] < buckets.back())) {
    throw ParseError("buckets must be strictly increasing", line);
  }
}

}  // namespace

IndexSeries read_index_csv(std::istream& in, BucketUnit unit) {
  detail::CsvReader reader(in);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() != 3 || detail::trim(f[0]) != "bucket") {
    throw ParseError("index CSV header must be bucket,value,n_sentences", 1);
  }
  IndexSeries s;
  s.unit = unit;
  while (reader.next(f)) {
    const auto line = reader.record_line();
    if (f.size() == 1 && detail::trim(f[0]).empty()) continue;
    if (f.size() != 3) throw ParseError("expected 3 fields", line);
    try {
      s.buckets.push_back(parse_bucket_label(detail::trim(f[0]), unit));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line);
    }
    require_increasing(s.buckets, line);
    s.values.push_back(parse_double(f[1], line));
    s.n_sentences.push_back(static_cast<std::size_t>(parse_double(f[2], line)));
  }
  return s;
}

ReferenceSeries read_reference_csv(std::istream& in, std::string name) {
  detail::CsvReader reader(in);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() != 2 || detail::trim(f[0]) != "month" ||
      detail::trim(f[1]) != "value") {
    throw ParseError("reference CSV header must be month,value", 1);
  }
  ReferenceSeries s;
  s.name = std::move(name);
  while (reader.next(f)) {
    const auto line = reader.record_line();
    if (f.size() == 1 && detail::trim(f[0]).empty()) continue;
    if (f.size() != 2) throw ParseError("expected 2 fields", line);
    if (detail::trim(f[1]).empty()) continue;
    try {
      s.buckets.push_back(parse_bucket_label(detail::trim(f[0]), BucketUnit::kMonth));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), line);
    }
    require_increasing(s.buckets, line);
    s.values.push_back(parse_double(f[1], line));
  }
  return s;
}

void write_reference_csv(std::ostream& out, const ReferenceSeries& series) {
  out << "month,value\n";
  char buf[64];
  for (std::size_t i = 0; i < series.buckets.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", series.values[i]);
    out << series.buckets[i].label() << ',' << buf << '\n';
  }
}

double compute_di(std::span<const SurveyResponse> responses, const Date& month,
                  const DiWeights& weights) {
  const Bucket target = bucket_of(month, BucketUnit::kMonth);
  std::array<std::size_t, 5> counts{};
  std::size_t total = 0;
  for (const auto& r : responses) {
    if (bucket_of(r.month, BucketUnit::kMonth) != target) continue;
    ++counts[static_cast<std::size_t>(r.condition)];
    ++total;
  }
  if (total == 0) throw InvalidArgument("compute_di: no responses in " + target.label());
  double di = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    di += static_cast<double>(counts[k]) / static_cast<double>(total) * weights[k];
  }
  return 100.0 * di;
}

ReferenceSeries di_series(std::span<const SurveyResponse> responses, const DiWeights& weights) {
  std::map<Bucket, bool> months;
  for (const auto& r : responses) months[bucket_of(r.month, BucketUnit::kMonth)] = true;
  ReferenceSeries s;
  s.name = "di";
  for (const auto& [b, _] : months) {
    s.buckets.push_back(b);
    s.values.push_back(compute_di(responses, Date::from_days(b.start), weights));
  }
  return s;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("pearson: length mismatch");
  if (a.size() < 2) throw InvalidArgument("pearson: need at least two aligned points");
  const auto n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) {
    throw InvalidArgument("pearson: correlation undefined for a constant series");
  }
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pearson(const SeriesView& a, const SeriesView& b) {
  std::vector<double> xa, xb;
  std::size_t i = 0, j = 0;
  while (i < a.buckets.size() && j < b.buckets.size()) {
    if (a.buckets[i].start == b.buckets[j].start) {
      xa.push_back(a.values[i++]);
      xb.push_back(b.values[j++]);
    } else if (a.buckets[i].start < b.buckets[j].start) {
      ++i;
    } else {
      ++j;
    }
  }
  return pearson(xa, xb);
}

}  // namespace nowcast
