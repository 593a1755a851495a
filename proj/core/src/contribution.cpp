#include "nowcast/contribution.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>

#include <Eigen/Dense>
#include <json.hpp>

#include "csv.hpp"
#include "nowcast/error.hpp"

namespace nowcast {

using json = nlohmann::json;

std::vector<std::size_t> find_occurrences(std::span<const std::string> tokens,
                                          std::span<const std::string> term, OccurrenceMode mode) {
  std::vector<std::size_t> starts;
  if (term.empty() || term.size() > tokens.size()) return starts;
  for (std::size_t i = 0; i + term.size() <= tokens.size();) {
    if (std::equal(term.begin(), term.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
      starts.push_back(i);
      if (mode == OccurrenceMode::kOncePerSentence) break;
      i += term.size();
    } else {
      ++i;
    }
  }
  return starts;
}

double sentence_contribution_uniform(std::span<const std::string> tokens, double score,
                                     std::span<const std::string> term, OccurrenceMode mode) {
  if (term.empty()) throw InvalidArgument("contribution term is empty");
  if (tokens.empty()) throw InvalidArgument("sentence has no tokens");
  const auto hits = static_cast<double>(find_occurrences(tokens, term, mode).size());
  return hits * static_cast<double>(term.size()) * score / static_cast<double>(tokens.size());
}

void AttentionStack::validate() const {
  if (layers == 0 || heads == 0 || size == 0) {
    throw InvalidArgument("attention stack must have at least one layer, head and token");
  }
  if (data.size() != layers * heads * size * size) {
    throw InvalidArgument("attention tensor size does not match L x H x n x n");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < size; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < size; ++j) {
          const double a = at(l, h, i, j);
          if (!(a >= 0.0) || !std::isfinite(a)) {
            throw InvalidArgument("attention weights must be finite and non-negative");
          }
          row += a;
        }
        if (std::abs(row - 1.0) > 1e-6) {
          throw InvalidArgument("attention row (layer " + std::to_string(l) + ", head " +
                                std::to_string(h) + ", row " + std::to_string(i) +
                                ") sums to " + std::to_string(row));
        }
      }
    }
  }
}

std::vector<double> attention_rollout(const AttentionStack& stack) {
  stack.validate();
  const auto n = static_cast<Eigen::Index>(stack.size);
  Eigen::MatrixXd rollout = Eigen::MatrixXd::Identity(n, n);
  for (std::size_t l = 0; l < stack.layers; ++l) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t h = 0; h < stack.heads; ++h) {
      const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          head(stack.data.data() + (l * stack.heads + h) * stack.size * stack.size, n, n);
      a += head;
    }
    a /= static_cast<double>(stack.heads);
    a = 0.5 * a + 0.5 * Eigen::MatrixXd::Identity(n, n);
    a.array().colwise() /= a.rowwise().sum().array();
    rollout = a * rollout;
  }
  std::vector<double> row(stack.size);
  for (Eigen::Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = rollout(0, j);
  return row;
}

bool is_special_token(std::string_view token) {
  if (token.size() >= 3 && token.front() == '[' && token.back() == ']') return true;
  return token == "<s>" || token == "</s>" || token == "<pad>" || token == "<unk>" ||
         token == "<cls>" || token == "<sep>" || token == "<mask>";
}

RolloutWeights content_weights(std::span<const std::string> tokens,
                               std::span<const double> rollout_row) {
  if (tokens.size() != rollout_row.size()) {
    throw InvalidArgument("attention tokens and rollout row lengths differ");
  }
  RolloutWeights r;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    if (is_special_token(tokens[i])) continue;
    r.tokens.push_back(tokens[i]);
    r.weights.push_back(rollout_row[i]);
  }
  return r;
}

double sentence_contribution_rollout(std::span<const std::string> tokens, double score,
                                     std::span<const std::string> term,
                                     const RolloutWeights& rollout, OccurrenceMode mode) {
  if (term.empty()) throw InvalidArgument("contribution term is empty");
  if (rollout.tokens.size() != tokens.size() ||
      !std::equal(tokens.begin(), tokens.end(), rollout.tokens.begin())) {
    throw InvalidArgument("rollout weights do not cover the sentence tokens");
  }
  double total = 0.0;
  for (double w : rollout.weights) total += w;
  if (!(total > 0.0)) throw InvalidArgument("rollout weights carry no mass");
  double hit = 0.0;
  for (std::size_t start : find_occurrences(tokens, term, mode)) {
    for (std::size_t k = 0; k < term.size(); ++k) hit += rollout.weights[start + k];
  }
  return score * hit / total;
}

ContributionMethod parse_method(std::string_view text) {
  if (text == "uniform") return ContributionMethod::kUniform;
  if (text == "rollout") return ContributionMethod::kRollout;
  throw InvalidArgument("unknown contribution method '" + std::string(text) + "'");
}

ContributionSeries contribution_series(std::span<const ScoredSentence> scored,
                                       std::span<const std::string> term_tokens,
                                       BucketUnit unit, const ContributionOptions& options) {
  if (term_tokens.empty()) throw InvalidArgument("contribution term is empty");
  if (options.method == ContributionMethod::kRollout && options.rollout == nullptr) {
    throw InvalidArgument("rollout contributions need attention data");
  }
  struct Acc {
    double sum = 0.0;
    std::size_t sentences = 0;
    std::size_t hits = 0;
  };
  std::map<Bucket, Acc> acc;
  for (const auto& s : scored) {
    if (options.variant == Variant::kFiltered && !s.inlier) continue;
    if (!s.score) throw InvalidArgument("sentence '" + s.sentence.id + "' has no score");
    auto& a = acc[bucket_of(s.sentence.date, unit)];
    ++a.sentences;
    const auto& tokens = s.sentence.tokens;
    if (options.method == ContributionMethod::kUniform) {
      a.sum += sentence_contribution_uniform(tokens, *s.score, term_tokens, options.mode);
    } else {
      const auto it = options.rollout->find(s.sentence.id);
      if (it == options.rollout->end()) {
        throw InvalidArgument("no attention data for sentence '" + s.sentence.id + "'");
      }
      a.sum += sentence_contribution_rollout(tokens, *s.score, term_tokens, it->second,
                                             options.mode);
    }
    a.hits += find_occurrences(tokens, term_tokens, options.mode).size();
  }
  ContributionSeries series;
  for (std::size_t k = 0; k < term_tokens.size(); ++k) {
    series.term += (k ? " " : "") + term_tokens[k];
  }
  series.unit = unit;
  for (const auto& [bucket, a] : acc) {
    series.buckets.push_back(bucket);
    series.values.push_back(a.hits == 0 ? 0.0 : a.sum / static_cast<double>(a.sentences));
    series.n_hits.push_back(a.hits);
  }
  return series;
}

void write_contribution_csv(std::ostream& out, std::span<const ContributionSeries> series) {
  out << "bucket,term,contribution,n_hits\n";
  char buf[64];
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.buckets.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", s.values[i]);
      out << s.buckets[i].label() << ',' << detail::csv_escape(s.term) << ',' << buf << ','
          << s.n_hits[i] << '\n';
    }
  }
}

namespace {

AttentionRecord parse_attention_record(const json& obj) {
  AttentionRecord rec;
  rec.sentence_id = obj.at("sentence_id").get<std::string>();
  rec.tokens = obj.at("tokens").get<std::vector<std::string>>();
  const auto& attn = obj.at("attn");
  auto& st = rec.stack;
  st.layers = attn.size();
  st.heads = st.layers ? attn.at(0).size() : 0;
  st.size = rec.tokens.size();
  st.data.reserve(st.layers * st.heads * st.size * st.size);
  for (const auto& layer : attn) {
    if (layer.size() != st.heads) throw InvalidArgument("ragged head dimension");
    for (const auto& head : layer) {
      if (head.size() != st.size) throw InvalidArgument("attention rows do not match tokens");
      for (const auto& row : head) {
        if (row.size() != st.size) throw InvalidArgument("attention columns do not match tokens");
        for (const auto& v : row) st.data.push_back(v.get<double>());
      }
    }
  }
  st.validate();
  return rec;
}

}  // namespace

std::vector<AttentionRecord> load_attention(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::vector<AttentionRecord> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return out;
  try {
    if (text[first] == '[') {
      for (const auto& obj : json::parse(text)) out.push_back(parse_attention_record(obj));
      return out;
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid attention file: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid attention record: ") + e.what());
  }
  std::size_t lineno = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++lineno;
    const std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(parse_attention_record(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid attention record: ") + e.what(), lineno);
    } catch (const InvalidArgument& e) {
      throw ParseError(std::string("invalid attention record: ") + e.what(), lineno);
    }
  }
  return out;
}

RolloutTable build_rollout_table(std::span<const AttentionRecord> records) {
  RolloutTable table;
  for (const auto& rec : records) {
    table[rec.sentence_id] = content_weights(rec.tokens, attention_rollout(rec.stack));
  }
  return table;
}

}  // namespace nowcast
