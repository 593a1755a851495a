#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nowcast/calendar.hpp"

namespace nowcast {

/// Five-point economic condition, best to worst.
enum class Condition { kVeryGood, kGood, kNeutral, kBad, kVeryBad };

/// Accepts the survey symbols (◎ ○ □ △ ×) and the ASCII aliases
/// (vg g n b vb). Returns nullopt for anything else.
std::optional<Condition> parse_condition(std::string_view text);
std::string_view condition_symbol(Condition c);
std::string_view condition_alias(Condition c);

struct SurveyResponse {
  std::string region;
  std::string occupation;
  Condition condition = Condition::kNeutral;
  std::string reason;
  Date month;  // first day of the survey month
};

struct LineIssue {
  std::size_t line = 0;
  std::string message;
};

struct SurveyParseResult {
  std::vector<SurveyResponse> responses;
  std::vector<LineIssue> errors;    // records rejected
  std::vector<LineIssue> warnings;  // records skipped (empty reason)
};

/// Reads the survey CSV (`region,occupation,condition,reason,month`).
/// A wrong header throws ParseError; bad records are collected, not thrown.
SurveyParseResult parse_survey(std::istream& in);
void write_survey(std::ostream& out, std::span<const SurveyResponse> responses);

struct Document {
  std::string id;
  Date date;
  std::string title;
  std::string body;
};

/// Reads corpus JSONL (`id`, `date`, `title`, `body`). Throws ParseError with
/// the line number on malformed lines or duplicate ids.
std::vector<Document> load_corpus(std::istream& in);
void write_corpus(std::ostream& out, std::span<const Document> docs);

struct Sentence {
  std::string id;  // "<doc_id>:<index>"
  std::string doc_id;
  Date date;
  std::string text;
  std::vector<std::string> tokens;
};

/// Splits a document into sentence segments: the title (if non-empty) is one
/// segment, the body is cut after every "。" and after every ASCII "." that
/// is followed by whitespace. Whitespace following a delimiter stays with the
/// segment it terminates, so concatenating the body segments gives the body
/// back. Blank segments are dropped.
std::vector<std::string> segment_text(const Document& doc);

/// Pluggable tokenizer. Implementations must be deterministic and thread-safe.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
};

/// Latin letters/digits form whitespace- or punctuation-delimited words
/// (ASCII lowercased, fullwidth forms folded to ASCII). Runs of CJK
/// characters become overlapping character bigrams, or a single character for
/// a run of length one. Everything else is a separator.
class BigramTokenizer final : public Tokenizer {
 public:
  std::vector<std::string> tokenize(std::string_view text) const override;
};

/// Shorthand for `BigramTokenizer{}.tokenize(text)`.
std::vector<std::string> tokenize(std::string_view text);

/// Segments and tokenizes a document. Segments without any token are dropped,
/// so every returned sentence has at least one token. Sentence indices count
/// every segment, dropped or not.
std::vector<Sentence> segment_sentences(const Document& doc, const Tokenizer& tokenizer);
std::vector<Sentence> segment_sentences(const Document& doc);

std::vector<Sentence> segment_corpus(std::span<const Document> docs, const Tokenizer& tokenizer);

}  // namespace nowcast
