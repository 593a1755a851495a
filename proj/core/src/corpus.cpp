#include "nowcast/corpus.hpp"

#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "csv.hpp"
#include "nowcast/error.hpp"

namespace nowcast {

using json = nlohmann::json;

std::optional<Condition> parse_condition(std::string_view text) {
  text = detail::trim(text);
  if (text == "◎" || text == "vg") return Condition::kVeryGood;
  if (text == "○" || text == "g") return Condition::kGood;
  if (text == "□" || text == "n") return Condition::kNeutral;
  if (text == "△" || text == "b") return Condition::kBad;
  if (text == "×" || text == "vb") return Condition::kVeryBad;
  return std::nullopt;
}

std::string_view condition_symbol(Condition c) {
  switch (c) {
    case Condition::kVeryGood:
      return "◎";
    case Condition::kGood:
      return "○";
    case Condition::kNeutral:
      return "□";
    case Condition::kBad:
      return "△";
    case Condition::kVeryBad:
      return "×";
  }
  return "□";
}

std::string_view condition_alias(Condition c) {
  switch (c) {
    case Condition::kVeryGood:
      return "vg";
    case Condition::kGood:
      return "g";
    case Condition::kNeutral:
      return "n";
    case Condition::kBad:
      return "b";
    case Condition::kVeryBad:
      return "vb";
  }
  return "n";
}

SurveyParseResult parse_survey(std::istream& in) {
  SurveyParseResult result;
  detail::CsvReader reader(in);
  std::vector<std::string> fields;
  if (!reader.next(fields)) return result;

  static const std::vector<std::string> kHeader = {"region", "occupation", "condition", "reason",
                                                   "month"};
  if (fields.size() != kHeader.size()) {
    throw ParseError("survey header must be region,occupation,condition,reason,month", 1);
  }
  for (std::size_t i = 0; i < kHeader.size(); ++i) {
    if (detail::trim(fields[i]) != kHeader[i]) {
      throw ParseError("survey header must be region,occupation,condition,reason,month", 1);
    }
  }

  while (reader.next(fields)) {
    const std::size_t line = reader.record_line();
    if (fields.size() == 1 && detail::trim(fields[0]).empty()) continue;
    if (fields.size() != kHeader.size()) {
      result.errors.push_back({line, "expected 5 fields, got " + std::to_string(fields.size())});
      continue;
    }
    const auto condition = parse_condition(fields[2]);
    if (!condition) {
      result.errors.push_back({line, "unknown condition symbol '" + fields[2] + "'"});
      continue;
    }
    Date month;
    try {
      month = parse_month(detail::trim(fields[4]));
    } catch (const ParseError& e) {
      result.errors.push_back({line, e.what()});
      continue;
    }
    const std::string_view reason = detail::trim(fields[3]);
    if (reason.empty()) {
      result.warnings.push_back({line, "empty reason, record skipped"});
      continue;
    }
    result.responses.push_back({std::string(detail::trim(fields[0])),
                                std::string(detail::trim(fields[1])), *condition,
                                std::string(reason), month});
  }
  return result;
}

void write_survey(std::ostream& out, std::span<const SurveyResponse> responses) {
  out << "region,occupation,condition,reason,month\n";
  char month[8];
  for (const auto& r : responses) {
    std::snprintf(month, sizeof month, "%04d-%02u", r.month.year, r.month.month);
    out << detail::csv_escape(r.region) << ',' << detail::csv_escape(r.occupation) << ','
        << condition_symbol(r.condition) << ',' << detail::csv_escape(r.reason) << ',' << month
        << '\n';
  }
}

std::vector<Document> load_corpus(std::istream& in) {
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (!obj.is_object() || !obj.contains("id") || !obj.contains("date") || !obj.contains("body")) {
      throw ParseError("corpus record needs id, date and body", lineno);
    }
    Document doc;
    try {
      doc.id = obj.at("id").is_string() ? obj.at("id").get<std::string>() : obj.at("id").dump();
      doc.date = parse_date(obj.at("date").get<std::string>());
      doc.title = obj.value("title", std::string{});
      doc.body = obj.at("body").get<std::string>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad field type: ") + e.what(), lineno);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    }
    if (!seen.insert(doc.id).second) throw ParseError("duplicate document id '" + doc.id + "'", lineno);
    docs.push_back(std::move(doc));
  }
  return docs;
}

void write_corpus(std::ostream& out, std::span<const Document> docs) {
  for (const auto& d : docs) {
    json obj = {{"id", d.id}, {"date", d.date.str()}, {"title", d.title}, {"body", d.body}};
    out << obj.dump() << '\n';
  }
}

std::vector<std::string> segment_text(const Document& doc) {
  std::vector<std::string> segments;
  auto push = [&](std::string_view seg) {
    if (!detail::trim(seg).empty()) segments.emplace_back(seg);
  };
  push(doc.title);

  static constexpr std::string_view kFullStop = "。";
  const std::string_view body = doc.body;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  std::size_t begin = 0;
  std::size_t i = 0;
  while (i < body.size()) {
    std::size_t cut = std::string_view::npos;
    if (body.compare(i, kFullStop.size(), kFullStop) == 0) {
      cut = i + kFullStop.size();
    } else if (body[i] == '.' && i + 1 < body.size() && is_space(body[i + 1])) {
      cut = i + 1;
    }
    if (cut == std::string_view::npos) {
      ++i;
      continue;
    }
    while (cut < body.size() && is_space(body[cut])) ++cut;
    push(body.substr(begin, cut - begin));
    begin = i = cut;
  }
  push(body.substr(begin));
  return segments;
}

namespace {

enum class CharClass { kSeparator, kWord, kCjk };

// Decodes one code point; malformed sequences yield U+FFFD and consume a byte.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const int c = cont(static_cast<std::size_t>(k));
    if (c < 0) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Fullwidth ASCII variants fold to ASCII; ASCII letters are lowercased.
char32_t normalize(char32_t cp) {
  if (cp >= 0xFF01 && cp <= 0xFF5E) cp -= 0xFEE0;
  if (cp >= 'A' && cp <= 'Z') cp += 'a' - 'A';
  return cp;
}

CharClass classify(char32_t cp) {
  if ((cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z')) return CharClass::kWord;
  // Latin-1 supplement and Latin extended letters (excluding × and ÷).
  if (cp >= 0xC0 && cp <= 0x24F && cp != 0xD7 && cp != 0xF7) return CharClass::kWord;
  if ((cp >= 0x3040 && cp <= 0x309F) ||  // hiragana
      (cp >= 0x30A0 && cp <= 0x30FF && cp != 0x30FB) ||  // katakana, minus middle dot
      (cp >= 0x3005 && cp <= 0x3007) ||  // 々 〆 〇
      (cp >= 0x3400 && cp <= 0x4DBF) || (cp >= 0x4E00 && cp <= 0x9FFF) ||
      (cp >= 0xF900 && cp <= 0xFAFF) || (cp >= 0xFF66 && cp <= 0xFF9F) ||
      (cp >= 0xAC00 && cp <= 0xD7AF) || (cp >= 0x20000 && cp <= 0x2FA1F)) {
    return CharClass::kCjk;
  }
  return CharClass::kSeparator;
}

}  // namespace

std::vector<std::string> BigramTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> tokens;
  std::string word;
  std::vector<std::string> run;  // encoded CJK characters of the current run

  auto flush_word = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };
  auto flush_run = [&] {
    if (run.size() == 1) {
      tokens.push_back(std::move(run[0]));
    } else {
      for (std::size_t k = 0; k + 1 < run.size(); ++k) tokens.push_back(run[k] + run[k + 1]);
    }
    run.clear();
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = normalize(decode_utf8(text, i));
    switch (classify(cp)) {
      case CharClass::kWord:
        flush_run();
        append_utf8(word, cp);
        break;
      case CharClass::kCjk: {
        flush_word();
        std::string ch;
        append_utf8(ch, cp);
        run.push_back(std::move(ch));
        break;
      }
      case CharClass::kSeparator:
        flush_word();
        flush_run();
        break;
    }
  }
  flush_word();
  flush_run();
  return tokens;
}

std::vector<std::string> tokenize(std::string_view text) { return BigramTokenizer{}.tokenize(text); }

std::vector<Sentence> segment_sentences(const Document& doc, const Tokenizer& tokenizer) {
  std::vector<Sentence> out;
  const auto segments = segment_text(doc);
  for (std::size_t k = 0; k < segments.size(); ++k) {
    auto tokens = tokenizer.tokenize(segments[k]);
    if (tokens.empty()) continue;
    out.push_back({doc.id + ":" + std::to_string(k), doc.id, doc.date, segments[k],
                   std::move(tokens)});
  }
  return out;
}

std::vector<Sentence> segment_sentences(const Document& doc) {
  return segment_sentences(doc, BigramTokenizer{});
}

std::vector<Sentence> segment_corpus(std::span<const Document> docs, const Tokenizer& tokenizer) {
  std::vector<Sentence> out;
  for (const auto& doc : docs) {
    auto sentences = segment_sentences(doc, tokenizer);
    out.insert(out.end(), std::make_move_iterator(sentences.begin()),
               std::make_move_iterator(sentences.end()));
  }
  return out;
}

}  // namespace nowcast
