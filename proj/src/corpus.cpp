#include "atd/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "atd/error.hpp"
#include "atd/random.hpp"

namespace atd {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) {
  auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u) != 0;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

bool is_number_token(std::string_view token) {
  bool digit = false;
  for (char c : token) {
    if (is_digit(c)) {
      digit = true;
    } else if (c != '.' && c != ',') {
      return false;
    }
  }
  return digit;
}

std::string normalize_token(std::string_view token) {
  if (is_number_token(token)) return std::string(kNumToken);
  std::string out(token);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(normalize_token(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (is_space(c)) {
      flush();
    } else if (text.substr(i, kNumToken.size()) == kNumToken) {
      flush();
      tokens.emplace_back(kNumToken);
      i += kNumToken.size() - 1;
    } else if (is_punct(c)) {
      // Keep decimal points and digit-group commas inside numbers.
      bool inside_number = (c == '.' || c == ',') && !current.empty() &&
                           is_digit(current.back()) && i + 1 < text.size() &&
                           is_digit(text[i + 1]);
      if (inside_number) {
        current.push_back(c);
      } else {
        flush();
        tokens.emplace_back(1, c);
      }
    } else {
      current.push_back(c);
    }
  }
  flush();
  return tokens;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
  add(std::string(kNumToken));
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  if (words.size() < kNumSpecial || words[kPadId] != kPadToken || words[kUnkId] != kUnkToken ||
      words[kNumId] != kNumToken) {
    throw DataError("vocabulary must start with " + std::string(kPadToken) + ", " +
                    std::string(kUnkToken) + ", " + std::string(kNumToken));
  }
  Vocabulary v;
  for (std::size_t i = kNumSpecial; i < words.size(); ++i) {
    if (v.find(words[i])) throw DataError("duplicate vocabulary word '" + words[i] + "'");
    v.add(words[i]);
  }
  return v;
}

int Vocabulary::add(const std::string& word) {
  auto [it, inserted] = index_.emplace(word, size());
  if (inserted) words_.push_back(word);
  return it->second;
}

std::optional<int> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id(std::string_view word) const { return find(word).value_or(kUnkId); }

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || id >= size()) throw UsageError("word id " + std::to_string(id) + " out of range");
  return words_[static_cast<std::size_t>(id)];
}

Vocabulary build_vocabulary(std::span<const std::vector<std::string>> docs, int min_count,
                            int max_size) {
  if (docs.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, long> counts;
  for (const auto& doc : docs) {
    for (const auto& tok : doc) {
      std::string w = normalize_token(tok);
      if (w == kPadToken || w == kUnkToken || w == kNumToken) continue;
      ++counts[w];
    }
  }
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [w, c] : counts) {
    if (c >= min_count) kept.emplace_back(w, c);
  }
  if (kept.empty()) throw DataError("vocabulary is empty after frequency filtering");
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (max_size > 0 && kept.size() > static_cast<std::size_t>(max_size)) kept.resize(max_size);
  Vocabulary v;
  for (const auto& [w, c] : kept) v.add(w);
  return v;
}

void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  for (const auto& w : vocab.words()) out << w << '\n';
}

Vocabulary read_vocabulary(std::istream& in) {
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) words.push_back(line);
  return Vocabulary::from_words(std::move(words));
}

// ---------------------------------------------------------------------------
// Registry

Registry::Registry(std::vector<std::string> keys) {
  for (auto& k : keys) {
    if (find(k)) throw DataError("duplicate registry key '" + k + "'");
    add(k);
  }
}

int Registry::add(const std::string& key) {
  auto [it, inserted] = index_.emplace(key, size());
  if (inserted) keys_.push_back(key);
  return it->second;
}

std::optional<int> Registry::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Registry::id(std::string_view key) const {
  auto found = find(key);
  if (!found) throw DataError("unknown key '" + std::string(key) + "'");
  return *found;
}

const std::string& Registry::key(int id) const {
  if (id < 0 || id >= size()) throw UsageError("registry id " + std::to_string(id) + " out of range");
  return keys_[static_cast<std::size_t>(id)];
}

// ---------------------------------------------------------------------------
// Corpus files

RawDocument parse_corpus_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  auto first = line.find('\t');
  auto second = first == std::string_view::npos ? first : line.find('\t', first + 1);
  if (second == std::string_view::npos) {
    throw DataError("corpus line needs <attribute>\\t<language>\\t<text>");
  }
  RawDocument doc;
  doc.attribute = std::string(line.substr(0, first));
  doc.language = std::string(line.substr(first + 1, second - first - 1));
  std::string_view text = line.substr(second + 1);
  if (doc.language.empty()) throw DataError("corpus line has an empty language code");
  if (doc.attribute == "-") {
    for (auto piece : split(text, ' ')) {
      if (piece.empty()) continue;
      auto slash = piece.rfind('/');
      if (slash == std::string_view::npos || slash == 0 || slash + 1 == piece.size()) {
        throw DataError("tagged token '" + std::string(piece) + "' is not word/TAG");
      }
      doc.tokens.push_back(normalize_token(piece.substr(0, slash)));
      doc.tags.emplace_back(piece.substr(slash + 1));
    }
    doc.attribute.clear();
  } else {
    if (doc.attribute.empty()) throw DataError("corpus line has an empty attribute key");
    doc.tokens = tokenize(text);
  }
  return doc;
}

std::vector<RawDocument> read_corpus(std::istream& in) {
  std::vector<RawDocument> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    try {
      docs.push_back(parse_corpus_line(line));
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

std::vector<RawDocument> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path);
  return read_corpus(in);
}

// ---------------------------------------------------------------------------
// Encoding

std::size_t EncodedCorpus::num_tokens() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.words.size();
  return n;
}

std::vector<TrainingExample> document_examples(const Document& doc, int context_size) {
  std::vector<TrainingExample> out;
  out.reserve(doc.words.size());
  const auto n = static_cast<std::ptrdiff_t>(context_size);
  for (std::size_t t = 0; t < doc.words.size(); ++t) {
    TrainingExample ex;
    ex.context.resize(static_cast<std::size_t>(context_size));
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t) - n + i;
      ex.context[static_cast<std::size_t>(i)] =
          pos < 0 ? kPadId : doc.words[static_cast<std::size_t>(pos)];
    }
    ex.target = doc.words[t];
    ex.attribute = doc.attribute_at(t);
    ex.language = doc.language;
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<TrainingExample> EncodedCorpus::examples() const {
  std::vector<TrainingExample> out;
  out.reserve(num_tokens());
  for (const auto& d : documents) {
    auto ex = document_examples(d, context_size);
    std::move(ex.begin(), ex.end(), std::back_inserter(out));
  }
  return out;
}

CorpusVocabulary build_corpus_vocabulary(std::span<const RawDocument> docs, int min_count,
                                         int max_size) {
  if (docs.empty()) throw DataError("corpus is empty");
  CorpusVocabulary cv;
  std::vector<std::vector<std::vector<std::string>>> by_lang;
  for (const auto& d : docs) {
    int lang = cv.languages.add(d.language);
    if (lang == static_cast<int>(by_lang.size())) by_lang.emplace_back();
    by_lang[static_cast<std::size_t>(lang)].push_back(d.tokens);
    if (d.tags.empty()) {
      cv.attributes.add(d.attribute);
    } else {
      for (const auto& tag : d.tags) cv.attributes.add(tag);
    }
  }
  for (const auto& lang_docs : by_lang) {
    cv.vocabularies.push_back(build_vocabulary(lang_docs, min_count, max_size));
  }
  return cv;
}

EncodedCorpus encode(std::span<const RawDocument> docs, const CorpusVocabulary& cv,
                     int context_size) {
  if (context_size < 1) throw UsageError("context size must be at least 1");
  EncodedCorpus corpus;
  corpus.context_size = context_size;
  for (const auto& raw : docs) {
    Document doc;
    doc.language = cv.languages.id(raw.language);
    const auto& vocab = cv.vocabularies.at(static_cast<std::size_t>(doc.language));
    doc.words.reserve(raw.tokens.size());
    for (const auto& tok : raw.tokens) doc.words.push_back(vocab.id(normalize_token(tok)));
    if (raw.tags.empty()) {
      doc.attribute = cv.attributes.id(raw.attribute);
    } else {
      if (raw.tags.size() != raw.tokens.size()) throw DataError("tag count differs from token count");
      for (const auto& tag : raw.tags) doc.token_attributes.push_back(cv.attributes.id(tag));
      doc.attribute = doc.token_attributes.empty() ? 0 : doc.token_attributes.front();
    }
    if (!doc.words.empty()) corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

std::vector<std::string> decode(const Document& doc, const Vocabulary& vocab) {
  std::vector<std::string> out;
  out.reserve(doc.words.size());
  for (int w : doc.words) out.push_back(vocab.word(w));
  return out;
}

// ---------------------------------------------------------------------------
// Batches

BatchIterator::BatchIterator(std::span<const TrainingExample> examples, std::size_t batch_size,
                             std::uint64_t seed)
    : examples_(examples), batch_size_(batch_size) {
  if (batch_size_ == 0) throw UsageError("batch size must be at least 1");
  reset(seed);
}

void BatchIterator::reset(std::uint64_t seed) {
  order_.resize(examples_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order_));
  cursor_ = 0;
}

bool BatchIterator::next(std::vector<TrainingExample>& batch) {
  batch.clear();
  if (cursor_ >= order_.size()) return false;
  std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  for (; cursor_ < end; ++cursor_) batch.push_back(examples_[order_[cursor_]]);
  return true;
}

}  // namespace atd
