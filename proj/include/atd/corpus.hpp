#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace atd {

// Special tokens occupy the first three ids of every vocabulary.
inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kNumId = 2;
inline constexpr int kNumSpecial = 3;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::string_view kNumToken = "<#>";

// Lowercases, detaches punctuation and maps numerals to <#>. A literal
// "<#>" is kept as one token.
std::vector<std::string> tokenize(std::string_view text);
std::string normalize_token(std::string_view token);
bool is_number_token(std::string_view token);

class Vocabulary {
 public:
  Vocabulary();

  // Rebuilds from an ordered word list; the first entries must be the specials.
  static Vocabulary from_words(std::vector<std::string> words);

  int add(const std::string& word);
  // UNK for absent words.
  int id(std::string_view word) const;
  std::optional<int> find(std::string_view word) const;
  const std::string& word(int id) const;
  int size() const { return static_cast<int>(words_.size()); }
  static bool is_special(int id) { return id >= 0 && id < kNumSpecial; }
  const std::vector<std::string>& words() const { return words_; }

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

// Words seen fewer than min_count times fall back to UNK; max_size caps the
// number of regular (non-special) words, 0 = unlimited. Order is descending
// frequency, then lexicographic.
Vocabulary build_vocabulary(std::span<const std::vector<std::string>> docs, int min_count,
                            int max_size = 0);

// One word per line, line number = id.
void write_vocabulary(std::ostream& out, const Vocabulary& vocab);
Vocabulary read_vocabulary(std::istream& in);

// Dense key <-> id map for attributes and languages.
class Registry {
 public:
  Registry() = default;
  explicit Registry(std::vector<std::string> keys);

  int add(const std::string& key);
  // Throws DataError for unknown keys.
  int id(std::string_view key) const;
  std::optional<int> find(std::string_view key) const;
  const std::string& key(int id) const;
  int size() const { return static_cast<int>(keys_.size()); }
  const std::vector<std::string>& keys() const { return keys_; }

  bool operator==(const Registry& other) const { return keys_ == other.keys_; }

 private:
  std::vector<std::string> keys_;
  std::unordered_map<std::string, int> index_;
};

using AttributeRegistry = Registry;
using LanguageRegistry = Registry;

// One record of the corpus file, after tokenization. When `tags` is
// non-empty it holds one attribute key per token (e.g. POS tags) and
// `attribute` is unused.
struct RawDocument {
  std::string attribute;
  std::string language;
  std::vector<std::string> tokens;
  std::vector<std::string> tags;
};

// Corpus file: `<attribute>\t<language>\t<text>` per line. An attribute field
// of `-` marks tagged text whose tokens are `word/TAG`; each tag becomes the
// attribute of the position holding that word.
std::vector<RawDocument> read_corpus(std::istream& in);
std::vector<RawDocument> read_corpus_file(const std::string& path);
RawDocument parse_corpus_line(std::string_view line);

struct Document {
  std::vector<int> words;
  int attribute = 0;
  int language = 0;
  // Per-position attribute ids; empty means `attribute` for every position.
  std::vector<int> token_attributes;

  int attribute_at(std::size_t pos) const {
    return token_attributes.empty() ? attribute : token_attributes[pos];
  }
};

struct TrainingExample {
  std::vector<int> context;  // n-1 ids, oldest first
  int target = 0;
  int attribute = 0;
  int language = 0;
};

struct EncodedCorpus {
  std::vector<Document> documents;
  int context_size = 0;

  std::size_t num_tokens() const;
  // One example per token, left-padded with PAD at document starts.
  std::vector<TrainingExample> examples() const;
};

// Everything needed to map a raw corpus onto ids.
struct CorpusVocabulary {
  LanguageRegistry languages;
  AttributeRegistry attributes;
  std::vector<Vocabulary> vocabularies;  // indexed by language id
};

// Builds per-language vocabularies and the attribute/language registries.
CorpusVocabulary build_corpus_vocabulary(std::span<const RawDocument> docs, int min_count,
                                         int max_size = 0);

// Unknown words map to UNK. The registries are closed: unknown attribute or
// language keys are a DataError.
EncodedCorpus encode(std::span<const RawDocument> docs, const CorpusVocabulary& cv,
                     int context_size);

std::vector<std::string> decode(const Document& doc, const Vocabulary& vocab);

std::vector<TrainingExample> document_examples(const Document& doc, int context_size);

// Seeded minibatch stream over a fixed example set; each pass visits every
// example exactly once.
class BatchIterator {
 public:
  BatchIterator(std::span<const TrainingExample> examples, std::size_t batch_size,
                std::uint64_t seed);

  // Fills `batch` and returns true until the epoch is exhausted.
  bool next(std::vector<TrainingExample>& batch);
  void reset(std::uint64_t seed);
  std::span<const std::size_t> order() const { return order_; }

 private:
  std::span<const TrainingExample> examples_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace atd
