#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "atd/corpus.hpp"
#include "atd/model.hpp"
#include "atd/trainer.hpp"

namespace atd {

inline constexpr char kSnapshotMagic[4] = {'A', 'T', 'D', 'M'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

struct Model {
  CorpusVocabulary vocab;
  FactoredParams params;
  AttributeTable table;
  std::map<std::string, std::string> hyper;  // free-form settings, e.g. the training config
  std::optional<TrainerState> trainer;
};

// Throws DataError when the parts disagree on sizes.
void validate_model(const Model& model);

std::string serialize(const Model& model);
// Errors name the byte offset where reading failed.
Model deserialize(std::string_view bytes);

// Written to a temporary file in the same directory, then renamed over `path`.
void save_snapshot(const Model& model, const std::string& path);
Model load_snapshot(const std::string& path);

}  // namespace atd
