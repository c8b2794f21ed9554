#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "atd/error.hpp"
#include "atd/snapshot.hpp"
#include "support.hpp"

using namespace atd;

namespace {

Vocabulary vocab_of(int size, const std::string& prefix) {
  std::vector<std::string> words{std::string(kPadToken), std::string(kUnkToken),
                                 std::string(kNumToken)};
  for (int i = kNumSpecial; i < size; ++i) words.push_back(prefix + std::to_string(i));
  return Vocabulary::from_words(words);
}

Model sample_model(bool with_state) {
  const auto t = test::random_model({4, 5, 3, 2}, {9, 7}, 3, 11);
  Model m;
  m.vocab.languages = Registry({"en", "de"});
  m.vocab.attributes = Registry({"alpha", "beta", "gamma"});
  m.vocab.vocabularies = {vocab_of(9, "w"), vocab_of(7, "v")};
  m.params = t.params;
  m.table = t.table;
  m.hyper = {{"objective", "lm"}, {"note", "tab\there"}};
  if (with_state) {
    TrainerState s;
    s.epoch = 7;
    s.velocity = Gradients::zeros_like(m.params, m.table);
    const auto v = test::random_model({4, 5, 3, 2}, {9, 7}, 3, 12);
    s.velocity.wfk = v.params.wfk;
    s.velocity.lookup = v.table.lookup;
    m.trainer = s;
  }
  return m;
}

std::uint32_t read_u32(const std::string& bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
  return v;
}

void put_u32(std::string& bytes, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[at + i] = static_cast<char>((v >> (8 * i)) & 0xff);
}

std::string message_of(const std::string& bytes) {
  try {
    deserialize(bytes);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Snapshot, HeaderLayout) {
  const std::string b = serialize(sample_model(false));
  EXPECT_EQ(b.substr(0, 4), "ATDM");
  EXPECT_EQ(read_u32(b, 4), kSnapshotVersion);
  EXPECT_EQ(read_u32(b, 8), 4u);
  EXPECT_EQ(read_u32(b, 12), 5u);
  EXPECT_EQ(read_u32(b, 16), 3u);
  EXPECT_EQ(read_u32(b, 20), 2u);
  EXPECT_EQ(b[24], 1);
  EXPECT_EQ(b[25], 0);
  EXPECT_EQ(b[26], 0);
  EXPECT_EQ(b[27], 0);
  EXPECT_EQ(read_u32(b, 28), 2u);  // language count
}

TEST(Snapshot, RoundTripIsBitExact) {
  for (bool state : {false, true}) {
    const Model m = sample_model(state);
    const std::string bytes = serialize(m);
    const Model back = deserialize(bytes);
    EXPECT_EQ(serialize(back), bytes);
    EXPECT_EQ(test::hash_groups(back.params, back.table), test::hash_groups(m.params, m.table));
    EXPECT_EQ(back.vocab.vocabularies, m.vocab.vocabularies);
    EXPECT_EQ(back.vocab.attributes, m.vocab.attributes);
    EXPECT_EQ(back.hyper, m.hyper);
    EXPECT_EQ(back.params.dims, m.params.dims);
    EXPECT_EQ(back.trainer.has_value(), state);
    if (state) {
      EXPECT_EQ(back.trainer->epoch, 7);
      EXPECT_EQ(back.trainer->velocity.wfk, m.trainer->velocity.wfk);
      EXPECT_EQ(back.trainer->velocity.lookup, m.trainer->velocity.lookup);
    }
  }
}

TEST(Snapshot, PreservesSpecialDoubles) {
  Model m = sample_model(false);
  m.params.wfk(0, 0) = -0.0;
  m.params.wfk(0, 1) = std::numeric_limits<double>::denorm_min();
  const Model back = deserialize(serialize(m));
  EXPECT_TRUE(std::signbit(back.params.wfk(0, 0)));
  EXPECT_EQ(back.params.wfk(0, 1), std::numeric_limits<double>::denorm_min());
}

TEST(Snapshot, RejectsBadMagicAndVersion) {
  std::string b = serialize(sample_model(false));
  std::string bad = b;
  bad[0] = 'X';
  EXPECT_NE(message_of(bad).find("magic"), std::string::npos);
  bad = b;
  put_u32(bad, 4, kSnapshotVersion + 1);
  EXPECT_NE(message_of(bad).find("version"), std::string::npos);
  bad = b;
  bad[24] = 5;
  EXPECT_NE(message_of(bad).find("flags"), std::string::npos);
}

TEST(Snapshot, TruncationNamesOffset) {
  const std::string b = serialize(sample_model(true));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{27}, std::size_t{40},
                          b.size() / 2, b.size() - 1}) {
    const std::string msg = message_of(b.substr(0, cut));
    EXPECT_FALSE(msg.empty()) << cut;
  }
  EXPECT_NE(message_of(b.substr(0, 30)).find("byte offset"), std::string::npos);
  const std::string tail = message_of(b.substr(0, b.size() - 4));
  EXPECT_NE(tail.find("truncated at byte offset " + std::to_string(b.size() - 8)), std::string::npos)
      << tail;
}

TEST(Snapshot, RejectsTrailingBytesAndHugeSizes) {
  const std::string b = serialize(sample_model(false));
  EXPECT_NE(message_of(b + "x").find("trailing"), std::string::npos);
  std::string huge = b;
  put_u32(huge, 8, 0xffffffffu);
  EXPECT_FALSE(message_of(huge).empty());
}

TEST(Snapshot, RefusesNonFiniteAndInconsistentModels) {
  Model m = sample_model(false);
  m.params.wfd(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(serialize(m), NonFiniteError);
  Model n = sample_model(false);
  n.vocab.vocabularies.pop_back();
  EXPECT_THROW(serialize(n), DataError);
}

TEST(Snapshot, SaveIsAtomicAndLoads) {
  const auto dir = std::filesystem::temp_directory_path() / "atd_snapshot_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "m.atd").string();
  const Model m = sample_model(true);
  save_snapshot(m, path);
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
  EXPECT_EQ(serialize(load_snapshot(path)), serialize(m));
  Model broken = m;
  broken.params.wfk(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(save_snapshot(broken, path), NonFiniteError);
  EXPECT_EQ(serialize(load_snapshot(path)), serialize(m));
  EXPECT_THROW(load_snapshot((dir / "missing.atd").string()), DataError);
  std::filesystem::remove_all(dir);
}
