#include "atd/snapshot.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>

#include "atd/error.hpp"

namespace atd {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void size(std::size_t n) {
    if (n > std::numeric_limits<std::uint32_t>::max()) throw DataError("size too large to save");
    u32(static_cast<std::uint32_t>(n));
  }
  void str(const std::string& s) {
    size(s.size());
    bytes(s.data(), s.size());
  }
  void strings(const std::vector<std::string>& xs) {
    size(xs.size());
    for (const auto& s : xs) str(s);
  }
  void matrix(const MatrixXd& m) {
    size(static_cast<std::size_t>(m.rows()));
    size(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

  const char* take(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw DataError("snapshot truncated at byte offset " + std::to_string(pos_) +
                      " while reading " + what + " (need " + std::to_string(n) + " bytes, " +
                      std::to_string(in_.size() - pos_) + " left)");
    }
    const char* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(*take(1, what)); }
  std::uint32_t u32(const char* what) {
    const auto* p = reinterpret_cast<const unsigned char*>(take(4, what));
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    const auto* p = reinterpret_cast<const unsigned char*>(take(8, what));
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    const char* p = take(n, what);
    return {p, n};
  }
  std::vector<std::string> strings(const char* what) {
    const std::uint32_t n = u32(what);
    std::vector<std::string> out;
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(str(what));
    return out;
  }
  MatrixXd matrix(const char* what, Eigen::Index rows, Eigen::Index cols) {
    const std::size_t at = pos_;
    const std::uint32_t r = u32(what);
    const std::uint32_t c = u32(what);
    if (r != rows || c != cols) {
      throw DataError(std::string("snapshot matrix ") + what + " at byte offset " +
                      std::to_string(at) + " is " + std::to_string(r) + "x" + std::to_string(c) +
                      ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = f64(what);
    }
    return m;
  }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

void write_groups(Writer& w, const FactoredParams& p, const Gradients* g, const AttributeTable* t) {
  // Parameters and momentum buffers share the group order.
  if (g) {
    for_each_group(*g, [&w](const std::string&, ConstGroupView m) { w.matrix(m); });
  } else {
    for_each_group(p, *t, [&w](const std::string&, ConstGroupView m) { w.matrix(m); });
  }
}

}  // namespace

void validate_model(const Model& m) {
  try {
    m.params.validate();
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const int langs = m.params.num_languages();
  if (m.vocab.languages.size() != langs || static_cast<int>(m.vocab.vocabularies.size()) != langs) {
    throw DataError("language count differs between vocabularies and parameters");
  }
  for (int l = 0; l < langs; ++l) {
    if (m.vocab.vocabularies[static_cast<std::size_t>(l)].size() != m.params.vocab_size(l)) {
      throw DataError("vocabulary size differs from parameters for language " +
                      m.vocab.languages.key(l));
    }
  }
  if (m.table.lookup.rows() != m.params.dims.D) throw DataError("attribute table width is not D");
  if (m.table.size() != m.vocab.attributes.size()) {
    throw DataError("attribute table and registry differ in size");
  }
  if (m.trainer) {
    const Gradients shape = Gradients::zeros_like(m.params, m.table);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> want, have;
    for_each_group(shape, [&](const std::string&, ConstGroupView g) {
      want.emplace_back(g.rows(), g.cols());
    });
    for_each_group(m.trainer->velocity, [&](const std::string&, ConstGroupView g) {
      have.emplace_back(g.rows(), g.cols());
    });
    if (want != have) throw DataError("trainer state shapes differ from parameters");
  }
}

std::string serialize(const Model& m) {
  validate_model(m);
  if (auto bad = first_non_finite(m.params, m.table); !bad.empty()) {
    throw NonFiniteError(bad, "refusing to save non-finite parameter group " + bad);
  }
  Writer w;
  w.bytes(kSnapshotMagic, 4);
  w.u32(kSnapshotVersion);
  const ModelDims& d = m.params.dims;
  w.u32(static_cast<std::uint32_t>(d.K));
  w.u32(static_cast<std::uint32_t>(d.F));
  w.u32(static_cast<std::uint32_t>(d.D));
  w.u32(static_cast<std::uint32_t>(d.context_size));
  w.u8(m.table.rectify ? 1 : 0);
  w.u8(m.trainer ? 1 : 0);
  w.u8(0);
  w.u8(0);
  w.strings(m.vocab.languages.keys());
  for (const auto& v : m.vocab.vocabularies) w.strings(v.words());
  w.strings(m.vocab.attributes.keys());
  w.size(m.hyper.size());
  for (const auto& [k, v] : m.hyper) {
    w.str(k);
    w.str(v);
  }
  write_groups(w, m.params, nullptr, &m.table);
  if (m.trainer) {
    w.u32(static_cast<std::uint32_t>(m.trainer->epoch));
    write_groups(w, m.params, &m.trainer->velocity, nullptr);
  }
  return w.take();
}

Model deserialize(std::string_view bytes) {
  Reader r(bytes);
  const char* magic = r.take(4, "magic");
  if (std::memcmp(magic, kSnapshotMagic, 4) != 0) throw DataError("not a model snapshot (bad magic)");
  const std::uint32_t version = r.u32("version");
  if (version != kSnapshotVersion) {
    throw DataError("unsupported snapshot version " + std::to_string(version) + " (expected " +
                    std::to_string(kSnapshotVersion) + ")");
  }
  ModelDims d;
  d.K = static_cast<int>(r.u32("dims"));
  d.F = static_cast<int>(r.u32("dims"));
  d.D = static_cast<int>(r.u32("dims"));
  d.context_size = static_cast<int>(r.u32("dims"));
  const std::uint8_t rectify = r.u8("flags");
  const std::uint8_t has_state = r.u8("flags");
  r.u8("flags");
  r.u8("flags");
  if (rectify > 1 || has_state > 1) throw DataError("bad snapshot flags at byte offset 24");
  // Every parameter is 8 bytes, so dims claiming more values than the file
  // holds are corrupt; checked before allocating.
  const double budget = static_cast<double>(bytes.size()) / 8.0;
  const double k = d.K, f = d.F, dd = d.D, n = d.context_size;
  if (d.K < 1 || d.F < 1 || d.D < 1 || d.context_size < 0 ||
      f * k + f * dd + n * k * k > budget) {
    throw DataError("implausible snapshot dims at byte offset 8");
  }

  Model m;
  m.vocab.languages = Registry(r.strings("languages"));
  std::vector<int> sizes;
  for (int l = 0; l < m.vocab.languages.size(); ++l) {
    m.vocab.vocabularies.push_back(Vocabulary::from_words(r.strings("vocabulary")));
    sizes.push_back(m.vocab.vocabularies.back().size());
  }
  m.vocab.attributes = Registry(r.strings("attributes"));
  const std::uint32_t nh = r.u32("settings");
  for (std::uint32_t i = 0; i < nh; ++i) {
    std::string k = r.str("settings");
    m.hyper[k] = r.str("settings");
  }

  double values = dd * m.vocab.attributes.size();
  for (int v : sizes) values += f * v;
  if (values > budget) throw DataError("snapshot too short for its declared sizes");
  m.params = FactoredParams::zeros(d, sizes);
  m.table = AttributeTable::zeros(d.D, m.vocab.attributes.size(), rectify == 1);
  for_each_group(m.params, m.table, [&r](const std::string& name, GroupView g) {
    g = r.matrix(name.c_str(), g.rows(), g.cols());
  });
  if (has_state) {
    TrainerState st;
    st.epoch = static_cast<int>(r.u32("trainer epoch"));
    st.velocity = Gradients::zeros_like(m.params, m.table);
    for_each_group(st.velocity, [&r](const std::string& name, GroupView g) {
      g = r.matrix(name.c_str(), g.rows(), g.cols());
    });
    m.trainer = std::move(st);
  }
  if (!r.done()) {
    throw DataError("unexpected trailing bytes at byte offset " + std::to_string(r.offset()));
  }
  validate_model(m);
  return m;
}

void save_snapshot(const Model& model, const std::string& path) {
  const std::string bytes = serialize(model);
  const std::filesystem::path target(path);
  std::filesystem::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot rename snapshot into place at " + path);
  }
}

Model load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open snapshot " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace atd
