#pragma once

// Checkpoint container, all integers and floats little-endian:
//
//   "VTACCKPT"                    8-byte magic
//   u32 version                   currently 1
//   u32 architecture              1 = fcnn, 2 = cnn
//   u32 n_meta,    n x (str key, str value)
//   u32 n_hparams, n x (str key, f64 value)
//   u32 n_tensors, n x (str name, u64 count, count x f64)
//   u64 FNV-1a of every preceding byte
//
// where str is u32 length followed by the bytes.

#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vtac/error.hpp"
#include "vtac/nn/model.hpp"
#include "vtac/text.hpp"

namespace vtac::nn {

inline constexpr std::string_view kCheckpointMagic = "VTACCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::size_t end) : b_(b), end_(end) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_), b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(b_.begin() + static_cast<std::ptrdiff_t>(pos_), b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::uint64_t n) const {
    if (n > end_ - pos_) fail(ErrorCode::CorruptCheckpoint, "checkpoint truncated");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

inline std::uint32_t arch_tag(Architecture a) { return a == Architecture::Fcnn ? 1 : 2; }

inline std::vector<std::pair<std::string, double>> hyperparam_list(const ModelHyperparams& hp) {
  std::vector<std::pair<std::string, double>> out = {
      {"input_dim", static_cast<double>(hp.input_dim)},   {"conv_filters", static_cast<double>(hp.conv_filters)},
      {"filter_size", static_cast<double>(hp.filter_size)}, {"heads", static_cast<double>(hp.heads)},
      {"dropout", hp.dropout},
  };
  const auto hidden = hp.hidden_sizes();
  out.emplace_back("n_hidden", static_cast<double>(hidden.size()));
  for (std::size_t i = 0; i < hidden.size(); ++i) out.emplace_back("hidden_" + std::to_string(i), static_cast<double>(hidden[i]));
  return out;
}

}  // namespace detail

inline std::vector<std::uint8_t> save_checkpoint(Model& model, const std::map<std::string, std::string>& metadata = {}) {
  detail::Writer w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(detail::arch_tag(model.architecture()));
  w.u32(static_cast<std::uint32_t>(metadata.size()));
  for (const auto& [k, v] : metadata) {
    w.str(k);
    w.str(v);
  }
  const auto hps = detail::hyperparam_list(model.hyperparams());
  w.u32(static_cast<std::uint32_t>(hps.size()));
  for (const auto& [k, v] : hps) {
    w.str(k);
    w.f64(v);
  }
  const auto params = model.params();
  const auto buffers = model.buffers();
  w.u32(static_cast<std::uint32_t>(params.size() + buffers.size()));
  auto put_tensor = [&](const std::string& name, const std::vector<double>& values) {
    w.str(name);
    w.u64(values.size());
    for (double v : values) w.f64(v);
  };
  for (const auto& p : params) put_tensor(p.name, *p.value);
  for (const auto& b : buffers) put_tensor(b.name, *b.value);
  const auto sum = text::fnv1a(std::string_view(reinterpret_cast<const char*>(w.bytes().data()), w.bytes().size()));
  w.u64(sum);
  return std::move(w.bytes());
}

struct LoadedModel {
  Model model;
  std::map<std::string, std::string> metadata;
};

/// Rebuild a model from checkpoint bytes. When `expected` is given, a
/// checkpoint of the other architecture raises ArchitectureMismatch.
inline LoadedModel load_checkpoint(const std::vector<std::uint8_t>& bytes,
                                   std::optional<Architecture> expected = std::nullopt) {
  if (bytes.size() < kCheckpointMagic.size() + 8 + 8) fail(ErrorCode::CorruptCheckpoint, "checkpoint too short");
  if (std::string_view(reinterpret_cast<const char*>(bytes.data()), kCheckpointMagic.size()) != kCheckpointMagic) {
    fail(ErrorCode::CorruptCheckpoint, "bad checkpoint magic");
  }
  const std::size_t body = bytes.size() - 8;
  {
    detail::Reader tail(bytes, bytes.size());
    tail.raw(body);
    const auto stored = tail.u64();
    const auto actual = text::fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), body));
    if (stored != actual) fail(ErrorCode::CorruptCheckpoint, "checkpoint checksum mismatch (truncated or altered)");
  }

  detail::Reader r(bytes, body);
  r.raw(kCheckpointMagic.size());
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(version) + " (expected " +
                                         std::to_string(kCheckpointVersion) + ")");
  }
  const auto tag = r.u32();
  if (tag != 1 && tag != 2) fail(ErrorCode::CorruptCheckpoint, "unknown architecture tag");
  ModelHyperparams hp;
  hp.architecture = tag == 1 ? Architecture::Fcnn : Architecture::Cnn1dAttention;
  if (expected && *expected != hp.architecture) {
    fail(ErrorCode::ArchitectureMismatch, std::string("checkpoint holds a ") + to_string(hp.architecture) +
                                              " model, expected " + to_string(*expected));
  }

  LoadedModel out{Model(hp, {}), {}};
  const auto n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = r.str();
    out.metadata[k] = r.str();
  }
  std::map<std::string, double> hmap;
  const auto n_hp = r.u32();
  for (std::uint32_t i = 0; i < n_hp; ++i) {
    auto k = r.str();
    hmap[k] = r.f64();
  }
  auto get = [&](const std::string& k) -> double {
    auto it = hmap.find(k);
    if (it == hmap.end()) fail(ErrorCode::CorruptCheckpoint, "missing hyperparameter " + k);
    return it->second;
  };
  hp.input_dim = static_cast<std::size_t>(get("input_dim"));
  hp.conv_filters = static_cast<std::size_t>(get("conv_filters"));
  hp.filter_size = static_cast<std::size_t>(get("filter_size"));
  hp.heads = static_cast<std::size_t>(get("heads"));
  hp.dropout = get("dropout");
  const auto n_hidden = static_cast<std::size_t>(get("n_hidden"));
  for (std::size_t i = 0; i < n_hidden; ++i) hp.hidden.push_back(static_cast<std::size_t>(get("hidden_" + std::to_string(i))));

  Model model = build_model(hp, 0);
  std::map<std::string, std::vector<double>*> slots;
  for (auto& p : model.params()) slots[p.name] = p.value;
  for (auto& b : model.buffers()) slots[b.name] = b.value;
  const auto n_tensors = r.u32();
  if (n_tensors != slots.size()) fail(ErrorCode::CorruptCheckpoint, "tensor count does not match the architecture");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const auto name = r.str();
    const auto count = r.u64();
    auto it = slots.find(name);
    if (it == slots.end() || it->second->size() != count) {
      fail(ErrorCode::CorruptCheckpoint, "unexpected tensor '" + name + "'");
    }
    for (auto& v : *it->second) v = r.f64();
  }
  if (!r.done()) fail(ErrorCode::CorruptCheckpoint, "trailing bytes in checkpoint");
  model.set_mode(Mode::Infer);
  out.model = std::move(model);
  return out;
}

}  // namespace vtac::nn
