// SPDX-License-Identifier: Apache-2.0

#include "osdvsr/nets/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

namespace osdvsr::nets {

namespace {

constexpr char kMagic[8] = {'O', 'S', 'D', 'C', 'K', 'P', 'T', '1'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::byte*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffU));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffU));
  }
  void f32(float f) {
    std::uint32_t v = 0;
    std::memcpy(&v, &f, 4);
    u32(v);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::byte>& buffer() { return out_; }

 private:
  std::vector<std::byte> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::byte>& in) : in_(in) {}
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw IoError("checkpoint: truncated archive");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() {
    const std::uint32_t v = u32();
    float f = 0;
    std::memcpy(&f, &v, 4);
    return f;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  const std::vector<std::byte>& in_;
  std::size_t pos_ = 0;
};

std::uint64_t hash_f32(const std::vector<float>& v, std::uint64_t seed) {
  return fnv1a(std::as_bytes(std::span<const float>(v)), seed);
}

constexpr std::uint64_t kFnvBasis = 0xcbf29ce484222325ULL;

}  // namespace

std::vector<std::byte> serialize_checkpoint(const std::string& config_text, const ParameterList& params,
                                            std::uint64_t* content_hash) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.u32(kCheckpointSchema);
  w.str(config_text);
  w.u32(static_cast<std::uint32_t>(params.size()));
  std::map<std::string, std::uint64_t> hashes;
  for (const auto& p : params) {
    w.str(p.name);
    w.str(p.group);
    w.u32(static_cast<std::uint32_t>(p.tensor.shape().size()));
    for (int d : p.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    std::vector<float> f(p.tensor.values().begin(), p.tensor.values().end());
    for (float v : f) w.f32(v);
    auto it = hashes.try_emplace(p.group, kFnvBasis).first;
    it->second = hash_f32(f, it->second);
  }
  w.u32(static_cast<std::uint32_t>(hashes.size()));
  for (const auto& [name, h] : hashes) {
    w.str(name);
    w.u64(h);
  }
  const std::uint64_t trailer = fnv1a(w.buffer());
  w.u64(trailer);
  if (content_hash) *content_hash = trailer;
  return std::move(w.buffer());
}

Checkpoint parse_checkpoint(const std::vector<std::byte>& bytes) {
  Reader r(bytes);
  r.need(sizeof(kMagic));
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw IoError("checkpoint: bad magic");
  r.skip(sizeof(kMagic));
  Checkpoint ck;
  ck.schema = r.u32();
  if (ck.schema != kCheckpointSchema)
    throw IoError("checkpoint: unsupported schema version " + std::to_string(ck.schema));
  ck.config_text = r.str();
  const std::uint32_t count = r.u32();
  std::map<std::string, std::uint64_t> recomputed;
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredTensor t;
    t.name = r.str();
    t.group = r.str();
    const std::uint32_t rank = r.u32();
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.shape.push_back(static_cast<int>(r.u32()));
      n *= static_cast<std::size_t>(t.shape.back());
    }
    r.need(n * 4);
    t.values.resize(n);
    for (float& v : t.values) v = r.f32();
    auto it = recomputed.try_emplace(t.group, kFnvBasis).first;
    it->second = hash_f32(t.values, it->second);
    ck.tensors.push_back(std::move(t));
  }
  const std::uint32_t groups = r.u32();
  for (std::uint32_t i = 0; i < groups; ++i) {
    std::string name = r.str();
    ck.group_hashes[name] = r.u64();
  }
  if (ck.group_hashes != recomputed) throw IoError("checkpoint: group hash mismatch");
  const std::size_t body = r.pos();
  ck.content_hash = r.u64();
  if (fnv1a(std::span<const std::byte>(bytes.data(), body)) != ck.content_hash)
    throw IoError("checkpoint: content hash mismatch");
  if (r.pos() != bytes.size()) throw IoError("checkpoint: trailing bytes");
  return ck;
}

std::uint64_t write_checkpoint(const std::filesystem::path& path, const std::string& config_text,
                               const ParameterList& params) {
  std::uint64_t h = 0;
  const auto bytes = serialize_checkpoint(config_text, params, &h);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
  return h;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> bytes(raw.size());
  std::memcpy(bytes.data(), raw.data(), raw.size());
  return parse_checkpoint(bytes);
}

void load_parameters(const Checkpoint& ckpt, const ParameterList& params) {
  std::map<std::string, const StoredTensor*> by_name;
  for (const auto& t : ckpt.tensors) by_name[t.name] = &t;
  for (const auto& p : params) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw IoError("checkpoint: missing parameter " + p.name);
    const StoredTensor& s = *it->second;
    if (s.shape != p.tensor.shape()) throw IoError("checkpoint: shape mismatch for " + p.name);
    ag::Tensor t = p.tensor;
    auto dst = t.mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<double>(s.values[i]);
  }
}

std::map<std::string, std::uint64_t> group_hashes(const ParameterList& params) {
  std::map<std::string, std::uint64_t> out;
  for (const auto& p : params) {
    auto it = out.try_emplace(p.group, kFnvBasis).first;
    it->second = hash_values(p.tensor.values(), it->second);
  }
  return out;
}

std::uint64_t parameters_hash(const ParameterList& params) {
  std::uint64_t h = kFnvBasis;
  for (const auto& p : params) h = hash_values(p.tensor.values(), h);
  return h;
}

}  // namespace osdvsr::nets
