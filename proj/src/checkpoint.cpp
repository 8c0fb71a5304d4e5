#include "rankgan/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "rankgan/errors.hpp"

namespace rankgan {

namespace {

constexpr char kMagic[8] = {'R', 'K', 'G', 'N', 'F', 'I', 'L', 'E'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) {
    u32(static_cast<std::uint32_t>(b.size()));
    out_.insert(out_.end(), b.begin(), b.end());
  }
  void str(std::string_view s) {
    bytes({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
  }
  void raw(const void* p, std::size_t n) {
    auto b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> in, std::string_view source) : in_(in), source_(source) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<std::uint8_t> bytes() {
    auto b = take(u32());
    return {b.begin(), b.end()};
  }
  std::string str() {
    auto b = take(u32());
    return {reinterpret_cast<const char*>(b.data()), b.size()};
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > in_.size() - pos_) fail("truncated file");
    auto out = in_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == in_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw CheckpointError(std::string(source_) + ": " + what);
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::string_view source_;
};

}  // namespace

std::vector<std::uint8_t> encode_records(const RecordFile& file) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.str(file.kind + "/" + std::to_string(file.version));
  w.bytes(file.meta);
  w.u32(static_cast<std::uint32_t>(file.records.size()));
  for (const Record& r : file.records) {
    w.str(r.name);
    w.u32(static_cast<std::uint32_t>(r.value.rank()));
    for (std::size_t d : r.value.shape()) w.u64(d);
    for (double v : r.value.data()) w.f64(v);
  }
  return w.take();
}

RecordFile decode_records(std::span<const std::uint8_t> bytes, std::string_view expected_kind,
                          std::string_view source) {
  Reader r(bytes, source);
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    r.fail("bad magic bytes (not a rankgan record file)");
  }
  r.take(sizeof kMagic);
  RecordFile file;
  const std::string tag = r.str();
  const auto slash = tag.find('/');
  if (slash == std::string::npos) r.fail("malformed version tag '" + tag + "'");
  file.kind = tag.substr(0, slash);
  if (file.kind != expected_kind) {
    r.fail("expected a " + std::string(expected_kind) + " file, found kind '" + file.kind + "'");
  }
  const std::string version = tag.substr(slash + 1);
  if (version != std::to_string(kFormatVersion)) {
    r.fail("incompatible format version '" + version + "' (this build reads version " +
           std::to_string(kFormatVersion) + ")");
  }
  file.meta = r.bytes();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    Record rec;
    rec.name = r.str();
    const std::uint32_t rank = r.u32();
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    const std::size_t n = shape_numel(shape);
    if (n > bytes.size() / 8) r.fail("record '" + rec.name + "' larger than file");
    std::vector<double> data(n);
    for (auto& v : data) v = r.f64();
    rec.value = Tensor(std::move(shape), std::move(data));
    file.records.push_back(std::move(rec));
  }
  if (!r.done()) r.fail("trailing bytes after last record");
  return file;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
}

std::vector<std::uint8_t> encode_model(const Mlp& model) {
  Writer meta;
  meta.u32(static_cast<std::uint32_t>(model.spec.widths.size()));
  for (std::size_t w : model.spec.widths) meta.u64(w);
  meta.u8(static_cast<std::uint8_t>(model.spec.hidden));
  meta.f64(model.spec.slope);
  meta.u8(static_cast<std::uint8_t>(model.spec.output));
  meta.u8(model.params.frozen() ? 1 : 0);

  RecordFile file{std::string(kModelKind), kFormatVersion, meta.take(), {}};
  for (const auto& e : model.params.entries()) file.records.push_back({e.name, e.value});
  return encode_records(file);
}

Mlp decode_model(std::span<const std::uint8_t> bytes, std::string_view source) {
  RecordFile file = decode_records(bytes, kModelKind, source);
  Reader meta(file.meta, source);
  Mlp model;
  const std::uint32_t n = meta.u32();
  model.spec.widths.resize(n);
  for (auto& w : model.spec.widths) w = meta.u64();
  const std::uint8_t hidden = meta.u8();
  model.spec.slope = meta.f64();
  const std::uint8_t output = meta.u8();
  const bool frozen = meta.u8() != 0;
  if (!meta.done()) meta.fail("trailing bytes in model header");
  if (hidden > 1 || output > 2) meta.fail("unknown activation code");
  model.spec.hidden = static_cast<HiddenActivation>(hidden);
  model.spec.output = static_cast<OutputActivation>(output);
  try {
    model.spec.validate();
  } catch (const ConfigError& e) {
    meta.fail(e.what());
  }
  for (auto& rec : file.records) model.params.add(std::move(rec.name), std::move(rec.value));
  if (model.params.size() != 2 * (n - 1)) meta.fail("parameter count does not match layer widths");
  if (frozen) model.params.freeze();
  return model;
}

void save_model(const std::filesystem::path& path, const Mlp& model) {
  write_file_bytes(path, encode_model(model));
}

Mlp load_model(const std::filesystem::path& path) {
  return decode_model(read_file_bytes(path), path.string());
}

void verify_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const Mlp model = decode_model(bytes, path.string());
  if (encode_model(model) != bytes) {
    throw CheckpointError(path.string() + ": re-encoded checkpoint differs from file contents");
  }
}

std::string params_digest(const ModelParams& params) {
  Writer w;
  for (const auto& e : params.entries()) {
    w.str(e.name);
    w.u32(static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape()) w.u64(d);
    for (double v : e.value.data()) w.f64(v);
  }
  const auto payload = w.take();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(payload.data(), payload.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("params_digest: SHA-256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return hex.str();
}

}  // namespace rankgan
