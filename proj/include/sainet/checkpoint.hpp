#pragma once

// Single-file checkpoint: magic line, run config text, counters, named f32
// parameter blobs, Adam state. All integers little-endian.

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "sainet/adam.hpp"
#include "sainet/config.hpp"

namespace sainet {

inline constexpr const char* kCheckpointMagic = "SAINETCKPT1";

struct Checkpoint {
  std::string config_text;
  std::uint64_t epoch = 0;        // completed epochs
  std::uint64_t global_step = 0;  // optimizer steps taken
  std::vector<std::string> names;
  std::vector<Shape> shapes;
  std::vector<std::vector<float>> blobs;
  AdamState adam;
};

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u64(s.size());
    bytes_.append(s);
  }
  void floats(const std::vector<float>& v) {
    u64(v.size());
    for (float f : v) raw(&f, 4);
  }
  const std::string& bytes() const { return bytes_; }

 private:
  void raw(const void* p, std::size_t n) {
    static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
    bytes_.append(static_cast<const char*>(p), n);
  }
  std::string bytes_;
};

class ByteReader {
 public:
  ByteReader(std::string bytes, std::string origin) : bytes_(std::move(bytes)), origin_(std::move(origin)) {}
  std::uint32_t u32() { return pod<std::uint32_t>(); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  double f64() { return pod<double>(); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<float> floats() {
    const auto n = u64();
    need(n * 4);
    std::vector<float> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * 4);
    pos_ += n * 4;
    return v;
  }
  std::string literal(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError(origin_ + ": truncated checkpoint");
  }
  std::string bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  detail::ByteWriter w;
  const std::string magic = std::string(kCheckpointMagic) + "\n";
  w.str(magic);
  w.str(ck.config_text);
  w.u64(ck.epoch);
  w.u64(ck.global_step);
  w.u64(ck.names.size());
  for (std::size_t i = 0; i < ck.names.size(); ++i) {
    w.str(ck.names[i]);
    w.u32(static_cast<std::uint32_t>(ck.shapes[i].size()));
    for (auto d : ck.shapes[i]) w.u64(d);
    w.floats(ck.blobs[i]);
  }
  w.f64(ck.adam.lr);
  w.f64(ck.adam.beta1);
  w.f64(ck.adam.beta2);
  w.f64(ck.adam.epsilon);
  w.u64(ck.adam.step_count);
  w.u64(ck.adam.first_moment.size());
  auto to_f32 = [](const std::vector<double>& v) { return std::vector<float>(v.begin(), v.end()); };
  for (std::size_t i = 0; i < ck.adam.first_moment.size(); ++i) {
    w.floats(to_f32(ck.adam.first_moment[i]));
    w.floats(to_f32(ck.adam.second_moment[i]));
  }
  // write-then-rename keeps the previous checkpoint intact on failure
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint " + tmp.string());
    f.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!f) throw DataError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  detail::ByteReader r(ss.str(), path.string());
  Checkpoint ck;
  if (r.str() != std::string(kCheckpointMagic) + "\n")
    throw FormatError(path.string() + ": not a " + std::string(kCheckpointMagic) + " checkpoint");
  ck.config_text = r.str();
  ck.epoch = r.u64();
  ck.global_step = r.u64();
  const auto n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    ck.names.push_back(r.str());
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u64();
    ck.blobs.push_back(r.floats());
    if (shape_numel(shape) != ck.blobs.back().size())
      throw FormatError(path.string() + ": blob '" + ck.names.back() + "' size does not match its shape");
    ck.shapes.push_back(std::move(shape));
  }
  ck.adam.lr = r.f64();
  ck.adam.beta1 = r.f64();
  ck.adam.beta2 = r.f64();
  ck.adam.epsilon = r.f64();
  ck.adam.step_count = r.u64();
  const auto m = r.u64();
  for (std::uint64_t i = 0; i < m; ++i) {
    const auto a = r.floats(), b = r.floats();
    ck.adam.first_moment.emplace_back(a.begin(), a.end());
    ck.adam.second_moment.emplace_back(b.begin(), b.end());
  }
  if (!r.done()) throw FormatError(path.string() + ": trailing bytes after checkpoint payload");
  return ck;
}

}  // namespace sainet
