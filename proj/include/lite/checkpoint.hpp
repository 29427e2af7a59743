#pragma once

// Named-tensor checkpoint container:
//   "LITE" | version u8 | count u32 | per tensor:
//   name_len u16 | name | rank u8 | dims u32... | dtype u8 | LE values
// dtype 0 is f32; 1 (f64) is accepted for 64-bit verification runs.

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lite/autodiff.hpp"
#include "lite/bytes.hpp"

namespace lite::checkpoint {

inline constexpr char kMagic[4] = {'L', 'I', 'T', 'E'};
inline constexpr std::uint8_t kVersion = 1;

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

template <typename T>
constexpr DType dtype_of() {
  return sizeof(T) == 8 ? DType::F64 : DType::F32;
}

// Values are held as their little-endian byte image, so any f32/f64 bit
// pattern survives decode -> encode unchanged.
struct Entry {
  std::string name;
  Shape shape;
  DType dtype = DType::F32;
  std::vector<std::uint8_t> raw;

  std::size_t width() const { return dtype == DType::F32 ? 4 : 8; }
  friend bool operator==(const Entry&, const Entry&) = default;

  template <typename T>
  Tensor<T> as() const {
    ByteReader r(raw);
    std::vector<T> v(numel(shape));
    for (auto& x : v) x = dtype == DType::F32 ? static_cast<T>(r.f32()) : static_cast<T>(r.f64());
    return Tensor<T>(shape, std::move(v));
  }
};

template <typename T>
Entry make_entry(std::string name, const Tensor<T>& t) {
  ByteWriter w;
  for (T v : t.data()) {
    if constexpr (sizeof(T) == 8) {
      w.f64(static_cast<double>(v));
    } else {
      w.f32(static_cast<float>(v));
    }
  }
  return Entry{std::move(name), t.shape(), dtype_of<T>(), w.take()};
}

inline std::vector<std::uint8_t> encode(const std::vector<Entry>& entries) {
  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.u8(kVersion);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > 0xFFFF) throw FormatError("tensor name too long: " + e.name);
    if (e.shape.size() > 0xFF) throw FormatError("tensor rank too large: " + e.name);
    w.u16(static_cast<std::uint16_t>(e.name.size()));
    w.raw(e.name);
    w.u8(static_cast<std::uint8_t>(e.shape.size()));
    for (auto d : e.shape) w.u32(static_cast<std::uint32_t>(d));
    w.u8(static_cast<std::uint8_t>(e.dtype));
    if (numel(e.shape) * e.width() != e.raw.size()) {
      throw FormatError("entry size mismatch: " + e.name);
    }
    w.bytes().insert(w.bytes().end(), e.raw.begin(), e.raw.end());
  }
  return w.take();
}

inline std::vector<Entry> decode(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.str(4) != std::string_view(kMagic, 4)) throw FormatError("checkpoint: bad magic");
  const auto version = r.u8();
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto count = r.u32();
  std::vector<Entry> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = r.str(r.u16());
    const auto rank = r.u8();
    for (std::uint8_t k = 0; k < rank; ++k) e.shape.push_back(r.u32());
    const auto tag = r.u8();
    if (tag > 1) throw FormatError("checkpoint: unknown dtype tag " + std::to_string(tag));
    e.dtype = static_cast<DType>(tag);
    const std::size_t n = numel(e.shape) * e.width();
    if (r.remaining() < n) throw FormatError("checkpoint: truncated tensor " + e.name);
    const std::string bytes = r.str(n);
    e.raw.assign(bytes.begin(), bytes.end());
    out.push_back(std::move(e));
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  return out;
}

template <typename T>
std::vector<std::uint8_t> save_params(const std::vector<Parameter<T>*>& params) {
  std::vector<Entry> entries;
  entries.reserve(params.size());
  for (const auto* p : params) entries.push_back(make_entry(p->name, p->value));
  return encode(entries);
}

// Loads by name; every parameter must be present with a matching shape.
template <typename T>
void load_params(std::span<const std::uint8_t> bytes, const std::vector<Parameter<T>*>& params) {
  auto entries = decode(bytes);
  for (auto* p : params) {
    auto it = std::find_if(entries.begin(), entries.end(),
                           [&](const Entry& e) { return e.name == p->name; });
    if (it == entries.end()) throw FormatError("checkpoint: missing tensor " + p->name);
    if (it->shape != p->value.shape()) {
      throw FormatError("checkpoint: shape mismatch for " + p->name + ": " +
                        shape_str(it->shape) + " vs " + shape_str(p->value.shape()));
    }
    p->value = it->template as<T>();
    p->grad = Tensor<T>(p->value.shape());
  }
}

// FNV-1a over the byte image; used to prove a model was not modified.
inline std::uint64_t digest(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace lite::checkpoint
