/*
 * Copyright 2026 The FedDP Simulator Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Frozen/trainable parameter partition, masked client updates, and their wire
// encoding.
//
// Wire layout (little-endian), 16-byte header followed by the payload:
//
//   offset  size  field
//   0       4     magic "FDPS"
//   4       2     version (u16, currently 1)
//   6       2     encoding (u16, 0 = dense-f32, 1 = sparse-idx32-f32)
//   8       4     client_id (u32)
//   12      4     round (u32)
//   16      ...   dense:  d_t f32 deltas in ascending mask order
//                 sparse: repeated (u32 index, f32 delta) pairs
//
// The local step count and sample count are not on the wire; the server
// knows both from client registration and the round schedule.

#ifndef FEDDP_PARTITION_HPP_
#define FEDDP_PARTITION_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "feddp/errors.hpp"
#include "feddp/model.hpp"

namespace feddp {

struct PartitionMask {
  std::vector<std::string> selected_layers;  // in layout order
  std::vector<bool> coordinate_mask;
  std::vector<std::size_t> indices;  // true coordinates, ascending
  Layout layout;

  std::size_t trainable_count() const { return indices.size(); }  // d_t
  std::size_t total_count() const { return coordinate_mask.size(); }  // d
  bool contains(std::size_t i) const { return coordinate_mask[i]; }
  double ratio() const {
    return total_count() == 0 ? 0.0
                              : static_cast<double>(trainable_count()) /
                                    static_cast<double>(total_count());
  }

  friend bool operator==(const PartitionMask&, const PartitionMask&) = default;
};

inline PartitionMask MakeMask(const Layout& layout,
                              std::span<const std::string> selected) {
  for (const auto& name : selected) {
    const bool known = std::any_of(layout.begin(), layout.end(),
                                   [&](const auto& l) { return l.name == name; });
    if (!known) {
      std::string valid;
      for (const auto& l : layout) {
        valid += (valid.empty() ? "" : ", ") + l.name;
      }
      throw StructuralError("unknown layer '" + name + "'; valid layers: " +
                            valid);
    }
  }
  PartitionMask mask;
  mask.layout = layout;
  const std::size_t d =
      layout.empty() ? 0 : layout.back().offset + layout.back().length;
  mask.coordinate_mask.assign(d, false);
  for (const auto& l : layout) {
    if (std::find(selected.begin(), selected.end(), l.name) == selected.end()) {
      continue;
    }
    mask.selected_layers.push_back(l.name);
    for (std::size_t k = 0; k < l.length; ++k) {
      mask.coordinate_mask[l.offset + k] = true;
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (mask.coordinate_mask[i]) mask.indices.push_back(i);
  }
  return mask;
}

inline PartitionMask MakeMask(const Layout& layout,
                              std::initializer_list<std::string> selected) {
  const std::vector<std::string> v(selected);
  return MakeMask(layout, std::span<const std::string>(v));
}

inline PartitionMask FullMask(const Layout& layout) {
  const auto names = LayerNames(layout);
  return MakeMask(layout, std::span<const std::string>(names));
}

struct UpdateEntry {
  std::uint32_t index = 0;
  double delta = 0.0;

  friend bool operator==(const UpdateEntry&, const UpdateEntry&) = default;
};

// Delta of one client over the trainable coordinates. Deltas are held in
// double precision in memory; quantization to f32 happens only on the wire.
struct MaskedUpdate {
  std::uint32_t client_id = 0;
  std::uint32_t round = 0;
  std::vector<UpdateEntry> entries;
  std::size_t tau = 0;  // local optimizer steps
  std::size_t n_k = 0;  // local sample count

  friend bool operator==(const MaskedUpdate&, const MaskedUpdate&) = default;
};

inline void CheckAligned(const ParameterVector& p, const PartitionMask& mask,
                         std::string_view what) {
  if (p.layout != mask.layout || p.size() != mask.total_count()) {
    throw StructuralError(std::string(what) +
                          ": parameter layout does not match the mask");
  }
}

inline MaskedUpdate ExtractMaskedUpdate(const ParameterVector& w_new,
                                        const ParameterVector& w_old,
                                        const PartitionMask& mask,
                                        std::uint32_t client_id,
                                        std::uint32_t round, std::size_t tau,
                                        std::size_t n_k) {
  if (w_new.layout != w_old.layout || w_new.size() != w_old.size()) {
    throw StructuralError("masked update: old and new parameters differ in layout");
  }
  CheckAligned(w_old, mask, "masked update");
  MaskedUpdate u{client_id, round, {}, tau, n_k};
  u.entries.reserve(mask.trainable_count());
  for (std::size_t i : mask.indices) {
    const double delta = w_new.values[i] - w_old.values[i];
    if (!std::isfinite(delta)) {
      throw NumericError("non-finite delta at coordinate " + std::to_string(i));
    }
    u.entries.push_back({static_cast<std::uint32_t>(i), delta});
  }
  return u;
}

inline void ValidateUpdate(const MaskedUpdate& u, const PartitionMask& mask) {
  std::int64_t prev = -1;
  for (const auto& e : u.entries) {
    if (static_cast<std::int64_t>(e.index) <= prev) {
      throw StructuralError("update indices are not strictly increasing");
    }
    if (e.index >= mask.total_count() || !mask.contains(e.index)) {
      throw StructuralError("update index " + std::to_string(e.index) +
                            " lies outside the trainable mask");
    }
    if (!std::isfinite(e.delta)) {
      throw NumericError("non-finite delta at coordinate " +
                         std::to_string(e.index));
    }
    prev = e.index;
  }
}

inline ParameterVector ApplyMaskedUpdate(const ParameterVector& w_old,
                                         const MaskedUpdate& u,
                                         const PartitionMask& mask) {
  CheckAligned(w_old, mask, "apply update");
  ValidateUpdate(u, mask);
  ParameterVector out = w_old;
  for (const auto& e : u.entries) out.values[e.index] = w_old.values[e.index] + e.delta;
  return out;
}

enum class Encoding : std::uint16_t { kDenseF32 = 0, kSparseIdx32F32 = 1 };

inline std::string_view ToString(Encoding e) {
  return e == Encoding::kDenseF32 ? "dense-f32" : "sparse-idx32-f32";
}

inline constexpr std::size_t kWireHeaderBytes = 16;
inline constexpr std::uint16_t kWireVersion = 1;

// Payload size: dense sends d_t f32 values with no header accounted (the mask
// fixes the coordinate order); sparse sends (idx, value) pairs plus the header.
inline std::size_t PayloadBytes(const MaskedUpdate& u, Encoding encoding) {
  switch (encoding) {
    case Encoding::kDenseF32:
      return u.entries.size() * 4;
    case Encoding::kSparseIdx32F32:
      return kWireHeaderBytes + u.entries.size() * 8;
  }
  return 0;
}

namespace detail {

inline void PutU16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

inline void PutF32(std::vector<std::uint8_t>& out, double v) {
  PutU32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

inline std::uint32_t GetU32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | in[at + static_cast<std::size_t>(b)];
  return v;
}

inline std::uint16_t GetU16(std::span<const std::uint8_t> in, std::size_t at) {
  return static_cast<std::uint16_t>(in[at] | (in[at + 1] << 8));
}

inline double GetF32(std::span<const std::uint8_t> in, std::size_t at) {
  return static_cast<double>(std::bit_cast<float>(GetU32(in, at)));
}

}  // namespace detail

inline std::vector<std::uint8_t> EncodeUpdate(const MaskedUpdate& u,
                                              const PartitionMask& mask,
                                              Encoding encoding) {
  ValidateUpdate(u, mask);
  std::vector<std::uint8_t> out{'F', 'D', 'P', 'S'};
  detail::PutU16(out, kWireVersion);
  detail::PutU16(out, static_cast<std::uint16_t>(encoding));
  detail::PutU32(out, u.client_id);
  detail::PutU32(out, u.round);
  if (encoding == Encoding::kDenseF32) {
    if (u.entries.size() != mask.trainable_count()) {
      throw StructuralError("dense encoding requires one entry per trainable "
                            "coordinate");
    }
    for (const auto& e : u.entries) detail::PutF32(out, e.delta);
  } else {
    for (const auto& e : u.entries) {
      detail::PutU32(out, e.index);
      detail::PutF32(out, e.delta);
    }
  }
  return out;
}

inline MaskedUpdate DecodeUpdate(std::span<const std::uint8_t> bytes,
                                 const PartitionMask& mask, std::size_t tau,
                                 std::size_t n_k) {
  if (bytes.size() < kWireHeaderBytes ||
      std::memcmp(bytes.data(), "FDPS", 4) != 0) {
    throw ProtocolError("update message lacks the FDPS header");
  }
  if (detail::GetU16(bytes, 4) != kWireVersion) {
    throw ProtocolError("unsupported update version " +
                        std::to_string(detail::GetU16(bytes, 4)));
  }
  const std::uint16_t enc = detail::GetU16(bytes, 6);
  MaskedUpdate u;
  u.client_id = detail::GetU32(bytes, 8);
  u.round = detail::GetU32(bytes, 12);
  u.tau = tau;
  u.n_k = n_k;
  const std::size_t body = bytes.size() - kWireHeaderBytes;
  if (enc == static_cast<std::uint16_t>(Encoding::kDenseF32)) {
    if (body != mask.trainable_count() * 4) {
      throw ProtocolError("dense payload length does not match mask popcount");
    }
    for (std::size_t k = 0; k < mask.trainable_count(); ++k) {
      u.entries.push_back({static_cast<std::uint32_t>(mask.indices[k]),
                           detail::GetF32(bytes, kWireHeaderBytes + 4 * k)});
    }
  } else if (enc == static_cast<std::uint16_t>(Encoding::kSparseIdx32F32)) {
    if (body % 8 != 0) throw ProtocolError("truncated sparse payload");
    for (std::size_t at = kWireHeaderBytes; at < bytes.size(); at += 8) {
      u.entries.push_back({detail::GetU32(bytes, at), detail::GetF32(bytes, at + 4)});
    }
  } else {
    throw ProtocolError("unknown update encoding " + std::to_string(enc));
  }
  ValidateUpdate(u, mask);
  return u;
}

}  // namespace feddp

#endif  // FEDDP_PARTITION_HPP_
