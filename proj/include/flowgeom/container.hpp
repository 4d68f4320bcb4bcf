#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flowgeom/grid.hpp"
#include "flowgeom/sequence.hpp"
#include "flowgeom/transform.hpp"

namespace flowgeom {

// On-disk layout (all integers little-endian):
//
//   "F4R1"                      4 bytes
//   header length N             u64
//   header                      N bytes of UTF-8 JSON, space padded so the
//                               payload starts on a 64-byte file offset
//   payload                     f32 tensors, each at a 64-byte aligned
//                               offset relative to the payload start
//   CRC-32 of the payload       u32
//
// The header is {"format_version":1,"metadata":{...},"tensors":{name:
// {"dtype":"f32","shape":[...],"byte_offset":k}}}.
inline constexpr char kContainerMagic[4] = {'F', '4', 'R', '1'};
inline constexpr int kContainerVersion = 1;
inline constexpr std::size_t kContainerAlignment = 64;

struct TensorEntry {
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

class Container {
 public:
  // JSON text of an object; kept as text so this header stays free of the
  // JSON library.
  std::string metadata = "{}";

  void put(const std::string& name, std::vector<std::int64_t> shape, std::vector<float> data);
  bool has(const std::string& name) const { return tensors_.count(name) != 0; }
  // Errors: CorruptFile naming the missing tensor.
  const TensorEntry& at(const std::string& name) const;
  const std::map<std::string, TensorEntry>& tensors() const noexcept { return tensors_; }

 private:
  std::map<std::string, TensorEntry> tensors_;
};

std::vector<std::uint8_t> encode(const Container& container);
// Errors: CorruptFile.
Container decode(std::span<const std::uint8_t> bytes);

// Writes to a temporary sibling then renames. Errors: IoError.
void write_container(const std::filesystem::path& path, const Container& container);
// Errors: IoError, CorruptFile.
Container read_container(const std::filesystem::path& path);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

// Tensor conversions. Maps are stored as (H, W, 3), (H, W, 2) or (H, W);
// masks as 0/1 floats; transforms as 3x4 row-major [R | t].
void put_map(Container& c, const std::string& name, const Tensor3& map);
void put_map(Container& c, const std::string& name, const PixelMap& map);
void put_map(Container& c, const std::string& name, const Tensor2& map);
void put_mask(Container& c, const std::string& name, const Mask& mask);
void put_transform(Container& c, const std::string& name, const RigidTransform& t);

Tensor3 get_points(const Container& c, const std::string& name);
PixelMap get_pixels(const Container& c, const std::string& name);
Tensor2 get_scalar_map(const Container& c, const std::string& name);
Mask get_mask(const Container& c, const std::string& name);
// Rotation is re-orthonormalized (nearest rotation) after the f32 round trip.
RigidTransform get_transform(const Container& c, const std::string& name);

// Track sets: "tracks" (N, H, W, 3), "track_valid" (N, H, W), "poses"
// (N, 3, 4) and optionally "dynamic_mask" (H, W).
void put_tracks(Container& c, const TrackSet& tracks);
TrackSet get_tracks(const Container& c);

}  // namespace flowgeom
