#include "flowgeom/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

#include <Eigen/LU>
#include <Eigen/SVD>
#include <zlib.h>

#include "json.hpp"

namespace flowgeom {

using json = nlohmann::json;

namespace {

static_assert(sizeof(float) == 4);

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorCode::CorruptFile, what); }

std::size_t align_up(std::size_t n) {
  return (n + kContainerAlignment - 1) / kContainerAlignment * kContainerAlignment;
}

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T read_le(const std::uint8_t* p) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::int64_t element_count(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d <= 0) return -1;
    if (n > (std::int64_t{1} << 40) / d) return -1;
    n *= d;
  }
  return n;
}

}  // namespace

void Container::put(const std::string& name, std::vector<std::int64_t> shape, std::vector<float> data) {
  if (element_count(shape) != static_cast<std::int64_t>(data.size())) {
    throw Error(ErrorCode::ShapeMismatch, "tensor '" + name + "' shape does not match its data");
  }
  tensors_[name] = TensorEntry{std::move(shape), std::move(data)};
}

const TensorEntry& Container::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) corrupt("missing tensor '" + name + "'");
  return it->second;
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = ::crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode(const Container& container) {
  json header;
  header["format_version"] = kContainerVersion;
  json metadata = json::parse(container.metadata, nullptr, false);
  if (metadata.is_discarded() || !metadata.is_object()) {
    throw Error(ErrorCode::ConfigInvalid, "container metadata must be a JSON object");
  }
  header["metadata"] = std::move(metadata);
  header["tensors"] = json::object();

  std::size_t offset = 0;
  for (const auto& [name, entry] : container.tensors()) {
    header["tensors"][name] = {{"dtype", "f32"}, {"shape", entry.shape}, {"byte_offset", offset}};
    offset = align_up(offset + entry.data.size() * sizeof(float));
  }
  const std::size_t payload_size = offset;

  std::string text = header.dump();
  const std::size_t prefix = sizeof(kContainerMagic) + sizeof(std::uint64_t);
  text.append(align_up(prefix + text.size()) - prefix - text.size(), ' ');

  std::vector<std::uint8_t> out;
  out.reserve(prefix + text.size() + payload_size + 4);
  out.insert(out.end(), kContainerMagic, kContainerMagic + 4);
  append_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());

  const std::size_t payload_start = out.size();
  out.resize(payload_start + payload_size, 0);
  offset = 0;
  for (const auto& [name, entry] : container.tensors()) {
    std::uint8_t* dst = out.data() + payload_start + offset;
    for (float v : entry.data) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      std::memcpy(dst, &bits, 4);
      dst += 4;
    }
    offset = align_up(offset + entry.data.size() * sizeof(float));
  }
  append_le<std::uint32_t>(out, crc32(std::span(out.data() + payload_start, payload_size)));
  return out;
}

Container decode(std::span<const std::uint8_t> bytes) {
  const std::size_t prefix = sizeof(kContainerMagic) + sizeof(std::uint64_t);
  if (bytes.size() < prefix + 4) corrupt("file too short");
  if (std::memcmp(bytes.data(), kContainerMagic, 4) != 0) corrupt("bad magic");
  const auto header_len = read_le<std::uint64_t>(bytes.data() + 4);
  if (header_len > bytes.size() - prefix - 4) corrupt("header length out of bounds");
  const std::size_t payload_start = prefix + static_cast<std::size_t>(header_len);
  const std::size_t payload_size = bytes.size() - payload_start - 4;
  const auto payload = bytes.subspan(payload_start, payload_size);

  const auto stored_crc = read_le<std::uint32_t>(bytes.data() + bytes.size() - 4);
  if (crc32(payload) != stored_crc) corrupt("payload CRC mismatch");

  const std::string text(reinterpret_cast<const char*>(bytes.data() + prefix), header_len);
  json header = json::parse(text, nullptr, false);
  if (header.is_discarded() || !header.is_object()) corrupt("header is not a JSON object");
  if (!header.contains("format_version") || header["format_version"] != kContainerVersion) {
    corrupt("unsupported format version");
  }
  if (!header.contains("tensors") || !header["tensors"].is_object()) corrupt("missing tensor table");

  Container out;
  if (header.contains("metadata")) {
    if (!header["metadata"].is_object()) corrupt("metadata is not an object");
    out.metadata = header["metadata"].dump();
  }

  struct Extent { std::size_t begin, end; std::string name; };
  std::vector<Extent> extents;
  for (const auto& [name, desc] : header["tensors"].items()) {
    if (!desc.is_object() || desc.value("dtype", "") != "f32" || !desc.contains("shape") ||
        !desc["shape"].is_array() || !desc.contains("byte_offset") ||
        !desc["byte_offset"].is_number_unsigned()) {
      corrupt("malformed descriptor for tensor '" + name + "'");
    }
    std::vector<std::int64_t> shape;
    for (const auto& d : desc["shape"]) {
      if (!d.is_number_integer()) corrupt("non-integer shape in tensor '" + name + "'");
      shape.push_back(d.get<std::int64_t>());
    }
    const std::int64_t n = element_count(shape);
    if (n < 0) corrupt("invalid shape for tensor '" + name + "'");
    const auto begin = desc["byte_offset"].get<std::uint64_t>();
    const std::size_t size = static_cast<std::size_t>(n) * sizeof(float);
    if (begin % kContainerAlignment != 0 || begin > payload_size || size > payload_size - begin) {
      corrupt("tensor '" + name + "' lies outside the payload");
    }
    extents.push_back({static_cast<std::size_t>(begin), static_cast<std::size_t>(begin) + size, name});

    std::vector<float> data(static_cast<std::size_t>(n));
    const std::uint8_t* src = payload.data() + begin;
    for (auto& v : data) {
      v = std::bit_cast<float>(read_le<std::uint32_t>(src));
      src += 4;
    }
    out.put(name, std::move(shape), std::move(data));
  }
  std::sort(extents.begin(), extents.end(), [](const Extent& a, const Extent& b) { return a.begin < b.begin; });
  for (std::size_t k = 1; k < extents.size(); ++k) {
    if (extents[k].begin < extents[k - 1].end) {
      corrupt("tensors '" + extents[k - 1].name + "' and '" + extents[k].name + "' overlap");
    }
  }
  return out;
}

void write_container(const std::filesystem::path& path, const Container& container) {
  const std::vector<std::uint8_t> bytes = encode(container);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error(ErrorCode::IoError, "write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot rename to " + path.string() + ": " + ec.message());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

// --- tensor conversions ---

namespace {

const TensorEntry& expect(const Container& c, const std::string& name, std::size_t rank,
                          std::int64_t last_dim = -1) {
  const TensorEntry& e = c.at(name);
  if (e.shape.size() != rank || (last_dim > 0 && e.shape.back() != last_dim)) {
    std::string got;
    for (auto d : e.shape) got += (got.empty() ? "" : ",") + std::to_string(d);
    throw Error(ErrorCode::ShapeMismatch, "tensor '" + name + "' has shape (" + got + ")");
  }
  return e;
}

int dim(std::int64_t d) {
  if (d > (1 << 24)) throw Error(ErrorCode::ShapeMismatch, "dimension too large");
  return static_cast<int>(d);
}

}  // namespace

void put_map(Container& c, const std::string& name, const Tensor3& map) {
  std::vector<float> data;
  data.reserve(map.size() * 3);
  for (const auto& p : map.values()) {
    for (int k = 0; k < 3; ++k) data.push_back(static_cast<float>(p(k)));
  }
  c.put(name, {map.rows(), map.cols(), 3}, std::move(data));
}

void put_map(Container& c, const std::string& name, const PixelMap& map) {
  std::vector<float> data;
  data.reserve(map.size() * 2);
  for (const auto& p : map.values()) {
    data.push_back(static_cast<float>(p.x()));
    data.push_back(static_cast<float>(p.y()));
  }
  c.put(name, {map.rows(), map.cols(), 2}, std::move(data));
}

void put_map(Container& c, const std::string& name, const Tensor2& map) {
  std::vector<float> data(map.values().begin(), map.values().end());
  c.put(name, {map.rows(), map.cols()}, std::move(data));
}

void put_mask(Container& c, const std::string& name, const Mask& mask) {
  std::vector<float> data;
  data.reserve(mask.size());
  for (auto v : mask.values()) data.push_back(v ? 1.0f : 0.0f);
  c.put(name, {mask.rows(), mask.cols()}, std::move(data));
}

void put_transform(Container& c, const std::string& name, const RigidTransform& t) {
  const Eigen::Matrix<double, 3, 4> m = t.matrix();
  std::vector<float> data;
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 4; ++k) data.push_back(static_cast<float>(m(r, k)));
  }
  c.put(name, {3, 4}, std::move(data));
}

Tensor3 get_points(const Container& c, const std::string& name) {
  const TensorEntry& e = expect(c, name, 3, 3);
  Tensor3 out(dim(e.shape[0]), dim(e.shape[1]));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = Eigen::Vector3d(e.data[3 * i], e.data[3 * i + 1], e.data[3 * i + 2]);
  }
  return out;
}

PixelMap get_pixels(const Container& c, const std::string& name) {
  const TensorEntry& e = expect(c, name, 3, 2);
  PixelMap out(dim(e.shape[0]), dim(e.shape[1]));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Eigen::Vector2d(e.data[2 * i], e.data[2 * i + 1]);
  return out;
}

Tensor2 get_scalar_map(const Container& c, const std::string& name) {
  const TensorEntry& e = expect(c, name, 2);
  Tensor2 out(dim(e.shape[0]), dim(e.shape[1]));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = e.data[i];
  return out;
}

Mask get_mask(const Container& c, const std::string& name) {
  const TensorEntry& e = expect(c, name, 2);
  Mask out(dim(e.shape[0]), dim(e.shape[1]));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = e.data[i] != 0.0f;
  return out;
}

namespace {

RigidTransform transform_from(const float* d) {
  Eigen::Matrix3d r;
  Eigen::Vector3d t;
  for (int row = 0; row < 3; ++row) {
    for (int k = 0; k < 3; ++k) r(row, k) = d[4 * row + k];
    t(row) = d[4 * row + 3];
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d nearest = svd.matrixU() * svd.matrixV().transpose();
  if (nearest.determinant() < 0.0) {
    throw Error(ErrorCode::CorruptFile, "stored rotation is a reflection");
  }
  return RigidTransform(nearest, t);
}

}  // namespace

RigidTransform get_transform(const Container& c, const std::string& name) {
  const TensorEntry& e = c.at(name);
  if (e.shape != std::vector<std::int64_t>{3, 4}) {
    throw Error(ErrorCode::ShapeMismatch, "tensor '" + name + "' is not 3x4");
  }
  return transform_from(e.data.data());
}

void put_tracks(Container& c, const TrackSet& tracks) {
  const std::int64_t n = static_cast<std::int64_t>(tracks.n_frames());
  const std::int64_t h = tracks.rows();
  const std::int64_t w = tracks.cols();
  std::vector<float> pts;
  std::vector<float> valid;
  std::vector<float> poses;
  for (std::size_t f = 0; f < tracks.n_frames(); ++f) {
    for (std::size_t i = 0; i < tracks.points[f].size(); ++i) {
      for (int k = 0; k < 3; ++k) pts.push_back(static_cast<float>(tracks.points[f][i](k)));
      valid.push_back(mask_at(tracks.valid[f], i) ? 1.0f : 0.0f);
    }
    const Eigen::Matrix<double, 3, 4> m = tracks.poses[f].matrix();
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 4; ++k) poses.push_back(static_cast<float>(m(r, k)));
    }
  }
  c.put("tracks", {n, h, w, 3}, std::move(pts));
  c.put("track_valid", {n, h, w}, std::move(valid));
  c.put("poses", {n, 3, 4}, std::move(poses));
  if (!tracks.dynamic_mask.empty()) put_mask(c, "dynamic_mask", tracks.dynamic_mask);
}

TrackSet get_tracks(const Container& c) {
  const TensorEntry& pts = expect(c, "tracks", 4, 3);
  const TensorEntry& valid = expect(c, "track_valid", 3);
  const TensorEntry& poses = expect(c, "poses", 3, 4);
  const int n = dim(pts.shape[0]);
  const int h = dim(pts.shape[1]);
  const int w = dim(pts.shape[2]);
  if (valid.shape != std::vector<std::int64_t>{n, h, w} || poses.shape != std::vector<std::int64_t>{n, 3, 4}) {
    throw Error(ErrorCode::ShapeMismatch, "track tensors disagree on frame count or grid size");
  }
  TrackSet out;
  const std::size_t per_frame = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  for (int f = 0; f < n; ++f) {
    Tensor3 frame(h, w);
    Mask m(h, w);
    for (std::size_t i = 0; i < per_frame; ++i) {
      const std::size_t base = static_cast<std::size_t>(f) * per_frame + i;
      frame[i] = Eigen::Vector3d(pts.data[3 * base], pts.data[3 * base + 1], pts.data[3 * base + 2]);
      m[i] = valid.data[base] != 0.0f;
    }
    out.points.push_back(std::move(frame));
    out.valid.push_back(std::move(m));
    out.poses.push_back(transform_from(poses.data.data() + 12 * static_cast<std::size_t>(f)));
  }
  if (c.has("dynamic_mask")) {
    out.dynamic_mask = get_mask(c, "dynamic_mask");
    if (out.dynamic_mask.rows() != h || out.dynamic_mask.cols() != w) {
      throw Error(ErrorCode::ShapeMismatch, "dynamic mask does not match the track grid");
    }
  }
  return out;
}

}  // namespace flowgeom
