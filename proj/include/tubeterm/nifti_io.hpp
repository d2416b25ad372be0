#pragma once

// Volume files.
//
// NIfTI-1 subset: single-file ".nii" (magic "n+1"), uncompressed, 3D, datatype
// uint8 (2) or float32 (16). Files of either byte order are read; files are
// written in native order with vox_offset 352, scl_slope 1, scl_inter 0 and
// spacing in pixdim[1..3] (mm, stored as float32). The qform/sform block and
// qfac are carried through VolumeHeader verbatim and never interpreted.
//
// Raw sidecar: "<stem>.rawvol" holds the voxels in linear order, native byte
// order; "<stem>.json" holds {"shape": [nx, ny, nz], "spacing_mm": [sx, sy,
// sz], "dtype": "uint8" | "float32"}.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <nlohmann/json.hpp>
#include <string>
#include <variant>
#include <vector>

#include "tubeterm/distraction.hpp"
#include "tubeterm/grid.hpp"

namespace tubeterm {

enum class DataType : std::int16_t { uint8 = 2, float32 = 16 };

struct VolumeHeader {
  static constexpr std::size_t kHeaderSize = 348;
  static constexpr std::size_t kVoxOffset = 352;
  // byte range of the orientation fields (qform_code .. srow_z)
  static constexpr std::size_t kOrientationBegin = 252;
  static constexpr std::size_t kOrientationEnd = 328;

  Shape shape;
  Spacing spacing;
  DataType datatype = DataType::uint8;
  float slope = 1.0f;
  float intercept = 0.0f;
  float qfac = 1.0f;  ///< pixdim[0]
  std::array<std::uint8_t, kOrientationEnd - kOrientationBegin> orientation{};
  bool has_orientation = false;  ///< orientation block came from a file
};

/// Voxel payload as stored: uint8 volumes keep their raw codes, float32
/// volumes have slope/intercept applied.
struct Volume {
  VolumeHeader header;
  std::variant<Grid<std::uint8_t>, ScalarField> data;

  bool is_uint8() const { return std::holds_alternative<Grid<std::uint8_t>>(data); }
};

namespace detail {

template <class T>
T byteswap_value(T v) {
  std::array<std::uint8_t, sizeof(T)> b;
  std::memcpy(b.data(), &v, sizeof(T));
  std::reverse(b.begin(), b.end());
  std::memcpy(&v, b.data(), sizeof(T));
  return v;
}

class HeaderReader {
public:
  HeaderReader(const std::uint8_t* bytes, bool swap) : bytes_(bytes), swap_(swap) {}

  template <class T>
  T get(std::size_t offset) const {
    T v;
    std::memcpy(&v, bytes_ + offset, sizeof(T));
    return swap_ ? byteswap_value(v) : v;
  }

private:
  const std::uint8_t* bytes_;
  bool swap_;
};

template <class T>
void put(std::vector<std::uint8_t>& buf, std::size_t offset, T v) {
  std::memcpy(buf.data() + offset, &v, sizeof(T));
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::size_t bytes_per_voxel(DataType t) { return t == DataType::uint8 ? 1 : 4; }

inline std::vector<std::uint8_t> encode_header(const VolumeHeader& h) {
  if (!h.shape.valid()) throw ContractError("write_volume: shape components must be >= 1");
  if (!h.spacing.valid()) throw ContractError("write_volume: invalid spacing");
  for (int a = 0; a < 3; ++a)
    if (h.shape[a] > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max()))
      throw ContractError("write_volume: dimension exceeds NIfTI-1 int16 range");

  std::vector<std::uint8_t> buf(VolumeHeader::kVoxOffset, 0);
  put<std::int32_t>(buf, 0, 348);
  buf[38] = 'r';
  const std::array<std::int16_t, 8> dim = {3,
                                           static_cast<std::int16_t>(h.shape.nx),
                                           static_cast<std::int16_t>(h.shape.ny),
                                           static_cast<std::int16_t>(h.shape.nz),
                                           1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) put<std::int16_t>(buf, 40 + 2 * i, dim[i]);
  put<std::int16_t>(buf, 70, static_cast<std::int16_t>(h.datatype));
  put<std::int16_t>(buf, 72, static_cast<std::int16_t>(8 * bytes_per_voxel(h.datatype)));
  const std::array<float, 8> pixdim = {h.qfac,
                                       static_cast<float>(h.spacing.sx),
                                       static_cast<float>(h.spacing.sy),
                                       static_cast<float>(h.spacing.sz),
                                       0, 0, 0, 0};
  for (int i = 0; i < 8; ++i) put<float>(buf, 76 + 4 * i, pixdim[i]);
  put<float>(buf, 108, static_cast<float>(VolumeHeader::kVoxOffset));
  put<float>(buf, 112, 1.0f);
  put<float>(buf, 116, 0.0f);
  buf[123] = 2;  // xyzt_units: mm
  const char descrip[] = "tubeterm";
  std::memcpy(buf.data() + 148, descrip, sizeof(descrip) - 1);
  if (h.has_orientation) {
    std::copy(h.orientation.begin(), h.orientation.end(),
              buf.begin() + VolumeHeader::kOrientationBegin);
  } else {
    put<std::int16_t>(buf, 252, 1);  // qform_code scanner, identity rotation
  }
  std::memcpy(buf.data() + 344, "n+1\0", 4);
  return buf;
}

}  // namespace detail

inline Volume read_volume(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() < VolumeHeader::kHeaderSize)
    throw FormatError("truncated", "file shorter than the 348-byte header: " + path.string());

  std::int32_t sizeof_hdr;
  std::memcpy(&sizeof_hdr, bytes.data(), 4);
  bool swap = false;
  if (sizeof_hdr != 348) {
    if (detail::byteswap_value(sizeof_hdr) != 348)
      throw FormatError("sizeof_hdr", "expected 348, got " + std::to_string(sizeof_hdr));
    swap = true;
  }
  if (std::memcmp(bytes.data() + 344, "n+1\0", 4) != 0)
    throw FormatError("magic", "expected single-file \"n+1\"");

  const detail::HeaderReader hr(bytes.data(), swap);
  VolumeHeader h;
  const auto ndim = hr.get<std::int16_t>(40);
  if (ndim != 3) throw FormatError("dim", "expected dim[0] == 3, got " + std::to_string(ndim));
  std::array<std::int16_t, 3> dims{};
  for (int a = 0; a < 3; ++a) {
    dims[a] = hr.get<std::int16_t>(42 + 2 * a);
    if (dims[a] < 1) throw FormatError("dim", "dimension " + std::to_string(a + 1) + " < 1");
  }
  h.shape = {static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]),
             static_cast<std::size_t>(dims[2])};

  const auto datatype = hr.get<std::int16_t>(70);
  if (datatype != static_cast<std::int16_t>(DataType::uint8) &&
      datatype != static_cast<std::int16_t>(DataType::float32))
    throw FormatError("datatype", "unsupported datatype code " + std::to_string(datatype));
  h.datatype = static_cast<DataType>(datatype);
  const auto bitpix = hr.get<std::int16_t>(72);
  if (bitpix != static_cast<std::int16_t>(8 * detail::bytes_per_voxel(h.datatype)))
    throw FormatError("bitpix", "inconsistent with datatype");

  h.qfac = hr.get<float>(76);
  const float sx = hr.get<float>(80), sy = hr.get<float>(84), sz = hr.get<float>(88);
  h.spacing = {sx, sy, sz};
  if (!h.spacing.valid()) throw FormatError("pixdim", "spacing must be finite and > 0");

  const float vox_offset = hr.get<float>(108);
  if (!(vox_offset >= static_cast<float>(VolumeHeader::kVoxOffset)) ||
      vox_offset != std::floor(vox_offset))
    throw FormatError("vox_offset", "must be an integer >= 352");

  h.slope = hr.get<float>(112);
  h.intercept = hr.get<float>(116);
  if (h.slope == 0.0f || !std::isfinite(h.slope) || !std::isfinite(h.intercept)) {
    h.slope = 1.0f;  // NIfTI: slope 0 means no scaling
    h.intercept = 0.0f;
  }
  std::copy(bytes.begin() + VolumeHeader::kOrientationBegin,
            bytes.begin() + VolumeHeader::kOrientationEnd, h.orientation.begin());
  if (swap) {
    // keep the stored block in native order so a rewrite stays consistent
    const std::size_t b = VolumeHeader::kOrientationBegin;
    auto at = [&](std::size_t off) { return off - b; };
    for (std::size_t off : {252, 254}) {
      const auto v = hr.get<std::int16_t>(off);
      std::memcpy(h.orientation.data() + at(off), &v, 2);
    }
    for (std::size_t off = 256; off < VolumeHeader::kOrientationEnd; off += 4) {
      const auto v = hr.get<float>(off);
      std::memcpy(h.orientation.data() + at(off), &v, 4);
    }
  }
  h.has_orientation = true;

  const std::size_t n = h.shape.voxel_count();
  const std::size_t offset = static_cast<std::size_t>(vox_offset);
  const std::size_t need = n * detail::bytes_per_voxel(h.datatype);
  if (bytes.size() < offset || bytes.size() - offset < need)
    throw FormatError("truncated", "payload shorter than " + std::to_string(need) + " bytes");

  const std::uint8_t* payload = bytes.data() + offset;
  Volume vol{h, Grid<std::uint8_t>()};
  if (h.datatype == DataType::uint8) {
    std::vector<std::uint8_t> v(payload, payload + n);
    vol.data = Grid<std::uint8_t>(h.shape, h.spacing, std::move(v));
  } else {
    std::vector<float> v(n);
    std::memcpy(v.data(), payload, need);
    const bool scaled = h.slope != 1.0f || h.intercept != 0.0f;
    for (auto& x : v) {
      if (swap) x = detail::byteswap_value(x);
      if (scaled) x = x * h.slope + h.intercept;
      if (!std::isfinite(x)) throw FormatError("values", "non-finite float voxel");
    }
    vol.data = ScalarField(h.shape, h.spacing, std::move(v));
  }
  return vol;
}

/// uint8 volume with codes in {0, 1}, as a mask.
inline BinaryGrid as_mask(const Volume& vol) {
  if (!vol.is_uint8()) throw FormatError("datatype", "mask volumes must be uint8");
  const auto& g = std::get<Grid<std::uint8_t>>(vol.data);
  for (auto v : g.values())
    if (v > 1) throw FormatError("values", "mask voxels must be 0 or 1");
  return g;
}

/// Any volume as a real-valued field (uint8 codes are scaled like floats).
inline ScalarField as_field(const Volume& vol) {
  if (!vol.is_uint8()) return std::get<ScalarField>(vol.data);
  const auto& g = std::get<Grid<std::uint8_t>>(vol.data);
  ScalarField out(g.shape(), g.spacing());
  for (std::size_t i = 0; i < g.size(); ++i)
    out[i] = static_cast<float>(g[i]) * vol.header.slope + vol.header.intercept;
  return out;
}

/// uint8 volume with codes in {0, 1, 2}, as a distraction map.
inline DistractionMap as_distraction(const Volume& vol) {
  if (!vol.is_uint8()) throw FormatError("datatype", "distraction maps must be uint8");
  const auto& g = std::get<Grid<std::uint8_t>>(vol.data);
  DistractionMap out(g.shape(), g.spacing());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] > 2) throw FormatError("values", "distraction codes must be 0, 1 or 2");
    out[i] = static_cast<Distraction>(g[i]);
  }
  return out;
}

inline BinaryGrid read_mask(const std::filesystem::path& p) { return as_mask(read_volume(p)); }
inline ScalarField read_field(const std::filesystem::path& p) { return as_field(read_volume(p)); }

namespace detail {

inline VolumeHeader header_for(const Shape& s, const Spacing& sp, DataType t,
                               const VolumeHeader* tmpl) {
  VolumeHeader h;
  if (tmpl) {
    h.qfac = tmpl->qfac;
    h.orientation = tmpl->orientation;
    h.has_orientation = tmpl->has_orientation;
  }
  h.shape = s;
  h.spacing = sp;
  h.datatype = t;
  return h;
}

template <class T>
void write_payload(const std::filesystem::path& path, const VolumeHeader& h,
                   std::span<const T> values) {
  auto bytes = encode_header(h);
  const std::size_t off = bytes.size();
  bytes.resize(off + values.size_bytes());
  std::memcpy(bytes.data() + off, values.data(), values.size_bytes());
  write_file(path, bytes);
}

}  // namespace detail

/// Writes a mask as uint8. `tmpl`, when given, supplies the orientation block.
inline void write_volume(const std::filesystem::path& path, const BinaryGrid& mask,
                         const VolumeHeader* tmpl = nullptr) {
  const auto h = detail::header_for(mask.shape(), mask.spacing(), DataType::uint8, tmpl);
  detail::write_payload(path, h, mask.values());
}

inline void write_volume(const std::filesystem::path& path, const ScalarField& field,
                         const VolumeHeader* tmpl = nullptr) {
  const auto h = detail::header_for(field.shape(), field.spacing(), DataType::float32, tmpl);
  detail::write_payload(path, h, field.values());
}

/// Distraction maps are uint8 volumes coded 0 none, 1 false positive, 2 false negative.
inline void write_volume(const std::filesystem::path& path, const DistractionMap& dm,
                         const VolumeHeader* tmpl = nullptr) {
  std::vector<std::uint8_t> codes(dm.size());
  for (std::size_t i = 0; i < dm.size(); ++i) codes[i] = static_cast<std::uint8_t>(dm[i]);
  const auto h = detail::header_for(dm.shape(), dm.spacing(), DataType::uint8, tmpl);
  detail::write_payload(path, h, std::span<const std::uint8_t>(codes));
}

// ---------------------------------------------------------------------------
// raw + JSON sidecar

namespace detail {

inline std::filesystem::path with_suffix(std::filesystem::path stem, const char* suffix) {
  stem += suffix;
  return stem;
}

template <class T>
void write_raw_impl(const std::filesystem::path& stem, const Grid<T>& g, const char* dtype) {
  const nlohmann::json meta = {
      {"shape", {g.shape().nx, g.shape().ny, g.shape().nz}},
      {"spacing_mm", {g.spacing().sx, g.spacing().sy, g.spacing().sz}},
      {"dtype", dtype},
  };
  std::vector<std::uint8_t> bytes(g.values().size_bytes());
  std::memcpy(bytes.data(), g.values().data(), bytes.size());
  write_file(with_suffix(stem, ".rawvol"), bytes);
  const std::string text = meta.dump(2) + "\n";
  write_file(with_suffix(stem, ".json"), std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace detail

inline void write_raw(const std::filesystem::path& stem, const BinaryGrid& g) {
  detail::write_raw_impl(stem, g, "uint8");
}
inline void write_raw(const std::filesystem::path& stem, const ScalarField& g) {
  detail::write_raw_impl(stem, g, "float32");
}

inline Volume read_raw(const std::filesystem::path& stem) {
  const auto meta_bytes = detail::read_file(detail::with_suffix(stem, ".json"));
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("json", e.what());
  }
  VolumeHeader h;
  try {
    const auto shape = meta.at("shape").get<std::vector<std::int64_t>>();
    const auto spacing = meta.at("spacing_mm").get<std::vector<double>>();
    const auto dtype = meta.at("dtype").get<std::string>();
    if (shape.size() != 3) throw FormatError("shape", "expected 3 components");
    if (spacing.size() != 3) throw FormatError("spacing_mm", "expected 3 components");
    for (auto v : shape)
      if (v < 1) throw FormatError("shape", "components must be >= 1");
    h.shape = {static_cast<std::size_t>(shape[0]), static_cast<std::size_t>(shape[1]),
               static_cast<std::size_t>(shape[2])};
    h.spacing = {spacing[0], spacing[1], spacing[2]};
    if (!h.spacing.valid()) throw FormatError("spacing_mm", "must be finite and > 0");
    if (dtype == "uint8")
      h.datatype = DataType::uint8;
    else if (dtype == "float32")
      h.datatype = DataType::float32;
    else
      throw FormatError("dtype", "unsupported dtype " + dtype);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("json", e.what());
  }

  const auto bytes = detail::read_file(detail::with_suffix(stem, ".rawvol"));
  const std::size_t n = h.shape.voxel_count();
  const std::size_t need = n * detail::bytes_per_voxel(h.datatype);
  if (bytes.size() < need) throw FormatError("truncated", "raw payload too short");
  Volume vol{h, Grid<std::uint8_t>()};
  if (h.datatype == DataType::uint8) {
    vol.data = Grid<std::uint8_t>(h.shape, h.spacing,
                                  std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + n));
  } else {
    std::vector<float> v(n);
    std::memcpy(v.data(), bytes.data(), need);
    vol.data = ScalarField(h.shape, h.spacing, std::move(v));
  }
  return vol;
}

}  // namespace tubeterm
