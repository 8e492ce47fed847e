#include "vsynth/io/nifti.hpp"

#include <fmt/format.h>
#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "vsynth/errors.hpp"

namespace vsynth::io {

static_assert(std::endian::native == std::endian::little, "voxel payloads are copied as little-endian");

namespace {

// Header field offsets.
constexpr std::size_t kOffSizeofHdr = 0;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffSrowX = 280;
constexpr std::size_t kOffMagic = 344;

constexpr char kUnitsMm = 2;

template <class T>
void put(std::vector<std::uint8_t>& buf, std::size_t off, T v) {
  std::memcpy(buf.data() + off, &v, sizeof(T));
}

template <class T>
T get(const std::vector<std::uint8_t>& buf, std::size_t off) {
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  return v;
}

bool known_datatype(std::int16_t code) {
  switch (static_cast<DataType>(code)) {
    case DataType::UInt8:
    case DataType::Int16:
    case DataType::Int32:
    case DataType::Float32:
    case DataType::Float64:
    case DataType::UInt16:
      return true;
  }
  return false;
}

template <class T>
std::vector<std::uint8_t> encode_volume(const Volume<T>& v, DataType dt) {
  const std::size_t bpv = sizeof(T);
  std::vector<std::uint8_t> buf(kVoxOffset + v.size() * bpv, 0);
  put<std::int32_t>(buf, kOffSizeofHdr, static_cast<std::int32_t>(kHeaderSize));
  std::array<std::int16_t, 8> dim{3, 1, 1, 1, 1, 1, 1, 1};
  for (int d = 0; d < 3; ++d) {
    if (v.shape[d] > static_cast<std::size_t>(std::numeric_limits<std::int16_t>::max())) {
      throw DimensionError("extent " + std::to_string(v.shape[d]) + " exceeds the NIfTI-1 limit");
    }
    dim[1 + d] = static_cast<std::int16_t>(v.shape[d]);
  }
  for (int i = 0; i < 8; ++i) put<std::int16_t>(buf, kOffDim + 2 * i, dim[i]);
  put<std::int16_t>(buf, kOffDatatype, static_cast<std::int16_t>(dt));
  put<std::int16_t>(buf, kOffBitpix, static_cast<std::int16_t>(8 * bpv));
  const auto mm = static_cast<float>(v.voxel_size_um / 1000.0);
  const std::array<float, 8> pixdim{1.0f, mm, mm, mm, 1.0f, 1.0f, 1.0f, 1.0f};
  for (int i = 0; i < 8; ++i) put<float>(buf, kOffPixdim + 4 * i, pixdim[i]);
  put<float>(buf, kOffVoxOffset, static_cast<float>(kVoxOffset));
  put<float>(buf, kOffSclSlope, 1.0f);
  put<float>(buf, kOffSclInter, 0.0f);
  buf[kOffXyztUnits] = kUnitsMm;
  const char descrip[] = "vsynth";
  std::memcpy(buf.data() + kOffDescrip, descrip, sizeof(descrip) - 1);
  put<std::int16_t>(buf, kOffQformCode, 0);
  put<std::int16_t>(buf, kOffSformCode, 1);
  const auto aff = diagonal_affine(v.voxel_size_um);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) put<float>(buf, kOffSrowX + 16 * r + 4 * c, static_cast<float>(aff[4 * r + c]));
  }
  std::memcpy(buf.data() + kOffMagic, "n+1\0", 4);
  // Bytes 348..351: empty extension flag.
  if (!v.voxels.empty()) std::memcpy(buf.data() + kVoxOffset, v.voxels.data(), v.size() * bpv);
  return buf;
}

template <class T>
std::vector<std::uint8_t> raw_payload(const Volume<T>& v) {
  std::vector<std::uint8_t> out(v.size() * sizeof(T));
  if (!out.empty()) std::memcpy(out.data(), v.voxels.data(), out.size());
  return out;
}

template <class Src, class Fn>
void for_each_value(const std::vector<std::uint8_t>& payload, std::size_t n, Fn&& fn) {
  for (std::size_t i = 0; i < n; ++i) {
    Src s;
    std::memcpy(&s, payload.data() + i * sizeof(Src), sizeof(Src));
    fn(i, s);
  }
}

template <class Fn>
void dispatch(const Decoded& d, Fn&& fn) {
  const std::size_t n = voxel_count(d.header.shape);
  switch (d.header.datatype) {
    case DataType::UInt8:
      for_each_value<std::uint8_t>(d.payload, n, fn);
      break;
    case DataType::Int16:
      for_each_value<std::int16_t>(d.payload, n, fn);
      break;
    case DataType::UInt16:
      for_each_value<std::uint16_t>(d.payload, n, fn);
      break;
    case DataType::Int32:
      for_each_value<std::int32_t>(d.payload, n, fn);
      break;
    case DataType::Float32:
      for_each_value<float>(d.payload, n, fn);
      break;
    case DataType::Float64:
      for_each_value<double>(d.payload, n, fn);
      break;
  }
}

}  // namespace

std::size_t bytes_per_voxel(DataType t) {
  switch (t) {
    case DataType::UInt8:
      return 1;
    case DataType::Int16:
    case DataType::UInt16:
      return 2;
    case DataType::Int32:
    case DataType::Float32:
      return 4;
    case DataType::Float64:
      return 8;
  }
  return 0;
}

ValueKind VolumeHeader::kind() const {
  return (datatype == DataType::Float32 || datatype == DataType::Float64) ? ValueKind::Intensity
                                                                          : ValueKind::Labels;
}

std::array<double, 16> diagonal_affine(double voxel_size_um) {
  const double mm = voxel_size_um / 1000.0;
  return {mm, 0, 0, 0, 0, mm, 0, 0, 0, 0, mm, 0, 0, 0, 0, 1};
}

std::vector<std::uint8_t> encode(const LabelVolume& v) { return encode_volume(v, DataType::Int32); }
std::vector<std::uint8_t> encode(const IntensityVolume& v) { return encode_volume(v, DataType::Float32); }

std::vector<std::uint8_t> payload_bytes(const LabelVolume& v) { return raw_payload(v); }
std::vector<std::uint8_t> payload_bytes(const IntensityVolume& v) { return raw_payload(v); }

Decoded decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderSize) {
    throw LengthError("file holds " + std::to_string(bytes.size()) + " bytes, shorter than the 348-byte header");
  }
  const auto sizeof_hdr = get<std::int32_t>(bytes, kOffSizeofHdr);
  if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
    const auto swapped = static_cast<std::int32_t>(__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr)));
    if (swapped == static_cast<std::int32_t>(kHeaderSize)) {
      throw FormatError("big-endian NIfTI files are not supported", kOffSizeofHdr);
    }
    throw FormatError("sizeof_hdr is " + std::to_string(sizeof_hdr) + ", expected 348", kOffSizeofHdr);
  }
  if (std::memcmp(bytes.data() + kOffMagic, "n+1\0", 4) != 0) {
    throw FormatError("bad magic; only single-file NIfTI-1 (n+1) is supported", kOffMagic);
  }
  const auto ndim = get<std::int16_t>(bytes, kOffDim);
  if (ndim != 3) throw FormatError("dim[0] is " + std::to_string(ndim) + "; only 3D volumes are supported", kOffDim);

  Decoded out;
  for (int d = 0; d < 3; ++d) {
    const auto e = get<std::int16_t>(bytes, kOffDim + 2 * (1 + d));
    if (e <= 0) throw FormatError("non-positive extent in dim[" + std::to_string(d + 1) + "]", kOffDim + 2 * (1 + d));
    out.header.shape[d] = static_cast<std::size_t>(e);
  }
  const auto dt = get<std::int16_t>(bytes, kOffDatatype);
  if (!known_datatype(dt)) throw FormatError("unsupported datatype " + std::to_string(dt), kOffDatatype);
  out.header.datatype = static_cast<DataType>(dt);
  const auto bitpix = get<std::int16_t>(bytes, kOffBitpix);
  if (static_cast<std::size_t>(bitpix) != 8 * bytes_per_voxel(out.header.datatype)) {
    throw FormatError("bitpix " + std::to_string(bitpix) + " does not match datatype", kOffBitpix);
  }
  const auto vox_offset = get<float>(bytes, kOffVoxOffset);
  if (!(vox_offset >= static_cast<float>(kVoxOffset)) || vox_offset != std::floor(vox_offset)) {
    throw FormatError("vox_offset must be an integer >= 352", kOffVoxOffset);
  }

  double scale_um = 1000.0;  // mm, also the fallback for unknown units
  switch (bytes[kOffXyztUnits] & 0x07) {
    case 1:
      scale_um = 1e6;
      break;
    case 3:
      scale_um = 1.0;
      break;
    default:
      break;
  }
  const auto px = get<float>(bytes, kOffPixdim + 4);
  // pixdim is single precision; keep float-level significant digits so that
  // 20 um written as 0.02f mm reads back as exactly 20.
  out.header.voxel_size_um =
      px > 0 && std::isfinite(px) ? std::stod(fmt::format("{:.7g}", static_cast<double>(px) * scale_um)) : 20.0;
  out.header.scl_slope = get<float>(bytes, kOffSclSlope);
  out.header.scl_inter = get<float>(bytes, kOffSclInter);
  if (get<std::int16_t>(bytes, kOffSformCode) > 0) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) out.header.affine[4 * r + c] = get<float>(bytes, kOffSrowX + 16 * r + 4 * c);
    }
    out.header.affine[15] = 1.0;
  } else {
    out.header.affine = diagonal_affine(out.header.voxel_size_um);
  }

  const auto start = static_cast<std::size_t>(vox_offset);
  const std::size_t need = voxel_count(out.header.shape) * bytes_per_voxel(out.header.datatype);
  if (bytes.size() < start || bytes.size() - start < need) {
    throw LengthError("payload truncated: need " + std::to_string(need) + " bytes at offset " +
                      std::to_string(start) + ", file has " + std::to_string(bytes.size()));
  }
  out.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                     bytes.begin() + static_cast<std::ptrdiff_t>(start + need));
  return out;
}

bool is_gzip_path(const std::filesystem::path& path) { return path.extension() == ".gz"; }

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::uint8_t> gzip_compress(const std::vector<std::uint8_t>& bytes) {
  z_stream zs{};
  // windowBits 15 + 16 selects the gzip wrapper; zlib writes mtime 0, so
  // output depends only on the input.
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw IoError("deflateInit2 failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(bytes.size())) + 32);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw IoError("gzip compression failed");
  out.resize(produced);
  return out;
}

std::vector<std::uint8_t> gzip_decompress(const std::vector<std::uint8_t>& bytes) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw IoError("inflateInit2 failed");
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 20);
  zs.next_in = const_cast<Bytef*>(bytes.data());
  zs.avail_in = static_cast<uInt>(bytes.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      if (rc == Z_BUF_ERROR) throw LengthError("gzip stream truncated");
      throw FormatError("corrupt gzip stream", zs.total_in);
    }
    out.insert(out.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw LengthError("gzip stream truncated");
    }
  }
  inflateEnd(&zs);
  return out;
}

namespace {

template <class T>
void write_any(const std::filesystem::path& path, const Volume<T>& v) {
  std::vector<std::uint8_t> bytes = encode(v);
  if (is_gzip_path(path)) bytes = gzip_compress(bytes);
  write_file(path, bytes);
}

}  // namespace

void write_volume(const std::filesystem::path& path, const LabelVolume& v) { write_any(path, v); }
void write_volume(const std::filesystem::path& path, const IntensityVolume& v) { write_any(path, v); }

Decoded read_raw(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes = read_file(path);
  if (is_gzip_path(path)) bytes = gzip_decompress(bytes);
  return decode(bytes);
}

VolumeHeader read_header(const std::filesystem::path& path) { return read_raw(path).header; }

LabelVolume to_labels(const Decoded& d) {
  LabelVolume out(d.header.shape, d.header.voxel_size_um, 0);
  dispatch(d, [&](std::size_t i, auto v) {
    const auto x = static_cast<double>(v);
    if (x != std::floor(x) || x < std::numeric_limits<std::int32_t>::min() ||
        x > std::numeric_limits<std::int32_t>::max()) {
      throw FormatError("label volume holds non-integral value " + std::to_string(x),
                        kVoxOffset + i * bytes_per_voxel(d.header.datatype));
    }
    out.voxels[i] = static_cast<std::int32_t>(v);
  });
  return out;
}

IntensityVolume to_intensity(const Decoded& d) {
  IntensityVolume out(d.header.shape, d.header.voxel_size_um, 0.0f);
  const bool scaled = d.header.scl_slope != 0.0 && (d.header.scl_slope != 1.0 || d.header.scl_inter != 0.0);
  dispatch(d, [&](std::size_t i, auto v) {
    out.voxels[i] = scaled ? static_cast<float>(static_cast<double>(v) * d.header.scl_slope + d.header.scl_inter)
                           : static_cast<float>(v);
  });
  return out;
}

LabelVolume read_labels(const std::filesystem::path& path) { return to_labels(read_raw(path)); }
IntensityVolume read_intensity(const std::filesystem::path& path) { return to_intensity(read_raw(path)); }

}  // namespace vsynth::io
