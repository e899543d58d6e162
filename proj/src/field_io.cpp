#include "dsand/field_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dsand/error.hpp"

namespace dsand::io {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

double get_f64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_dsf1(const LatticeField& field) {
  std::vector<std::uint8_t> out{'D', 'S', 'F', '1'};
  out.reserve(12 + 8 * field.size());
  put_u32(out, static_cast<std::uint32_t>(field.shape().dim()));
  put_u32(out, static_cast<std::uint32_t>(field.shape().side()));
  for (double v : field.values()) put_f64(out, v);
  return out;
}

LatticeField decode_dsf1(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "DSF1", 4) != 0) {
    fail(ErrorCode::Format, "not a DSF1 field (bad magic)");
  }
  const auto d = get_u32(bytes.data() + 4);
  const auto n = get_u32(bytes.data() + 8);
  if (d < 1 || d > 16 || n < 2) fail(ErrorCode::Format, "DSF1 header has invalid d or n");
  double count = std::pow(static_cast<double>(n), static_cast<double>(d));
  if (count > 1e10) fail(ErrorCode::Format, "DSF1 field too large");
  const TorusShape shape(static_cast<int>(d), static_cast<int>(n));
  if (bytes.size() != 12 + 8 * shape.size()) {
    fail(ErrorCode::Format, "DSF1 payload length does not match n^d");
  }
  std::vector<double> values(shape.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = get_f64(bytes.data() + 12 + 8 * i);
  LatticeField field(shape, std::move(values));
  if (!field.all_finite()) fail(ErrorCode::Format, "DSF1 field contains non-finite values");
  return field;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) fail(ErrorCode::Io, "failed writing '" + path.string() + "'");
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_dsf1(const LatticeField& field, const std::filesystem::path& path) {
  write_bytes(path, encode_dsf1(field));
}

LatticeField read_dsf1(const std::filesystem::path& path) { return decode_dsf1(read_bytes(path)); }

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string field_csv(const LatticeField& field) {
  std::string out;
  std::vector<int> c(static_cast<std::size_t>(field.shape().dim()));
  for (std::size_t i = 0; i < field.size(); ++i) {
    field.shape().coord(i, c);
    for (int v : c) {
      out += std::to_string(v);
      out += ',';
    }
    out += format_double(field[i]);
    out += '\n';
  }
  return out;
}

void write_csv(const LatticeField& field, const std::filesystem::path& path) {
  write_text(path, field_csv(field));
}

std::vector<std::uint8_t> encode_pgm(int width, int height, const std::vector<std::uint8_t>& pixels) {
  require(width > 0 && height > 0 && pixels.size() == static_cast<std::size_t>(width) * height,
          "raster size mismatch");
  const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::vector<std::uint8_t> heatmap_pgm(const LatticeField& field) {
  if (field.shape().dim() != 2) {
    fail(ErrorCode::InvalidArgument,
         "heatmaps need a d = 2 field, got d = " + std::to_string(field.shape().dim()));
  }
  const int n = field.shape().side();
  const double lo = field.min();
  const double hi = field.max();
  std::vector<std::uint8_t> pixels(field.size(), 128);
  if (hi > lo) {
    for (std::size_t i = 0; i < field.size(); ++i) {
      const double t = (field[i] - lo) / (hi - lo);
      pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(255.0 * t), 0L, 255L));
    }
  }
  return encode_pgm(n, n, pixels);
}

void write_heatmap(const LatticeField& field, const std::filesystem::path& path) {
  write_bytes(path, heatmap_pgm(field));
}

}  // namespace dsand::io
