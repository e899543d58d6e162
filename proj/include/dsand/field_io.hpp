#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dsand/lattice.hpp"

namespace dsand::io {

// DSF1 layout: "DSF1", u32 d, u32 n, n^d f64 values; all little-endian.
std::vector<std::uint8_t> encode_dsf1(const LatticeField& field);
LatticeField decode_dsf1(const std::vector<std::uint8_t>& bytes);

void write_dsf1(const LatticeField& field, const std::filesystem::path& path);
LatticeField read_dsf1(const std::filesystem::path& path);

/// One line per site: i1,...,id,value.
std::string field_csv(const LatticeField& field);
void write_csv(const LatticeField& field, const std::filesystem::path& path);

/// 8-bit binary PGM (P5) of a d = 2 field: min -> 0, max -> 255, constant
/// fields render uniform mid-gray. Rows follow the first coordinate.
std::vector<std::uint8_t> heatmap_pgm(const LatticeField& field);
void write_heatmap(const LatticeField& field, const std::filesystem::path& path);

/// PGM of an arbitrary width x height 8-bit raster.
std::vector<std::uint8_t> encode_pgm(int width, int height, const std::vector<std::uint8_t>& pixels);

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace dsand::io
