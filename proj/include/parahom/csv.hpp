#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "parahom/fit.hpp"
#include "parahom/parabolic.hpp"

namespace parahom::csv {

std::string sha256_hex(std::string_view data);
// Round-trippable decimal form.
std::string num(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
  std::string render() const;
};

// "x1..xd,t,mean,stderr,N,seed"; sites restricted to |x_i| <= radius when given.
std::string green_header(int d);
Table green_table(const GreenEstimate& est, std::optional<int> radius = std::nullopt);
// "C,gamma,alpha,band_lo,band_hi,npoints,verdict"
std::string decay_header();
Table decay_table(std::span<const DecayFit> fits);

struct Emitted {
  std::filesystem::path path;
  std::string sha256;
  std::size_t bytes = 0;
};

// Writes the rendered table; the checksum covers exactly the bytes written.
Emitted emit(const Table& table, const std::filesystem::path& path);
Emitted emit_text(const std::string& content, const std::filesystem::path& path);

}  // namespace parahom::csv
