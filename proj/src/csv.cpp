#include "parahom/csv.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace parahom::csv {

std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string Table::render() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out.push_back(',');
      out += cells[i];
    }
    out.push_back('\n');
  };
  line(header);
  for (const auto& r : rows) {
    if (r.size() != header.size()) throw std::logic_error("csv: row width differs from header");
    line(r);
  }
  return out;
}

std::string green_header(int d) {
  std::string h;
  for (int j = 1; j <= d; ++j) h += "x" + std::to_string(j) + ",";
  return h + "t,mean,stderr,N,seed";
}

Table green_table(const GreenEstimate& est, std::optional<int> radius) {
  Table t;
  const int d = est.box.dim();
  for (int j = 1; j <= d; ++j) t.header.push_back("x" + std::to_string(j));
  for (const char* h : {"t", "mean", "stderr", "N", "seed"}) t.header.emplace_back(h);
  std::vector<int> c(static_cast<std::size_t>(d));
  for (std::size_t k = 0; k < est.times.size(); ++k) {
    const auto mean = est.mean_at(k);
    const auto sem = est.sem_at(k);
    for (std::size_t s = 0; s < est.box.size(); ++s) {
      est.box.centered_coords(s, c);
      bool keep = true;
      if (radius)
        for (int v : c) keep = keep && std::abs(v) <= *radius;
      if (!keep) continue;
      std::vector<std::string> row;
      for (int v : c) row.push_back(std::to_string(v));
      row.push_back(num(est.times[k]));
      row.push_back(num(mean[s]));
      row.push_back(num(sem[s]));
      row.push_back(std::to_string(est.N));
      row.push_back(std::to_string(est.seed));
      t.add(std::move(row));
    }
  }
  return t;
}

std::string decay_header() { return "C,gamma,alpha,band_lo,band_hi,npoints,verdict"; }

Table decay_table(std::span<const DecayFit> fits) {
  Table t;
  t.header = {"C", "gamma", "alpha", "band_lo", "band_hi", "npoints", "verdict"};
  for (const auto& f : fits)
    t.add({num(f.C), num(f.gamma), num(f.alpha), num(f.band_lo), num(f.band_hi), std::to_string(f.npoints),
           to_string(f.verdict)});
  return t;
}

Emitted emit_text(const std::string& content, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  os.close();
  if (!os) throw std::runtime_error("write failed: " + path.string());
  return {path, sha256_hex(content), content.size()};
}

Emitted emit(const Table& table, const std::filesystem::path& path) { return emit_text(table.render(), path); }

}  // namespace parahom::csv
