#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "parahom/csv.hpp"
#include "parahom/experiments.hpp"

using namespace parahom;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse_ok(const std::string& text) {
  std::vector<std::string> diags;
  auto cfg = parse_config(text, diags);
  REQUIRE(cfg.has_value());
  CHECK(diags.empty());
  return *cfg;
}

bool mentions(const std::vector<std::string>& diags, const std::string& needle) {
  for (const auto& d : diags)
    if (d.find(needle) != std::string::npos) return true;
  return false;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("parahom-unit-" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config parsing reports schema problems") {
  std::vector<std::string> diags;
  CHECK_FALSE(parse_config("{not json", diags).has_value());
  CHECK(mentions(diags, "not valid JSON"));
  diags.clear();
  CHECK_FALSE(parse_config(R"({"experiment":"heatkernel","colour":1})", diags).has_value());
  CHECK(mentions(diags, "colour"));
  diags.clear();
  CHECK_FALSE(parse_config(R"({"experiment":"heatkernel","schema_version":7})", diags).has_value());
  CHECK(mentions(diags, "schema_version"));
  diags.clear();
  CHECK_FALSE(parse_config(R"({"experiment":"rate","numerics":{"eps":"small"}})", diags).has_value());
  CHECK(mentions(diags, "eps"));
}

TEST_CASE("validation catches inadmissible settings") {
  auto unstable = parse_ok(R"({"experiment":"heatkernel","environment":{"d":3},"numerics":{"Lambda":0.1}})");
  CHECK(mentions(validate(unstable), "4 d Lambda"));
  auto empty_eps = parse_ok(R"({"experiment":"rate","numerics":{"eps":[]}})");
  CHECK(mentions(validate(empty_eps), "empty eps"));
  auto fractional = parse_ok(R"({"experiment":"rate","numerics":{"eps":[0.5,0.3],"times":[1]}})");
  CHECK(mentions(validate(fractional), "t/eps^2"));
  auto unknown = parse_ok(R"({"experiment":"teleport"})");
  CHECK(mentions(validate(unknown), "unknown experiment"));
  auto wrong_env = parse_ok(R"({"experiment":"langevin-check"})");
  CHECK(mentions(validate(wrong_env), "langevin-field"));
  auto late_fit = parse_ok(R"({"experiment":"green-compare","numerics":{"horizon":64,"fit_t_min":40}})");
  CHECK(mentions(validate(late_fit), "fit_t_min"));
  auto good = parse_ok(R"({"experiment":"identity-check","seed":3})");
  CHECK(validate(good).empty());
  CHECK(good.seed == 3);
  CHECK(good.env.seed == 3);
}

TEST_CASE("csv formatting and headers") {
  CHECK(csv::num(0.1) == "0.10000000000000001");
  CHECK(csv::num(2.0) == "2");
  CHECK(csv::green_header(2) == "x1,x2,t,mean,stderr,N,seed");
  CHECK(csv::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  csv::Table t{{"a", "b"}, {}};
  t.add({"1"});
  CHECK_THROWS(t.render());
}

TEST_CASE("runs are reproducible and write a manifest") {
  const auto dir = scratch("identity");
  auto cfg = parse_ok(R"({"experiment":"identity-check","seed":5,"numerics":{"triples":2,"scaling_triples":4}})");
  cfg.output_dir = dir.string();
  const auto a = run(cfg);
  CHECK(fs::exists(dir / "manifest.json"));
  REQUIRE_FALSE(a.files.empty());
  std::vector<std::string> first;
  for (const auto& f : a.files) {
    CHECK(csv::sha256_hex(slurp(f.second.path)) == f.second.sha256);
    first.push_back(f.second.sha256);
  }
  const auto b = run(cfg);
  std::vector<std::string> second;
  for (const auto& f : b.files) second.push_back(f.second.sha256);
  CHECK(first == second);
  CHECK(a.verdict == Verdict::pass);
  CHECK(a.exit_code() == 0);
  fs::remove_all(dir);
}

TEST_CASE("runs refuse to overwrite foreign files") {
  const auto dir = scratch("foreign");
  fs::create_directories(dir);
  std::ofstream(dir / "notes.txt") << "keep me";
  auto cfg = parse_ok(R"({"experiment":"identity-check","numerics":{"triples":1,"scaling_triples":1}})");
  cfg.output_dir = dir.string();
  CHECK_THROWS(run(cfg));
  CHECK(slurp(dir / "notes.txt") == "keep me");
  fs::remove_all(dir);
}

TEST_CASE("small heat kernel run") {
  const auto dir = scratch("heatkernel");
  auto cfg = parse_ok(R"({"experiment":"heatkernel","environment":{"d":1},"numerics":{"horizon":256}})");
  cfg.output_dir = dir.string();
  const auto m = run(cfg);
  CHECK(m.verdict == Verdict::pass);
  for (const auto& c : m.checks) CHECK_MESSAGE(c.verdict == Verdict::pass, (c.name + ": " + c.detail));
  CHECK(fs::exists(dir / "heatkernel_origin.csv"));
  const auto text = slurp(dir / "heatkernel_fit.csv");
  CHECK(text.rfind("C,gamma,alpha,band_lo,band_hi,npoints,verdict", 0) == 0);
  fs::remove_all(dir);
}
