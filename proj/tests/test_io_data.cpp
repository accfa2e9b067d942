#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "sestrack/io_data.hpp"

using namespace sestrack;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sestrack_test_io";
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_file(const std::string& name, const std::string& body) {
  const fs::path p = scratch(name);
  std::ofstream(p) << body;
  return p;
}

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

// Minimal XML well-formedness check: balanced, properly nested tags, quoted
// attributes, and no bare '<' or '&' in text.
bool well_formed_xml(const std::string& doc) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool seen_root = false;
  while (i < doc.size()) {
    if (doc[i] == '&') {
      const auto semi = doc.find(';', i);
      if (semi == std::string::npos || semi - i > 6) return false;
      i = semi + 1;
      continue;
    }
    if (doc[i] != '<') {
      ++i;
      continue;
    }
    if (doc.compare(i, 4, "<!--") == 0) {
      const auto end = doc.find("-->", i);
      if (end == std::string::npos) return false;
      i = end + 3;
      continue;
    }
    if (doc.compare(i, 2, "<?") == 0) {
      const auto end = doc.find("?>", i);
      if (end == std::string::npos) return false;
      i = end + 2;
      continue;
    }
    const bool closing = doc.compare(i, 2, "</") == 0;
    std::size_t j = i + (closing ? 2 : 1);
    std::string name;
    while (j < doc.size() && (std::isalnum(static_cast<unsigned char>(doc[j])) || doc[j] == '-' ||
                              doc[j] == ':' || doc[j] == '_'))
      name += doc[j++];
    if (name.empty()) return false;
    bool self_closing = false;
    while (j < doc.size() && doc[j] != '>') {
      if (doc[j] == '"' || doc[j] == '\'') {
        const auto end = doc.find(doc[j], j + 1);
        if (end == std::string::npos) return false;
        if (doc.substr(j + 1, end - j - 1).find('<') != std::string::npos) return false;
        j = end + 1;
        continue;
      }
      if (doc[j] == '/') self_closing = true;
      ++j;
    }
    if (j >= doc.size()) return false;
    if (closing) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else if (!self_closing) {
      if (stack.empty() && seen_root) return false;
      stack.push_back(name);
      seen_root = true;
    }
    i = j + 1;
  }
  return seen_root && stack.empty();
}

}  // namespace

TEST_CASE("xml checker sanity") {
  CHECK(well_formed_xml("<a><b x=\"1\"/>t &amp; u</a>"));
  CHECK_FALSE(well_formed_xml("<a><b></a></b>"));
  CHECK_FALSE(well_formed_xml("<a>x < y</a>"));
  CHECK_FALSE(well_formed_xml("<a>"));
}

TEST_CASE("read_csv_column examples") {
  const fs::path p = write_file("basic.csv", "t,x\n1,2.5\n2,3.5\n");
  CHECK(read_csv_column(p, "x") == std::vector<double>{2.5, 3.5});

  const std::string missing = error_of([&] { read_csv_column(p, "y"); });
  CHECK(missing.find("'y'") != std::string::npos);
  CHECK(missing.find("t, x") != std::string::npos);
  CHECK_THROWS_AS(read_csv_column(p, "y"), DataError);

  const fs::path bad = write_file("bad.csv", "t,x\n1,2.5\n2,abc\n");
  const std::string msg = error_of([&] { read_csv_column(bad, "x"); });
  CHECK(msg.find("row 2") != std::string::npos);

  const fs::path inf = write_file("inf.csv", "x\ninf\n");
  CHECK_THROWS_AS(read_csv_column(inf, "x"), DataError);
  CHECK_THROWS_AS(read_csv_column(scratch("does_not_exist.csv"), "x"), DataError);
}

TEST_CASE("read_series_file takes several columns") {
  const fs::path p = write_file("multi.csv", "a,b,c\n1,2,3\n4,5,6\n");
  const SeriesFile f = read_series_file(p, {"c", "a"});
  CHECK(f.rows == 2);
  CHECK(f.columns.at("a") == std::vector<double>{1.0, 4.0});
  CHECK(f.columns.at("c") == std::vector<double>{3.0, 6.0});
  CHECK(f.columns.count("b") == 0);
}

TEST_CASE("trajectory CSV") {
  const std::vector<double> x{1.0, 2.0, 3.0};
  const auto run = ses_run(x, 0.5);
  const Trajectory tr = make_trajectory(x, {1.0, 1.0, 1.0}, run);
  CHECK(tr.estimates.size() == 3);
  CHECK(tr.estimates[0] == run[1]);
  const std::string csv = to_csv(tr);
  CHECK(csv.rfind("t,x,m_star,m_hat\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  const Trajectory bare = make_trajectory(x, {}, run);
  CHECK(to_csv(bare).rfind("t,x,m_hat\n", 0) == 0);
  CHECK_THROWS(make_trajectory(x, {}, std::vector<double>{1.0}));
}

TEST_CASE("CSV numbers round-trip exactly") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> values{0.1, 1.0 / 3.0, 1e-300, -2.5e300, 0.0,
                             std::numeric_limits<double>::denorm_min(),
                             std::numeric_limits<double>::max()};
  for (int i = 0; i < 500; ++i) values.push_back(u(gen) * std::pow(10.0, 40.0 * u(gen)));

  const Trajectory tr = make_trajectory(values, {}, std::vector<double>(values.size() + 1, 0.0));
  const fs::path p = write_results(tr, scratch("roundtrip.csv"), OutputFormat::Csv);
  CHECK(read_csv_column(p, "x") == values);
  CHECK(format_csv_number(0.1) == "0.10000000000000001");
}

TEST_CASE("curve and exact CSV layouts") {
  MseCurve c;
  c.mse = {0.5, 0.25};
  c.standard_error = {0.1, 0.05};
  const std::string csv = to_csv(c);
  CHECK(csv.rfind("t,mse,standard_error\n1,0.5,0.10000000000000001\n", 0) == 0);

  const std::vector<double> d{0.0, 0.01, 0.0181};
  const std::string exact = exact_mse_to_csv(d);
  CHECK(exact.find("1,0.01") != std::string::npos);
  CHECK(std::count(exact.begin(), exact.end(), '\n') == 3);
}

TEST_CASE("SVG output is well-formed") {
  const std::vector<double> x{1.0, 4.0, 2.0, 8.0};
  const Trajectory tr = make_trajectory(x, {1.0, 2.0, 3.0, 4.0}, ses_run(x, 0.3));
  const std::string svg = to_svg(tr, "a < b & \"c\"");
  CHECK(well_formed_xml(svg));
  CHECK(svg.find("viewBox=\"0 0 800 500\"") != std::string::npos);
  CHECK(svg.find("estimate") != std::string::npos);
  CHECK(svg.find("trend") != std::string::npos);

  MseCurve c;
  c.mse = {0.0, 0.0, 0.0};
  c.standard_error = {0.0, 0.0, 0.0};
  CHECK(well_formed_xml(to_svg(c, "flat")));

  const fs::path p = write_results(c, scratch("curve.svg"), OutputFormat::Svg);
  std::ifstream in(p);
  CHECK(well_formed_xml(std::string(std::istreambuf_iterator<char>(in), {})));
}

TEST_CASE("config parsing") {
  const std::string text = R"({
    "schema_version": 1,
    "noise": {"model": "ar1", "theta": 0.2, "variance": 1.5},
    "trend": {"shape": "sin", "amplitude": 1, "rate": 0.0031415926535897933},
    "alpha": 0.1,
    "horizon": 1000,
    "replications": 500,
    "seed": 18446744073709551615,
    "init": {"policy": "fixed", "value": 8},
    "bound_k": 0.01,
    "output": {"csv": "out.csv"}
  })";
  const ConfigDocument doc = parse_config(text);
  CHECK(std::get<AR1>(doc.experiment.noise).theta == 0.2);
  CHECK(std::get<AR1>(doc.experiment.noise).variance == 1.5);
  CHECK(std::get<SinusoidTrend>(doc.experiment.trend.shape()).phase == 0.0);
  CHECK(doc.experiment.seed == 18446744073709551615ULL);
  CHECK(std::get<FixedInit>(doc.experiment.init).value == 8.0);
  CHECK(doc.bound_k == 0.01);
  CHECK(doc.csv_output == "out.csv");
  CHECK_FALSE(doc.svg_output.has_value());
  CHECK(doc.experiment.tail_fraction == 0.1);

  SUBCASE("serialize then parse is a fixed point") {
    const std::string once = serialize_config(doc);
    const std::string twice = serialize_config(parse_config(once));
    CHECK(once == twice);
  }
  SUBCASE("every variant survives a round trip") {
    ConfigDocument d;
    d.experiment.noise = MAq{{0.1, -0.7, 1.0 / 3.0}, 2.0};
    d.experiment.trend = TableTrend{{0.1, 0.2, 0.7, 1.0 / 7.0}};
    d.experiment.horizon = 4;
    d.experiment.init = FirstObservation{};
    const std::string s = serialize_config(d);
    const ConfigDocument back = parse_config(s);
    CHECK(std::get<MAq>(back.experiment.noise).coefficients[2] == 1.0 / 3.0);
    CHECK(std::get<TableTrend>(back.experiment.trend.shape()).values[3] == 1.0 / 7.0);
    CHECK(serialize_config(back) == s);
  }
}

TEST_CASE("config rejects bad input") {
  const auto base = [](const std::string& extra) {
    return R"({"schema_version": 1, "noise": {"model": "white"},
              "trend": {"shape": "constant", "level": 0}, "alpha": 0.1, "horizon": 10)" +
           extra + "}";
  };
  CHECK_NOTHROW(parse_config(base("")));
  CHECK_THROWS_AS(parse_config(base(R"(, "colour": 1)")), DataError);
  CHECK_THROWS_AS(parse_config(R"({"schema_version": 2})"), DataError);
  CHECK_THROWS_AS(parse_config("{not json"), DataError);
  CHECK_THROWS_AS(parse_config(base(R"(, "seed": -1)")), DataError);
  CHECK_THROWS_AS(parse_config(base(R"(, "replications": 0)")), DataError);
  CHECK_THROWS_AS(
      parse_config(R"({"schema_version": 1, "noise": {"model": "ar1", "theta": 1.5},
                       "trend": {"shape": "constant", "level": 0}, "alpha": 0.1, "horizon": 10})"),
      DataError);
  CHECK_THROWS_AS(
      parse_config(R"({"schema_version": 1, "noise": {"model": "white", "a": 1},
                       "trend": {"shape": "constant", "level": 0}, "alpha": 0.1, "horizon": 10})"),
      DataError);
  const std::string msg = error_of([&] { parse_config(base(R"(, "colour": 1)")); });
  CHECK(msg.find("colour") != std::string::npos);
}

TEST_CASE("load_config from disk") {
  const fs::path p = write_file("cfg.json", serialize_config(ConfigDocument{}));
  CHECK(load_config(p).experiment.horizon == ConfigDocument{}.experiment.horizon);
  CHECK_THROWS_AS(load_config(scratch("missing.json")), DataError);
}

TEST_CASE("documented example configs parse") {
  const ConfigDocument fig = load_config(fs::path(SESTRACK_DOCS_DIR) / "configs/fig1a_verify.json");
  CHECK(std::get<MA1>(fig.experiment.noise).a == 2.0);
  CHECK(fig.experiment.trend.lipschitz_k() == 0.1);
  CHECK(fig.svg_output == "fig1a_mse.svg");
  const ConfigDocument low = load_config(fs::path(SESTRACK_DOCS_DIR) / "configs/understated_k.json");
  CHECK(low.bound_k == 0.01);
}
