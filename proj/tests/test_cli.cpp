#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <sys/wait.h>

#include "doctest.h"
#include "sestrack/cli.hpp"

using namespace sestrack;
using sestrack::cli::run_cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "sestrack");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sestrack_test_cli";
  fs::create_directories(dir);
  return dir / name;
}

double text_field(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(key + ":", 0) == 0) return std::stod(line.substr(key.size() + 1));
  }
  FAIL("missing field " << key);
  return 0.0;
}

}  // namespace

TEST_CASE("noise and trend spec parsing") {
  CHECK(std::get<WhiteGaussian>(cli::parse_noise_spec("white:var=2")).variance == 2.0);
  CHECK(std::get<MA1>(cli::parse_noise_spec("ma1:a=-0.4")).a == -0.4);
  CHECK(std::get<AR1>(cli::parse_noise_spec("ar1:theta=0.2,sigma=3")).variance == 9.0);
  CHECK(std::get<MAq>(cli::parse_noise_spec("maq:b1=0.5,b2=-0.1")).coefficients ==
        std::vector<double>{0.5, -0.1});
  CHECK_THROWS_AS(cli::parse_noise_spec("arma:p=1"), cli::SpecError);
  CHECK_THROWS_AS(cli::parse_noise_spec("ma1:b=1"), cli::SpecError);
  CHECK_THROWS_AS(cli::parse_noise_spec("ar1:theta=x"), cli::SpecError);
  CHECK_THROWS_AS(cli::parse_noise_spec("ar1:theta=0.2,var=1,sigma=1"), cli::SpecError);

  CHECK(cli::parse_trend_spec("linear:start=2,slope=0.1").lipschitz_k() == doctest::Approx(0.1));
  CHECK(std::get<SinusoidTrend>(cli::parse_trend_spec("sin:amp=1,rate=0.5").shape()).phase == 0.0);
  CHECK(std::get<ConstantTrend>(cli::parse_trend_spec("const:level=4").shape()).level == 4.0);
  CHECK_THROWS_AS(cli::parse_trend_spec("linear:start=2"), cli::SpecError);
}

TEST_CASE("bound prints the decomposition") {
  const Result r = run({"bound", "--alpha", "0.1", "--k", "0", "--noise", "white:var=1"});
  CHECK(r.code == 0);
  CHECK(text_field(r.out, "variance_term") == doctest::Approx(0.05263157895).epsilon(1e-10));
  CHECK(text_field(r.out, "correlation_term") == 0.0);
  CHECK(text_field(r.out, "trend_term") == 0.0);
}

TEST_CASE("--json carries the same numbers as text mode") {
  const std::vector<std::string> base{"bound", "--alpha", "0.1", "--k", "0.1", "--noise",
                                      "ar1:theta=0.2"};
  const Result text = run(base);
  std::vector<std::string> with_json = base;
  with_json.push_back("--json");
  const Result js = run(with_json);
  REQUIRE(js.code == 0);
  const auto doc = nlohmann::json::parse(js.out);
  for (const char* key : {"variance_term", "correlation_term", "trend_term", "total"}) {
    CHECK(text_field(text.out, key) ==
          doctest::Approx(doc.at(key).get<double>()).epsilon(1e-9));
  }
}

TEST_CASE("optimize-alpha") {
  const Result r = run({"optimize-alpha", "--k", "0.1", "--noise", "white:var=1", "--json"});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc.at("alpha").get<double>() > 0.27);
  CHECK(doc.at("alpha").get<double>() < 0.29);
  CHECK_FALSE(doc.at("degenerate").get<bool>());
}

TEST_CASE("mse exact and Monte Carlo") {
  const fs::path out = scratch("exact.csv");
  Result r = run({"mse", "--mode", "exact", "--noise", "white:var=1", "--trend", "const:level=0",
                  "--alpha", "0.1", "--steps", "2000", "--out", out.string()});
  CHECK(r.code == 0);
  CHECK(fs::exists(out));

  r = run({"mse", "--mode", "mc", "--steps", "100", "--reps", "200", "--seed", "5", "--json"});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc.contains("tail_mean"));
  const Result again =
      run({"mse", "--mode", "mc", "--steps", "100", "--reps", "200", "--seed", "5", "--json"});
  CHECK(again.out == r.out);

  CHECK(run({"mse", "--mode", "sideways"}).code == cli::kUsageError);
}

TEST_CASE("simulate and smooth") {
  const fs::path sim = scratch("sim.csv");
  Result r = run({"simulate", "--trend", "linear:start=2,slope=0.1", "--noise", "ma1:a=2",
                  "--alpha", "0.1", "--steps", "50", "--seed", "3", "--init", "8", "--out",
                  sim.string()});
  REQUIRE(r.code == 0);
  const fs::path smoothed = scratch("smoothed.csv");
  r = run({"smooth", "--input", sim.string(), "--column", "x", "--alpha", "0.1", "--init", "8",
           "--out", smoothed.string()});
  REQUIRE(r.code == 0);
  // smoothing the simulated observations reproduces the simulated estimates
  std::ifstream a(sim), b(smoothed);
  std::string la, lb;
  std::getline(a, la);
  std::getline(b, lb);
  while (std::getline(a, la) && std::getline(b, lb)) {
    CHECK(la.substr(la.rfind(',')) == lb.substr(lb.rfind(',')));
  }

  const Result missing = run({"smooth", "--input", sim.string(), "--column", "nope", "--alpha",
                              "0.1"});
  CHECK(missing.code == cli::kDomainError);
  CHECK(missing.err.find("available columns") != std::string::npos);
}

TEST_CASE("reproduce writes both artifacts") {
  const fs::path dir = scratch("figs");
  fs::remove_all(dir);
  const Result r = run({"reproduce", "--figure", "1a", "--outdir", dir.string()});
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "fig1a.csv"));
  CHECK(fs::exists(dir / "fig1a.svg"));
  CHECK(run({"reproduce", "--figure", "9z", "--outdir", dir.string()}).code != 0);
}

TEST_CASE("verify exit codes") {
  const std::string body = R"({
    "schema_version": 1,
    "noise": {"model": "white", "variance": 0},
    "trend": {"shape": "linear", "start": 0, "slope": 0.1},
    "alpha": 0.1, "horizon": 300, "replications": 5,
    "init": {"policy": "fixed", "value": 0})";
  const fs::path bad = scratch("understated.json");
  std::ofstream(bad) << body << R"(, "bound_k": 0.01})";
  const fs::path good = scratch("certified.json");
  std::ofstream(good) << body << "}";

  CHECK(run({"verify", "--config", bad.string()}).code == cli::kBoundViolated);
  CHECK(run({"verify", "--config", good.string()}).code == cli::kSuccess);
  const Result js = run({"verify", "--config", bad.string(), "--json"});
  CHECK_FALSE(nlohmann::json::parse(js.out).at("pass").get<bool>());
  CHECK(run({"verify", "--config", scratch("absent.json").string()}).code == cli::kDomainError);
}

TEST_CASE("usage errors echo the grammar") {
  Result r = run({"bound", "--alpha", "0.1", "--k", "0", "--noise", "pink:var=1"});
  CHECK(r.code == cli::kUsageError);
  CHECK(r.err.find("spec grammar") != std::string::npos);

  CHECK(run({"bound", "--alpha", "0.1", "--bogus"}).code == cli::kUsageError);
  CHECK(run({"frobnicate"}).code == cli::kUsageError);
  CHECK(run({"bound", "--alpha", "1.5", "--k", "0", "--noise", "white:var=1"}).code ==
        cli::kDomainError);
}

TEST_CASE("help lists every flag of every subcommand") {
  const std::map<std::string, std::vector<std::string>> flags{
      {"smooth", {"--input", "--column", "--alpha", "--init", "--out", "--svg"}},
      {"simulate",
       {"--trend", "--noise", "--alpha", "--steps", "--seed", "--init", "--burn-in", "--out",
        "--svg"}},
      {"bound", {"--alpha", "--k", "--noise", "--tol", "--json"}},
      {"optimize-alpha", {"--k", "--noise", "--tol", "--grid", "--json"}},
      {"mse",
       {"--mode", "--noise", "--trend", "--alpha", "--steps", "--reps", "--seed", "--init",
        "--burn-in", "--d1", "--tail", "--out", "--svg", "--json", "--threads"}},
      {"verify", {"--config", "--reps", "--json", "--threads"}},
      {"reproduce", {"--figure", "--outdir", "--seed"}},
  };
  for (const auto& [sub, names] : flags) {
    const Result r = run({sub, "--help"});
    CHECK(r.code == 0);
    for (const auto& f : names) {
      INFO(sub, " ", f);
      CHECK(r.out.find(f) != std::string::npos);
    }
  }
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("installed binary reports exit codes") {
  const std::string bin = SESTRACK_BINARY;
  const auto status = [&](const std::string& args) {
    const int raw = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(raw);
  };
  CHECK(status("bound --alpha 0.1 --k 0 --noise white:var=1") == 0);
  CHECK(status("bound --alpha 0.1") == 2);
  CHECK(status("bound --alpha 2 --k 0 --noise white:var=1") == 1);
}
