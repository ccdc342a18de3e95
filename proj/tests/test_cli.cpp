// Integration tests driving the command-line binary.

#include <sys/wait.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hkc/config.hpp"
#include "hkc/rng.hpp"
#include "hkc/stats.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

class Workspace {
 public:
  Workspace() : dir_(fs::temp_directory_path() / ("hkc_cli_" + std::to_string(::getpid()))) {
    fs::create_directories(dir_);
  }
  ~Workspace() { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
  }

  std::string read(const std::string& name) const {
    std::ifstream in(path(name), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  Run run(const std::string& args) const {
    const std::string cmd = std::string(HKC_CLI) + " " + args + " >" + path("stdout.txt") + " 2>" + path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read("stdout.txt"), read("stderr.txt")};
  }

 private:
  fs::path dir_;
};

const char* kModel = R"({
  "format": "hkc-model/1",
  "seed": 11,
  "variables": ["a1", "a2", "b1", "b2"],
  "root": "top",
  "nodes": [
    {"name": "top", "family": "gumbel", "theta": 2, "children": ["A", "B"]},
    {"name": "A", "family": "clayton", "theta": 2, "columns": ["a1", "a2"]},
    {"name": "B", "family": "clayton", "theta": 2, "columns": ["b1", "b2"]}
  ]
})";

// Families only, for fitting.
const char* kSkeleton = R"({
  "root": "top",
  "nodes": [
    {"name": "top", "family": "gumbel", "children": ["A", "B"]},
    {"name": "A", "family": "clayton", "columns": ["a1", "a2"]},
    {"name": "B", "family": "clayton", "columns": ["b1", "b2"]}
  ]
})";

double tau_of(const hkc::RowMatrix& u, int i, int j) {
  const Eigen::VectorXd a = u.col(i), b = u.col(j);
  return hkc::kendall_tau(std::span<const double>(a.data(), a.size()), std::span<const double>(b.data(), b.size()));
}

double tau_of_node(const nlohmann::json& node) {
  const std::string f = node["family"];
  const double th = node["theta"];
  if (f == "clayton") return th / (th + 2);
  if (f == "gumbel") return 1 - 1 / th;
  return NAN;
}

}  // namespace

TEST_CASE("cli: simulate is deterministic and matches tau identities") {
  Workspace ws;
  ws.write("m.json", kModel);
  REQUIRE(ws.run("simulate --model " + ws.path("m.json") + " --n 10000 --method exact --out " + ws.path("a.csv")).code == 0);
  REQUIRE(ws.run("simulate --model " + ws.path("m.json") + " --n 10000 --method exact --out " + ws.path("b.csv")).code == 0);
  CHECK(ws.read("a.csv") == ws.read("b.csv"));
  const auto d = hkc::read_csv(ws.path("a.csv"));
  CHECK(d.header == std::vector<std::string>{"a1", "a2", "b1", "b2"});
  CHECK(std::abs(tau_of(d.values, 0, 1) - 0.5) < 0.02);
  CHECK(std::abs(tau_of(d.values, 2, 3) - 0.5) < 0.02);

  REQUIRE(ws.run("simulate --model " + ws.path("m.json") + " --n 10000 --seed 12 --out " + ws.path("c.csv")).code == 0);
  CHECK(ws.read("a.csv") != ws.read("c.csv"));

  CHECK(ws.run("simulate --model " + ws.path("m.json") + " --n 0 --out " + ws.path("e.csv")).code == 0);
  CHECK(ws.read("e.csv") == "a1,a2,b1,b2\n");
}

TEST_CASE("cli: exact sampling with an elliptical cluster is refused") {
  Workspace ws;
  std::string m = kModel;
  const std::string from = R"({"name": "B", "family": "clayton", "theta": 2,)";
  m.replace(m.find(from), from.size(), R"({"name": "B", "family": "gaussian", "corr": [[1, 0.5], [0.5, 1]],)");
  ws.write("m.json", m);
  const Run r = ws.run("simulate --model " + ws.path("m.json") + " --kendall-mc 2000 --n 10 --method exact --out " + ws.path("x.csv"));
  CHECK(r.code == 2);
  CHECK(r.err.find("--method rejection") != std::string::npos);
  CHECK(ws.run("simulate --model " + ws.path("m.json") + " --kendall-mc 2000 --n 10 --method rejection --out " + ws.path("x.csv")).code == 0);
}

TEST_CASE("cli: fit reports, dominance, round trip and determinism") {
  Workspace ws;
  ws.write("m.json", kModel);
  ws.write("s.json", kSkeleton);
  REQUIRE(ws.run("simulate --model " + ws.path("m.json") + " --n 2000 --out " + ws.path("d.csv")).code == 0);

  const Run two = ws.run("fit --data " + ws.path("d.csv") + " --model " + ws.path("s.json") + " --out " + ws.path("r2.json"));
  REQUIRE(two.code == 0);
  const auto r2 = nlohmann::json::parse(ws.read("r2.json"));
  CHECK(r2["format"] == "hkc-report/1");
  int fitted = 0;
  for (const auto& n : r2["nodes"]) fitted += n["method"] == "mle";
  CHECK(fitted == 3);
  for (const auto& n : r2["nodes"]) CHECK(std::abs(tau_of_node(n) - 0.5) < 0.05);

  const Run mle = ws.run("fit --data " + ws.path("d.csv") + " --model " + ws.path("s.json") + " --method mle --out " +
                         ws.path("rm.json"));
  REQUIRE(mle.code == 0);
  const auto rm = nlohmann::json::parse(ws.read("rm.json"));
  CHECK(rm["loglik"]["joint"].get<double>() >= rm["loglik"]["two_step"].get<double>());

  REQUIRE(ws.run("fit --data " + ws.path("d.csv") + " --model " + ws.path("s.json") + " --method mle --out " +
                 ws.path("rm2.json")).code == 0);
  CHECK(ws.read("rm.json") == ws.read("rm2.json"));

  // A fit report is itself a usable model.
  REQUIRE(ws.run("simulate --model " + ws.path("rm.json") + " --n 50 --out " + ws.path("again.csv")).code == 0);
  CHECK(hkc::read_csv(ws.path("again.csv")).values.rows() == 50);
}

TEST_CASE("cli: input errors exit with code 2 and name the problem") {
  Workspace ws;
  ws.write("d.csv", "a1,a2,b1,b2\n0.1,0.2,0.3,0.4\n0.5,0.6,0.7,0.8\n0.2,0.1,0.9,0.3\n");
  std::string m = kSkeleton;
  m.replace(m.find(R"(["b1", "b2"])"), 12, R"(["b1", "b9"])");
  ws.write("s.json", m);
  Run r = ws.run("fit --data " + ws.path("d.csv") + " --model " + ws.path("s.json") + " --out " + ws.path("r.json"));
  CHECK(r.code == 2);
  CHECK(r.err.find("column 'b9' not found") != std::string::npos);

  ws.write("bad.csv", "a1,a2,b1,b2\n0.1,0.2,0.3,0.4\n0.5,,0.7,0.8\n");
  ws.write("s.json", kSkeleton);
  r = ws.run("fit --data " + ws.path("bad.csv") + " --model " + ws.path("s.json") + " --out " + ws.path("r.json"));
  CHECK(r.code == 2);
  CHECK(r.err.find("bad.csv:3: missing value in column 'a2'") != std::string::npos);

  CHECK(ws.run("fit --data " + ws.path("nope.csv") + " --model " + ws.path("s.json") + " --out " + ws.path("r.json")).code == 2);
  CHECK(ws.run("simulate --model " + ws.path("s.json") + " --n 10 --out " + ws.path("x.csv")).code == 2);
  CHECK(ws.run("kendall --family clayton --dim 2").code == 2);
  CHECK(ws.run("frobnicate").code == 2);
}

TEST_CASE("cli: density and kendall") {
  Workspace ws;
  ws.write("ind.json", R"({"variables": ["p", "q", "r"], "root": "top", "nodes": [
    {"name": "top", "family": "independence", "children": ["L", "R"]},
    {"name": "L", "family": "independence", "columns": ["p", "q"]},
    {"name": "R", "family": "independence", "columns": ["r"]}]})");
  Run r = ws.run("density --model " + ws.path("ind.json") + " --point 0.2,0.7,0.4");
  REQUIRE(r.code == 0);
  CHECK(r.out == "1\n");

  std::vector<double> k;
  for (int d : {2, 5, 10}) {
    r = ws.run("kendall --family gumbel --theta 2 --dim " + std::to_string(d) + " --grid 10");
    REQUIRE(r.code == 0);
    const auto t = hkc::parse_csv(r.out);
    CHECK(t.values(5, 0) == 0.5);
    k.push_back(t.values(5, 1));
  }
  CHECK(k[0] < k[1]);
  CHECK(k[1] < k[2]);
}

TEST_CASE("cli: backtest on engineered exceedances") {
  Workspace ws;
  hkc::RngStream rng(5);
  std::string csv = "x,y\n";
  for (int t = 0; t < 1000; ++t) {
    double a = 0, b = 0;
    if (t < 500) {
      a = rng.normal();
      b = rng.normal();
    } else if (t % 100 == 50) {
      a = b = -100;
    }
    csv += hkc::format_number(a) + "," + hkc::format_number(b) + "\n";
  }
  ws.write("r.csv", csv);
  ws.write("m.json", R"({"root": "all", "nodes": [{"name": "all", "family": "gaussian", "columns": ["x", "y"]}]})");
  const Run r = ws.run("backtest --data " + ws.path("r.csv") + " --model " + ws.path("m.json") +
                       " --level 0.99 --window 500 --out " + ws.path("bt.json"));
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(ws.read("bt.json"));
  CHECK(j["n_exceed"] == 5);
  CHECK(j["horizon"] == 500);
  CHECK(j["uc"]["p"].get<double>() == 1.0);
  CHECK(r.out.find("p 1.00") != std::string::npos);
}

TEST_CASE("cli: study writes a table") {
  Workspace ws;
  const Run r = ws.run("study --nesting clayton --tau0 0.4 --sizes 100 --reps 2 --kendall-mc 2000 --out " + ws.path("t.csv"));
  REQUIRE(r.code == 0);
  const std::string t = ws.read("t.csv");
  CHECK(t.rfind("nesting,tau0,tau1,tau2,n,method,ok,failed,bias,sd,mse\n", 0) == 0);
  CHECK(std::count(t.begin(), t.end(), '\n') == 4);
}
