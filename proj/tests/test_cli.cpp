#include "doctest.h"

#include "cli.hpp"
#include "gbdomain/evalsynth.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gbdomain;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "gbdomain");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() / "gbdomain_cli";
    fs::remove_all(dir);
    fs::create_directories(dir);
    REQUIRE(run({"synth", "--k", "3", "--per-domain", "60", "--dim", "8", "--seed", "4", "--out", str("d.gbd")}) == 0);
  }
  std::string str(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("discover happy path") {
  Workspace ws;
  CHECK(run({"discover", "--input", ws.str("d.gbd"), "--k", "3", "--tau", "1.05", "--seed", "7", "--out", ws.str("run"),
             "--balls", "--no-timestamp"}) == 0);
  CHECK(fs::exists(ws.dir / "run/labels.csv"));
  CHECK(fs::exists(ws.dir / "run/balls.json"));
  const auto meta = read_json(ws.dir / "run/meta.json");
  CHECK(meta["K"] == 3);
  CHECK(meta["source"] == "GB_REPRESENTATIVE");
  CHECK(meta["config"]["tau"] == 1.05);
  CHECK(meta["config"]["seed"] == 7);
  CHECK(!meta.contains("timestamp"));

  CHECK(run({"discover", "--input", ws.str("d.gbd"), "--k", "3", "--out", ws.str("ts")}) == 0);
  CHECK(read_json(ws.dir / "ts/meta.json").contains("timestamp"));
}

TEST_CASE("exit codes") {
  Workspace ws;
  CHECK(run({"discover", "--input", ws.str("missing.gbd"), "--k", "3", "--out", ws.str("x")}) == 3);
  CHECK(run({"discover", "--input", ws.str("d.gbd"), "--k", "0", "--out", ws.str("x")}) == 2);
  CHECK(run({"discover", "--input", ws.str("d.gbd"), "--k", "3", "--tau", "-1", "--out", ws.str("x")}) == 2);
  CHECK(run({"discover", "--input", ws.str("d.gbd"), "--k", "3", "--k-auto", "--out", ws.str("x")}) == 2);
  CHECK(run({"discover", "--input", ws.str("d.gbd"), "--k", "500", "--out", ws.str("x")}) == 4);
  CHECK(run({"discover", "--input", ws.str("d.gbd"), "--dataset", "nope", "--out", ws.str("x")}) == 2);
  CHECK(run({"frobnicate"}) == 2);
  std::ofstream(ws.dir / "bad.csv") << "id,z0,z1\na,1\n";
  CHECK(run({"discover", "--input", ws.str("bad.csv"), "--k", "1", "--out", ws.str("x")}) == 3);
}

TEST_CASE("K selection") {
  Workspace ws;
  CHECK(run({"discover", "--input", ws.str("d.gbd"), "--dataset", "shb", "--out", ws.str("a"), "--no-timestamp"}) == 0);
  CHECK(read_json(ws.dir / "a/meta.json")["K"] == 3);
  CHECK(run({"discover", "--input", ws.str("d.gbd"), "--k-auto", "--out", ws.str("b"), "--no-timestamp"}) == 0);
  CHECK(read_json(ws.dir / "b/meta.json")["K"] == 4);  // 180^(1/4) = 3.66
}

TEST_CASE("reproducible regardless of threads") {
  Workspace ws;
  const std::vector<std::string> base{"discover", "--input", ws.str("d.gbd"), "--k", "3", "--seed", "2", "--no-timestamp"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = base;
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  };
  REQUIRE(with({"--out", ws.str("t1"), "--threads", "1"}) == 0);
  REQUIRE(with({"--out", ws.str("t4"), "--threads", "4"}) == 0);
  REQUIRE(with({"--out", ws.str("t1b"), "--threads", "1"}) == 0);
  CHECK(slurp(ws.dir / "t1/labels.csv") == slurp(ws.dir / "t4/labels.csv"));
  CHECK(slurp(ws.dir / "t1/labels.csv") == slurp(ws.dir / "t1b/labels.csv"));
  CHECK(slurp(ws.dir / "t1/meta.json") == slurp(ws.dir / "t1b/meta.json"));
}

TEST_CASE("align") {
  Workspace ws;
  REQUIRE(run({"discover", "--input", ws.str("d.gbd"), "--k", "3", "--out", ws.str("r"), "--no-timestamp"}) == 0);
  CHECK(run({"align", "--input", ws.str("r/labels.csv"), "--prev", ws.str("r/labels.csv"), "--out", ws.str("self"),
             "--no-timestamp"}) == 0);
  CHECK(read_json(ws.dir / "self/permutation.json")["permutation"] == nlohmann::json({0, 1, 2}));

  // swap labels 0 and 1
  fs::create_directories(ws.dir / "sw");
  {
    std::ifstream in(ws.dir / "r/labels.csv");
    std::ofstream out(ws.dir / "sw/labels.csv");
    std::string line;
    std::getline(in, line);
    out << line << '\n';
    while (std::getline(in, line)) {
      const auto a = line.find(','), b = line.find(',', a + 1);
      int l = std::stoi(line.substr(a + 1, b - a - 1));
      l = l == 0 ? 1 : l == 1 ? 0 : l;
      out << line.substr(0, a) << ',' << l << line.substr(b) << '\n';
    }
  }
  CHECK(run({"align", "--input", ws.str("sw/labels.csv"), "--prev", ws.str("r/labels.csv"), "--out", ws.str("back"),
             "--no-timestamp"}) == 0);
  CHECK(read_json(ws.dir / "back/permutation.json")["permutation"] == nlohmann::json({1, 0, 2}));
  CHECK(slurp(ws.dir / "back/labels.csv") == slurp(ws.dir / "r/labels.csv"));

  REQUIRE(run({"discover", "--input", ws.str("d.gbd"), "--k", "2", "--out", ws.str("k2"), "--no-timestamp"}) == 0);
  CHECK(run({"align", "--input", ws.str("k2/labels.csv"), "--prev", ws.str("r/labels.csv"), "--out", ws.str("bad")}) == 4);

  fs::create_directories(ws.dir / "short");
  {
    std::ifstream in(ws.dir / "r/labels.csv");
    std::ofstream out(ws.dir / "short/labels.csv");
    std::string line;
    for (int i = 0; i < 11 && std::getline(in, line); ++i) out << line << '\n';
  }
  CHECK(run({"align", "--input", ws.str("short/labels.csv"), "--prev", ws.str("r/labels.csv"), "--out", ws.str("bad")}) == 4);
}

TEST_CASE("discover with --prev aligns") {
  Workspace ws;
  REQUIRE(run({"discover", "--input", ws.str("d.gbd"), "--k", "3", "--out", ws.str("e0"), "--no-timestamp"}) == 0);
  REQUIRE(run({"discover", "--input", ws.str("d.gbd"), "--k", "3", "--seed", "9", "--epoch", "1", "--prev",
               ws.str("e0/labels.csv"), "--out", ws.str("e1"), "--no-timestamp"}) == 0);
  const auto meta = read_json(ws.dir / "e1/meta.json");
  CHECK(meta["epoch"] == 1);
  CHECK(meta["permutation"].is_array());
  CHECK(run({"eval", "--labels", ws.str("e1/labels.csv"), "--epochs", ws.str("e0/labels.csv"), ws.str("e1/labels.csv"),
             "--out", ws.str("ev"), "--no-timestamp"}) == 0);
  CHECK(read_json(ws.dir / "ev/eval.json")["churn"].get<double>() < 0.05);
}

TEST_CASE("eval") {
  Workspace ws;
  REQUIRE(run({"discover", "--input", ws.str("d.gbd"), "--k", "3", "--out", ws.str("r"), "--no-timestamp"}) == 0);
  CHECK(run({"eval", "--labels", ws.str("r/labels.csv"), "--input", ws.str("d.gbd"), "--reference", ws.str("r/labels.csv"),
             "--out", ws.str("ev"), "--no-timestamp"}) == 0);
  const auto rep = read_json(ws.dir / "ev/eval.json");
  CHECK(rep["stratification"]["delta_med"].get<double>() > 0.0);
  CHECK(rep["ari_vs_reference"].get<double>() == doctest::Approx(1.0));
  CHECK(rep["ari_vs_domains"].get<double>() > 0.9);

  REQUIRE(run({"discover", "--input", ws.str("d.gbd"), "--k", "1", "--out", ws.str("k1"), "--no-timestamp"}) == 0);
  CHECK(run({"eval", "--labels", ws.str("k1/labels.csv"), "--input", ws.str("d.gbd"), "--out", ws.str("ev1"),
             "--no-timestamp"}) == 0);
  CHECK(read_json(ws.dir / "ev1/eval.json")["stratification"]["delta_med"] == 0.0);
}

TEST_CASE("synth formats and drift") {
  Workspace ws;
  CHECK(run({"synth", "--k", "2", "--per-domain", "10", "--seed", "1", "--out", ws.str("s.csv")}) == 0);
  const DescriptorSet csv = load_descriptors(ws.dir / "s.csv");
  CHECK(csv.size() == 20);
  CHECK(csv.counts().has_value());
  CHECK(csv.domains().has_value());
  CHECK(run({"synth", "--k", "2", "--per-domain", "10", "--seed", "1", "--out", ws.str("s.gbd")}) == 0);
  CHECK(run({"synth", "--k", "2", "--per-domain", "10", "--seed", "1", "--drift", "0.1", "--epoch", "2", "--out",
             ws.str("s2.gbd")}) == 0);
  CHECK(load_descriptors(ws.dir / "s.gbd").matrix() != load_descriptors(ws.dir / "s2.gbd").matrix());
  CHECK(run({"synth", "--k", "0", "--out", ws.str("z.gbd")}) == 2);
}

TEST_CASE("bench") {
  Workspace ws;
  CHECK(run({"bench", "--mode", "scaling", "--sizes", "200,400,800", "--reps", "1", "--out", ws.str("sc")}) == 0);
  const auto s = read_json(ws.dir / "sc/summary.json");
  CHECK(s.contains("slope"));
  CHECK(fs::exists(ws.dir / "sc/scaling.csv"));
  CHECK(run({"bench", "--mode", "stability", "--seeds", "2", "--epochs", "3", "--per-domain", "40", "--outliers", "0.1",
             "--drift", "0.1", "--out", ws.str("st")}) == 0);
  const std::string csv = slurp(ws.dir / "st/stability.csv");
  CHECK(csv.rfind("method,seed,epoch,", 0) == 0);
  // 3 methods x 2 seeds x 3 epochs + header
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 19);
  CHECK(run({"bench", "--mode", "other"}) == 2);
}

TEST_CASE("losses") {
  Workspace ws;
  CHECK(run({"losses", "--random", "--seed", "3", "--check-grads", "--out", ws.str("l"), "--no-timestamp"}) == 0);
  const auto rep = read_json(ws.dir / "l/losses.json");
  CHECK(rep["grad_check"]["orth_semantic_grad_zero"] == true);
  CHECK(rep["total"].get<double>() ==
        doctest::Approx(rep["den"].get<double>() + 0.1 * (rep["sem"].get<double>() + rep["sty"].get<double>() +
                                                         rep["orth"].get<double>())));

  std::ofstream(ws.dir / "in.json") << R"({"pred": [[1, 2], [3, 4]], "gt": [[1, 2], [3, 4]]})";
  CHECK(run({"losses", "--input", ws.str("in.json"), "--out", ws.str("l2"), "--no-timestamp"}) == 0);
  CHECK(read_json(ws.dir / "l2/losses.json")["den"] == 0.0);

  CHECK(run({"losses"}) == 2);
  CHECK(run({"losses", "--input", ws.str("nothing.json")}) == 3);
  std::ofstream(ws.dir / "broken.json") << "{";
  CHECK(run({"losses", "--input", ws.str("broken.json")}) == 3);
  CHECK(run({"losses", "--random", "--lambda-sem", "-1"}) == 2);
}

}
