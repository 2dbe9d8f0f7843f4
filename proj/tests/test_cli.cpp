#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "anomshap_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

int run(const std::string& args, const std::string& stdout_file = "") {
  std::string cmd = std::string(ANOMSHAP_CLI) + " " + args;
  cmd += stdout_file.empty() ? " > /dev/null" : " > " + path(stdout_file);
  cmd += " 2> " + path("stderr.txt");
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& name) {
  std::ifstream in(path(name));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_model() {
  static bool done = false;
  if (done) return;
  REQUIRE(run("synth --d 5 --n 1500 --anomalies 40 --seed 3 --out " + path("x.csv")) == 0);
  REQUIRE(run("train --data " + path("x.csv") + " --detector gmm --k 2,3 --seed 7 --out " + path("m.model")) == 0);
  done = true;
}

}  // namespace

TEST_CASE("train writes a model file") {
  ensure_model();
  CHECK(fs::exists(path("m.model")));
  CHECK(run("train --data " + path("x.csv") + " --detector subspace --latent 2 --seed 1 --out " +
            path("s.model"), "train.json") == 0);
  auto echo = nlohmann::json::parse(slurp("train.json"));
  CHECK(echo["config"]["detector"] == "subspace");
  CHECK(echo["config"]["valid_fraction"] == 0.2);
  CHECK(echo["result"]["latent"] == 2);
}

TEST_CASE("usage and fit failures") {
  ensure_model();
  CHECK(run("train --data " + path("missing.csv") + " --out " + path("q.model")) == 2);
  CHECK(run("train --out " + path("q.model")) == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("attribute --model " + path("m.model") + " --strategy ash") == 2);
  CHECK(run("attribute --model " + path("m.model") + " --strategy ace --row 1") == 2);

  std::ifstream in(path("x.csv"));
  std::ofstream out(path("constant.csv"));
  std::string line;
  std::getline(in, line);
  out << line << '\n';
  while (std::getline(in, line)) {
    auto comma = line.find(',');
    out << "4.5" << line.substr(comma) << '\n';
  }
  out.close();
  CHECK(run("train --data " + path("constant.csv") + " --out " + path("c.model")) == 3);
  CHECK(slurp("stderr.txt").find("'x1'") != std::string::npos);
}

TEST_CASE("attribute emits one value per feature and is reproducible") {
  ensure_model();
  const std::string args = "attribute --model " + path("m.model") + " --strategy ash --gamma 0.01 --row 5 --seed 1";
  REQUIRE(run(args, "a1.json") == 0);
  REQUIRE(run(args, "a2.json") == 0);
  CHECK(slurp("a1.json") == slurp("a2.json"));
  auto j = nlohmann::json::parse(slurp("a1.json"));
  CHECK(j["phi"].size() == 5);
  CHECK(j["strategy"] == "ash");
  CHECK(j["gamma"] == 0.01);
  CHECK(j["m"] == 2058);
  double total = j["phi0"].get<double>();
  for (const auto& v : j["phi"]) total += v.get<double>();
  CHECK(total == doctest::Approx(j["score"].get<double>()).epsilon(1e-9));

  for (const char* s : {"ig", "ksh", "wksh", "marg", "sfe"}) {
    CHECK(run("attribute --model " + path("m.model") + " --strategy " + s + " --row 2 --seed 1 --m 256", "s.json") == 0);
    CHECK(nlohmann::json::parse(slurp("s.json"))["phi"].size() == 5);
  }
  CHECK(run("attribute --model " + path("m.model") + " --strategy marg --values 0,0,0,0,9", "v.json") == 0);
  auto v = nlohmann::json::parse(slurp("v.json"));
  CHECK(v["phi"][4].get<double>() > v["phi"][0].get<double>());
}

TEST_CASE("strategy needing marginals on a detector without them") {
  ensure_model();
  REQUIRE(run("train --data " + path("x.csv") + " --k 2 --no-marginals --out " + path("nm.model")) == 0);
  CHECK(run("attribute --model " + path("nm.model") + " --strategy marg --row 1") == 4);
  CHECK(slurp("stderr.txt").find("cannot be computed") != std::string::npos);
  CHECK(run("attribute --model " + path("nm.model") + " --strategy sfe --row 1") == 4);
  CHECK(run("attribute --model " + path("nm.model") + " --strategy ash --row 1 --m 128") == 0);
}

TEST_CASE("bench writes reports") {
  ensure_model();
  REQUIRE(run("bench --data " + path("x.csv") + " --detector gmm --k 2 --strategies ash,ig,ksh,wksh,marg,sfe "
              "--danom 1 --trials 8 --m 128 --seed 7 --out " + path("r"), "table.txt") == 0);
  const auto csv = slurp("r.csv");
  CHECK(csv.rfind("strategy,detector,metric,value,n_trials,seed\n", 0) == 0);
  CHECK(csv.find("wksh,gmm,mrr,") != std::string::npos);
  CHECK(fs::exists(path("r.trials.csv")));
  auto config = nlohmann::json::parse(slurp("r.config.json"));
  CHECK(config["gamma"] == 0.01);
  CHECK(config["trials"] == 8);
  CHECK(slurp("table.txt").find("hits@3") != std::string::npos);

  REQUIRE(run("bench --data " + path("x.csv") + " --k 2 --gamma-sweep 0.001,0.01,0.1,1,10 --trials 4 --m 64 --seed 7",
              "sweep.txt") == 0);
  const auto sweep = slurp("sweep.txt");
  for (const char* g : {"\n0.001 ", "\n0.01 ", "\n0.1 ", "\n1 ", "\n10 "}) CHECK(sweep.find(g) != std::string::npos);

  REQUIRE(run("bench --data " + path("x.csv") + " --k 2 --strategies marg --danom 3 --trials 6 --seed 7", "auc.txt") == 0);
  const auto auc = slurp("auc.txt");
  CHECK(auc.find("AUROC") != std::string::npos);
  CHECK(auc.find("MRR") == std::string::npos);
}

TEST_CASE("config file with flag overrides") {
  ensure_model();
  std::ofstream(path("run.cfg")) << "# defaults for a quick run\ntrials = 5\nstrategies=marg\ndanom=2\n";
  REQUIRE(run("bench --config " + path("run.cfg") + " --data " + path("x.csv") + " --k 2 --trials 3", "cfg.txt") == 0);
  const auto out = slurp("cfg.txt");
  CHECK(out.find("# trials = 3") != std::string::npos);
  CHECK(out.find("# danom = 2") != std::string::npos);
  CHECK(out.find("# strategies = marg") != std::string::npos);
  CHECK(run("bench --config " + path("absent.cfg") + " --data " + path("x.csv")) == 2);
}
