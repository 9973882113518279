// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "test_helpers.hpp"
#include "vptrunc/io.hpp"

namespace fs = std::filesystem;
using vptrunc::json;

namespace {

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() /
          ("vptrunc_cli_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter()++));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string path(const std::string& name) const {
    return (dir / name).string();
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

int run(const std::string& args) {
  const std::string cmd =
      std::string(VPTRUNC_CLI_PATH) + " " + args + " >/dev/null 2>/dev/null";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("gen-data writes a dataset and sidecar", "[cli]") {
  Workspace ws;
  const int code = run("gen-data --family gmm --n 600 --d 8 --seed 5 --out " +
                       ws.path(""));
  CHECK(code == 0);
  const auto m = vptrunc::read_dataset_csv(ws.path("dataset.csv"));
  CHECK(m.rows == 600);
  CHECK(m.cols == 8);
  const json meta = vptrunc::read_json(ws.path("dataset.meta.json"));
  CHECK(meta.at("n") == 600);
  CHECK(meta.at("config").at("seed") == 5);
}

TEST_CASE("binary format round trips through the tools", "[cli]") {
  Workspace ws;
  REQUIRE(run("gen-data --family smooth-field --n 300 --d 16 --format bin"
              " --out " + ws.path("")) == 0);
  REQUIRE(fs::exists(ws.path("dataset.tdfd")));
  CHECK(run("stats --input " + ws.path("dataset.tdfd") + " --out " +
            ws.path("")) == 0);
  const json st = vptrunc::read_json(ws.path("stats.json"));
  CHECK(st.at("centered") == true);  // smooth fields are centered at birth
}

TEST_CASE("config file values apply and flags override them", "[cli]") {
  Workspace ws;
  {
    std::ofstream os(ws.path("cfg.json"));
    os << R"({"n": 500, "d": 4, "family": "gmm"})";
  }
  REQUIRE(run("gen-data --config " + ws.path("cfg.json") + " --out " +
              ws.path("a")) == 0);
  CHECK(vptrunc::read_json(ws.path("a/dataset.meta.json")).at("n") == 500);

  REQUIRE(run("gen-data --config " + ws.path("cfg.json") + " --n 200 --out " +
              ws.path("b")) == 0);
  const json meta = vptrunc::read_json(ws.path("b/dataset.meta.json"));
  CHECK(meta.at("n") == 200);
  CHECK(meta.at("config").at("n") == 200);
  CHECK(meta.at("config").at("d") == 4);
}

TEST_CASE("parameter errors exit with code 2", "[cli]") {
  Workspace ws;
  CHECK(run("gen-data --family nope --out " + ws.path("")) == 2);
  CHECK(run("gen-data --format xml --out " + ws.path("")) == 2);
  CHECK(run("definitely-not-a-subcommand") == 2);
  CHECK(run("gen-data --family gmm --n 600 --d 8 --format json --out " +
            ws.path("")) == 2);  // datasets are csv or bin only
}

TEST_CASE("data errors exit with code 3", "[cli]") {
  Workspace ws;
  CHECK(run("stats --input " + ws.path("missing.csv") + " --out " +
            ws.path("")) == 3);
  {
    std::ofstream os(ws.path("broken.csv"));
    os << "text\n1,2\n";
  }
  CHECK(run("stats --input " + ws.path("broken.csv") + " --out " +
            ws.path("")) == 3);
}

TEST_CASE("stats --center writes the centered dataset", "[cli]") {
  Workspace ws;
  REQUIRE(run("gen-data --family gmm --n 400 --d 8 --out " + ws.path("")) == 0);
  REQUIRE(run("stats --input " + ws.path("dataset.csv") + " --center --out " +
              ws.path("")) == 0);
  const auto centered = vptrunc::read_dataset_csv(ws.path("centered.csv"));
  for (std::size_t i = 0; i < centered.rows; ++i) {
    auto r = centered.row(i);
    const double mu = std::accumulate(r.begin(), r.end(), 0.0) / 8.0;
    CHECK(std::abs(mu) < 1e-12);
  }
}

TEST_CASE("tstar emits a decision and honors --strict", "[cli]") {
  Workspace ws;
  REQUIRE(run("gen-data --family gmm --n 6000 --d 8 --seed 3 --out " +
              ws.path("")) == 0);
  CHECK(run("tstar --input " + ws.path("dataset.csv") + " --stride 20 --out " +
            ws.path("")) == 0);
  const json dec = vptrunc::read_json(ws.path("decision.json"));
  CHECK(dec.at("fallback") == false);
  CHECK(dec.at("t_star").get<int>() < 1000);
  CHECK(dec.at("probes").size() > 10);

  // Heavy structure never passes; --strict turns that into exit code 4.
  vptrunc::Matrix stubborn(600, 8);
  vptrunc::Rng rng(9);
  for (std::size_t i = 0; i < stubborn.rows; ++i)
    for (std::size_t j = 0; j < stubborn.cols; ++j)
      stubborn(i, j) = (j % 2 == 0 ? 10.0 : -10.0) + 0.01 * rng.normal();
  vptrunc::write_dataset_csv(ws.path("stubborn.csv"), stubborn);
  CHECK(run("tstar --input " + ws.path("stubborn.csv") + " --strict --out " +
            ws.path("s")) == 4);
  CHECK(run("tstar --input " + ws.path("stubborn.csv") + " --out " +
            ws.path("s")) == 0);
}

TEST_CASE("analyze writes curve json and csv", "[cli]") {
  Workspace ws;
  REQUIRE(run("gen-data --family gmm --n 12000 --d 8 --seed 13 --out " +
              ws.path("")) == 0);
  REQUIRE(run("analyze --input " + ws.path("dataset.csv") +
              " --probe-stride 250 --out " + ws.path("")) == 0);
  const json j = vptrunc::read_json(ws.path("gaussianity.json"));
  CHECK(j.at("points").size() == 4);
  std::ifstream csv(ws.path("gaussianity.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header.find("t,mean_D,pass_fraction") == 0);
}

TEST_CASE("sample writes a batch with provenance", "[cli]") {
  Workspace ws;
  REQUIRE(run("sample --denoiser zero --n 200 --d 4 --T 100"
              " --beta-start 0.001 --beta-end 0.05 --seed 21 --out " +
              ws.path("")) == 0);
  const auto batch = vptrunc::read_dataset_csv(ws.path("samples.csv"));
  CHECK(batch.rows == 200);
  CHECK(batch.cols == 4);
  const json meta = vptrunc::read_json(ws.path("samples.meta.json"));
  CHECK(meta.at("start_step") == 100);
  CHECK(meta.at("denoiser_id") == "zero");
  CHECK(meta.at("schedule_fingerprint").get<std::string>().size() == 16);
}

TEST_CASE("bench runs the full pipeline", "[cli]") {
  Workspace ws;
  REQUIRE(run("bench --family gmm --n 6000 --d 8 --sample-n 1000"
              " --timing-reps 1 --stride 50 --seed 31 --out " +
              ws.path("")) == 0);
  const json rep = vptrunc::read_json(ws.path("benchmark_report.json"));
  CHECK(rep.at("decision").at("fallback") == false);
  CHECK(rep.at("compare").at("speedup").get<double>() > 1.0);
  CHECK(rep.at("schedule_fingerprint") ==
        rep.at("decision").at("schedule_fingerprint"));
  CHECK(fs::exists(ws.path("decision.json")));
  CHECK(fs::exists(ws.path("variance_path.json")));
  CHECK(fs::exists(ws.path("stats.json")));
}
