#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const char* kCli = VLE2_CLI_PATH;

struct CliDir {
  fs::path dir;
  CliDir() {
    dir = fs::temp_directory_path() / ("vle2_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    nlohmann::json cfg;
    cfg["model"] = {{"d", 32}, {"blocks", 1}, {"heads", 2}};
    cfg["optim"] = {{"peak_lr", 0.005}, {"warmup_steps", 5}, {"total_steps", 40},
                    {"batch_size", 4}};
    cfg["corpus"] = {{"n_utts", 24}, {"len_lo", 6}, {"len_hi", 8}};
    cfg["seed"] = 3;
    std::ofstream((dir / "cfg.json").string()) << cfg.dump(2);
  }
  ~CliDir() { fs::remove_all(dir); }
  std::string p(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args) {
  const std::string cmd = std::string(kCli) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("usage errors exit 1, data errors exit 2") {
  CliDir d;
  CHECK(run("definitely-not-a-subcommand") == 1);
  CHECK(run("gen-data --bogus-flag x") == 1);
  CHECK(run("gen-data --config " + d.p("cfg.json")) == 1);  // --out missing
  CHECK(run("gen-data --config " + d.p("nope.json") + " --out " + d.p("c.jsonl")) == 2);
  std::ofstream(d.p("bad.json")) << "{\"wrld\": {}}";
  CHECK(run("gen-data --config " + d.p("bad.json") + " --out " + d.p("c.jsonl")) == 2);
}

TEST_CASE("gen-data is byte-deterministic for a fixed seed") {
  CliDir d;
  const std::string base = "gen-data --config " + d.p("cfg.json") + " --seed 7 ";
  REQUIRE(run(base + "--out " + d.p("a.jsonl")) == 0);
  REQUIRE(run(base + "--out " + d.p("b.jsonl")) == 0);
  CHECK(slurp(d.p("a.jsonl")) == slurp(d.p("b.jsonl")));
  CHECK(slurp(d.p("a.jsonl")).size() > 100);
  CHECK(fs::exists(d.p("a.jsonl") + ".runlog.json"));
  // a different seed changes the bytes
  REQUIRE(run("gen-data --config " + d.p("cfg.json") + " --seed 8 --out " + d.p("c.jsonl")) == 0);
  CHECK(slurp(d.p("a.jsonl")) != slurp(d.p("c.jsonl")));
}

TEST_CASE("train, synth, eval and sweep run end to end at toy scale") {
  CliDir d;
  const std::string cfg = " --config " + d.p("cfg.json");
  REQUIRE(run("gen-data" + cfg + " --out " + d.p("train.jsonl")) == 0);
  REQUIRE(run("gen-data" + cfg + " --split eval --n 4 --out " + d.p("eval.jsonl")) == 0);

  REQUIRE(run("train-ar" + cfg + " --corpus " + d.p("train.jsonl") + " --group-size 2 --steps 30"
              " --out " + d.p("ar.ckpt")) == 0);
  REQUIRE(run("train-nar" + cfg + " --corpus " + d.p("train.jsonl") + " --steps 30 --out " +
              d.p("nar.ckpt")) == 0);
  CHECK(fs::exists(d.p("ar.ckpt.train.csv")));

  // group-size mismatch between checkpoint and request is a model error
  CHECK(run("synth" + cfg + " --ar " + d.p("ar.ckpt") + " --nar " + d.p("nar.ckpt") +
            " --corpus " + d.p("eval.jsonl") + " --group-size 4 --out " + d.p("s.json")) == 2);

  REQUIRE(run("synth" + cfg + " --ar " + d.p("ar.ckpt") + " --nar " + d.p("nar.ckpt") +
              " --corpus " + d.p("eval.jsonl") + " --samples 5 --top-p 0.5 --out " +
              d.p("synth.json")) == 0);
  nlohmann::json sj = nlohmann::json::parse(slurp(d.p("synth.json")));
  CHECK(sj.at("samples").size() == 5);
  CHECK(sj.at("best").contains("codes"));
  CHECK(sj.at("metric_wise").contains("sim"));

  REQUIRE(run("eval" + cfg + " --ar " + d.p("ar.ckpt") + " --nar " + d.p("nar.ckpt") +
              " --corpus " + d.p("eval.jsonl") + " --out " + d.p("eval.json")) == 0);
  nlohmann::json ej = nlohmann::json::parse(slurp(d.p("eval.json")));
  CHECK(ej.contains("mean_ter"));

  const std::string sweep_cmd = "sweep" + cfg + " --ar " + d.p("ar.ckpt") + " --nar " +
                                d.p("nar.ckpt") + " --corpus " + d.p("eval.jsonl") +
                                " --top-p 0.0:0.8:0.1 --seeds 1 --ras on";
  REQUIRE(run(sweep_cmd + " --out " + d.p("sweep.csv")) == 0);
  const std::string csv = slurp(d.p("sweep.csv"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);  // header + 9 v-rows
  REQUIRE(run(sweep_cmd + " --out " + d.p("sweep2.csv")) == 0);
  CHECK(csv == slurp(d.p("sweep2.csv")));  // logged command reproduces bytes

  // requesting a G with no checkpoint names the missing size
  CHECK(run(sweep_cmd + " --group-sizes 2,4 --out " + d.p("sweep3.csv")) == 2);
}
