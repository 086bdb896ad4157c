#include "distclass/csv.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path p = fs::temp_directory_path() / "distclass_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = "cd '" + workdir().string() + "' && '" + DISTCLASS_CLI + "' " + args +
                          " > out.txt 2> err.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read(const std::string& name) { return distclass::csv::read_file(workdir() / name); }

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

void make_dataset() {
  if (fs::exists(workdir() / "ds" / "manifest.json")) return;
  distclass::csv::write_file(workdir() / "toy.json",
                             R"({"d": 2, "n_dists": 18, "n_samples": 8, "sigma": [1, 1, 1],)"
                             R"( "u_range": [[0, 0.05], [0.3, 0.35], [0.6, 0.65]]})");
  REQUIRE(run("gen --spec toy.json --out ds --seed 3") == 0);
}

}  // namespace

TEST_CASE("cli gen, dist and embed") {
  make_dataset();
  CHECK(fs::exists(workdir() / "ds" / "manifest.json"));
  CHECK(run("dist --dataset ds --diss bures --out d.csv") == 0);
  const std::string d = read("d.csv");
  CHECK(first_line(d).rfind("id,", 0) == 0);
  std::size_t lines = 0;
  for (char c : d) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 19);
  CHECK(run("embed --dataset ds --diss mmd --templates per-class:2 --out e.csv") == 0);
  CHECK(first_line(read("e.csv")).find(",label") != std::string::npos);
}

TEST_CASE("cli train and eval") {
  make_dataset();
  for (const char* model : {"linear", "kernel", "grbf"}) {
    CHECK(run(std::string("train --dataset ds --diss bures --folds 3 --model ") + model +
              " --out model.json") == 0);
    CHECK(first_line(read("out.txt")) == "c,scale,cv_accuracy");
    CHECK(run("eval --model model.json --dataset ds --out pred.csv") == 0);
    CHECK(first_line(read("out.txt")) == "items,accuracy");
    CHECK(first_line(read("pred.csv")) == "item,truth,predicted");
  }
}

TEST_CASE("cli bench, concentration and goodness") {
  make_dataset();
  distclass::csv::write_file(
      workdir() / "bench.json",
      R"({"toy": {"d": 2, "n_dists": 12, "n_samples": 8, "sigma": [1, 1, 1],)"
      R"( "u_range": [[0, 0.05], [0.3, 0.35], [0.6, 0.65]]}, "n_test": 12,)"
      R"( "methods": ["bures+linear"], "trials": 1, "grid": {"c": [1], "folds": 3}})");
  CHECK(run("bench --spec bench.json --out b.csv") == 0);
  CHECK(first_line(read("b.csv")) ==
        "row,n,d,trial,method,c,scale,M,accuracy,accuracy_std,trials_ok,status,message");
  CHECK(first_line(read("b_timing.csv")) == "n,d,trial,diss,pairs,seconds,seconds_per_pair");

  distclass::csv::write_file(workdir() / "conc.json",
                             R"({"gaussian": {"mean": [0, 0], "covariance": [[1, 0], [0, 1]]},)"
                             R"( "n_grid": [10, 20], "eps_grid": [1]})");
  CHECK(run("concentration --spec conc.json --trials 5 --out c.csv") == 0);
  CHECK(first_line(read("c.csv")) ==
        "n,eps,freq_bures,bound_bures,exceeds_bures,freq_mmd,bound_mmd,exceeds_mmd");

  CHECK(run("goodness --dataset ds --diss bures --gamma 0,0.5 --out g.csv") == 0);
  CHECK(read("g.csv").rfind("gamma,epsilon_hat\n0,", 0) == 0);
}

TEST_CASE("cli user errors exit with 1") {
  make_dataset();
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("dist --dataset missing_dir") == 1);
  CHECK(run("dist --dataset ds --diss kl") == 1);
  CHECK(run("dist --dataset ds --reg -1") == 1);
  CHECK(run("train --dataset ds --model forest --out m.json") == 1);
  CHECK(run("eval --model missing.json --dataset ds") == 1);
  distclass::csv::write_file(workdir() / "broken.json", "{\"d\": ");
  CHECK(run("gen --spec broken.json --out x") == 1);
  CHECK(read("err.txt").find("broken.json") != std::string::npos);
  CHECK(run("--help") == 0);
}
