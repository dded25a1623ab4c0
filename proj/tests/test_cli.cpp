#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dtmgp/model_io.hpp"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
};

std::string work(const std::string& name) { return std::string(DTMGP_WORK_DIR) + "/" + name; }

Result run(const std::string& args) {
  fs::create_directories(DTMGP_WORK_DIR);
  const std::string cmd = std::string(DTMGP_CLI_PATH) + " " + args + " 2>" + work("stderr.txt");
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& text) {
  fs::create_directories(DTMGP_WORK_DIR);
  std::ofstream(path, std::ios::binary) << text;
}

const char* kConfig = R"(seed = 11
input_dim = 2
layers = 2
layer1.out_width = 1
layer1.level = 3
layer1.kernel = laplace:0.5
layer2.out_width = 1
layer2.level = 4
layer2.kernel = laplace:1
interlayer = logistic
train.steps = 20
train.mc_samples = 2
)";

std::string data_table() {
  std::ostringstream s;
  s.precision(17);
  for (int i = 0; i < 25; ++i) {
    const double a = (i % 5 + 0.5) / 5.0, b = (i / 5 + 0.3) / 5.0;
    s << a << ',' << b << ',' << a * b + 0.1 * ((i * 7) % 3) << '\n';
  }
  return s.str();
}

TEST(Cli, GridListsPointsInOrder) {
  const auto r = run("grid --dim 2 --level 2");
  ASSERT_EQ(r.code, 0);
  std::istringstream in(r.out);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[1], "0,1,1,1,1,0.5,0.5");
  EXPECT_EQ(rows[2], "1,2,1,1,1,0.25,0.5");
  EXPECT_EQ(rows[4], "3,1,2,1,1,0.5,0.25");
  EXPECT_EQ(run("grid --dim 2 --level 2 --format json").code, 0);
}

TEST(Cli, CholeskyTripletsParse) {
  const auto r = run("chol --kernel laplace:1 --dim 2 --level 3");
  ASSERT_EQ(r.code, 0);
  const auto t = dtmgp::parse_triplets(r.out);
  EXPECT_EQ(t.matrix.order(), dtmgp::sparse_grid_size(3, 2));
  EXPECT_EQ(t.level, 3);
}

TEST(Cli, FeaturesAtExamplePoint) {
  const auto r = run("features --dim 2 --level 2 --at 0.814723686393179,0.905791937075619");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("# length 5 nnz 3"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("0 0.4865"), std::string::npos) << r.out;
}

TEST(Cli, KsOfTwoFiles) {
  write_file(work("a.txt"), "1\n2\n");
  write_file(work("b.txt"), "1.5\n2.5\n");
  const auto r = run("ks --a " + work("a.txt") + " --b " + work("b.txt"));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "0.5\n");
}

TEST(Cli, PriorSamplesReproducible) {
  const auto a = run("sample-prior --dim 2 --level 3 --lattice 4 --samples 3 --seed 5");
  const auto b = run("sample-prior --dim 2 --level 3 --lattice 4 --samples 3 --seed 5");
  const auto c = run("sample-prior --dim 2 --level 3 --lattice 4 --samples 3 --seed 6");
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, c.out);
  EXPECT_EQ(dtmgp::parse_table(a.out).rows(), 16u);
}

TEST(Cli, VarianceGapTable) {
  const auto r = run("variance-gap --dim 1 --level 2 --max-level 4 --lattice 100");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("level,m,sup_gap\n2,3,", 0), 0u) << r.out;
}

TEST(Cli, TrainIsReproducibleAndResumable) {
  write_file(work("run.cfg"), kConfig);
  write_file(work("data.csv"), data_table());
  const std::string base = "train --config " + work("run.cfg") + " --data " + work("data.csv");
  ASSERT_EQ(run(base + " --out " + work("m1.txt") + " --trace " + work("trace.csv")).code, 0);
  ASSERT_EQ(run(base + " --out " + work("m2.txt")).code, 0);
  EXPECT_EQ(slurp(work("m1.txt")), slurp(work("m2.txt")));
  ASSERT_EQ(run(base + " --out " + work("m3.txt") + " --seed 12").code, 0);
  EXPECT_NE(slurp(work("m1.txt")), slurp(work("m3.txt")));
  EXPECT_EQ(slurp(work("trace.csv")).rfind("step,", 0), 0u);

  ASSERT_EQ(run(base + " --out " + work("half.txt") + " --steps 8").code, 0);
  ASSERT_EQ(run("train --resume " + work("half.txt") + " --data " + work("data.csv") + " --steps 12 --out " +
                work("resumed.txt"))
                .code,
            0);
  const auto full = dtmgp::load_model(work("m1.txt"));
  const auto resumed = dtmgp::load_model(work("resumed.txt"));
  EXPECT_EQ(resumed.params, full.params);
  EXPECT_EQ(resumed.optimizer, full.optimizer);
}

TEST(Cli, EvaluateWritesReport) {
  write_file(work("run.cfg"), kConfig);
  write_file(work("data.csv"), data_table());
  ASSERT_EQ(run("train --config " + work("run.cfg") + " --data " + work("data.csv") + " --out " + work("em.txt")).code, 0);
  const auto r = run("evaluate --model " + work("em.txt") + " --ntest 4 --nsamples 10 --reps 2 --seed 3 --steps 3");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("\"trained\""), std::string::npos);
  EXPECT_NE(r.out.find("\"D_bar\""), std::string::npos);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("grid --dim 2").code, 2);
  EXPECT_EQ(run("grid --level 2 --bogus").code, 2);
  EXPECT_EQ(run("features --dim 2 --level 2 --at 0.5").code, 2);
  EXPECT_EQ(run("chol --kernel gaussian --dim 1 --level 2").code, 2);

  write_file(work("bad.cfg"), std::string(kConfig) + "layer2.in_width = 3\n");
  write_file(work("data.csv"), data_table());
  EXPECT_EQ(run("train --config " + work("bad.cfg") + " --data " + work("data.csv") + " --out " + work("x.txt")).code, 2);

  write_file(work("run.cfg"), kConfig);
  EXPECT_EQ(run("train --config " + work("run.cfg") + " --data " + work("missing.csv") + " --out " + work("x.txt")).code, 4);
  write_file(work("ragged.csv"), "0.1,0.2,0.3\n0.4,0.5\n");
  EXPECT_EQ(run("train --config " + work("run.cfg") + " --data " + work("ragged.csv") + " --out " + work("x.txt")).code, 4);

  ASSERT_EQ(run("train --config " + work("run.cfg") + " --data " + work("data.csv") + " --out " + work("ok.txt") +
                " --steps 2")
                .code,
            0);
  const auto text = slurp(work("ok.txt"));
  write_file(work("trunc.txt"), text.substr(0, text.size() / 2));
  EXPECT_EQ(run("train --resume " + work("trunc.txt") + " --data " + work("data.csv") + " --out " + work("x.txt")).code, 4);

  write_file(work("nan.csv"), data_table() + "0.5,0.5,nan\n");
  EXPECT_EQ(run("train --config " + work("run.cfg") + " --data " + work("nan.csv") + " --out " + work("x.txt")).code, 3);
}

}  // namespace
