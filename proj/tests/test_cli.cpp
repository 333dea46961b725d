// tests/test_cli.cpp

// Copyright 2026  DPIF authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const char* cli_path() { return DPIF_CLI_PATH; }

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "dpif_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args, const std::string& tag) {
  fs::path out_file = fs::temp_directory_path() / "dpif_cli_tests" /
                      ("out_" + tag + ".txt");
  fs::create_directories(out_file.parent_path());
  std::string cmd = std::string(cli_path()) + " " + args + " > " +
                    out_file.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(status);
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string desk_flags() {
  return "--set family=tiny --set truncation=block3_pool "
         "--set embed_dim=16 --set phase1_epochs=1 --set phase2_epochs=2 "
         "--set synth.num_subjects=6 --set synth.num_train_subjects=4 "
         "--set synth.images_per_cell=1 --set synth.yaw_grid=-45,0,45 "
         "--set eval.probes=P_TP0";
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("missing required flags exit with the usage code") {
  RunResult r = run_cli("synth", "usage");
  CHECK(r.exit_code == 2);
  RunResult h = run_cli("--help", "help");
  CHECK(h.exit_code == 0);
  RunResult unknown = run_cli("synth --out /tmp/x --frobnicate", "unknown");
  CHECK(unknown.exit_code == 2);
}

TEST_CASE("synth is seed-deterministic and echoes its config") {
  fs::path a = scratch("synth_a");
  fs::path b = scratch("synth_b");
  RunResult ra = run_cli(desk_flags() + " synth --seed 21 --out " + a.string(),
                         "synth_a");
  REQUIRE(ra.exit_code == 0);
  CHECK(ra.output.find("# resolved configuration") != std::string::npos);
  CHECK(ra.output.find("synth.seed = 21") != std::string::npos);
  RunResult rb = run_cli(desk_flags() + " synth --seed 21 --out " + b.string(),
                         "synth_b");
  REQUIRE(rb.exit_code == 0);
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    fs::path rel = fs::relative(entry.path(), a);
    CHECK(file_bytes(entry.path()) == file_bytes(b / rel));
  }
}

TEST_CASE("train/eval pipeline over the CLI") {
  fs::path data = scratch("pipe_data");
  REQUIRE(run_cli(desk_flags() + " synth --out " + data.string(), "pipe_synth")
              .exit_code == 0);
  fs::path train_out = scratch("pipe_train");
  RunResult rt = run_cli(desk_flags() + " train --lambda 0 --data " +
                             data.string() + " --out " + train_out.string(),
                         "pipe_train");
  REQUIRE(rt.exit_code == 0);
  CHECK(rt.output.find("lambda = 0") != std::string::npos);  // config echo
  fs::path ckpt = train_out / "checkpoint.dpif";
  REQUIRE(fs::exists(ckpt));
  fs::path eval_out = scratch("pipe_eval");
  RunResult re = run_cli("eval --checkpoint " + ckpt.string() + " --data " +
                             data.string() + " --out " + eval_out.string() +
                             " --gallery G_VB0- --probes P_TP0",
                         "pipe_eval");
  REQUIRE(re.exit_code == 0);
  CHECK(re.output.find("AUC(%)") != std::string::npos);
  // evaluating the same checkpoint twice gives identical reports
  fs::path eval_out2 = scratch("pipe_eval2");
  RunResult re2 = run_cli("eval --checkpoint " + ckpt.string() + " --data " +
                              data.string() + " --out " + eval_out2.string() +
                              " --gallery G_VB0- --probes P_TP0",
                          "pipe_eval2");
  REQUIRE(re2.exit_code == 0);
  CHECK(file_bytes(eval_out / "verification_table.csv") ==
        file_bytes(eval_out2 / "verification_table.csv"));
  // re-running training from the echoed config reproduces the checkpoint
  fs::path train_out2 = scratch("pipe_train2");
  RunResult rt2 = run_cli("--config " + (train_out / "config_echo.cfg").string() +
                              " train --data " + data.string() + " --out " +
                              train_out2.string(),
                          "pipe_train2");
  REQUIRE(rt2.exit_code == 0);
  CHECK(file_bytes(ckpt) == file_bytes(train_out2 / "checkpoint.dpif"));
}

TEST_CASE("resume and score-matrix verbs over the CLI") {
  fs::path data = scratch("resume_data");
  REQUIRE(run_cli(desk_flags() + " synth --out " + data.string(),
                  "resume_synth")
              .exit_code == 0);
  // straight 2-epoch run
  fs::path full = scratch("resume_full");
  REQUIRE(run_cli(desk_flags() + " train --data " + data.string() + " --out " +
                      full.string(),
                  "resume_full")
              .exit_code == 0);
  // 1 epoch, then resume to 2
  fs::path part = scratch("resume_part");
  REQUIRE(run_cli(desk_flags() + " --set phase2_epochs=1 train --data " +
                      data.string() + " --out " + part.string(),
                  "resume_part")
              .exit_code == 0);
  fs::path cont = scratch("resume_cont");
  REQUIRE(run_cli(desk_flags() + " train --data " + data.string() + " --out " +
                      cont.string() + " --resume " +
                      (part / "checkpoint.dpif").string(),
                  "resume_cont")
              .exit_code == 0);
  CHECK(file_bytes(full / "checkpoint.dpif") ==
        file_bytes(cont / "checkpoint.dpif"));
  // score-matrix export
  fs::path sm = scratch("resume_sm") / "scores.csv";
  RunResult rs = run_cli("score-matrix --checkpoint " +
                             (full / "checkpoint.dpif").string() + " --data " +
                             data.string() + " --out " + sm.string() +
                             " --gallery G_VB0- --probes P_TP0",
                         "resume_sm");
  REQUIRE(rs.exit_code == 0);
  std::ifstream in(sm);
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("probe_id,", 0) == 0);
}

TEST_CASE("runtime failures exit 1 with a message") {
  RunResult r = run_cli("train --data /no/such/dir --out /tmp/dpif_cli_x",
                        "runtime_fail");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("error:") != std::string::npos);
}

TEST_CASE("info prints the shape ledger") {
  RunResult r = run_cli("info", "info");
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("resnet50 block_4e -> 14x14x1024") != std::string::npos);
  CHECK(r.output.find("vgg16 block2_pool -> 56x56x128") != std::string::npos);
}

TEST_CASE("config files resolve through DPIF_CONFIG_DIR") {
  fs::path dir = scratch("cfg_dir");
  std::ofstream(dir / "shared.cfg") << "embed_dim = 32\n";
  std::string cmd = "DPIF_CONFIG_DIR=" + dir.string() + " " + cli_path() +
                    " --config shared.cfg info > " +
                    (dir / "out.txt").string() + " 2>&1";
  int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 0);
  std::string out = file_bytes(dir / "out.txt");
  CHECK(out.find("embed_dim = 32") != std::string::npos);
}
