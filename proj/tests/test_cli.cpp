#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "a2pr/dataset.hpp"
#include "a2pr/evaluate.hpp"
#include "a2pr/format.hpp"
#include "a2pr/trainer.hpp"

using namespace a2pr;
namespace fs = std::filesystem;

namespace {

fs::path work_root() {
  static const fs::path root = [] {
    const fs::path p = fs::temp_directory_path() / "a2pr_cli_work";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  const char* bin = std::getenv("A2PR_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "A2PR_BIN must point at the CLI binary");
  static int call_index = 0;
  const fs::path capture = work_root() / ("out_" + std::to_string(call_index++) + ".txt");
  const std::string cmd = std::string(bin) + " " + args + " > " + capture.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) *output = read_file(capture);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

// Pre-bank generous score anchors so CLI evaluation never spends time on
// Monte-Carlo anchor runs inside the test.
std::string anchor_dir() {
  static const std::string dir = [] {
    const fs::path d = work_root() / "anchors";
    fs::create_directories(d);
    const uint64_t hash = env_config_hash(MazeConfig::defaults());
    std::ofstream out(d / ("anchors_" + fmt_u64_hex(hash) + ".json"));
    out << "{\"j_random\": 0.2, \"j_expert\": 4.0, \"episodes\": 1000000}\n";
    return d.string();
  }();
  return dir;
}

std::string dataset_path() {
  static const std::string path = [] {
    const std::string p = (work_root() / "cli_ds.bin").string();
    std::string log;
    const int code = run_cli(
        "gen-data --recipe expert:g0:0.05,expert:g1:0.45,expert:g2:0.5 "
        "--n 2000 --seed 1 --out " + p, &log);
    REQUIRE(code == 0);
    return p;
  }();
  return path;
}

// A finished 4-step training run used by eval/true-q/mean-adv/export-traj.
std::string trained_run_dir() {
  static const std::string dir = [] {
    const fs::path run = work_root() / "cli_run";
    const fs::path cfg = work_root() / "cli_run.cfg";
    std::ofstream out(cfg);
    out << "dataset_path = " << dataset_path() << "\n"
        << "checkpoint_dir = " << run.string() << "\n"
        << "total_steps = 2\n"
        << "batch_size = 16\n"
        << "eval_every = 2\n"
        << "eval_episodes = 2\n"
        << "seed = 3\n"
        << "q_hidden_dim = 8\nq_hidden_layers = 1\n"
        << "v_hidden_dim = 8\nv_hidden_layers = 1\n"
        << "actor_hidden_dim = 8\nactor_hidden_layers = 1\n"
        << "vae_hidden_dim = 8\nvae_hidden_layers = 1\n"
        << "true_q_states = 2\n"
        << "anchor_episodes = 2\n"
        << "anchor_dir = " << anchor_dir() << "\n"
        << "record_eval_traj = 1\n";
    out.close();
    std::string log;
    // The flag overrides the config file's 2 steps.
    const int code =
        run_cli("train --config " + cfg.string() + " --total_steps 4", &log);
    REQUIRE(code == 0);
    REQUIRE(log.find("trained a2pr to step 4") != std::string::npos);
    return run.string();
  }();
  return dir;
}

}  // namespace

TEST_CASE("help exits cleanly and a missing subcommand does not") {
  std::string help;
  CHECK(run_cli("--help", &help) == 0);
  CHECK(help.find("gen-data") != std::string::npos);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("gen-data --recipe expert:g0:1.0") == 2);  // --out is required
}

TEST_CASE("gen-data writes the requested dataset deterministically") {
  const OfflineDataset d = load(dataset_path());
  CHECK(d.n == 2000);
  CHECK(d.state_dim == 4);
  CHECK(d.action_dim == 2);

  const std::string again = (work_root() / "cli_ds_again.bin").string();
  CHECK(run_cli("gen-data --recipe expert:g0:0.05,expert:g1:0.45,expert:g2:0.5 "
                "--n 2000 --seed 1 --out " + again) == 0);
  CHECK(read_file(dataset_path()) == read_file(again));

  const std::string other = (work_root() / "cli_ds_other.bin").string();
  CHECK(run_cli("gen-data --recipe expert:g0:0.05,expert:g1:0.45,expert:g2:0.5 "
                "--n 2000 --seed 2 --out " + other) == 0);
  CHECK(read_file(dataset_path()) != read_file(other));
}

TEST_CASE("gen-data rejects malformed recipes with exit code 2") {
  const std::string out = (work_root() / "cli_bad.bin").string();
  std::string log;
  CHECK(run_cli("gen-data --recipe expert:g0:0.9 --n 100 --out " + out, &log) == 2);
  CHECK(log.find("error:") != std::string::npos);
  CHECK(run_cli("gen-data --recipe pid:g0:1.0 --n 100 --out " + out) == 2);
  CHECK(run_cli("gen-data --recipe expert:g9:1.0 --n 100 --out " + out) == 2);
  CHECK(run_cli("gen-data --recipe expert:zero:1.0 --n 100 --out " + out) == 2);
}

TEST_CASE("train honors config files, flag overrides, and resume") {
  const std::string run = trained_run_dir();  // trains to step 4 via override
  const auto rows = read_metrics_csv(run + "/metrics.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].step == 2);
  CHECK(rows[1].step == 4);

  const fs::path cfg = work_root() / "cli_run.cfg";
  std::string log;
  const int code = run_cli("train --config " + cfg.string() + " --total_steps 6 --resume " +
                           run, &log);
  CHECK(code == 0);
  CHECK(log.find("trained a2pr to step 6") != std::string::npos);
  const auto extended = read_metrics_csv(run + "/metrics.csv");
  REQUIRE(extended.size() == 3);
  CHECK(extended[2].step == 6);

  std::ifstream in(fs::path(run) / "checkpoint" / "manifest.json");
  nlohmann::json manifest;
  in >> manifest;
  CHECK(manifest.at("step").get<long>() == 6);
}

TEST_CASE("train rejects an unknown variant with exit code 2") {
  std::string log;
  const int code = run_cli("train --dataset_path " + dataset_path() +
                           " --checkpoint_dir " + (work_root() / "x").string() +
                           " --variant sac --total_steps 1", &log);
  CHECK(code == 2);
  CHECK(log.find("unknown variant") != std::string::npos);
}

TEST_CASE("train reports a missing dataset as a runtime failure") {
  std::string log;
  const int code = run_cli("train --dataset_path /nonexistent_a2pr.bin --checkpoint_dir " +
                           (work_root() / "y").string() + " --total_steps 1", &log);
  CHECK(code == 1);
  CHECK(log.find("error:") != std::string::npos);
}

TEST_CASE("eval prints a report and mirrors it to a file") {
  const std::string run = trained_run_dir();
  const std::string out = (work_root() / "eval_report.csv").string();
  std::string stdout_a, stdout_b;
  const std::string cmd = "eval --ckpt " + run + " --episodes 3 --seed 5 --anchor-dir " +
                          anchor_dir() + " --out " + out;
  CHECK(run_cli(cmd, &stdout_a) == 0);
  CHECK(run_cli(cmd, &stdout_b) == 0);
  CHECK(stdout_a == stdout_b);  // evaluation streams derive from the seed
  CHECK(stdout_a.find("episodes,return_mean,return_std,normalized_score,"
                      "goal0_hit_fraction,goal1_hit_fraction,goal2_hit_fraction,"
                      "length_mean,length_min,length_max") == 0);
  CHECK(stdout_a.find("\n3,") != std::string::npos);
  CHECK(read_file(out) == stdout_a);
  CHECK(run_cli("eval --ckpt /nonexistent_a2pr_dir --episodes 1") == 1);
}

TEST_CASE("true-q reports the estimate/rollout pair deterministically") {
  const std::string run = trained_run_dir();
  std::string a, b;
  const std::string cmd = "true-q --ckpt " + run + " --n-states 3 --seed 7";
  CHECK(run_cli(cmd, &a) == 0);
  CHECK(run_cli(cmd, &b) == 0);
  CHECK(a == b);
  CHECK(a.find("states,est_q_mean,true_q_mean,gap") == 0);
  CHECK(a.find("\n3,") != std::string::npos);
}

TEST_CASE("mean-adv scores several checkpoints on the same states") {
  const std::string run = trained_run_dir();
  std::string log;
  const int code = run_cli("mean-adv --ckpts first=" + run + ",second=" + run +
                           " --dataset " + dataset_path() + " --n-states 5 --seed 2", &log);
  CHECK(code == 0);
  std::stringstream ss(log);
  std::string header, row1, row2;
  std::getline(ss, header);
  std::getline(ss, row1);
  std::getline(ss, row2);
  CHECK(header == "method,mean_adv_policy,mean_adv_data");
  CHECK(row1.substr(0, 6) == "first,");
  CHECK(row2.substr(0, 7) == "second,");
  // Identical checkpoints on shared states must agree on every number.
  CHECK(row1.substr(6) == row2.substr(7));

  std::string warn;
  CHECK(run_cli("mean-adv --ckpts first=" + run + " --dataset " + dataset_path() +
                " --n-states 999999 --seed 2", &warn) == 0);
  CHECK(warn.find("exceeds dataset size") != std::string::npos);

  CHECK(run_cli("mean-adv --ckpts nodelim --dataset " + dataset_path()) == 2);
}

TEST_CASE("export-traj rolls out a checkpoint") {
  const std::string run = trained_run_dir();
  const std::string out = (work_root() / "rollout.csv").string();
  std::string log;
  CHECK(run_cli("export-traj --ckpt " + run + " --episodes 2 --seed 4 --out " + out,
                &log) == 0);
  const std::string csv = read_file(out);
  CHECK(csv.find("episode,t,x,y,vx,vy,fx,fy,reward,done") == 0);
  CHECK(csv.find("\n0,0,") != std::string::npos);  // episode 0 starts at t = 0
  CHECK(csv.find("\n1,0,") != std::string::npos);  // episode 1 present
}

TEST_CASE("export-traj filters a recorded trace by training step") {
  const std::string run = trained_run_dir();
  const std::string trace = run + "/eval_traj.csv";
  REQUIRE(fs::exists(trace));

  const std::string out = (work_root() / "window.csv").string();
  CHECK(run_cli("export-traj --trace " + trace + " --window 4:4 --out " + out) == 0);
  const std::string csv = read_file(out);
  CHECK(csv.find("episode,t,x,y,vx,vy,fx,fy,reward,done\n") == 0);
  CHECK(csv.find("\n0,0,") != std::string::npos);  // step-4 rows survive
  // Rows from the step-2 evaluation would repeat (episode, t) pairs; the
  // filtered file must contain each pair at most once.
  std::stringstream ss(csv);
  std::string line;
  std::getline(ss, line);  // header
  int zero_zero = 0;
  while (std::getline(ss, line))
    if (line.rfind("0,0,", 0) == 0) ++zero_zero;
  CHECK(zero_zero == 1);

  const std::string empty_out = (work_root() / "window_empty.csv").string();
  CHECK(run_cli("export-traj --trace " + trace + " --window 100:200 --out " + empty_out) == 0);
  CHECK(read_file(empty_out) == "episode,t,x,y,vx,vy,fx,fy,reward,done\n");

  CHECK(run_cli("export-traj --trace " + trace + " --window nonsense --out " + out) == 2);
  CHECK(run_cli("export-traj --out " + out) == 2);  // needs --ckpt or --trace
}
