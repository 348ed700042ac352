#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fusetrack/io.hpp"
#include "fusetrack/stereo.hpp"

using namespace fusetrack;
using io::json;
namespace fs = std::filesystem;

namespace {

const fs::path kExe = FUSETRACK_EXE;

fs::path workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "fusetrack_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + kExe.string() + "' " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Exports a simulated scenario and returns its directory.
fs::path scenario(const std::string& name, int n_tags, std::uint64_t seed, double duration) {
  const auto dir = workdir() / name;
  fs::create_directories(dir);
  io::write_text(dir / "campaign.json",
                 json{{"configs", {{{"n_tags", n_tags}, {"seed", seed}, {"radius", 20.0}}}}}.dump());
  REQUIRE(run("sim --config '" + (dir / "campaign.json").string() + "' --export-scenario '" + dir.string() +
              "' --duration " + std::to_string(duration)) == 0);
  return dir;
}

std::string associate_args(const fs::path& dir, const fs::path& out, const std::string& extra = "") {
  return "associate --rfid '" + (dir / "rfid.csv").string() + "' --camera '" + (dir / "camera.csv").string() +
         "' --out '" + out.string() + "' " + extra;
}

}  // namespace

TEST_CASE("exported three-tag scenario associates correctly within ten steps") {
  const auto dir = scenario("three", 3, 7, 12.0);
  const auto out = dir / "report.json";
  REQUIRE(run(associate_args(dir, out)) == 0);
  const json report = io::read_json(out);
  const json truth = io::read_json(dir / "truth.json");
  REQUIRE(report["converged"].get<bool>());
  CHECK(report["converged_at_step"].get<int>() < 10);
  CHECK(report["final_mapping"] == truth["mapping"]);
  const auto& steps = report["steps"];
  std::size_t first_correct = steps.size();
  for (std::size_t k = 0; k < steps.size(); ++k)
    if (steps[k]["mapping"] == truth["mapping"]) {
      first_correct = k;
      break;
    }
  CHECK(first_correct < 10);
}

TEST_CASE("single tag, single track") {
  const auto dir = scenario("one", 1, 3, 4.0);
  const auto out = dir / "report.json";
  REQUIRE(run(associate_args(dir, out)) == 0);
  const json report = io::read_json(out);
  // The first step collects the first (d_min, d_max) sample; the second can score.
  CHECK(report["steps"][0]["mapping"].is_null());
  CHECK(report["steps"][1]["mapping"].size() == 1);
  CHECK(report["final_mapping"] == io::read_json(dir / "truth.json")["mapping"]);
}

TEST_CASE("associate is deterministic and honours FUSETRACK_SEED") {
  const auto dir = scenario("det", 3, 11, 6.0);
  REQUIRE(run(associate_args(dir, dir / "a.json", "--seed 5")) == 0);
  REQUIRE(run(associate_args(dir, dir / "b.json", "--seed 5")) == 0);
  CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
  REQUIRE(run(associate_args(dir, dir / "c.json", "--seed 5"), "FUSETRACK_SEED=42") == 0);
  CHECK(io::read_json(dir / "c.json")["seed"] == 42);
  REQUIRE(run(associate_args(dir, dir / "d.json", "--method dtw --assign optimal")) == 0);
  CHECK(io::read_json(dir / "d.json")["method"] == "dtw");
}

TEST_CASE("exit codes") {
  const auto three = scenario("count3", 3, 1, 3.0);
  const auto four = scenario("count4", 4, 1, 3.0);
  CHECK(run("associate --rfid '" + (three / "rfid.csv").string() + "' --camera '" + (four / "camera.csv").string() +
            "'") == 3);

  const auto bad = workdir() / "bad.csv";
  io::write_text(bad, "t,tag_id,freq_bin,r,theta,var_r,var_theta\n0,A,b0,not-a-number,0,1,1\n");
  CHECK(run("associate --rfid '" + bad.string() + "' --camera '" + (three / "camera.csv").string() + "'") == 2);
  CHECK(run("associate --rfid '" + (workdir() / "missing.csv").string() + "' --camera x") == 2);
  CHECK(run("frobnicate") == 2);
}

TEST_CASE("sim campaign, export and stereo subcommands") {
  const auto dir = workdir() / "campaign";
  fs::create_directories(dir);
  io::write_text(dir / "campaign.json",
                 json{{"methods", {"frechet", "euclid"}},
                      {"configs", {{{"n_tags", 2}, {"trial_count", 2}, {"max_sim_time", 20.0}}}}}
                     .dump());
  const auto cfg = (dir / "campaign.json").string();
  REQUIRE(run("sim --config '" + cfg + "' --out '" + (dir / "r1.json").string() + "' --csv '" +
              (dir / "r1.csv").string() + "'") == 0);
  REQUIRE(run("sim --config '" + cfg + "' --threads 2 --out '" + (dir / "r2.json").string() + "'") == 0);
  CHECK(slurp(dir / "r1.json") == slurp(dir / "r2.json"));
  REQUIRE(run("export --campaign '" + (dir / "r1.json").string() + "' --out '" + (dir / "plots").string() + "'") == 0);
  CHECK(fs::exists(dir / "plots" / "accuracy_vs_density.csv"));
  CHECK(fs::exists(dir / "plots" / "tta_histogram.csv"));

  const auto rds = stereo::random_dot_stereogram(stereo::layered_disparity(32, 48, 2, 4, 6), 8, 1);
  stereo::write_pgm(dir / "l.pgm", rds.pair.left);
  stereo::write_pgm(dir / "r.pgm", rds.pair.right);
  REQUIRE(run("stereo --left '" + (dir / "l.pgm").string() + "' --right '" + (dir / "r.pgm").string() +
              "' --max-disp 8 --out '" + (dir / "d.pgm").string() + "' --out-depth '" + (dir / "z.csv").string() +
              "'") == 0);
  CHECK(stereo::read_pgm(dir / "d.pgm").rows() == 32);
  CHECK(fs::file_size(dir / "z.csv") > 0);
}
