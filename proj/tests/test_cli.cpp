// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "support.hpp"

#include "fluidrec/cli.hpp"
#include "fluidrec/config.hpp"
#include "fluidrec/io.hpp"

#include <map>
#include <sstream>

using namespace fluidrec;
using namespace fluidrec::test;

namespace {

const char* kSmallScene =
    "n_stable = 2\n"
    "frames = 3\n"
    "seeds_per_step = 30\n"
    "visual_seeds_per_step = 30\n"
    "camera_count = 2\n"
    "image_width = 32\n"
    "image_height = 32\n"
    "iterations_dynamics = 3\n"
    "iterations_appearance = 2\n"
    "grid_resolution = 12\n"
    "predict_steps = 2\n";

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(const std::vector<std::string>& args)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

/// Relative path -> contents of every regular file under dir.
std::map<std::string, std::string> tree(const fs::path& dir)
{
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            files[fs::relative(e.path(), dir).string()] = read_file(e.path());
        }
    }
    return files;
}

fs::path small_config(const fs::path& dir)
{
    const fs::path p = dir / "small.cfg";
    write_file_atomic(p, kSmallScene);
    return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with 1")
{
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"frobnicate"}).code == cli::kUsage);
    CHECK(run({"--threads", "-2", "dump-config"}).code == cli::kUsage);
    CHECK(run({"reconstruct"}).code == cli::kUsage);
    CHECK(run({"--help"}).code == cli::kOk);
    const auto dir = scratch_dir("cli_usage");
    CHECK(run({"--out", dir.string(), "evaluate"}).code == cli::kUsage);
}

TEST_CASE("config errors exit with 2")
{
    const auto dir = scratch_dir("cli_config");
    write_file_atomic(dir / "bad.cfg", "dt = 0.1\nwat = 1\n");
    const Result r = run({"--config", (dir / "bad.cfg").string(), "dump-config"});
    CHECK(r.code == cli::kConfig);
    CHECK(r.err.find("wat") != std::string::npos);
    CHECK(run({"--config", (dir / "missing.cfg").string(), "dump-config"}).code == cli::kConfig);
}

TEST_CASE("runtime errors exit with 3")
{
    const auto dir = scratch_dir("cli_runtime");
    CHECK(run({"--quiet", "--out", (dir / "o").string(), "reconstruct", "--observation", (dir / "none").string()})
              .code == cli::kRuntime);
    write_file_atomic(dir / "broken" / "trajectory.txt", "steps = 2\n");
    CHECK(run({"--quiet", "--out", (dir / "o").string(), "resimulate", "--trajectory", (dir / "broken").string()})
              .code == cli::kRuntime);
}

TEST_CASE("dump-config reflects the config and seed")
{
    const auto dir = scratch_dir("cli_dump");
    const Result r = run({"--quiet", "--config", small_config(dir).string(), "--seed", "42", "dump-config"});
    REQUIRE(r.code == cli::kOk);
    const RunConfig c = parse_config(r.out);
    CHECK(c.frames == 3);
    CHECK(c.seed == 42);
    CHECK(c.rig.width == 32);
}

TEST_CASE("simulate is deterministic across runs and thread counts")
{
    const auto dir = scratch_dir("cli_simulate");
    const std::string cfg = small_config(dir).string();
    const auto a = dir / "a", b = dir / "b", c = dir / "c";
    REQUIRE(run({"--quiet", "--config", cfg, "--seed", "7", "--out", a.string(), "simulate"}).code == cli::kOk);
    REQUIRE(run({"--quiet", "--config", cfg, "--seed", "7", "--out", b.string(), "simulate"}).code == cli::kOk);
    REQUIRE(run({"--quiet", "--config", cfg, "--seed", "7", "--threads", "3", "--out", c.string(), "simulate"})
                .code == cli::kOk);
    const auto ta = tree(a);
    CHECK(ta.count("trajectory/physical_0003.fnps") == 1);
    CHECK(ta.count("renders/cam_01/frame_0003.pfm") == 1);
    CHECK(ta == tree(b));
    CHECK(ta == tree(c));

    const auto d = dir / "d";
    REQUIRE(run({"--quiet", "--config", cfg, "--seed", "8", "--out", d.string(), "simulate"}).code == cli::kOk);
    CHECK(read_file(d / "trajectory" / "physical_0000.fnps") != ta.at("trajectory/physical_0000.fnps"));
}

TEST_CASE("evaluate on identical images reports the caps")
{
    const auto dir = scratch_dir("cli_evaluate");
    const std::string cfg = small_config(dir).string();
    REQUIRE(run({"--quiet", "--config", cfg, "--out", (dir / "s").string(), "simulate"}).code == cli::kOk);
    const std::string renders = (dir / "s" / "renders").string();
    const Result r = run({"--quiet", "--config", cfg, "--out", (dir / "e").string(), "evaluate", "--images", renders,
                          "--reference", renders, "--trajectory", (dir / "s" / "trajectory").string()});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.find("psnr_mean = 99\n") != std::string::npos);
    CHECK(r.out.find("ssim_mean = 1\n") != std::string::npos);
    CHECK(r.out.find("divergence_mean = ") != std::string::npos);
    CHECK(fs::exists(dir / "e" / "metrics.json"));
}

TEST_CASE("small reconstruct, resimulate, predict, and interact workflow")
{
    const auto dir = scratch_dir("cli_workflow");
    const std::string cfg = small_config(dir).string();
    const std::string syn = (dir / "syn").string();
    REQUIRE(run({"--quiet", "--config", cfg, "--out", syn, "synth-dataset"}).code == cli::kOk);
    CHECK(fs::exists(dir / "syn" / "observation" / "cam_00" / "frame_0003.pfm"));
    CHECK(fs::exists(dir / "syn" / "ground_truth" / "physical_0003.fnps"));

    const std::string rec = (dir / "rec").string();
    REQUIRE(run({"--quiet", "--config", cfg, "--out", rec, "reconstruct", "--observation", syn + "/observation"})
                .code == cli::kOk);
    CHECK(read_file(dir / "rec" / "metrics.txt").find("psnr_mean") != std::string::npos);
    CHECK(read_file(dir / "rec" / "loss_log.txt").find("\n3 2 ") != std::string::npos);

    const std::string res = (dir / "res").string();
    REQUIRE(run({"--quiet", "--config", cfg, "--out", res, "resimulate", "--trajectory", rec + "/trajectory",
                 "--observation", syn + "/observation"})
                .code == cli::kOk);
    CHECK(fs::exists(dir / "res" / "renders" / "cam_01" / "frame_0003.pfm"));

    REQUIRE(run({"--quiet", "--config", cfg, "--out", (dir / "pred").string(), "predict", "--trajectory",
                 rec + "/trajectory", "--refiner", "blur"})
                .code == cli::kOk);
    const FluidTrajectory pred = read_trajectory(dir / "pred" / "trajectory");
    CHECK(pred.size() == 3);
    CHECK(pred.step_offset == 2 + 3);

    CHECK(run({"--quiet", "--config", cfg, "--out", (dir / "int").string(), "interact", "--trajectory",
               rec + "/trajectory"})
              .code == cli::kConfig);
    REQUIRE(run({"--quiet", "--config", cfg, "--out", (dir / "int").string(), "interact", "--trajectory",
                 rec + "/trajectory", "--rigid", "sphere:0,4,0,1.5"})
                .code == cli::kOk);
    CHECK(read_file(dir / "int" / "metrics.txt").find("particles_inside_rigid = 0\n") != std::string::npos);
}

}  // TEST_SUITE
