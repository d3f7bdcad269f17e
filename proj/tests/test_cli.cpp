#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "voxsel/io.hpp"
#include "voxsel/synth.hpp"

using namespace voxsel;

namespace {

struct Run {
  int code;
  std::string output;
};

Run run(const std::string& args, const std::filesystem::path& dir) {
  const auto log = dir / "cli.log";
  const std::string cmd = std::string(VOXSEL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

}  // namespace

TEST_CASE("command line") {
  const auto dir = voxsel::test::temp_dir("cli");
  SceneSpec spec = default_scene_spec(3);
  spec.width = 96;
  spec.height = 72;
  spec.planes = 24;
  spec.rig.focal = 90;
  write_file(dir / "spec.json", scene_spec_to_json(spec));

  CHECK(run("--help", dir).code == 0);
  CHECK(run("", dir).code != 0);
  CHECK(run("segment", dir).code != 0);

  const Run synth = run("synth --spec " + (dir / "spec.json").string() + " --out " + (dir / "scene").string(), dir);
  REQUIRE_MESSAGE(synth.code == 0, synth.output);
  CHECK(std::filesystem::exists(dir / "scene" / "volume.pvol"));
  CHECK(std::filesystem::exists(dir / "scene" / "scribbles.txt"));

  write_file(dir / "config.json", std::string_view(R"({"scene_dir": "scene", "output_dir": "run",
    "train": {"max_epochs": 8, "patience": 3}})"));
  const Run seg = run("segment -c " + (dir / "config.json").string(), dir);
  REQUIRE_MESSAGE(seg.code == 0, seg.output);
  CHECK(seg.output.find("iou") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "run" / "labels.plbl"));

  const Run eval = run("eval --check --run " + (dir / "run").string() + " --scene " + (dir / "scene").string(), dir);
  CHECK_MESSAGE(eval.code == 0, eval.output);

  const Run base = run("baseline -m graphcut2d -c " + (dir / "config.json").string() + " -o " +
                           (dir / "run2d").string(), dir);
  CHECK_MESSAGE(base.code == 0, base.output);
  CHECK(std::filesystem::exists(dir / "run2d" / "val_mask.png"));

  const Run render = run("render --scene " + (dir / "scene").string() + " --labels " +
                             (dir / "run" / "labels.plbl").string() + " --frames 2 --out " + (dir / "frames").string(),
                         dir);
  CHECK_MESSAGE(render.code == 0, render.output);
  CHECK(std::filesystem::exists(dir / "frames" / "frame_001.png"));

  write_file(dir / "bad.json", std::string_view(R"({"output_dir": "run"})"));
  const Run bad = run("segment -c " + (dir / "bad.json").string(), dir);
  CHECK(bad.code != 0);
  CHECK(bad.output.find("[config]") != std::string::npos);

  write_file(dir / "typo.json", std::string_view(R"({"scene_dir": "scene", "trian": {}})"));
  const Run typo = run("segment -c " + (dir / "typo.json").string(), dir);
  CHECK(typo.code != 0);
  CHECK(typo.output.find("trian") != std::string::npos);
}
