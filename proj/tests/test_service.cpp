#include <doctest.h>

#include "support.hpp"
#include "voxsel/io.hpp"
#include "voxsel/service.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace voxsel;
using nlohmann::json;

namespace {

SceneSpec test_spec() {
  SceneSpec s = default_scene_spec(2);
  s.width = 96;
  s.height = 72;
  s.planes = 24;
  s.rig.focal = 90;
  return s;
}

SegmentParams fast_params() {
  SegmentParams p;
  p.train.max_epochs = 10;
  p.train.patience = 4;
  return p;
}

struct Fixture {
  Service service;
  int port;
  httplib::Client client;

  Fixture() : service(options()), port(service.start("127.0.0.1", 0)), client("127.0.0.1", port) {
    client.set_read_timeout(120);
  }

  static ServiceOptions options() {
    ServiceOptions o;
    o.params = fast_params();
    return o;
  }

  std::string create() {
    const json body = {{"synthetic", {{"spec", json::parse(scene_spec_to_json(test_spec()))}}}};
    auto r = client.Post("/sessions", body.dump(), "application/json");
    REQUIRE(r);
    REQUIRE(r->status == 201);
    return json::parse(r->body)["id"].get<std::string>();
  }
};

json body_of(const httplib::Result& r) { return json::parse(r->body); }

}  // namespace

TEST_CASE("pose strings") {
  std::vector<Camera> rig{voxsel::test::make_camera(32, 24, 30),
                          voxsel::test::make_camera(32, 24, 30, {1, 0, 0})};
  CHECK(parse_pose("view:1", rig).t == rig[1].t);
  CHECK(parse_pose("interp:0,1,0.25", rig).t.isApprox(Eigen::Vector3d(0.25, 0, 0)));
  const Camera c = parse_pose("1 0 0 0 1 0 0 0 1 0 0.5 -1", rig);
  CHECK(c.t == Eigen::Vector3d(0, 0.5, -1));
  CHECK(c.K == rig[0].K);
  CHECK_THROWS_AS(parse_pose("view:2", rig), Error);
  CHECK_THROWS_AS(parse_pose("interp:0,1", rig), Error);
  CHECK_THROWS_AS(parse_pose("1 2 3", rig), Error);
  CHECK_THROWS_AS(parse_pose("2 0 0 0 1 0 0 0 1 0 0 0", rig), Error);
}

TEST_CASE("HTTP session workflow") {
  Fixture f;
  const std::string id = f.create();
  const std::string base = "/sessions/" + id;

  auto got = f.client.Get(base);
  REQUIRE(got);
  CHECK(got->status == 200);
  CHECK(body_of(got)["revision"] == 0);
  CHECK(body_of(got)["views"] == 5);
  CHECK(body_of(got)["segmentation"].is_null());
  CHECK(got->get_header_value("X-Session-Revision") == "0");

  auto img = f.client.Get(base + "/views/1/image");
  REQUIRE(img);
  CHECK(img->status == 200);
  CHECK(img->get_header_value("Content-Type") == "image/png");
  const auto png = decode_png(std::vector<std::uint8_t>(img->body.begin(), img->body.end()));
  CHECK(png.width == 96);

  const SyntheticScene scene = make_scene(test_spec());
  const ScribbleSet strokes = auto_scribbles(scene, 2, 4, 5);
  ScribbleSet fg_only = strokes;
  fg_only.bg_strokes.clear();

  SUBCASE("segmentation round trip") {
    auto s1 = f.client.Post(base + "/scribbles?mode=replace", format_scribbles(fg_only), "text/plain");
    REQUIRE(s1);
    CHECK(s1->status == 200);
    CHECK(body_of(s1)["revision"] == 1);
    CHECK(body_of(s1)["fg_strokes"] == 2);

    auto missing_bg = f.client.Post(base + "/segment?wait=1", "", "text/plain");
    REQUIRE(missing_bg);
    CHECK(missing_bg->status == 400);
    CHECK(body_of(f.client.Get(base))["revision"] == 1);
    CHECK(body_of(f.client.Get(base))["job"]["state"] == "idle");

    ScribbleSet bg_only = strokes;
    bg_only.fg_strokes.clear();
    auto s2 = f.client.Post(base + "/scribbles", format_scribbles(bg_only), "text/plain");
    REQUIRE(s2);
    CHECK(body_of(s2)["revision"] == 2);
    CHECK(body_of(s2)["bg_strokes"] == 4);

    auto stale = f.client.Post(base + "/segment?wait=1&revision=1", "", "text/plain");
    REQUIRE(stale);
    CHECK(stale->status == 409);

    auto mask_before = f.client.Get(base + "/views/0/mask");
    REQUIRE(mask_before);
    CHECK(mask_before->status == 409);

    auto seg = f.client.Post(base + "/segment?wait=1&revision=2", "", "text/plain");
    REQUIRE(seg);
    REQUIRE(seg->status == 200);
    const json sj = body_of(seg);
    CHECK(sj["segmentation"]["revision"] == 2);
    CHECK(sj["segmentation"]["current"] == true);
    CHECK(sj["job"]["state"] == "done");
    CHECK(seg->get_header_value("X-Segmentation-Revision") == "2");
    const std::string labels_hash = sj["segmentation"]["labels_sha256"];

    auto again = f.client.Post(base + "/segment?wait=1", "", "text/plain");
    REQUIRE(again);
    CHECK(again->status == 200);
    CHECK(body_of(again)["segmentation"]["labels_sha256"] == labels_hash);

    auto mask = f.client.Get(base + "/views/0/mask");
    REQUIRE(mask);
    REQUIRE(mask->status == 200);
    const Mask m = gray_to_mask(decode_png(std::vector<std::uint8_t>(mask->body.begin(), mask->body.end())));
    const ScribblePixels px = rasterize_scribbles(strokes, 96, 72);
    std::size_t inside = 0;
    for (const auto& p : px.fg) inside += m.at(p.x, p.y);
    CHECK(static_cast<double>(inside) >= 0.95 * static_cast<double>(px.fg.size()));

    PipelineConfig cfg;
    const SegmentParams p = fast_params();
    cfg.train = p.train;
    cfg.graphcut = p.graphcut;
    cfg.output_dir = voxsel::test::temp_dir("service_direct");
    const PipelineResult direct = run_pipeline_on(cfg, scene_data_from_synthetic(scene), strokes);
    CHECK(content_hash(direct.labels) == labels_hash);

    auto render = f.client.Get(base + "/render?pose=interp:0,1,0.5&selected=1");
    REQUIRE(render);
    CHECK(render->status == 200);
    CHECK(render->get_header_value("Content-Type") == "image/png");

    auto params = f.client.Post(base + "/params", R"({"w2": 5})", "application/json");
    REQUIRE(params);
    CHECK(params->status == 200);
    CHECK(body_of(params)["revision"] == 3);
    CHECK(body_of(params)["segmentation"]["current"] == false);
  }
  SUBCASE("invalid strokes leave the session untouched") {
    auto overlap = f.client.Post(base + "/scribbles", "fg 10,10 20,10\nbg 15,5 15,15\n", "text/plain");
    REQUIRE(overlap);
    CHECK(overlap->status == 400);
    CHECK(body_of(overlap)["error"] == "overlap");
    auto outside = f.client.Post(base + "/scribbles", "fg 500,10\n", "text/plain");
    REQUIRE(outside);
    CHECK(outside->status == 400);
    auto garbage = f.client.Post(base + "/scribbles", "hello\n", "text/plain");
    REQUIRE(garbage);
    CHECK(garbage->status == 400);
    const json after = body_of(f.client.Get(base));
    CHECK(after["revision"] == 0);
    CHECK(after["fg_strokes"] == 0);
    auto bad_params = f.client.Post(base + "/params", R"({"gamma": 2})", "application/json");
    REQUIRE(bad_params);
    CHECK(bad_params->status == 400);
    auto unknown_param = f.client.Post(base + "/params", R"({"beta": 1})", "application/json");
    REQUIRE(unknown_param);
    CHECK(unknown_param->status == 400);
    CHECK(body_of(f.client.Get(base))["revision"] == 0);
  }
  SUBCASE("unknown resources") {
    auto none = f.client.Get("/sessions/nope");
    REQUIRE(none);
    CHECK(none->status == 404);
    CHECK(body_of(none)["error"] == "not-found");
    auto view = f.client.Get(base + "/views/9/image");
    REQUIRE(view);
    CHECK(view->status == 404);
    auto bad_create = f.client.Post("/sessions", R"({"scene": 1})", "application/json");
    REQUIRE(bad_create);
    CHECK(bad_create->status == 400);
    auto bad_json = f.client.Post("/sessions", "{", "application/json");
    REQUIRE(bad_json);
    CHECK(bad_json->status == 400);
    auto no_pose = f.client.Get(base + "/render");
    REQUIRE(no_pose);
    CHECK(no_pose->status == 400);
  }
}
