#include "voxsel/service.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <condition_variable>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "voxsel/io.hpp"

namespace voxsel {

using nlohmann::json;

Camera parse_pose(const std::string& pose, const std::vector<Camera>& rig) {
  if (rig.empty()) fail(ErrorCode::InvalidArgument, "empty camera rig");
  auto numbers = [&](std::string_view text) {
    std::vector<double> v;
    std::string s(text);
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream in(s);
    double x;
    while (in >> x) v.push_back(x);
    if (!in.eof()) fail(ErrorCode::Parse, "pose: bad number in '" + pose + "'");
    return v;
  };
  auto view = [&](double k) {
    if (k != std::floor(k) || k < 0 || k >= static_cast<double>(rig.size())) {
      fail(ErrorCode::NotFound, "pose: no rig view " + std::to_string(k));
    }
    return rig[static_cast<std::size_t>(k)];
  };
  if (pose.rfind("view:", 0) == 0) {
    const auto v = numbers(std::string_view(pose).substr(5));
    if (v.size() != 1) fail(ErrorCode::Parse, "pose: expected view:K");
    return view(v[0]);
  }
  if (pose.rfind("interp:", 0) == 0) {
    const auto v = numbers(std::string_view(pose).substr(7));
    if (v.size() != 3) fail(ErrorCode::Parse, "pose: expected interp:A,B,S");
    if (!(v[2] >= 0.0 && v[2] <= 1.0)) fail(ErrorCode::InvalidArgument, "pose: S must be in [0,1]");
    return interpolate_cameras(view(v[0]), view(v[1]), v[2]);
  }
  const auto v = numbers(pose);
  if (v.size() != 12) fail(ErrorCode::Parse, "pose: expected 12 numbers, view:K or interp:A,B,S");
  Camera cam = rig.front();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cam.R(r, c) = v[static_cast<std::size_t>(r * 3 + c)];
  cam.t = Eigen::Vector3d(v[9], v[10], v[11]);
  cam.validate();
  return cam;
}

namespace {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict:
    case ErrorCode::Canceled: return 409;
    case ErrorCode::Io: return 500;
    default: return 400;
  }
}

struct Session {
  std::string id;
  std::shared_ptr<const SceneData> scene;
  std::shared_ptr<const FeatureVolume> features;

  std::mutex mu;
  std::condition_variable cv;
  std::uint64_t revision = 0;
  ScribbleSet scribbles;
  SegmentParams params;

  std::thread worker;
  std::shared_ptr<std::atomic<bool>> cancel;
  std::uint64_t job_revision = 0;
  std::string job_state = "idle";  // idle | running | done | failed | canceled
  std::string job_stage;
  double job_progress = 0.0;
  std::string job_error;

  std::shared_ptr<const Segmentation> segmentation;
  std::uint64_t segmentation_revision = 0;

  void bump() {
    ++revision;
    if (cancel) cancel->store(true);
  }
};

std::size_t count_fg(const std::vector<std::uint8_t>& labels) {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

// Caller holds s.mu.
json session_json(const Session& s) {
  const SceneData& sc = *s.scene;
  json j;
  j["id"] = s.id;
  j["revision"] = s.revision;
  j["views"] = sc.cameras.size();
  j["width"] = sc.volume.width();
  j["height"] = sc.volume.height();
  j["depth"] = sc.volume.depth();
  j["fg_strokes"] = s.scribbles.fg_strokes.size();
  j["bg_strokes"] = s.scribbles.bg_strokes.size();
  j["params"] = {{"gamma", s.params.gamma},
                 {"brush_radius", s.params.brush_radius},
                 {"skip_postprocess", s.params.skip_postprocess}};
  j["job"] = {{"state", s.job_state},
              {"stage", s.job_stage},
              {"progress", s.job_progress},
              {"revision", s.job_revision},
              {"error", s.job_error}};
  if (s.segmentation) {
    j["segmentation"] = {{"revision", s.segmentation_revision},
                         {"fg_voxels", count_fg(s.segmentation->labels)},
                         {"raw_fg_voxels", count_fg(s.segmentation->raw_labels)},
                         {"labels_sha256", content_hash(s.segmentation->labels)},
                         {"current", s.segmentation_revision == s.revision}};
  } else {
    j["segmentation"] = nullptr;
  }
  return j;
}

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;
  std::thread listener;

  std::mutex sessions_mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::uint64_t next_id = 1;

  std::mutex cache_mu;
  std::map<std::string, std::shared_ptr<const FeatureVolume>> feature_cache;

  explicit Impl(ServiceOptions o) : options(std::move(o)) {
    set_worker_count(options.workers);
    routes();
  }

  ~Impl() {
    server.stop();
    if (listener.joinable()) listener.join();
    std::map<std::string, std::shared_ptr<Session>> all;
    {
      std::lock_guard lk(sessions_mu);
      all.swap(sessions);
    }
    for (auto& [id, s] : all) {
      std::thread t;
      {
        std::lock_guard lk(s->mu);
        if (s->cancel) s->cancel->store(true);
        t = std::move(s->worker);
      }
      if (t.joinable()) t.join();
    }
  }

  std::shared_ptr<const FeatureVolume> features_for(const SceneData& scene) {
    const std::string key = scene.content_hash();
    {
      std::lock_guard lk(cache_mu);
      if (auto it = feature_cache.find(key); it != feature_cache.end()) return it->second;
    }
    auto fv = std::make_shared<const FeatureVolume>(
        cached_features(scene, options.features, options.cache_dir));
    std::lock_guard lk(cache_mu);
    return feature_cache.emplace(key, fv).first->second;
  }

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lk(sessions_mu);
    const auto it = sessions.find(id);
    if (it == sessions.end()) fail(ErrorCode::NotFound, "unknown session '" + id + "'");
    return it->second;
  }

  static void send_json(httplib::Response& res, const json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump() + "\n", "application/json");
  }

  static void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
    send_json(res, {{"error", to_string(code)}, {"message", message}}, http_status(code));
  }

  template <typename F>
  static httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      } catch (const json::exception& e) {
        send_error(res, ErrorCode::Parse, e.what());
      } catch (const std::exception& e) {
        send_error(res, ErrorCode::Io, e.what());
      }
    };
  }

  static void set_revision_headers(httplib::Response& res, const Session& s) {
    res.set_header("X-Session-Revision", std::to_string(s.revision));
    if (s.segmentation) {
      res.set_header("X-Segmentation-Revision", std::to_string(s.segmentation_revision));
    }
  }

  // Caller holds s.mu.
  static void check_revision(const httplib::Request& req, const Session& s) {
    if (!req.has_param("revision")) return;
    const std::string r = req.get_param_value("revision");
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(r.data(), r.data() + r.size(), v);
    if (ec != std::errc() || p != r.data() + r.size()) fail(ErrorCode::Parse, "revision must be an integer");
    if (v != s.revision) {
      fail(ErrorCode::Conflict, "stale revision " + r + " (current " + std::to_string(s.revision) + ")");
    }
  }

  static int view_index(const std::string& text, const Session& s) {
    int v = -1;
    const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || p != text.data() + text.size() || v < 0 ||
        v >= static_cast<int>(s.scene->cameras.size())) {
      fail(ErrorCode::NotFound, "no view '" + text + "'");
    }
    return v;
  }

  static void send_png(httplib::Response& res, const Raster<std::uint8_t>& img) {
    const auto bytes = encode_png(img);
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    const json body = req.body.empty() ? json::object() : json::parse(req.body);
    if (!body.is_object()) fail(ErrorCode::Parse, "body must be a JSON object");
    for (auto it = body.begin(); it != body.end(); ++it) {
      if (it.key() != "scene_dir" && it.key() != "synthetic") {
        fail(ErrorCode::Parse, "unknown field '" + it.key() + "'");
      }
    }
    auto scene = std::make_shared<SceneData>();
    if (body.contains("scene_dir") == body.contains("synthetic")) {
      fail(ErrorCode::InvalidArgument, "exactly one of scene_dir or synthetic is required");
    }
    if (body.contains("scene_dir")) {
      *scene = load_scene_dir(body["scene_dir"].get<std::string>());
    } else {
      const json& syn = body["synthetic"];
      const SceneSpec spec = syn.is_object() && syn.contains("spec")
                                 ? scene_spec_from_json(syn["spec"].dump())
                                 : default_scene_spec(syn.value("seed", std::uint64_t{1}));
      *scene = scene_data_from_synthetic(make_scene(spec));
    }
    scene->scribbles.reset();
    auto s = std::make_shared<Session>();
    s->scene = scene;
    s->features = features_for(*scene);
    s->params = options.params;
    {
      std::lock_guard lk(sessions_mu);
      s->id = "s" + std::to_string(next_id++);
      sessions.emplace(s->id, s);
    }
    std::lock_guard lk(s->mu);
    set_revision_headers(res, *s);
    send_json(res, session_json(*s), 201);
  }

  void get(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    std::lock_guard lk(s->mu);
    set_revision_headers(res, *s);
    send_json(res, session_json(*s));
  }

  void scribbles(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    const std::string mode = req.has_param("mode") ? req.get_param_value("mode") : "append";
    if (mode != "append" && mode != "replace") fail(ErrorCode::InvalidArgument, "mode must be append or replace");
    const ScribbleSet incoming = parse_scribbles(req.body);
    if (incoming.reference_view != 0) fail(ErrorCode::InvalidArgument, "strokes must be drawn in view 0");
    std::lock_guard lk(s->mu);
    ScribbleSet next = mode == "replace" ? ScribbleSet{} : s->scribbles;
    next.fg_strokes.insert(next.fg_strokes.end(), incoming.fg_strokes.begin(), incoming.fg_strokes.end());
    next.bg_strokes.insert(next.bg_strokes.end(), incoming.bg_strokes.begin(), incoming.bg_strokes.end());
    const Camera& ref = s->scene->cameras.front();
    rasterize_scribbles(next, ref.width, ref.height, s->params.brush_radius);
    s->scribbles = std::move(next);
    s->bump();
    set_revision_headers(res, *s);
    send_json(res, session_json(*s));
  }

  void params(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    const json body = json::parse(req.body);
    if (!body.is_object()) fail(ErrorCode::Parse, "body must be a JSON object");
    std::lock_guard lk(s->mu);
    SegmentParams p = s->params;
    for (auto it = body.begin(); it != body.end(); ++it) {
      const std::string& k = it.key();
      if (k == "gamma") p.gamma = it->get<double>();
      else if (k == "brush_radius") p.brush_radius = it->get<int>();
      else if (k == "skip_postprocess") p.skip_postprocess = it->get<bool>();
      else if (k == "w1") p.graphcut.w1 = it->get<double>();
      else if (k == "w2") p.graphcut.w2 = it->get<double>();
      else if (k == "alpha") p.graphcut.alpha = it->get<double>();
      else if (k == "sigma") p.graphcut.sigma = it->get<double>();
      else fail(ErrorCode::Parse, "unknown parameter '" + k + "'");
    }
    if (!(p.gamma > 0.0 && p.gamma < 1.0)) fail(ErrorCode::InvalidArgument, "gamma must be in (0, 1)");
    if (p.brush_radius < 0 || p.brush_radius > 64) fail(ErrorCode::InvalidArgument, "brush_radius must be in [0, 64]");
    p.graphcut.validate();
    s->params = p;
    s->bump();
    set_revision_headers(res, *s);
    send_json(res, session_json(*s));
  }

  // Caller holds lk on s->mu. Starts a job for the current revision.
  static void launch(const std::shared_ptr<Session>& s, std::unique_lock<std::mutex>& lk) {
    while (s->worker.joinable()) {
      if (s->cancel) s->cancel->store(true);
      std::thread old = std::move(s->worker);
      lk.unlock();
      old.join();
      lk.lock();
    }
    auto cancel = std::make_shared<std::atomic<bool>>(false);
    s->cancel = cancel;
    s->job_revision = s->revision;
    s->job_state = "running";
    s->job_stage = "queued";
    s->job_progress = 0.0;
    s->job_error.clear();
    const std::uint64_t rev = s->revision;
    s->worker = std::thread([s, cancel, rev, scribbles = s->scribbles, params = s->params] {
      auto progress = [&](const std::string& stage, double f) {
        std::lock_guard g(s->mu);
        if (s->job_revision == rev) {
          s->job_stage = stage;
          s->job_progress = f;
        }
      };
      std::shared_ptr<const Segmentation> result;
      std::string state = "done", error;
      try {
        result = std::make_shared<const Segmentation>(
            segment(*s->scene, *s->features, scribbles, params, cancel.get(), progress));
        if (cancel->load()) state = "canceled";
      } catch (const Error& e) {
        state = e.code() == ErrorCode::Canceled ? "canceled" : "failed";
        error = e.what();
      } catch (const std::exception& e) {
        state = "failed";
        error = e.what();
      }
      std::lock_guard g(s->mu);
      if (state == "done" && s->revision == rev) {
        s->segmentation = result;
        s->segmentation_revision = rev;
      } else if (state == "done") {
        state = "canceled";
      }
      if (s->job_revision == rev) {
        s->job_state = state;
        s->job_error = error;
      }
      s->cv.notify_all();
    });
  }

  void run_segment(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    const bool wait = req.has_param("wait") && req.get_param_value("wait") != "0";
    std::unique_lock lk(s->mu);
    check_revision(req, *s);
    if (s->scribbles.fg_strokes.empty() || s->scribbles.bg_strokes.empty()) {
      fail(ErrorCode::InvalidArgument, "segment needs at least one fg and one bg stroke");
    }
    const std::uint64_t rev = s->revision;
    const bool have = s->segmentation && s->segmentation_revision == rev;
    const bool running = s->job_state == "running" && s->job_revision == rev;
    if (!have && !running) launch(s, lk);
    if (wait) {
      s->cv.wait(lk, [&] {
        return (s->segmentation && s->segmentation_revision == rev) || s->job_revision != rev ||
               s->job_state != "running";
      });
      if (!(s->segmentation && s->segmentation_revision == rev)) {
        const bool failed = s->job_revision == rev && s->job_state == "failed";
        set_revision_headers(res, *s);
        if (failed) {
          send_error(res, ErrorCode::InvalidArgument, s->job_error);
        } else {
          send_error(res, ErrorCode::Conflict, "segmentation superseded by a newer revision");
        }
        return;
      }
    }
    set_revision_headers(res, *s);
    const bool done = s->segmentation && s->segmentation_revision == rev;
    send_json(res, session_json(*s), done ? 200 : 202);
  }

  void view_image(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    std::lock_guard lk(s->mu);
    check_revision(req, *s);
    const int v = view_index(req.matches[2], *s);
    set_revision_headers(res, *s);
    send_png(res, quantize(s->scene->images[static_cast<std::size_t>(v)]));
  }

  static std::shared_ptr<const Segmentation> require_segmentation(const Session& s) {
    if (!s.segmentation) fail(ErrorCode::Conflict, "no segmentation yet; POST segment first");
    return s.segmentation;
  }

  void view_mask(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    std::shared_ptr<const Segmentation> seg;
    Camera cam;
    {
      std::lock_guard lk(s->mu);
      check_revision(req, *s);
      cam = s->scene->cameras[static_cast<std::size_t>(view_index(req.matches[2], *s))];
      seg = require_segmentation(*s);
      set_revision_headers(res, *s);
    }
    send_png(res, mask_to_gray(selection_mask(s->scene->volume, cam, seg->labels)));
  }

  void render(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    if (!req.has_param("pose")) fail(ErrorCode::InvalidArgument, "pose parameter is required");
    const std::string sel = req.has_param("selected") ? req.get_param_value("selected") : "0";
    if (sel != "0" && sel != "1") fail(ErrorCode::InvalidArgument, "selected must be 0 or 1");
    std::shared_ptr<const Segmentation> seg;
    {
      std::lock_guard lk(s->mu);
      check_revision(req, *s);
      if (sel == "1") seg = require_segmentation(*s);
      set_revision_headers(res, *s);
    }
    const Camera cam = parse_pose(req.get_param_value("pose"), s->scene->cameras);
    const RenderedView rv = seg ? render_view(s->scene->volume, cam, seg->labels)
                                : render_view(s->scene->volume, cam);
    send_png(res, quantize(rv.rgb));
  }

  void routes() {
    const std::string sid = "/sessions/([A-Za-z0-9]+)";
    server.Post("/sessions", guarded([this](auto& q, auto& r) { create(q, r); }));
    server.Get(sid, guarded([this](auto& q, auto& r) { get(q, r); }));
    server.Post(sid + "/scribbles", guarded([this](auto& q, auto& r) { scribbles(q, r); }));
    server.Post(sid + "/params", guarded([this](auto& q, auto& r) { params(q, r); }));
    server.Post(sid + "/segment", guarded([this](auto& q, auto& r) { run_segment(q, r); }));
    server.Get(sid + "/views/([^/]+)/image", guarded([this](auto& q, auto& r) { view_image(q, r); }));
    server.Get(sid + "/views/([^/]+)/mask", guarded([this](auto& q, auto& r) { view_mask(q, r); }));
    server.Get(sid + "/render", guarded([this](auto& q, auto& r) { render(q, r); }));
    if (!options.static_dir.empty()) {
      if (!server.set_mount_point("/", options.static_dir.string())) {
        fail(ErrorCode::NotFound, "static directory not found: " + options.static_dir.string());
      }
    }
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}
Service::~Service() = default;

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->server.bind_to_any_port(host);
    if (p < 0) fail(ErrorCode::Io, "cannot bind " + host);
    return p;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    fail(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

int Service::start(const std::string& host, int port) {
  const int p = bind(host, port);
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return p;
}

void Service::stop() { impl_->server.stop(); }

}  // namespace voxsel
