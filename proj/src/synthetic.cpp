#include "splatdrop/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "splatdrop/rasterizer.hpp"

namespace splatdrop {

namespace {

Eigen::Vector4d random_rotation(CounterRng& rng) {
  Eigen::Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q.normalized();
}

GaussianCloud gaussian_soup(const SyntheticSceneSpec& spec, CounterRng& rng) {
  GaussianCloud cloud(static_cast<std::size_t>(spec.primitives), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Eigen::Vector3d mu;
    for (int a = 0; a < 3; ++a) mu[a] = rng.uniform(-1.0, 1.0);
    cloud.set_mean(i, mu);
    Eigen::Vector3d ls;
    for (int a = 0; a < 3; ++a) ls[a] = std::log(rng.uniform(0.04, 0.16));
    cloud.set_log_scale(i, ls);
    cloud.set_rotation(i, random_rotation(rng));
    cloud.set_opacity_logit(i, logit(rng.uniform(0.6, 0.95)));
    cloud.set_base_color(i, Eigen::Vector3d(rng.uniform(), rng.uniform(), rng.uniform()));
  }
  return cloud;
}

// Flat Gaussians tiling the six faces of a box, coloured as a checkerboard.
GaussianCloud textured_cuboid(const SyntheticSceneSpec& spec, CounterRng& rng) {
  const int side = std::max(1, static_cast<int>(std::lround(std::sqrt(spec.primitives))));
  const Eigen::Vector3d half(0.6, 0.4, 0.5);
  GaussianCloud cloud(static_cast<std::size_t>(6 * side * side), 0);
  std::size_t row = 0;
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    for (int sign : {-1, 1}) {
      const Eigen::Vector3d c0(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9));
      const Eigen::Vector3d c1 = Eigen::Vector3d::Ones() - c0;
      for (int a = 0; a < side; ++a) {
        for (int b = 0; b < side; ++b) {
          Eigen::Vector3d mu;
          mu[axis] = sign * half[axis];
          mu[u] = -half[u] + (a + 0.5) * (2.0 * half[u] / side);
          mu[v] = -half[v] + (b + 0.5) * (2.0 * half[v] / side);
          Eigen::Vector3d ls;
          ls[axis] = std::log(0.01);
          ls[u] = std::log(0.6 * 2.0 * half[u] / side);
          ls[v] = std::log(0.6 * 2.0 * half[v] / side);
          cloud.set_mean(row, mu);
          cloud.set_log_scale(row, ls);
          cloud.set_opacity_logit(row, logit(0.95));
          cloud.set_base_color(row, ((a / 2 + b / 2) % 2) ? c0 : c1);
          ++row;
        }
      }
    }
  }
  return cloud;
}

Camera orbit_camera(const SyntheticSceneSpec& spec, double azimuth, double elevation) {
  const Eigen::Vector3d eye(spec.camera_distance * std::cos(elevation) * std::sin(azimuth),
                            spec.camera_distance * std::sin(elevation),
                            -spec.camera_distance * std::cos(elevation) * std::cos(azimuth));
  return Camera::look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY(), spec.fov_x,
                         spec.width, spec.height);
}

double spread(int k, int n, double half_angle) {
  if (n == 1) return 0.0;
  return -half_angle + 2.0 * half_angle * k / (n - 1);
}

}  // namespace

void SyntheticSceneSpec::validate() const {
  if (train_views < 1 || test_views < 1) throw InputError("synthetic view counts must be >= 1");
  if (width < 1 || height < 1) throw InputError("synthetic resolution must be positive");
  if (primitives < 1) throw InputError("synthetic primitive count must be >= 1");
  if (!(camera_distance > 1.5)) throw InputError("camera_distance must exceed 1.5");
  if (!(fov_x > 0.0 && fov_x < M_PI)) throw InputError("fov_x must lie in (0, pi)");
  if (!(train_arc >= 0.0 && train_arc < M_PI / 2) || !(test_arc >= 0.0 && test_arc < M_PI / 2)) {
    throw InputError("camera arcs must lie in [0, pi/2)");
  }
  if (!(noise >= 0.0)) throw InputError("noise must be >= 0");
  if (!background.allFinite()) throw InputError("background must be finite");
}

SyntheticSceneSpec SyntheticSceneSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("synthetic spec must be a JSON object");
  SyntheticSceneSpec s;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      if (k == "kind") {
        const std::string kind = v.get<std::string>();
        if (kind == "soup") s.kind = SyntheticKind::GaussianSoup;
        else if (kind == "cuboid") s.kind = SyntheticKind::TexturedCuboid;
        else throw InputError("unknown synthetic kind '" + kind + "'");
      } else if (k == "primitives") s.primitives = v.get<int>();
      else if (k == "train_views") s.train_views = v.get<int>();
      else if (k == "test_views") s.test_views = v.get<int>();
      else if (k == "width") s.width = v.get<int>();
      else if (k == "height") s.height = v.get<int>();
      else if (k == "seed") s.seed = v.get<std::uint64_t>();
      else if (k == "camera_distance") s.camera_distance = v.get<double>();
      else if (k == "fov_x") s.fov_x = v.get<double>();
      else if (k == "train_arc") s.train_arc = v.get<double>();
      else if (k == "test_arc") s.test_arc = v.get<double>();
      else if (k == "noise") s.noise = v.get<double>();
      else if (k == "background") {
        if (!v.is_array() || v.size() != 3) throw InputError("background needs three numbers");
        for (int c = 0; c < 3; ++c) s.background[c] = v[c].get<double>();
      } else {
        throw InputError("unknown synthetic spec key '" + k + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json SyntheticSceneSpec::to_json() const {
  return {{"kind", kind == SyntheticKind::GaussianSoup ? "soup" : "cuboid"},
          {"primitives", primitives},
          {"train_views", train_views},
          {"test_views", test_views},
          {"width", width},
          {"height", height},
          {"seed", seed},
          {"camera_distance", camera_distance},
          {"fov_x", fov_x},
          {"train_arc", train_arc},
          {"test_arc", test_arc},
          {"noise", noise},
          {"background", {background[0], background[1], background[2]}}};
}

SyntheticSceneSpec SyntheticSceneSpec::parse(const std::string& name_or_path) {
  if (name_or_path == "default" || name_or_path == "soup") return {};
  if (name_or_path == "cuboid") {
    SyntheticSceneSpec s;
    s.kind = SyntheticKind::TexturedCuboid;
    s.primitives = 64;
    return s;
  }
  std::ifstream in(name_or_path);
  if (!in) {
    throw InputError("synthetic spec '" + name_or_path +
                     "' is neither default|soup|cuboid nor a readable JSON file");
  }
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed synthetic spec '" + name_or_path + "': " + e.what());
  }
}

SyntheticScene generate_synthetic_scene(const SyntheticSceneSpec& spec) {
  spec.validate();
  SyntheticScene scene;
  CounterRng rng(spec.seed, Stream::Synthetic, 0);
  scene.ground_truth = spec.kind == SyntheticKind::GaussianSoup ? gaussian_soup(spec, rng)
                                                                : textured_cuboid(spec, rng);
  RenderOptions opts;
  opts.precision = Precision::Float64;
  opts.background = spec.background;
  CounterRng noise_rng(spec.seed, Stream::Synthetic, 1);
  auto make_view = [&](const Camera& cam, const std::string& name, bool noisy) {
    View v;
    v.name = name;
    v.camera = cam;
    v.image = clamped01(render(scene.ground_truth, cam, {}, opts).color);
    if (noisy && spec.noise > 0.0) {
      for (double& x : v.image.data) x += spec.noise * noise_rng.normal();
      v.image = clamped01(v.image);
    }
    return v;
  };
  // Training cameras sit on the equator, test cameras alternate above and
  // below it, so the two sets never share a pose.
  for (int k = 0; k < spec.train_views; ++k) {
    const Camera cam = orbit_camera(spec, spread(k, spec.train_views, spec.train_arc), 0.0);
    scene.dataset.train.push_back(make_view(cam, "train_" + std::to_string(k), true));
  }
  for (int k = 0; k < spec.test_views; ++k) {
    const double elevation = (k % 2 == 0 ? 1.0 : -1.0) * 0.15;
    const Camera cam = orbit_camera(spec, spread(k, spec.test_views, spec.test_arc), elevation);
    scene.dataset.test.push_back(make_view(cam, "test_" + std::to_string(k), false));
  }
  scene.dataset.scene_extent = camera_extent(scene.dataset.train);
  scene.dataset.bounds.min = Eigen::Vector3d::Constant(-1.2);
  scene.dataset.bounds.max = Eigen::Vector3d::Constant(1.2);
  scene.ground_truth.scene_extent = scene.dataset.scene_extent;
  scene.dataset.validate();
  return scene;
}

}  // namespace splatdrop
