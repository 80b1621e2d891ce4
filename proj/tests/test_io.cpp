#include "doctest.h"

#include <Eigen/LU>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "json.hpp"
#include "splatdrop/checkpoint.hpp"
#include "splatdrop/dataset.hpp"
#include "splatdrop/image_io.hpp"
#include "splatdrop/ply.hpp"
#include "splatdrop/synthetic.hpp"
#include "splatdrop/trainer.hpp"

using namespace splatdrop;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

fs::path data_dir() {
  const char* d = std::getenv("SPLATDROP_TEST_DATA");
  return d ? fs::path(d) : fs::path("tests/data");
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

std::string from_hex(const std::string& text) {
  std::string clean, out;
  for (char c : text)
    if (std::isxdigit(static_cast<unsigned char>(c))) clean += c;
  for (std::size_t i = 0; i + 1 < clean.size(); i += 2) out += char(std::stoi(clean.substr(i, 2), nullptr, 16));
  return out;
}

// Every value is exactly representable in 32-bit floats.
GaussianCloud golden_cloud() {
  GaussianCloud c(1, 1, 2.0);
  c.set_mean(0, {0.5, -1.25, 2.0});
  c.set_log_scale(0, {-2.0, -1.5, -3.0});
  c.set_rotation(0, {0.5, 0.5, 0.5, 0.5});
  c.set_opacity_logit(0, 0.75);
  double* dc = c.params.row(Param::ShDc, 0);
  dc[0] = 0.25, dc[1] = -0.5, dc[2] = 1.0;
  double* rest = c.params.row(Param::ShRest, 0);
  for (int k = 0; k < 9; ++k) rest[k] = 0.125 * (k - 4);
  return c;
}

Eigen::Matrix4d fixture_matrix(const nlohmann::json& frame) {
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = frame["transform_matrix"][r][c].get<double>();
  return m;
}

}  // namespace

TEST_CASE("png round trip and alpha") {
  const fs::path dir = scratch_dir("io_png");
  auto img = random_image(7, 5, 3, 1, 0.0, 1.0);
  save_image((dir / "a.png").string(), img);
  auto back = load_image((dir / "a.png").string());
  REQUIRE(back.same_shape(img));
  CHECK(max_abs_diff(back, img) <= 1.0 / 510.0 + 1e-12);

  save_image((dir / "w.png").string(), Image(1, 1, 3, 1.0));
  CHECK(load_image((dir / "w.png").string()).data == std::vector<double>{1.0, 1.0, 1.0});

  auto rgba = load_image((data_dir() / "rgba_half.png").string());
  const double a = 128.0 / 255.0;
  for (int c = 0; c < 3; ++c) CHECK(rgba.at(0, 0, c) == doctest::Approx(a).epsilon(1e-12));
  CHECK(rgba.at(1, 0, 0) == doctest::Approx(200.0 / 255.0));
  auto white_bg = load_image((data_dir() / "rgba_half.png").string(), Eigen::Vector3d::Ones());
  CHECK(white_bg.at(0, 0, 0) == doctest::Approx(1.0));

  std::string bytes = read_bytes(dir / "a.png");
  write_bytes(dir / "cut.png", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_image((dir / "cut.png").string()), InputError);
  CHECK_THROWS_AS(load_image((dir / "missing.png").string()), InputError);
}

TEST_CASE("depth maps") {
  const fs::path dir = scratch_dir("io_depth");
  Image d(6, 4, 1);
  for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] = 0.25 * i + 0.5;
  save_pfm((dir / "d.pfm").string(), d);
  CHECK(load_depth((dir / "d.pfm").string()).data == d.data);
  CHECK(load_depth((dir / "d.pfm").string(), 6, 4).data == d.data);
  CHECK_THROWS_AS(load_depth((dir / "d.pfm").string(), 5, 4), InputError);

  std::string bytes = read_bytes(dir / "d.pfm");
  write_bytes(dir / "cut.pfm", bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_depth((dir / "cut.pfm").string()), InputError);

  Image ramp(3, 2, 1);
  for (std::size_t i = 0; i < ramp.data.size(); ++i) ramp.data[i] = 2.0 * i;
  save_depth_png16((dir / "d.png").string(), ramp, 10.0);
  auto back = load_depth((dir / "d.png").string());
  CHECK(back.data.back() == doctest::Approx(10.0));
  CHECK(max_abs_diff(back, ramp) <= 10.0 / 65535.0);
  fs::remove(dir / "d.png.scale");
  CHECK_THROWS_AS(load_depth((dir / "d.png").string()), InputError);
}

TEST_CASE("ply") {
  SUBCASE("golden one-primitive file") {
    const std::string golden = from_hex(read_bytes(data_dir() / "one_primitive.ply.hex"));
    REQUIRE(!golden.empty());
    CHECK(ply_encode(golden_cloud()) == golden);
    CHECK(ply_decode(golden, 2.0) == golden_cloud());
  }
  SUBCASE("round trip in 32-bit precision") {
    auto c = micro_scene(3, {.max_primitives = 8, .sh_degree = 3});
    for (auto& g : c.params.groups)
      for (double& v : g) v = static_cast<float>(v);
    const fs::path p = scratch_dir("io_ply") / "c.ply";
    ply_write(c, p.string());
    CHECK(ply_read(p.string(), c.scene_extent) == c);
  }
  SUBCASE("empty cloud") {
    GaussianCloud e(0, 2);
    CHECK(ply_decode(ply_encode(e)) == e);
  }
  SUBCASE("foreign fields name what is missing") {
    std::string bytes = ply_encode(golden_cloud());
    const auto at = bytes.find("property float opacity");
    bytes.replace(at, std::string("property float opacity").size(), "property float density");
    try {
      ply_decode(bytes);
      FAIL("expected an error");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("opacity") != std::string::npos);
    }
  }
  SUBCASE("truncated data") {
    std::string bytes = ply_encode(golden_cloud());
    CHECK_THROWS_AS(ply_decode(bytes.substr(0, bytes.size() - 1)), InputError);
    CHECK_THROWS_AS(ply_decode("not a ply"), InputError);
  }
}

TEST_CASE("blender transforms fixture") {
  const fs::path dir = data_dir() / "blender3";
  const Dataset ds = load_blender_transforms(dir.string(), Eigen::Vector3d::Zero(), false);
  const auto j = nlohmann::json::parse(read_bytes(dir / "transforms_train.json"));
  REQUIRE(ds.train.size() == 3);
  CHECK(ds.test.empty());
  const double fx = 8.0 / (2.0 * std::tan(j["camera_angle_x"].get<double>() / 2.0));
  for (std::size_t f = 0; f < 3; ++f) {
    const Camera& cam = ds.train[f].camera;
    CHECK(ds.train[f].name == j["frames"][f]["file_path"].get<std::string>());
    CHECK(cam.fx == doctest::Approx(fx).epsilon(1e-14));
    CHECK(cam.fy == cam.fx);
    CHECK(cam.cx == 4.0);
    CHECK(cam.cy == 3.0);
    // World-to-camera is the inverse of camera-to-world with y and z flipped.
    Eigen::Matrix4d c2w = fixture_matrix(j["frames"][f]);
    c2w.col(1) *= -1.0;
    c2w.col(2) *= -1.0;
    const Eigen::Matrix4d w2c = c2w.inverse();
    CHECK((cam.rotation - w2c.topLeftCorner<3, 3>()).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((cam.translation - w2c.block<3, 1>(0, 3)).cwiseAbs().maxCoeff() < 1e-5);
    CHECK((cam.rotation * cam.rotation.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-12);
  }
  // Identity frame: camera at the origin looking down world -z.
  CHECK(ds.train[0].camera.center().norm() == 0.0);
  CHECK((ds.train[0].camera.rotation * Eigen::Vector3d(0, 0, -1) - Eigen::Vector3d(0, 0, 1)).norm() < 1e-15);
}

TEST_CASE("blender transforms with images and errors") {
  const fs::path dir = scratch_dir("io_blender");
  nlohmann::json j;
  j["camera_angle_x"] = M_PI / 2;
  for (int f = 0; f < 3; ++f) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m(0, 3) = f;
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
    j["frames"].push_back({{"file_path", "img_" + std::to_string(f)}, {"transform_matrix", rows}});
    save_image((dir / ("img_" + std::to_string(f) + ".png")).string(), Image(400, 3, 3, 0.2 * f));
  }
  write_bytes(dir / "transforms.json", j.dump());
  Dataset ds = load_blender_transforms(dir.string());
  REQUIRE(ds.train.size() == 3);
  for (std::size_t f = 0; f < 3; ++f) {
    CHECK(ds.train[f].camera.fx == doctest::Approx(200.0).epsilon(1e-14));
    CHECK(ds.train[f].image.at(0, 0, 0) == doctest::Approx(0.2 * f).epsilon(1.0 / 255));
  }
  CHECK(ds.scene_extent == doctest::Approx(1.1));

  save_image((dir / "img_1.png").string(), Image(401, 3, 3));
  CHECK_THROWS_AS(load_blender_transforms(dir.string()), InputError);
  save_image((dir / "img_1.png").string(), Image(400, 3, 3));

  auto broken = j;
  broken["frames"][2]["transform_matrix"][0] = {0, 0, 0, 0};
  write_bytes(dir / "transforms.json", broken.dump());
  try {
    load_blender_transforms(dir.string());
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("frame 2") != std::string::npos);
  }
  broken = j;
  broken.erase("camera_angle_x");
  write_bytes(dir / "transforms.json", broken.dump());
  CHECK_THROWS_AS(load_blender_transforms(dir.string()), InputError);
  CHECK_THROWS_AS(load_blender_transforms((dir / "nope").string()), InputError);
}

TEST_CASE("pose conversion round trip") {
  CounterRng rng(2, Stream::Test);
  for (int t = 0; t < 50; ++t) {
    const Eigen::Matrix3d r = quaternion_to_matrix(random_quaternion(rng));
    const Eigen::Vector3d tr(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    Eigen::Matrix4d m = pose_to_blender(r, tr);
    Eigen::Matrix3d r2;
    Eigen::Vector3d t2;
    pose_from_blender(m, r2, t2);
    CHECK((pose_to_blender(r2, t2) - m).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((r2 - r).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("config json") {
  TrainConfig c;
  c.set("rdr.rate", "0.3");
  c.set("ess.enabled", "false");
  c.set("background", "[1, 0.5, 0]");
  c.set("iterations", "123");
  CHECK(c.rdr.rate == 0.3);
  CHECK_FALSE(c.ess.enabled);
  CHECK(c.background == Eigen::Vector3d(1, 0.5, 0));
  const auto back = TrainConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.iterations == 123);

  CHECK_THROWS_AS(c.set("rdr.ratee", "0.3"), InputError);
  CHECK_THROWS_AS(c.set("iterations", "12x"), InputError);
  CHECK_THROWS_AS(c.apply_preset("blender"), InputError);
  TrainConfig bad;
  bad.iterations = 0;
  CHECK_THROWS_AS(bad.validate(), InputError);

  TrainConfig p = TrainConfig::from_json(nlohmann::json{{"preset", "dtu"}, {"rdr.lambda", 0.7}});
  CHECK(p.rdr.rate == 0.3);
  CHECK(p.rdr.lambda == 0.7);
  CHECK(p.ess.edge_threshold == 5e-2);
  CHECK(p.ess.scale_multiplier == 1.0);
  p.apply_preset("llff");
  CHECK(p.rdr.rate == 0.4);
  CHECK(p.rdr.lambda == 0.2);
  CHECK(p.ess.edge_threshold == 1e-3);
  CHECK(p.ess.scale_multiplier == 50.0);
}

TEST_CASE("checkpoint codec") {
  CheckpointData d;
  d.config.seed = 99;
  d.config.rdr.rate = 0.25;
  d.iteration = 321;
  d.cloud = micro_scene(5, {.max_primitives = 8, .sh_degree = 2});
  d.adam = AdamState::for_cloud(d.cloud);
  d.adam.step = 17;
  CounterRng rng(3, Stream::Test);
  for (auto& g : d.adam.m.groups)
    for (double& v : g) v = rng.uniform(-1, 1);
  for (auto& g : d.adam.v.groups)
    for (double& v : g) v = rng.uniform(0, 1);
  d.stats.resize(d.cloud.size());
  for (std::size_t i = 0; i < d.cloud.size(); ++i) {
    d.stats.grad_accum[i] = rng.uniform();
    d.stats.denom[i] = double(i);
  }

  const std::string bytes = encode_checkpoint(d);
  CHECK(bytes.compare(0, 8, std::string(kCheckpointMagic, 8)) == 0);
  const CheckpointData back = decode_checkpoint(bytes);
  CHECK(back.iteration == 321);
  CHECK(back.cloud == d.cloud);
  CHECK(back.adam == d.adam);
  CHECK(back.stats == d.stats);
  CHECK(back.config.to_json() == d.config.to_json());
  CHECK(encode_checkpoint(back) == bytes);

  for (std::size_t cut : {std::size_t(0), std::size_t(7), std::size_t(20), bytes.size() / 2, bytes.size() - 1})
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, cut)), InputError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), InputError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), InputError);
  bad = bytes;
  bad[8] = 2;  // version field follows the magic
  CHECK_THROWS_AS(decode_checkpoint(bad), InputError);

  const fs::path p = scratch_dir("io_ckpt") / "c.bin";
  write_checkpoint(p.string(), d);
  CHECK(read_bytes(p) == bytes);
  CHECK(read_checkpoint(p.string()).cloud == d.cloud);
}

TEST_CASE("synthetic scenes") {
  SyntheticSceneSpec spec;
  spec.primitives = 40;
  spec.test_views = 5;
  spec.width = spec.height = 24;
  const auto a = generate_synthetic_scene(spec);
  const auto b = generate_synthetic_scene(spec);
  REQUIRE(a.dataset.train.size() == 3);
  REQUIRE(a.dataset.test.size() == 5);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.dataset.train[i].image.data == b.dataset.train[i].image.data);
  CHECK(a.ground_truth == b.ground_truth);
  for (const auto& tr : a.dataset.train)
    for (const auto& te : a.dataset.test) CHECK((tr.camera.center() - te.camera.center()).norm() > 1e-6);

  spec.noise = 0.0;
  const auto clean = generate_synthetic_scene(spec);
  TrainConfig cfg;
  for (const char* split : {"train", "test"}) {
    const auto& views = std::string(split) == "train" ? clean.dataset.train : clean.dataset.test;
    auto rows = evaluate(clean.ground_truth, views, cfg, 0, split);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].psnr == 100.0);
  }

  spec.width = 0;
  CHECK_THROWS(spec.validate());
}
