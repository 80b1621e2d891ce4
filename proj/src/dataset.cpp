#include "splatdrop/dataset.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "splatdrop/image_io.hpp"

namespace splatdrop {

namespace fs = std::filesystem;

namespace {

const Eigen::Matrix3d kFlipYZ = Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();

void validate_split(const std::vector<View>& views, const char* split) {
  if (views.empty()) return;
  const int w = views.front().camera.width, h = views.front().camera.height;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const View& v = views[i];
    const std::string where = std::string(split) + " view " + std::to_string(i) + " ('" + v.name + "')";
    try {
      v.camera.validate();
    } catch (const std::invalid_argument& e) {
      throw InputError(where + ": " + e.what());
    }
    if (v.camera.width != w || v.camera.height != h) {
      throw InputError(where + ": resolution differs from the rest of the split");
    }
    if (!v.image.empty() &&
        (v.image.width != w || v.image.height != h || v.image.channels != 3)) {
      throw InputError(where + ": image does not match the camera resolution");
    }
    if (v.depth && (v.depth->width != w || v.depth->height != h || v.depth->channels != 1)) {
      throw InputError(where + ": depth map does not match the camera resolution");
    }
  }
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

fs::path resolve_image(const fs::path& dir, const std::string& file_path) {
  fs::path p = dir / file_path;
  if (fs::exists(p)) return p;
  fs::path with_ext = p;
  with_ext += ".png";
  if (fs::exists(with_ext)) return with_ext;
  return p;
}

std::vector<View> load_frames(const fs::path& file, const Eigen::Vector3d& background,
                              bool load_images) {
  const nlohmann::json j = read_json(file);
  const std::string where = file.filename().string();
  if (!j.contains("camera_angle_x") || !j["camera_angle_x"].is_number()) {
    throw InputError(where + ": missing numeric 'camera_angle_x'");
  }
  if (!j.contains("frames") || !j["frames"].is_array()) {
    throw InputError(where + ": missing 'frames' array");
  }
  const double angle = j["camera_angle_x"].get<double>();
  if (!(angle > 0.0 && angle < M_PI)) throw InputError(where + ": camera_angle_x out of range");
  const fs::path dir = file.parent_path();
  std::vector<View> views;
  const auto& frames = j["frames"];
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& fr = frames[f];
    const std::string tag = where + " frame " + std::to_string(f);
    if (!fr.contains("file_path") || !fr["file_path"].is_string()) {
      throw InputError(tag + ": missing 'file_path'");
    }
    if (!fr.contains("transform_matrix") || !fr["transform_matrix"].is_array() ||
        fr["transform_matrix"].size() != 4) {
      throw InputError(tag + ": missing 4x4 'transform_matrix'");
    }
    Eigen::Matrix4d m;
    for (int r = 0; r < 4; ++r) {
      const auto& row = fr["transform_matrix"][r];
      if (!row.is_array() || row.size() != 4) throw InputError(tag + ": transform_matrix must be 4x4");
      for (int c = 0; c < 4; ++c) {
        if (!row[c].is_number()) throw InputError(tag + ": non-numeric transform_matrix entry");
        m(r, c) = row[c].get<double>();
      }
    }
    if (!m.allFinite() || std::abs(m.topLeftCorner<3, 3>().determinant()) < 1e-9) {
      throw InputError(tag + ": transform_matrix is not invertible");
    }
    View v;
    v.name = fr["file_path"].get<std::string>();
    try {
      pose_from_blender(m, v.camera.rotation, v.camera.translation);
    } catch (const std::invalid_argument& e) {
      throw InputError(tag + ": " + e.what());
    }
    int w = 0, h = 0;
    if (load_images) {
      v.image = load_image(resolve_image(dir, v.name).string(), background);
      w = v.image.width;
      h = v.image.height;
    } else {
      if (!j.contains("w") || !j.contains("h")) {
        throw InputError(where + ": 'w' and 'h' are required when images are not loaded");
      }
      w = j["w"].get<int>();
      h = j["h"].get<int>();
    }
    if (fr.contains("depth_path")) {
      v.depth = load_depth((dir / fr["depth_path"].get<std::string>()).string(), w, h);
    }
    v.camera.width = w;
    v.camera.height = h;
    v.camera.fx = w / (2.0 * std::tan(angle / 2.0));
    v.camera.fy = v.camera.fx;
    v.camera.cx = w / 2.0;
    v.camera.cy = h / 2.0;
    views.push_back(std::move(v));
  }
  return views;
}

}  // namespace

void Dataset::validate() const {
  if (train.empty()) throw InputError("dataset has no training views");
  validate_split(train, "train");
  validate_split(test, "test");
  if (!(scene_extent > 0.0) || !std::isfinite(scene_extent)) {
    throw InputError("scene extent must be positive");
  }
}

void Dataset::limit_train_views(int k) {
  if (k > 0 && static_cast<std::size_t>(k) < train.size()) train.resize(k);
  scene_extent = camera_extent(train);
}

double camera_extent(const std::vector<View>& views) {
  if (views.empty()) return 1.0;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const View& v : views) mean += v.camera.center();
  mean /= static_cast<double>(views.size());
  double far = 0.0;
  for (const View& v : views) far = std::max(far, (v.camera.center() - mean).norm());
  return far > 1e-12 ? 1.1 * far : 1.0;
}

void pose_from_blender(const Eigen::Matrix4d& c2w_gl, Eigen::Matrix3d& rotation,
                       Eigen::Vector3d& translation) {
  Eigen::Matrix3d r = c2w_gl.topLeftCorner<3, 3>() * kFlipYZ;
  // Stored matrices are rounded; snap to the nearest rotation.
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d snapped = svd.matrixU() * svd.matrixV().transpose();
  if ((snapped - r).cwiseAbs().maxCoeff() > 1e-3 || snapped.determinant() < 0.0) {
    throw std::invalid_argument("camera-to-world rotation is not rigid");
  }
  const Eigen::Vector3d center = c2w_gl.block<3, 1>(0, 3);
  rotation = snapped.transpose();
  translation = -rotation * center;
}

Eigen::Matrix4d pose_to_blender(const Eigen::Matrix3d& rotation,
                                const Eigen::Vector3d& translation) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation.transpose() * kFlipYZ;
  m.block<3, 1>(0, 3) = -rotation.transpose() * translation;
  return m;
}

Dataset load_blender_transforms(const std::string& directory, const Eigen::Vector3d& background,
                                bool load_images) {
  const fs::path dir(directory);
  if (!fs::is_directory(dir)) throw InputError("'" + directory + "' is not a directory");
  Dataset ds;
  const fs::path train = dir / "transforms_train.json";
  const fs::path test = dir / "transforms_test.json";
  const fs::path single = dir / "transforms.json";
  if (fs::exists(train)) {
    ds.train = load_frames(train, background, load_images);
    if (fs::exists(test)) ds.test = load_frames(test, background, load_images);
  } else if (fs::exists(single)) {
    ds.train = load_frames(single, background, load_images);
  } else {
    throw InputError("no transforms_train.json or transforms.json in '" + directory + "'");
  }
  ds.scene_extent = camera_extent(ds.train);
  ds.bounds.min = Eigen::Vector3d::Constant(-1.3);
  ds.bounds.max = Eigen::Vector3d::Constant(1.3);
  ds.validate();
  return ds;
}

}  // namespace splatdrop
