#include "splatdrop/ess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace splatdrop {

void EssConfig::validate() const {
  if (!(edge_threshold >= 0.0)) throw InputError("ess.edge_threshold must be >= 0");
  if (!(scale_multiplier > 0.0)) throw InputError("ess.scale_multiplier must be > 0");
  if (interval <= 0) throw InputError("ess.interval must be > 0");
  if (start < 0 || end < start) throw InputError("ess.start/ess.end must satisfy 0 <= start <= end");
}

Image sobel_edge_map(const Image& image) {
  const int W = image.width, H = image.height;
  Image luma(W, H, 1);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (image.channels >= 3) {
        luma.at(x, y) =
            0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) + 0.114 * image.at(x, y, 2);
      } else {
        luma.at(x, y) = image.at(x, y, 0);
      }
    }
  }
  auto px = [&](int x, int y) { return luma.at(std::clamp(x, 0, W - 1), std::clamp(y, 0, H - 1)); };
  Image out(W, H, 1);
  double peak = 0.0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double gx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
      const double gy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1)) -
                        (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
      const double m = std::sqrt(gx * gx + gy * gy);
      out.at(x, y) = m;
      peak = std::max(peak, m);
    }
  }
  if (peak > 0.0) {
    for (double& v : out.data) v /= peak;
  }
  return out;
}

ViewEdgeScore per_view_edge_score(const BlendRecord& record, const Image& edge_map) {
  if (edge_map.width != record.width || edge_map.height != record.height) {
    throw std::invalid_argument("edge map resolution differs from the rendered view");
  }
  ViewEdgeScore out;
  out.score.assign(record.num_primitives, 0.0);
  out.coverage.assign(record.num_primitives, 0);
  for (int y = 0; y < record.height; ++y) {
    for (int x = 0; x < record.width; ++x) {
      const double e = edge_map.at(x, y, 0);
      for (const BlendEntry& b : record.pixel(x, y)) {
        out.score[b.source] += b.alpha * b.transmittance * e;
        out.coverage[b.source] += 1;
      }
    }
  }
  return out;
}

std::vector<double> EdgeScoreTable::aggregate() const {
  std::vector<double> total;
  if (views.empty()) return total;
  total.assign(views.front().score.size(), 0.0);
  for (const ViewEdgeScore& v : views) {
    if (v.score.size() != total.size()) {
      throw std::invalid_argument("edge score views disagree on the primitive count");
    }
    for (std::size_t i = 0; i < total.size(); ++i) {
      if (v.coverage[i] > 0) total[i] += v.score[i] / static_cast<double>(v.coverage[i]);
    }
  }
  return total;
}

std::vector<double> aggregate_scores(const EdgeScoreTable& table) { return table.aggregate(); }

std::vector<bool> ess_mask(const GaussianCloud& cloud, const std::vector<double>& scores,
                           double scale_threshold, double edge_threshold) {
  if (scores.size() != cloud.size()) {
    throw std::invalid_argument("edge score count differs from the cloud size");
  }
  std::vector<bool> mask(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    mask[i] = cloud.max_scale(i) >= scale_threshold && scores[i] >= edge_threshold;
  }
  return mask;
}

StructuralEdit apply_ess(const GaussianCloud& cloud, const std::vector<bool>& mask,
                         CounterRng& rng) {
  if (mask.size() != cloud.size()) {
    throw std::invalid_argument("split mask length differs from the cloud size");
  }
  return split_masked(cloud, mask, rng);
}

}  // namespace splatdrop
