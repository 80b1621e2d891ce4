#pragma once

#include <cstdint>
#include <vector>

#include "splatdrop/rasterizer.hpp"
#include "splatdrop/types.hpp"

namespace splatdrop {

struct EssConfig {
  bool enabled = true;
  double edge_threshold = 1e-3;
  double scale_multiplier = 50.0;  // times the densification size threshold
  int interval = 500;
  int start = 500;
  int end = 4500;

  void validate() const;
};

// Sobel magnitude of the luma image normalized by its maximum; 1 channel.
Image sobel_edge_map(const Image& image);

struct ViewEdgeScore {
  std::vector<double> score;          // sum_p w_i(p) E(p)
  std::vector<std::uint32_t> coverage;  // pixels with alpha_i(p) >= 1/255
};

// Scores one view from a forward pass record. Throws std::invalid_argument
// when the edge map resolution differs from the record.
ViewEdgeScore per_view_edge_score(const BlendRecord& record, const Image& edge_map);

struct EdgeScoreTable {
  std::vector<ViewEdgeScore> views;

  std::size_t num_views() const { return views.size(); }
  // sum_k score_{i,k} / coverage_{i,k}; views with zero coverage contribute 0.
  std::vector<double> aggregate() const;
};

std::vector<double> aggregate_scores(const EdgeScoreTable& table);

// max activated scale >= scale_threshold AND score >= edge_threshold.
std::vector<bool> ess_mask(const GaussianCloud& cloud, const std::vector<double>& scores,
                           double scale_threshold, double edge_threshold);

// Splits every masked primitive into two children.
StructuralEdit apply_ess(const GaussianCloud& cloud, const std::vector<bool>& mask,
                         CounterRng& rng);

}  // namespace splatdrop
