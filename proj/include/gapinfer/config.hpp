#pragma once

#include <cmath>

#include "gapinfer/smatch.hpp"

namespace gapinfer {

// Knobs shared across estimation, inference and the CLI. Field names follow
// what they control rather than any shorthand.
struct PipelineConfig {
  double alpha_temperature = 0.1;        // sharpness of the neural/symbolic gate
  double alpha_bias = 0.25;              // gate offset
  double aggregation_temperature = 0.1;  // softmax temperature over hypothesis scores
  double logprob_floor = std::log(1e-10);
  double prune_threshold = 0.0;          // 0 disables pruning
  bool mixture = false;
  double mixture_cut = 0.5;              // stop merging clusters at this distance
  int mixture_prior_sign = -1;           // sign on the overlap score inside the prior
  bool alpha_per_candidate = false;      // gate per candidate instead of per variable
  AlignOptions align;
};

}  // namespace gapinfer
