#pragma once

#include "mmsc/pipeline.hpp"
#include "mmsc/rng.hpp"

namespace mmsc {

// Desk-scale stand-in for real screening data: a breast-shaped half-ellipse
// intensity field with value-noise texture, optionally carrying bright
// blob/spiculated lesions with exact masks.
struct SynthParams {
  int height = 2048;
  int width = 2048;
  int lesion_count = 0;          // 0 emits a findings-negative case
  double contrast = 0.35;        // additive lesion intensity, in (0, 1]
  double texture_amp = 0.08;     // value-noise amplitude
  double lesion_radius_min = 40; // pixels at full resolution
  double lesion_radius_max = 90;
  double spiculated_prob = 0.5;
  Laterality laterality = Laterality::Left;
  View view = View::CC;
  std::string case_id = "synth";

  void validate() const;
};

Scan generate_synthetic_case(Rng& rng, const SynthParams& params);

}  // namespace mmsc
