#ifndef WEEDPILOT_SYNTH_HPP
#define WEEDPILOT_SYNTH_HPP

#include <cstdint>
#include <map>

#include "weedpilot/image.hpp"
#include "weedpilot/manifest.hpp"
#include "weedpilot/rng.hpp"

namespace weedpilot {

// Float RGB working surface for the procedural painters, values in 0..255.
struct Canvas {
  int height = 0;
  int width = 0;
  std::vector<float> rgb;  // interleaved, H*W*3

  Canvas(int h, int w) : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, 0.f) {}
  float* px(int y, int x) { return &rgb[(static_cast<std::size_t>(y) * width + x) * 3]; }
};

namespace paint {

void soil(Canvas& c, std::uint64_t seed);

// Parallel rows of flax foliage. spacing/phase in pixels; angle in radians.
void flax_rows(Canvas& c, std::uint64_t seed, float spacing_px, float phase_px, float angle);

// Draws the class motif centered at (cx, cy); scale is the motif radius in
// pixels. Negatives paint nothing. Returns the number of touched pixels.
int class_motif(Canvas& c, const ClassTaxonomy& tax, int class_id, std::uint64_t seed,
                float cx, float cy, float scale, float rot);

void lighting(Canvas& c, float brightness, float shadow_angle, float shadow_strength);
void box_blur(Canvas& c, int radius_x, int radius_y);
void grain(Canvas& c, std::uint64_t seed, float sigma);

ImageTensor quantize(const Canvas& c);

}  // namespace paint

struct CorpusSpec {
  std::map<int, int> counts;  // class id -> sample count, all > 0
  int height = 112;
  int width = 192;

  static CorpusSpec uniform(const ClassTaxonomy& tax, int per_class, int h = 112, int w = 192);
  // Per-class counts from the field collection (Neg. 1474, CA. 990, ...).
  static CorpusSpec field_counts(const ClassTaxonomy& tax, int h = 112, int w = 192);
};

// Deterministic 16-class corpus: pure function of (spec, seed).
Manifest generate_synthetic_corpus(const CorpusSpec& spec, std::uint64_t seed,
                                   const ClassTaxonomy& tax);

// Renders one generated sample. background_only skips the motif stage, which
// is what the negative class always does.
ImageTensor render_synthetic(const ClassTaxonomy& tax, int class_id, const GenSource& src,
                             bool background_only = false);

}  // namespace weedpilot

#endif
