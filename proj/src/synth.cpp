#include "weedpilot/synth.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace weedpilot {

namespace {

constexpr float kPi = 3.14159265358979323846f;

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

inline float lattice(std::uint64_t seed, int xi, int yi) {
  std::uint64_t h = mix64(seed ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(xi)) |
                                  (static_cast<std::uint64_t>(static_cast<std::uint32_t>(yi)) << 32)));
  return static_cast<float>(h >> 40) * (1.0f / 16777216.0f);
}

inline float smooth01(float t) { return t * t * (3.f - 2.f * t); }

float value_noise(std::uint64_t seed, float x, float y) {
  float fx = std::floor(x), fy = std::floor(y);
  int xi = static_cast<int>(fx), yi = static_cast<int>(fy);
  float tx = smooth01(x - fx), ty = smooth01(y - fy);
  float v00 = lattice(seed, xi, yi), v10 = lattice(seed, xi + 1, yi);
  float v01 = lattice(seed, xi, yi + 1), v11 = lattice(seed, xi + 1, yi + 1);
  float a = v00 + (v10 - v00) * tx;
  float b = v01 + (v11 - v01) * tx;
  return a + (b - a) * ty;
}

float fbm2(std::uint64_t seed, float x, float y) {
  return 0.65f * value_noise(seed, x, y) + 0.35f * value_noise(seed ^ 0xa5a5a5a5ULL, 2.f * x, 2.f * y);
}

struct Color {
  float r, g, b;
};

inline Color lerp(const Color& a, const Color& b, float t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

inline void blend(Canvas& c, int y, int x, const Color& col, float a) {
  if (a <= 0.f) return;
  if (a > 1.f) a = 1.f;
  float* p = c.px(y, x);
  p[0] += (col.r - p[0]) * a;
  p[1] += (col.g - p[1]) * a;
  p[2] += (col.b - p[2]) * a;
}

// Painted-pixel counter shared by the motif primitives.
struct Brush {
  Canvas& canvas;
  int painted = 0;

  void stamp(int y, int x, const Color& col, float a) {
    if (a > 0.05f) ++painted;
    blend(canvas, y, x, col, a);
  }

  void disc(float cx, float cy, float r, const Color& col, float soft = 1.2f) {
    int x0 = std::max(0, static_cast<int>(cx - r - soft - 1));
    int x1 = std::min(canvas.width - 1, static_cast<int>(cx + r + soft + 1));
    int y0 = std::max(0, static_cast<int>(cy - r - soft - 1));
    int y1 = std::min(canvas.height - 1, static_cast<int>(cy + r + soft + 1));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        float d = std::hypot(x - cx, y - cy);
        float a = std::clamp((r + soft - d) / (2.f * soft), 0.f, 1.f);
        stamp(y, x, col, a);
      }
  }

  void capsule(float x0f, float y0f, float x1f, float y1f, float r, const Color& col,
               float soft = 1.2f) {
    float lox = std::min(x0f, x1f), hix = std::max(x0f, x1f);
    float loy = std::min(y0f, y1f), hiy = std::max(y0f, y1f);
    int x0 = std::max(0, static_cast<int>(lox - r - soft - 1));
    int x1 = std::min(canvas.width - 1, static_cast<int>(hix + r + soft + 1));
    int y0 = std::max(0, static_cast<int>(loy - r - soft - 1));
    int y1 = std::min(canvas.height - 1, static_cast<int>(hiy + r + soft + 1));
    float vx = x1f - x0f, vy = y1f - y0f;
    float len2 = vx * vx + vy * vy;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        float t = len2 > 0.f ? std::clamp(((x - x0f) * vx + (y - y0f) * vy) / len2, 0.f, 1.f) : 0.f;
        float d = std::hypot(x - (x0f + t * vx), y - (y0f + t * vy));
        float a = std::clamp((r + soft - d) / (2.f * soft), 0.f, 1.f);
        stamp(y, x, col, a);
      }
  }

  void ring(float cx, float cy, float R, float w, const Color& col, float soft = 1.2f) {
    float outer = R + w + soft;
    int x0 = std::max(0, static_cast<int>(cx - outer - 1));
    int x1 = std::min(canvas.width - 1, static_cast<int>(cx + outer + 1));
    int y0 = std::max(0, static_cast<int>(cy - outer - 1));
    int y1 = std::min(canvas.height - 1, static_cast<int>(cy + outer + 1));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        float d = std::fabs(std::hypot(x - cx, y - cy) - R);
        float a = std::clamp((w + soft - d) / (2.f * soft), 0.f, 1.f);
        stamp(y, x, col, a);
      }
  }

  void ellipse(float cx, float cy, float a_axis, float b_axis, float angle, const Color& col,
               float soft = 0.08f) {
    float ext = std::max(a_axis, b_axis) + 2.f;
    int x0 = std::max(0, static_cast<int>(cx - ext));
    int x1 = std::min(canvas.width - 1, static_cast<int>(cx + ext));
    int y0 = std::max(0, static_cast<int>(cy - ext));
    int y1 = std::min(canvas.height - 1, static_cast<int>(cy + ext));
    float ca = std::cos(angle), sa = std::sin(angle);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        float u = (x - cx) * ca + (y - cy) * sa;
        float v = -(x - cx) * sa + (y - cy) * ca;
        float rho = std::sqrt((u / a_axis) * (u / a_axis) + (v / b_axis) * (v / b_axis));
        float a = std::clamp((1.f + soft - rho) / (2.f * soft), 0.f, 1.f);
        stamp(y, x, col, a);
      }
  }

  void rhombus(float cx, float cy, float a_axis, float b_axis, float angle, const Color& col,
               float soft = 0.10f) {
    float ext = std::max(a_axis, b_axis) + 2.f;
    int x0 = std::max(0, static_cast<int>(cx - ext));
    int x1 = std::min(canvas.width - 1, static_cast<int>(cx + ext));
    int y0 = std::max(0, static_cast<int>(cy - ext));
    int y1 = std::min(canvas.height - 1, static_cast<int>(cy + ext));
    float ca = std::cos(angle), sa = std::sin(angle);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        float u = (x - cx) * ca + (y - cy) * sa;
        float v = -(x - cx) * sa + (y - cy) * ca;
        float rho = std::fabs(u) / a_axis + std::fabs(v) / b_axis;
        float a = std::clamp((1.f + soft - rho) / (2.f * soft), 0.f, 1.f);
        stamp(y, x, col, a);
      }
  }
};

inline Color jitter_color(Color base, Rng& rng, float amt = 14.f) {
  auto j = [&](float v) {
    return std::clamp(v + static_cast<float>(rng.uniform(-amt, amt)), 0.f, 255.f);
  };
  return {j(base.r), j(base.g), j(base.b)};
}

struct Frame2 {
  float cx, cy, ca, sa;
  // Motif-local coordinates -> canvas coordinates.
  void map(float u, float v, float& x, float& y) const {
    x = cx + u * ca - v * sa;
    y = cy + u * sa + v * ca;
  }
};

}  // namespace

namespace paint {

void soil(Canvas& c, std::uint64_t seed) {
  const Color dark{96.f, 74.f, 52.f}, light{148.f, 118.f, 86.f}, stone{168.f, 164.f, 156.f};
  for (int y = 0; y < c.height; ++y)
    for (int x = 0; x < c.width; ++x) {
      float n = fbm2(seed, x / 26.f, y / 26.f);
      float hf = value_noise(seed ^ 0x11ULL, x / 3.5f, y / 3.5f);
      Color col = lerp(dark, light, n);
      float m = 0.90f + 0.20f * hf;
      col = {col.r * m, col.g * m, col.b * m};
      float st = value_noise(seed ^ 0x22ULL, x / 6.f, y / 6.f);
      if (st > 0.90f) col = lerp(col, stone, std::min(1.f, (st - 0.90f) * 14.f));
      float* p = c.px(y, x);
      p[0] = col.r;
      p[1] = col.g;
      p[2] = col.b;
    }
}

void flax_rows(Canvas& c, std::uint64_t seed, float spacing_px, float phase_px, float angle) {
  const Color foliage{74.f, 136.f, 92.f}, bloom{96.f, 118.f, 208.f};
  float ca = std::cos(angle), sa = std::sin(angle);
  float band = std::max(2.5f, spacing_px * 0.32f);
  for (int y = 0; y < c.height; ++y)
    for (int x = 0; x < c.width; ++x) {
      float t = x * ca + y * sa + phase_px;
      float d = std::fabs(t - spacing_px * std::round(t / spacing_px));
      if (d > band + 1.5f) continue;
      float leafy = value_noise(seed ^ 0x33ULL, x / 2.8f, y / 2.8f);
      float a = std::clamp((band - d) / band, 0.f, 1.f) * (0.35f + 0.65f * leafy);
      Color col = lerp(foliage, {58.f, 112.f, 70.f}, leafy);
      blend(c, y, x, col, a);
      float fl = value_noise(seed ^ 0x44ULL, x / 1.7f, y / 1.7f);
      if (fl > 0.955f && d < band * 0.8f) blend(c, y, x, bloom, std::min(1.f, (fl - 0.955f) * 30.f));
    }
}

void lighting(Canvas& c, float brightness, float shadow_angle, float shadow_strength) {
  float ca = std::cos(shadow_angle), sa = std::sin(shadow_angle);
  float half_diag = 0.5f * std::hypot(static_cast<float>(c.width), static_cast<float>(c.height));
  for (int y = 0; y < c.height; ++y)
    for (int x = 0; x < c.width; ++x) {
      float s = 0.5f + 0.5f * ((x - c.width / 2.f) * ca + (y - c.height / 2.f) * sa) / half_diag;
      float f = brightness * (1.f - shadow_strength * s);
      float* p = c.px(y, x);
      p[0] *= f;
      p[1] *= f;
      p[2] *= f;
    }
}

void box_blur(Canvas& c, int radius_x, int radius_y) {
  if (radius_x <= 0 && radius_y <= 0) return;
  std::vector<float> tmp(c.rgb.size());
  if (radius_x > 0) {
    float inv = 1.f / (2 * radius_x + 1);
    for (int y = 0; y < c.height; ++y)
      for (int x = 0; x < c.width; ++x)
        for (int ch = 0; ch < 3; ++ch) {
          float acc = 0.f;
          for (int k = -radius_x; k <= radius_x; ++k) {
            int xx = std::clamp(x + k, 0, c.width - 1);
            acc += c.rgb[(static_cast<std::size_t>(y) * c.width + xx) * 3 + ch];
          }
          tmp[(static_cast<std::size_t>(y) * c.width + x) * 3 + ch] = acc * inv;
        }
    c.rgb.swap(tmp);
  }
  if (radius_y > 0) {
    float inv = 1.f / (2 * radius_y + 1);
    for (int y = 0; y < c.height; ++y)
      for (int x = 0; x < c.width; ++x)
        for (int ch = 0; ch < 3; ++ch) {
          float acc = 0.f;
          for (int k = -radius_y; k <= radius_y; ++k) {
            int yy = std::clamp(y + k, 0, c.height - 1);
            acc += c.rgb[(static_cast<std::size_t>(yy) * c.width + x) * 3 + ch];
          }
          tmp[(static_cast<std::size_t>(y) * c.width + x) * 3 + ch] = acc * inv;
        }
    c.rgb.swap(tmp);
  }
}

void grain(Canvas& c, std::uint64_t seed, float sigma) {
  for (int y = 0; y < c.height; ++y)
    for (int x = 0; x < c.width; ++x) {
      std::uint64_t h = mix64(seed ^ (static_cast<std::uint64_t>(y) * 0x100000001ULL + x));
      float* p = c.px(y, x);
      for (int ch = 0; ch < 3; ++ch) {
        float u = static_cast<float>((h >> (ch * 21)) & 0x1fffff) * (1.f / 2097152.f);
        p[ch] += (u - 0.5f) * 2.f * sigma;
      }
    }
}

ImageTensor quantize(const Canvas& c) {
  ImageTensor img(c.height, c.width, 3);
  for (std::size_t i = 0; i < c.rgb.size(); ++i)
    img.data[i] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(c.rgb[i]), 0, 255));
  return img;
}

int class_motif(Canvas& c, const ClassTaxonomy& tax, int class_id, std::uint64_t seed,
                float cx, float cy, float scale, float rot) {
  if (class_id == tax.negative_class_id()) return 0;
  Rng rng(seed);
  Brush br{c};
  Frame2 fr{cx, cy, std::cos(rot), std::sin(rot)};
  const std::string& name = tax.name_of(class_id);

  auto scatter = [&](float radius) {
    float ang = static_cast<float>(rng.uniform(0.0, 2.0 * kPi));
    float rr = radius * std::sqrt(static_cast<float>(rng.uniform()));
    float x, y;
    fr.map(rr * std::cos(ang), rr * std::sin(ang), x, y);
    return std::pair<float, float>(x, y);
  };

  if (name == "AS.") {  // clustered round blobs, red
    Color col = jitter_color({202.f, 48.f, 44.f}, rng);
    int n = 8 + static_cast<int>(rng.below(4));
    for (int i = 0; i < n; ++i) {
      auto [x, y] = scatter(0.62f * scale);
      br.disc(x, y, scale * static_cast<float>(rng.uniform(0.20, 0.34)), col);
    }
  } else if (name == "BS.") {  // bundle of thin grass blades
    Color col = jitter_color({58.f, 162.f, 58.f}, rng);
    float bundle = static_cast<float>(rng.uniform(0.0, 2.0 * kPi));
    int n = 13 + static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i) {
      auto [x0, y0] = scatter(0.5f * scale);
      float a = bundle + static_cast<float>(rng.uniform(-0.45, 0.45));
      float len = scale * static_cast<float>(rng.uniform(0.9, 1.35));
      br.capsule(x0, y0, x0 + len * std::cos(a), y0 + len * std::sin(a),
                 scale * 0.055f, col);
    }
  } else if (name == "CT.") {  // thistle starburst, magenta
    Color col = jitter_color({204.f, 58.f, 192.f}, rng);
    int n = 12 + static_cast<int>(rng.below(4));
    for (int i = 0; i < n; ++i) {
      float a = rot + 2.f * kPi * i / n + static_cast<float>(rng.uniform(-0.12, 0.12));
      float len = scale * static_cast<float>(rng.uniform(0.7, 0.95));
      br.capsule(cx, cy, cx + len * std::cos(a), cy + len * std::sin(a), scale * 0.06f, col);
    }
    br.disc(cx, cy, scale * 0.22f, jitter_color({168.f, 40.f, 158.f}, rng));
  } else if (name == "CA.") {  // six-petal rosette, violet
    Color col = jitter_color({118.f, 58.f, 204.f}, rng);
    int petals = 6;
    for (int i = 0; i < petals; ++i) {
      float a = rot + 2.f * kPi * i / petals;
      float x, y;
      fr.map(0.42f * scale * std::cos(a - rot), 0.42f * scale * std::sin(a - rot), x, y);
      br.ellipse(x, y, 0.46f * scale, 0.19f * scale, a, col);
    }
    br.disc(cx, cy, scale * 0.16f, jitter_color({80.f, 38.f, 150.f}, rng));
  } else if (name == "CD.") {  // zigzag runner with nodes
    Color col = jitter_color({152.f, 162.f, 36.f}, rng);
    float a = rot;
    float x = cx - 0.8f * scale * std::cos(rot), y = cy - 0.8f * scale * std::sin(rot);
    int n = 8 + static_cast<int>(rng.below(3));
    for (int i = 0; i < n; ++i) {
      float step = scale * static_cast<float>(rng.uniform(0.35, 0.5));
      float na = a + ((i % 2 == 0) ? 0.55f : -0.55f);
      float nx = x + step * std::cos(na), ny = y + step * std::sin(na);
      br.capsule(x, y, nx, ny, scale * 0.045f, col);
      br.disc(nx, ny, scale * 0.11f, col);
      x = nx;
      y = ny;
    }
  } else if (name == "D.") {  // dandelion: bright disc + halo ring
    Color head = jitter_color({242.f, 204.f, 36.f}, rng);
    br.disc(cx, cy, 0.40f * scale, head);
    br.ring(cx, cy, 0.60f * scale, 0.10f * scale, jitter_color({246.f, 228.f, 120.f}, rng));
  } else if (name == "Flax") {  // the crop: parallel foliage rows
    float spacing = std::max(8.f, scale * static_cast<float>(rng.uniform(0.9, 1.4)));
    float phase = static_cast<float>(rng.uniform(0.0, spacing));
    flax_rows(c, derive_seed(seed, 7), spacing, phase, rot);
    br.painted = c.height * c.width / 4;  // rows cover a broad area by construction
  } else if (name == "L.") {  // scattered diamond leaves, dusty
    Color col = jitter_color({192.f, 196.f, 186.f}, rng);
    int n = 9 + static_cast<int>(rng.below(4));
    for (int i = 0; i < n; ++i) {
      auto [x, y] = scatter(0.6f * scale);
      br.rhombus(x, y, 0.30f * scale, 0.19f * scale,
                 static_cast<float>(rng.uniform(0.0, 2.0 * kPi)), col);
    }
  } else if (name == "N.") {  // nutsedge: V-shaped spike triads
    Color col = jitter_color({232.f, 138.f, 36.f}, rng);
    int n = 6 + static_cast<int>(rng.below(3));
    for (int i = 0; i < n; ++i) {
      auto [x, y] = scatter(0.55f * scale);
      float base = static_cast<float>(rng.uniform(0.0, 2.0 * kPi));
      for (int j = -1; j <= 1; ++j) {
        float a = base + 0.38f * j;
        br.capsule(x, y, x + 0.5f * scale * std::cos(a), y + 0.5f * scale * std::sin(a),
                   scale * 0.055f, col);
      }
    }
  } else if (name == "PM.") {  // plantain: broad dark leaves with pale veins
    Color leaf = jitter_color({28.f, 108.f, 46.f}, rng);
    Color vein = jitter_color({110.f, 168.f, 118.f}, rng);
    int n = 3 + static_cast<int>(rng.below(2));
    for (int i = 0; i < n; ++i) {
      auto [x, y] = scatter(0.40f * scale);
      float a = static_cast<float>(rng.uniform(0.0, 2.0 * kPi));
      float La = 0.60f * scale, Lb = 0.38f * scale;
      br.ellipse(x, y, La, Lb, a, leaf);
      for (int v = -1; v <= 1; ++v) {
        float off = v * Lb * 0.45f;
        br.capsule(x - La * 0.8f * std::cos(a) - off * std::sin(a),
                   y - La * 0.8f * std::sin(a) + off * std::cos(a),
                   x + La * 0.8f * std::cos(a) - off * std::sin(a),
                   y + La * 0.8f * std::sin(a) + off * std::cos(a), scale * 0.02f, vein);
      }
    }
  } else if (name == "SF.") {  // foxtail: thick fuzzy cylinders, tan
    Color col = jitter_color({212.f, 172.f, 108.f}, rng);
    int n = 3 + static_cast<int>(rng.below(2));
    for (int i = 0; i < n; ++i) {
      auto [x0, y0] = scatter(0.45f * scale);
      float a = static_cast<float>(rng.uniform(0.0, 2.0 * kPi));
      float len = scale * static_cast<float>(rng.uniform(0.7, 0.95));
      float x1 = x0 + len * std::cos(a), y1 = y0 + len * std::sin(a);
      br.capsule(x0, y0, x1, y1, scale * 0.15f, col);
      int hairs = 14;
      for (int hgt = 0; hgt < hairs; ++hgt) {
        float t = static_cast<float>(rng.uniform());
        float hx = x0 + t * (x1 - x0), hy = y0 + t * (y1 - y0);
        float side = rng.bernoulli(0.5) ? 1.f : -1.f;
        br.capsule(hx, hy, hx - side * 0.2f * scale * std::sin(a),
                   hy + side * 0.2f * scale * std::cos(a), scale * 0.02f, col);
      }
    }
  } else if (name == "SA.") {  // sow thistle: jagged leaf + yellow dots
    Color leaf = jitter_color({40.f, 172.f, 150.f}, rng);
    Color dot = jitter_color({226.f, 206.f, 64.f}, rng);
    float a = rot;
    br.capsule(cx - 0.7f * scale * std::cos(a), cy - 0.7f * scale * std::sin(a),
               cx + 0.7f * scale * std::cos(a), cy + 0.7f * scale * std::sin(a),
               scale * 0.10f, leaf);
    int teeth = 8;
    for (int i = 0; i < teeth; ++i) {
      float t = -0.65f + 1.3f * i / (teeth - 1);
      float side = (i % 2 == 0) ? 1.f : -1.f;
      float bx = cx + t * scale * std::cos(a), by = cy + t * scale * std::sin(a);
      br.capsule(bx, by, bx - side * 0.28f * scale * std::sin(a),
                 by + side * 0.28f * scale * std::cos(a), scale * 0.05f, leaf);
    }
    for (int i = 0; i < 5; ++i) {
      auto [x, y] = scatter(0.7f * scale);
      br.disc(x, y, 0.10f * scale, dot);
    }
  } else if (name == "VM.") {  // mallow: ring-shaped round leaves
    Color col = jitter_color({118.f, 222.f, 96.f}, rng);
    int n = 5 + static_cast<int>(rng.below(3));
    for (int i = 0; i < n; ++i) {
      auto [x, y] = scatter(0.55f * scale);
      float R = scale * static_cast<float>(rng.uniform(0.20, 0.34));
      br.ring(x, y, R, 0.40f * R, col);
    }
  } else if (name == "VP.") {  // purslane: tight clusters of fat paddles
    int clusters = 4;
    for (int k = 0; k < clusters; ++k) {
      Color col = jitter_color({142.f, 58.f, 38.f}, rng, 20.f);
      auto [x, y] = scatter(0.6f * scale);
      int n = 6 + static_cast<int>(rng.below(3));
      for (int i = 0; i < n; ++i) {
        float a = static_cast<float>(rng.uniform(0.0, 2.0 * kPi));
        float d = 0.14f * scale * static_cast<float>(rng.uniform());
        br.ellipse(x + d * std::cos(a), y + d * std::sin(a), 0.16f * scale, 0.10f * scale, a, col);
      }
    }
  } else if (name == "CG.") {  // crabgrass: fan of long blades from one point
    Color col = jitter_color({96.f, 198.f, 208.f}, rng);
    float bx, by;
    fr.map(-0.3f * scale, 0.f, bx, by);
    int n = 7 + static_cast<int>(rng.below(3));
    for (int i = 0; i < n; ++i) {
      float a = rot + (-0.9f + 1.8f * i / (n - 1)) + static_cast<float>(rng.uniform(-0.08, 0.08));
      float len = scale * static_cast<float>(rng.uniform(0.9, 1.2));
      float mx = bx + 0.55f * len * std::cos(a), my = by + 0.55f * len * std::sin(a);
      float a2 = a + static_cast<float>(rng.uniform(-0.25, 0.25));
      br.capsule(bx, by, mx, my, scale * 0.045f, col);
      br.capsule(mx, my, mx + 0.45f * len * std::cos(a2), my + 0.45f * len * std::sin(a2),
                 scale * 0.035f, col);
    }
  } else {  // custom taxonomy entry: hashed hue, polygon ring
    std::uint64_t h = mix64(seed ^ std::hash<std::string>{}(name));
    Color col{static_cast<float>(80 + (h & 0x7f)), static_cast<float>(80 + ((h >> 8) & 0x7f)),
              static_cast<float>(80 + ((h >> 16) & 0x7f))};
    int sides = 3 + static_cast<int>((h >> 24) & 0x3);
    for (int i = 0; i < sides; ++i) {
      float a0 = rot + 2.f * kPi * i / sides, a1 = rot + 2.f * kPi * (i + 1) / sides;
      br.capsule(cx + 0.5f * scale * std::cos(a0), cy + 0.5f * scale * std::sin(a0),
                 cx + 0.5f * scale * std::cos(a1), cy + 0.5f * scale * std::sin(a1),
                 scale * 0.06f, col);
    }
  }
  return br.painted;
}

}  // namespace paint

CorpusSpec CorpusSpec::uniform(const ClassTaxonomy& tax, int per_class, int h, int w) {
  CorpusSpec s;
  s.height = h;
  s.width = w;
  for (const auto& c : tax.classes()) s.counts[c.id] = per_class;
  return s;
}

CorpusSpec CorpusSpec::field_counts(const ClassTaxonomy& tax, int h, int w) {
  // Per-class image counts observed in the field collection; classes not
  // listed fall back to the ~600 average.
  static const std::map<std::string, int> counts = {
      {"AS.", 659}, {"BS.", 655}, {"CT.", 560}, {"CA.", 990}, {"CD.", 631},
      {"D.", 428},  {"Flax", 625}, {"L.", 549}, {"Neg.", 1474}, {"N.", 649},
      {"PM.", 526}, {"SF.", 566}, {"SA.", 565}, {"VM.", 704}, {"VP.", 559}};
  CorpusSpec s;
  s.height = h;
  s.width = w;
  for (const auto& c : tax.classes()) {
    auto it = counts.find(c.short_name);
    s.counts[c.id] = it != counts.end() ? it->second : 600;
  }
  return s;
}

Manifest generate_synthetic_corpus(const CorpusSpec& spec, std::uint64_t seed,
                                   const ClassTaxonomy& tax) {
  if (spec.height < 32 || spec.width < 32)
    throw Error("corpus spec: image size must be at least 32x32");
  Manifest m(tax);
  for (const auto& cls : tax.classes()) {
    auto it = spec.counts.find(cls.id);
    int n = it == spec.counts.end() ? 0 : it->second;
    if (n <= 0) throw Error("corpus spec: count for class " + cls.short_name + " must be > 0");
    for (int i = 0; i < n; ++i) {
      Sample s;
      s.gen = GenSource{derive_seed(seed, static_cast<std::uint64_t>(cls.id), static_cast<std::uint64_t>(i)),
                        spec.height, spec.width};
      s.class_id = cls.id;
      s.width = spec.width;
      s.height = spec.height;
      m.add(std::move(s));
    }
  }
  return m;
}

ImageTensor render_synthetic(const ClassTaxonomy& tax, int class_id, const GenSource& src,
                             bool background_only) {
  if (src.height <= 0 || src.width <= 0) throw Error("render_synthetic: bad dimensions");
  Canvas canvas(src.height, src.width);

  const std::uint64_t bg_seed = derive_seed(src.seed, 1);
  const std::uint64_t motif_seed = derive_seed(src.seed, 2);
  const std::uint64_t grain_seed = derive_seed(src.seed, 3);
  Rng knobs(derive_seed(src.seed, 4));

  // Knob draws happen in a fixed order regardless of class so that the
  // background of a negative render matches background_only exactly.
  const float minhw = static_cast<float>(std::min(src.height, src.width));
  float cx = static_cast<float>(knobs.uniform(0.38, 0.62)) * src.width;
  float cy = static_cast<float>(knobs.uniform(0.38, 0.62)) * src.height;
  float scale = static_cast<float>(knobs.uniform(0.34, 0.50)) * minhw;
  float rot = static_cast<float>(knobs.uniform(0.0, 2.0 * kPi));
  float brightness = static_cast<float>(knobs.uniform(0.78, 1.18));
  float shadow_angle = static_cast<float>(knobs.uniform(0.0, 2.0 * kPi));
  float shadow_strength = static_cast<float>(knobs.uniform(0.0, 0.30));
  bool blur = knobs.bernoulli(0.30);
  float sigma = static_cast<float>(knobs.uniform(2.5, 5.5));
  bool rows_hint = knobs.bernoulli(0.35);
  float hint_spacing = static_cast<float>(knobs.uniform(0.8, 1.3)) * scale;
  float hint_phase = static_cast<float>(knobs.uniform(0.0, 1.0)) * hint_spacing;

  paint::soil(canvas, bg_seed);
  const bool is_neg = class_id == tax.negative_class_id();
  const bool is_crop = class_id == tax.crop_class_id();
  if (!background_only && !is_neg) {
    if (rows_hint && !is_crop) {
      // Faint crop rows behind a weed: field shots rarely show bare soil.
      Canvas rows(src.height, src.width);
      rows.rgb = canvas.rgb;
      paint::flax_rows(rows, derive_seed(src.seed, 5), hint_spacing, hint_phase, rot + kPi / 2);
      for (std::size_t i = 0; i < canvas.rgb.size(); ++i)
        canvas.rgb[i] += 0.45f * (rows.rgb[i] - canvas.rgb[i]);
    }
    paint::class_motif(canvas, tax, class_id, motif_seed, cx, cy, scale, rot);
  }
  paint::lighting(canvas, brightness, shadow_angle, shadow_strength);
  if (blur) paint::box_blur(canvas, 1, 1);
  paint::grain(canvas, grain_seed, sigma);
  return paint::quantize(canvas);
}

}  // namespace weedpilot
