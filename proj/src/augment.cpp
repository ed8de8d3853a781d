#include "weedpilot/augment.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "weedpilot/rng.hpp"

namespace weedpilot {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

using Mat3 = Eigen::Matrix3d;

Mat3 translation(double tx, double ty) {
  Mat3 m = Mat3::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return m;
}

// Bilinear sample with edge replication, rounded to u8.
inline void sample_bilinear(const ImageTensor& src, double sx, double sy, std::uint8_t* out) {
  sx = std::clamp(sx, 0.0, static_cast<double>(src.width - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(src.height - 1));
  int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
  int x1 = std::min(x0 + 1, src.width - 1), y1 = std::min(y0 + 1, src.height - 1);
  double fx = sx - x0, fy = sy - y0;
  for (int c = 0; c < src.channels; ++c) {
    double v00 = src.at(y0, x0, c), v10 = src.at(y0, x1, c);
    double v01 = src.at(y1, x0, c), v11 = src.at(y1, x1, c);
    double v = (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
    out[c] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
  }
}

ImageTensor warp_by_homography(const ImageTensor& img, const Mat3& forward) {
  Mat3 h = forward / forward(2, 2);
  if ((h - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12) return img;

  Mat3 inv = h.inverse();
  ImageTensor out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double w = inv(2, 0) * x + inv(2, 1) * y + inv(2, 2);
      double sx = (inv(0, 0) * x + inv(0, 1) * y + inv(0, 2)) / w;
      double sy = (inv(1, 0) * x + inv(1, 1) * y + inv(1, 2)) / w;
      sample_bilinear(img, sx, sy, &out.at(y, x, 0));
    }
  return out;
}

}  // namespace

void AugmentationPolicy::validate() const {
  auto check = [](const Range<double>& r, double lo, double hi, const char* what) {
    if (r.lo > r.hi || r.lo < lo || r.hi > hi)
      throw Error(std::string("augmentation policy: ") + what + " range out of bounds");
  };
  check(rotation_deg, -360.0, 360.0, "rotation");
  check(scale_x, 0.5, 1.0, "scale_x");
  check(scale_y, 0.5, 1.0, "scale_y");
  check(channel_shift, -25.0, 25.0, "channel_shift");
  check(pixel_shift, -25.0, 25.0, "pixel_shift");
  check(intensity_scale, 0.75, 1.25, "intensity_scale");
  if (perspective_jitter < 0.0 || flip_prob < 0.0 || flip_prob > 1.0)
    throw Error("augmentation policy: bad perspective_jitter or flip_prob");
}

ImageTensor resize(const ImageTensor& img, int target_w, int target_h) {
  if (img.empty()) throw Error("resize: empty image");
  if (target_w <= 0 || target_h <= 0) throw Error("resize: non-positive target dimension");
  if (target_w == img.width && target_h == img.height) return img;

  ImageTensor out(target_h, target_w, img.channels);
  const double sx = static_cast<double>(img.width) / target_w;
  const double sy = static_cast<double>(img.height) / target_h;
  for (int y = 0; y < target_h; ++y) {
    double src_y = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < target_w; ++x) {
      double src_x = (x + 0.5) * sx - 0.5;
      sample_bilinear(img, src_x, src_y, &out.at(y, x, 0));
    }
  }
  return out;
}

std::array<double, 9> homography_from_offsets(
    int width, int height, const std::array<std::array<double, 2>, 4>& corner_offsets) {
  const double W = width - 1, H = height - 1;
  const double src[4][2] = {{0, 0}, {W, 0}, {W, H}, {0, H}};
  double dst[4][2];
  for (int i = 0; i < 4; ++i) {
    dst[i][0] = src[i][0] + corner_offsets[i][0];
    dst[i][1] = src[i][1] + corner_offsets[i][1];
  }

  // The image of a rectangle under a proper projective map is convex; a
  // self-intersecting or collapsed target quad has no usable inverse.
  double ref = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double* a = dst[i];
    const double* b = dst[(i + 1) % 4];
    const double* c = dst[(i + 2) % 4];
    double z = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
    if (i == 0)
      ref = z;
    else if (z * ref <= 0.0)
      throw Error("perspective_warp: degenerate corner quad");
  }

  Eigen::Matrix<double, 8, 8> A;
  Eigen::Matrix<double, 8, 1> rhs;
  for (int i = 0; i < 4; ++i) {
    double x = src[i][0], y = src[i][1], u = dst[i][0], v = dst[i][1];
    A.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    A.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    rhs(2 * i) = u;
    rhs(2 * i + 1) = v;
  }
  Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(A);
  if (!lu.isInvertible()) throw Error("perspective_warp: degenerate corner quad");
  Eigen::Matrix<double, 8, 1> h = lu.solve(rhs);
  return {h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0};
}

ImageTensor perspective_warp(const ImageTensor& img,
                             const std::array<std::array<double, 2>, 4>& corner_offsets) {
  if (img.empty()) throw Error("perspective_warp: empty image");
  auto h = homography_from_offsets(img.width, img.height, corner_offsets);
  Mat3 m;
  m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  return warp_by_homography(img, m);
}

ImageTensor augment(const ImageTensor& img, const AugmentationPolicy& policy,
                    std::uint64_t rng_seed) {
  if (img.empty()) throw Error("augment: empty image");
  policy.validate();
  Rng rng(rng_seed);

  // One draw per stage in a fixed order; degenerate ranges still consume
  // their draw so policy edits never shift later stages.
  const bool flip = rng.bernoulli(policy.flip_prob);
  const double rot = rng.uniform(policy.rotation_deg.lo, policy.rotation_deg.hi);
  const double sx = rng.uniform(policy.scale_x.lo, policy.scale_x.hi);
  const double sy = rng.uniform(policy.scale_y.lo, policy.scale_y.hi);
  const double jit = policy.perspective_jitter * std::min(img.width, img.height);
  std::array<std::array<double, 2>, 4> offsets{};
  for (auto& o : offsets) {
    o[0] = rng.uniform(-jit, jit);
    o[1] = rng.uniform(-jit, jit);
  }
  double ch_shift[3];
  for (double& s : ch_shift) s = rng.uniform(policy.channel_shift.lo, policy.channel_shift.hi);
  const double px_shift = rng.uniform(policy.pixel_shift.lo, policy.pixel_shift.hi);
  const double gain = rng.uniform(policy.intensity_scale.lo, policy.intensity_scale.hi);

  const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
  Mat3 flip_m = Mat3::Identity();
  if (flip) {
    flip_m(0, 0) = -1;
    flip_m(0, 2) = img.width - 1;
  }
  Mat3 rot_m = Mat3::Identity();
  {
    double a = rot * kDegToRad, c = std::cos(a), s = std::sin(a);
    Mat3 r = Mat3::Identity();
    r(0, 0) = c;
    r(0, 1) = -s;
    r(1, 0) = s;
    r(1, 1) = c;
    rot_m = translation(cx, cy) * r * translation(-cx, -cy);
  }
  Mat3 scale_m;
  {
    Mat3 s = Mat3::Identity();
    s(0, 0) = sx;
    s(1, 1) = sy;
    scale_m = translation(cx, cy) * s * translation(-cx, -cy);
  }
  Mat3 persp_m;
  {
    auto h = homography_from_offsets(img.width, img.height, offsets);
    persp_m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  }

  ImageTensor out = warp_by_homography(img, persp_m * scale_m * rot_m * flip_m);

  const bool photometric_identity =
      ch_shift[0] == 0 && ch_shift[1] == 0 && ch_shift[2] == 0 && px_shift == 0 && gain == 1.0;
  if (!photometric_identity) {
    const std::size_t n = out.data.size();
    const int ch = out.channels;
    for (std::size_t i = 0; i < n; ++i) {
      double v = (out.data[i] + ch_shift[i % ch] + px_shift) * gain;
      out.data[i] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
    }
  }
  return out;
}

}  // namespace weedpilot
