#ifndef WEEDPILOT_IMAGE_HPP
#define WEEDPILOT_IMAGE_HPP

#include <cstdint>
#include <vector>

#include "weedpilot/core.hpp"

namespace weedpilot {

// 8-bit RGB raster, row-major HWC. The unit of augmentation and the model
// input before normalization.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;  // height * width * channels

  ImageTensor() = default;
  ImageTensor(int h, int w, int c = 3)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, 0) {
    if (h <= 0 || w <= 0 || c <= 0) throw Error("ImageTensor: non-positive dimension");
  }

  bool empty() const { return data.empty(); }

  std::uint8_t& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool operator==(const ImageTensor& o) const {
    return height == o.height && width == o.width && channels == o.channels && data == o.data;
  }
};

}  // namespace weedpilot

#endif
