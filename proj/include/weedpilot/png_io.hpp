#ifndef WEEDPILOT_PNG_IO_HPP
#define WEEDPILOT_PNG_IO_HPP

#include <string>

#include "weedpilot/image.hpp"

namespace weedpilot {

// Decodes any 8/16-bit PNG to RGB8 (gray expanded, alpha dropped).
// Throws Error on unreadable or non-PNG input.
ImageTensor read_png(const std::string& path);

void write_png(const std::string& path, const ImageTensor& img);

}  // namespace weedpilot

#endif
