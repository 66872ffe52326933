#pragma once

#include <string>

#include "mixnet/tensor.hpp"

namespace mixnet {

// Reads an 8-bit RGB PNG into a (1,3,H,W) tensor with values v/255 in [0,1].
// Grayscale/palette/alpha inputs are expanded or stripped to RGB.
Tensor<float> load_png(const std::string& path);

// Clamps to [0,1], quantizes by round(v*255) and writes an 8-bit RGB PNG.
void save_png(const std::string& path, const Tensor<float>& image);

} // namespace mixnet
