#pragma once

#include <string>

#include "cmdiff/tensor.hpp"

namespace cmdiff {

// Minimal 8-bit PNG reader/writer (grayscale and RGB, non-interlaced),
// deflate via zlib. Tensors carry pixel values 0..255.
void write_png_u8(const std::string& path, const Tensor& img_u8);
Tensor read_png_u8(const std::string& path);

// Write-to-temp-then-rename so partially written files never appear.
void write_png_u8_atomic(const std::string& path, const Tensor& img_u8);

}  // namespace cmdiff
