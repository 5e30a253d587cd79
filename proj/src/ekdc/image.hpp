#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ekdc/tensor.hpp"

namespace ekdc {

// Interleaved 8-bit RGB image.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // size = width*height*3

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

  uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
};

// Decoders pick the format from the file contents (PNG signature or PPM "P6"
// header). Throws DataError on unreadable or corrupt files.
Image image_read(const std::string& path);
bool is_image_path(const std::string& path);  // by extension: .png / .ppm

void png_write_rgb(const std::string& path, const Image& img);
void png_write_gray(const std::string& path, int width, int height,
                    const std::vector<uint8_t>& gray);
void ppm_write(const std::string& path, const Image& img);

// Geometry. Bilinear scale of the shorter side to `target`, aspect preserved.
Image resize_shorter(const Image& img, int target);
Image crop(const Image& img, int x0, int y0, int w, int h);
Image hflip(const Image& img);

// Photometry, matching the training augmentations.
Image gaussian_blur(const Image& img, double sigma);
// factor 1 = unchanged, < 1 softens toward a 3x3 smooth, > 1 exaggerates edges
Image adjust_sharpness(const Image& img, double factor);

// (3,H,W) tensor with per-channel (v/255 - mean)/std normalization.
Tensor image_to_tensor(const Image& img, const double mean[3], const double std_[3]);

}  // namespace ekdc
