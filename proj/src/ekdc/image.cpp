#include "ekdc/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "ekdc/errors.hpp"

namespace ekdc {

namespace {

uint8_t clamp_u8(double v) {
  return static_cast<uint8_t>(std::min(255.0, std::max(0.0, std::round(v))));
}

struct FileCloser {
  FILE* f;
  ~FileCloser() {
    if (f) std::fclose(f);
  }
};

Image png_read(const std::string& path, FILE* f) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("png: allocation failure reading " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png: allocation failure reading " + path);
  }
  std::vector<uint8_t*> rows;
  Image img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png: corrupt file: " + path);
  }
  png_init_io(png, f);
  png_read_info(png, info);

  // normalize every input variant to 8-bit RGB
  png_byte color = png_get_color_type(png, info);
  png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.pixels.assign(static_cast<size_t>(img.width) * img.height * 3, 0);
  rows.resize(static_cast<size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    rows[static_cast<size_t>(y)] = &img.pixels[static_cast<size_t>(y) * img.width * 3];
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

Image ppm_read(const std::string& path, FILE* f) {
  auto next_token = [&]() -> long {
    int c;
    // skip whitespace and '#' comments
    while ((c = std::fgetc(f)) != EOF) {
      if (c == '#') {
        while ((c = std::fgetc(f)) != EOF && c != '\n') {
        }
      } else if (!std::isspace(c)) {
        break;
      }
    }
    if (c == EOF) throw DataError("ppm: truncated header: " + path);
    long v = 0;
    while (c != EOF && std::isdigit(c)) {
      v = v * 10 + (c - '0');
      c = std::fgetc(f);
    }
    return v;
  };
  char magic[3] = {0, 0, 0};
  if (std::fread(magic, 1, 2, f) != 2 || magic[0] != 'P' || magic[1] != '6') {
    throw DataError("ppm: not a P6 file: " + path);
  }
  long w = next_token(), h = next_token(), maxv = next_token();
  if (w <= 0 || h <= 0 || maxv != 255) throw DataError("ppm: unsupported header: " + path);
  Image img(static_cast<int>(w), static_cast<int>(h));
  if (std::fread(img.pixels.data(), 1, img.pixels.size(), f) != img.pixels.size()) {
    throw DataError("ppm: truncated pixel data: " + path);
  }
  return img;
}

}  // namespace

Image image_read(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot open image: " + path);
  FileCloser closer{f};
  unsigned char sig[8];
  size_t n = std::fread(sig, 1, 8, f);
  std::rewind(f);
  if (n >= 8 && !png_sig_cmp(sig, 0, 8)) return png_read(path, f);
  if (n >= 2 && sig[0] == 'P' && sig[1] == '6') return ppm_read(path, f);
  throw DataError("unrecognized image format: " + path);
}

bool is_image_path(const std::string& path) {
  auto dot = path.rfind('.');
  if (dot == std::string::npos) return false;
  std::string ext = path.substr(dot);
  for (auto& c : ext) c = static_cast<char>(std::tolower(c));
  return ext == ".png" || ext == ".ppm";
}

void png_write_rgb(const std::string& path, const Image& img) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot write image: " + path);
  FileCloser closer{f};
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    throw DataError("png: allocation failure writing " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png: write failure: " + path);
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(&img.pixels[static_cast<size_t>(y) * img.width * 3]));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void png_write_gray(const std::string& path, int width, int height,
                    const std::vector<uint8_t>& gray) {
  if (static_cast<size_t>(width) * height != gray.size()) {
    throw InvalidInput("png_write_gray: buffer size does not match dimensions");
  }
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot write image: " + path);
  FileCloser closer{f};
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    throw DataError("png: allocation failure writing " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("png: write failure: " + path);
  }
  png_init_io(png, f);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(&gray[static_cast<size_t>(y) * width]));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void ppm_write(const std::string& path, const Image& img) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw DataError("cannot write image: " + path);
  FileCloser closer{f};
  std::fprintf(f, "P6\n%d %d\n255\n", img.width, img.height);
  std::fwrite(img.pixels.data(), 1, img.pixels.size(), f);
}

Image resize_shorter(const Image& img, int target) {
  if (img.width <= 0 || img.height <= 0) throw InvalidInput("resize: empty image");
  if (target <= 0) throw InvalidInput("resize: target must be positive");
  double scale = static_cast<double>(target) / std::min(img.width, img.height);
  int nw = img.width <= img.height ? target
                                   : std::max(target, static_cast<int>(std::round(img.width * scale)));
  int nh = img.height <= img.width ? target
                                   : std::max(target, static_cast<int>(std::round(img.height * scale)));
  if (nw == img.width && nh == img.height) return img;
  Image out(nw, nh);
  // align-corners-false bilinear sampling
  double sx = static_cast<double>(img.width) / nw;
  double sy = static_cast<double>(img.height) / nh;
  for (int y = 0; y < nh; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, img.height - 1);
    int y1c = std::clamp(y0 + 1, 0, img.height - 1);
    for (int x = 0; x < nw; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, img.width - 1);
      int x1c = std::clamp(x0 + 1, 0, img.width - 1);
      for (int c = 0; c < 3; ++c) {
        double top = (1.0 - wx) * img.at(x0c, y0c, c) + wx * img.at(x1c, y0c, c);
        double bot = (1.0 - wx) * img.at(x0c, y1c, c) + wx * img.at(x1c, y1c, c);
        out.at(x, y, c) = clamp_u8((1.0 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

Image crop(const Image& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > img.width || y0 + h > img.height) {
    throw InvalidInput("crop: window outside image bounds");
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    std::memcpy(&out.pixels[static_cast<size_t>(y) * w * 3],
                &img.pixels[(static_cast<size_t>(y0 + y) * img.width + x0) * 3],
                static_cast<size_t>(w) * 3);
  }
  return out;
}

Image hflip(const Image& img) {
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
    }
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    kernel[static_cast<size_t>(i + radius)] = v;
    norm += v;
  }
  for (auto& v : kernel) v /= norm;

  auto reflect = [](int i, int n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
    return std::clamp(i, 0, n - 1);
  };
  // horizontal pass into a float buffer, then vertical pass back to u8
  std::vector<double> tmp(static_cast<size_t>(img.width) * img.height * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[static_cast<size_t>(i + radius)] * img.at(reflect(x + i, img.width), y, c);
        }
        tmp[(static_cast<size_t>(y) * img.width + x) * 3 + c] = acc;
      }
    }
  }
  Image out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          acc += kernel[static_cast<size_t>(i + radius)] *
                 tmp[(static_cast<size_t>(reflect(y + i, img.height)) * img.width + x) * 3 + c];
        }
        out.at(x, y, c) = clamp_u8(acc);
      }
    }
  }
  return out;
}

Image adjust_sharpness(const Image& img, double factor) {
  if (factor == 1.0) return img;
  // blend against a 3x3 smooth ([1 1 1; 1 5 1; 1 1 1]/13), borders kept as-is
  Image smooth = img;
  static const int k[3][3] = {{1, 1, 1}, {1, 5, 1}, {1, 1, 1}};
  for (int y = 1; y < img.height - 1; ++y) {
    for (int x = 1; x < img.width - 1; ++x) {
      for (int c = 0; c < 3; ++c) {
        int acc = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) acc += k[dy + 1][dx + 1] * img.at(x + dx, y + dy, c);
        smooth.at(x, y, c) = clamp_u8(acc / 13.0);
      }
    }
  }
  Image out(img.width, img.height);
  for (size_t i = 0; i < out.pixels.size(); ++i) {
    double v = smooth.pixels[i] + factor * (static_cast<double>(img.pixels[i]) - smooth.pixels[i]);
    out.pixels[i] = clamp_u8(v);
  }
  return out;
}

Tensor image_to_tensor(const Image& img, const double mean[3], const double std_[3]) {
  Tensor t({3, img.height, img.width});
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        t.at3(c, y, x) = (img.at(x, y, c) / 255.0 - mean[c]) / std_[c];
      }
    }
  }
  return t;
}

}  // namespace ekdc
