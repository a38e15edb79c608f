#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gsplane {

/// Dense row-major H x W x C raster. Channel-interleaved, double precision.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, T fill = T{})
      : h_(height), w_(width), c_(channels), data_(static_cast<std::size_t>(height) * width * channels, fill) {}

  int height() const { return h_; }
  int width() const { return w_; }
  int channels() const { return c_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(h_) * w_; }
  bool empty() const { return data_.empty(); }

  T& at(int y, int x, int ch = 0) { return data_[(static_cast<std::size_t>(y) * w_ + x) * c_ + ch]; }
  const T& at(int y, int x, int ch = 0) const { return data_[(static_cast<std::size_t>(y) * w_ + x) * c_ + ch]; }

  T* pixel(int y, int x) { return &data_[(static_cast<std::size_t>(y) * w_ + x) * c_]; }
  const T* pixel(int y, int x) const { return &data_[(static_cast<std::size_t>(y) * w_ + x) * c_]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool in_bounds(int y, int x) const { return y >= 0 && y < h_ && x >= 0 && x < w_; }

 private:
  int h_ = 0, w_ = 0, c_ = 0;
  std::vector<T> data_;
};

using ImageF = Image<double>;
using ImageI = Image<std::int32_t>;
using ImageU8 = Image<std::uint8_t>;

// PFM: "PF" for 3-channel, "Pf" for 1-channel, scale -1 (little endian),
// rows stored bottom-up. Payload is float32.
void write_pfm(const std::string& path, const ImageF& img);
ImageF read_pfm(const std::string& path);

// 16-bit binary PGM (P5, maxval 65535, big-endian samples).
void write_pgm16(const std::string& path, const ImageI& img);
ImageI read_pgm16(const std::string& path);

}  // namespace gsplane
