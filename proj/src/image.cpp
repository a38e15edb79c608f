#include "gsplane/image.hpp"

#include "gsplane/common.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace gsplane {

namespace {

[[noreturn]] void io_fail(const std::string& path, const std::string& what) {
  throw std::runtime_error(path + ": " + what);
}

}  // namespace

void write_pfm(const std::string& path, const ImageF& img) {
  if (img.channels() != 1 && img.channels() != 3)
    io_fail(path, "PFM supports 1 or 3 channels, got " + std::to_string(img.channels()));
  std::ofstream f(path, std::ios::binary);
  if (!f) io_fail(path, "cannot open for writing");
  f << (img.channels() == 3 ? "PF" : "Pf") << "\n"
    << img.width() << " " << img.height() << "\n"
    << "-1.0\n";
  // bottom row first
  std::vector<float> row(static_cast<std::size_t>(img.width()) * img.channels());
  for (int y = img.height() - 1; y >= 0; --y) {
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c)
        row[static_cast<std::size_t>(x) * img.channels() + c] = static_cast<float>(img.at(y, x, c));
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!f) io_fail(path, "write failed");
}

ImageF read_pfm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) io_fail(path, "cannot open");
  std::string magic;
  f >> magic;
  int channels = 0;
  if (magic == "PF")
    channels = 3;
  else if (magic == "Pf")
    channels = 1;
  else
    io_fail(path, "not a PFM file (magic '" + magic + "')");
  int w = 0, h = 0;
  double scale = 0.0;
  f >> w >> h >> scale;
  if (!f || w <= 0 || h <= 0) io_fail(path, "malformed PFM header");
  if (scale >= 0) io_fail(path, "big-endian PFM not supported");
  f.get();  // single whitespace after the scale line
  ImageF img(h, w, channels);
  std::vector<float> row(static_cast<std::size_t>(w) * channels);
  for (int y = h - 1; y >= 0; --y) {
    f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!f) io_fail(path, "truncated PFM payload at row " + std::to_string(y));
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c) img.at(y, x, c) = row[static_cast<std::size_t>(x) * channels + c];
  }
  return img;
}

void write_pgm16(const std::string& path, const ImageI& img) {
  if (img.channels() != 1) io_fail(path, "PGM wants 1 channel, got " + std::to_string(img.channels()));
  std::ofstream f(path, std::ios::binary);
  if (!f) io_fail(path, "cannot open for writing");
  f << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width()) * 2);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      std::int32_t v = img.at(y, x);
      if (v < 0 || v > 65535) io_fail(path, "sample out of 16-bit range at (" + std::to_string(y) + "," + std::to_string(x) + ")");
      row[2 * x] = static_cast<unsigned char>((v >> 8) & 0xff);
      row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) io_fail(path, "write failed");
}

ImageI read_pgm16(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) io_fail(path, "cannot open");
  std::string magic;
  f >> magic;
  if (magic != "P5") io_fail(path, "not a binary PGM (magic '" + magic + "')");
  // header tokens may be separated by comments
  auto next_int = [&](const char* what) {
    for (;;) {
      int ch = f.peek();
      if (ch == '#') {
        std::string line;
        std::getline(f, line);
        continue;
      }
      if (std::isspace(ch)) {
        f.get();
        continue;
      }
      break;
    }
    long v = -1;
    f >> v;
    if (!f || v < 0) io_fail(path, std::string("malformed PGM header: ") + what);
    return v;
  };
  long w = next_int("width");
  long h = next_int("height");
  long maxval = next_int("maxval");
  if (maxval != 65535) io_fail(path, "expected 16-bit PGM (maxval 65535), got " + std::to_string(maxval));
  f.get();  // single whitespace before payload
  ImageI img(static_cast<int>(h), static_cast<int>(w), 1);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * 2);
  for (long y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!f) io_fail(path, "truncated PGM payload at row " + std::to_string(y));
    for (long x = 0; x < w; ++x)
      img.at(static_cast<int>(y), static_cast<int>(x)) = (static_cast<int>(row[2 * x]) << 8) | row[2 * x + 1];
  }
  return img;
}

}  // namespace gsplane
