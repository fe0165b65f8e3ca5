#include "jointnerf/image.h"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace jointnerf {

namespace {

uint8_t ToByte(double x) {
  return static_cast<uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0));
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string HeaderToken(std::istream& in) {
  std::string tok;
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  return tok;
}

int HeaderInt(std::istream& in, const std::string& path) {
  const std::string tok = HeaderToken(in);
  try {
    size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used == tok.size()) return v;
  } catch (const std::exception&) {
  }
  throw ImageIoError(path + ": malformed header token '" + tok + "'");
}

}  // namespace

Image Quantize8(const Image& image) {
  Image out = image;
  for (Eigen::Index i = 0; i < out.rgb.size(); ++i) {
    out.rgb.data()[i] = ToByte(image.rgb.data()[i]) / 255.0;
  }
  return out;
}

void WritePpm(const std::string& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<uint8_t> bytes(static_cast<size_t>(image.rgb.size()));
  for (Eigen::Index i = 0; i < image.rgb.size(); ++i) {
    bytes[static_cast<size_t>(i)] = ToByte(image.rgb.data()[i]);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageIoError("failed writing " + path);
}

Image ReadPpm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open image " + path);
  if (HeaderToken(in) != "P6") throw ImageIoError(path + ": not a binary PPM");
  const int w = HeaderInt(in, path);
  const int h = HeaderInt(in, path);
  const int maxval = HeaderInt(in, path);
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw ImageIoError(path + ": unsupported PPM size or depth");
  }
  in.get();
  Image image(w, h);
  std::vector<uint8_t> bytes(static_cast<size_t>(w) * h * 3);
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw ImageIoError(path + ": truncated pixel data");
  }
  for (size_t i = 0; i < bytes.size(); ++i) {
    image.rgb.data()[i] = bytes[i] / 255.0;
  }
  return image;
}

void WritePfm(const std::string& path, const ScalarImage& image) {
  static_assert(std::endian::native == std::endian::little,
                "PFM writer assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageIoError("cannot write " + path);
  out << "Pf\n" << image.width << ' ' << image.height << "\n-1.0\n";
  for (int v = image.height - 1; v >= 0; --v) {
    for (int u = 0; u < image.width; ++u) {
      const float f = static_cast<float>(image.value(v, u));
      out.write(reinterpret_cast<const char*>(&f), sizeof(f));
    }
  }
  if (!out) throw ImageIoError("failed writing " + path);
}

ScalarImage ReadPfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open image " + path);
  if (HeaderToken(in) != "Pf") throw ImageIoError(path + ": not a grayscale PFM");
  const int w = HeaderInt(in, path);
  const int h = HeaderInt(in, path);
  const std::string scale_tok = HeaderToken(in);
  if (w <= 0 || h <= 0) throw ImageIoError(path + ": bad PFM size");
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw ImageIoError(path + ": bad PFM scale");
  }
  if (scale >= 0.0) throw ImageIoError(path + ": big-endian PFM unsupported");
  in.get();
  ScalarImage image(w, h);
  for (int v = h - 1; v >= 0; --v) {
    for (int u = 0; u < w; ++u) {
      float f = 0.0f;
      in.read(reinterpret_cast<char*>(&f), sizeof(f));
      if (!in) throw ImageIoError(path + ": truncated PFM data");
      image.value(v, u) = f;
    }
  }
  return image;
}

}  // namespace jointnerf
