#include "mcgan/png_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mcgan/errors.hpp"

namespace mcgan {

namespace {

constexpr uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

uint32_t get_u32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) |
         (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void write_chunk(std::vector<uint8_t>& out, const char type[4],
                 const std::vector<uint8_t>& data) {
  put_u32(out, static_cast<uint32_t>(data.size()));
  size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uint32_t c = crc32(0, out.data() + crc_start, out.size() - crc_start);
  put_u32(out, c);
}

std::vector<uint8_t> deflate_all(const std::vector<uint8_t>& raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> out(bound);
  if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                6) != Z_OK)
    throw IoError("png: deflate failed");
  out.resize(bound);
  return out;
}

std::vector<uint8_t> inflate_all(const std::vector<uint8_t>& comp,
                                 size_t expected) {
  std::vector<uint8_t> out(expected);
  uLongf len = static_cast<uLongf>(expected);
  if (uncompress(out.data(), &len, comp.data(),
                 static_cast<uLong>(comp.size())) != Z_OK ||
      len != expected)
    throw IoError("png: inflate failed or size mismatch");
  return out;
}

uint8_t paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<uint8_t>(a);
  if (pb <= pc) return static_cast<uint8_t>(b);
  return static_cast<uint8_t>(c);
}

}  // namespace

void write_png(const std::string& path, const PngImage& img) {
  if (img.channels != 1 && img.channels != 3)
    throw IoError("write_png: only gray and rgb supported");
  if (static_cast<int64_t>(img.pixels.size()) !=
      img.width * img.height * img.channels)
    throw IoError("write_png: pixel buffer size mismatch");
  std::vector<uint8_t> out(kSignature, kSignature + 8);
  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(img.width));
  put_u32(ihdr, static_cast<uint32_t>(img.height));
  ihdr.push_back(8);                                    // bit depth
  ihdr.push_back(img.channels == 1 ? 0 : 2);            // color type
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(out, "IHDR", ihdr);

  const int64_t stride = img.width * img.channels;
  std::vector<uint8_t> raw;
  raw.reserve((stride + 1) * img.height);
  for (int64_t y = 0; y < img.height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), img.pixels.begin() + y * stride,
               img.pixels.begin() + (y + 1) * stride);
  }
  write_chunk(out, "IDAT", deflate_all(raw));
  write_chunk(out, "IEND", {});

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_png: cannot open " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
}

PngImage read_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_png: cannot open " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  if (buf.size() < 8 || std::memcmp(buf.data(), kSignature, 8) != 0)
    throw IoError("read_png: not a PNG file: " + path);

  PngImage img;
  int bit_depth = 0, color_type = 0, interlace = 0;
  std::vector<uint8_t> idat;
  size_t pos = 8;
  while (pos + 8 <= buf.size()) {
    uint32_t len = get_u32(buf.data() + pos);
    if (pos + 12 + len > buf.size()) throw IoError("read_png: truncated chunk");
    std::string type(reinterpret_cast<const char*>(buf.data() + pos + 4), 4);
    const uint8_t* data = buf.data() + pos + 8;
    if (type == "IHDR") {
      img.width = get_u32(data);
      img.height = get_u32(data + 4);
      bit_depth = data[8];
      color_type = data[9];
      interlace = data[12];
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    } else if (type == "IEND") {
      break;
    }
    pos += 12 + len;
  }
  if (bit_depth != 8 || interlace != 0)
    throw IoError("read_png: only 8-bit non-interlaced PNGs supported");
  int src_ch;
  switch (color_type) {
    case 0: src_ch = 1; break;
    case 2: src_ch = 3; break;
    case 6: src_ch = 4; break;
    default: throw IoError("read_png: unsupported color type");
  }
  const int64_t stride = img.width * src_ch;
  std::vector<uint8_t> raw =
      inflate_all(idat, static_cast<size_t>((stride + 1) * img.height));

  // unfilter in place into a clean buffer
  std::vector<uint8_t> px(stride * img.height);
  for (int64_t y = 0; y < img.height; ++y) {
    const uint8_t filter = raw[y * (stride + 1)];
    const uint8_t* src = raw.data() + y * (stride + 1) + 1;
    uint8_t* dst = px.data() + y * stride;
    const uint8_t* up = y > 0 ? px.data() + (y - 1) * stride : nullptr;
    for (int64_t i = 0; i < stride; ++i) {
      const int left = i >= src_ch ? dst[i - src_ch] : 0;
      const int above = up ? up[i] : 0;
      const int upleft = (up && i >= src_ch) ? up[i - src_ch] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += above; break;
        case 3: v += (left + above) / 2; break;
        case 4: v += paeth(left, above, upleft); break;
        default: throw IoError("read_png: bad filter byte");
      }
      dst[i] = static_cast<uint8_t>(v);
    }
  }

  img.channels = src_ch == 1 ? 1 : 3;
  if (src_ch == img.channels) {
    img.pixels = std::move(px);
  } else {  // rgba -> rgb
    img.pixels.resize(img.width * img.height * 3);
    for (int64_t i = 0; i < img.width * img.height; ++i)
      for (int c = 0; c < 3; ++c) img.pixels[i * 3 + c] = px[i * 4 + c];
  }
  return img;
}

void write_gray_png(const std::string& path, int64_t width, int64_t height,
                    const std::vector<double>& values01) {
  PngImage img;
  img.width = width;
  img.height = height;
  img.channels = 1;
  img.pixels.resize(width * height);
  for (int64_t i = 0; i < width * height; ++i) {
    double v = std::clamp(values01[i], 0.0, 1.0);
    img.pixels[i] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
  write_png(path, img);
}

std::vector<double> read_gray_png(const std::string& path, int64_t& width,
                                  int64_t& height) {
  PngImage img = read_png(path);
  width = img.width;
  height = img.height;
  std::vector<double> out(img.width * img.height);
  if (img.channels == 1) {
    for (size_t i = 0; i < out.size(); ++i) out[i] = img.pixels[i] / 255.0;
  } else {
    for (size_t i = 0; i < out.size(); ++i) {
      const double r = img.pixels[i * 3], g = img.pixels[i * 3 + 1],
                   b = img.pixels[i * 3 + 2];
      out[i] = (r + g + b) / (3.0 * 255.0);
    }
  }
  return out;
}

}  // namespace mcgan
