// Copyright 2026 The sonoclass Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sonoclass/png_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "sonoclass/error.hpp"

namespace sonoclass {

namespace {

const std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& payload) {
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
  put_u32(out, crc);
}

std::vector<std::uint8_t> deflate_all(const std::vector<std::uint8_t>& raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> out(bound);
  if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw PipelineError(ErrorCode::IoFailure, "deflate failed");
  }
  out.resize(bound);
  return out;
}

std::vector<std::uint8_t> inflate_all(const std::vector<std::uint8_t>& compressed,
                                      std::size_t expected_size) {
  std::vector<std::uint8_t> out(expected_size);
  uLongf out_size = static_cast<uLongf>(expected_size);
  int rc = uncompress(out.data(), &out_size, compressed.data(),
                      static_cast<uLong>(compressed.size()));
  if (rc != Z_OK || out_size != expected_size) {
    throw PipelineError(ErrorCode::UnsupportedImage, "PNG inflate failed");
  }
  return out;
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_png8(const GrayscaleImage& image,
                                      const std::map<std::string, std::string>& text,
                                      int force_filter) {
  if (image.empty()) throw PipelineError(ErrorCode::EmptyImage, "cannot encode empty image");
  const int h = image.height, w = image.width;
  const int filter = force_filter < 0 ? 0 : force_filter;

  // Quantize to bytes first so filtering operates on final sample values.
  std::vector<std::uint8_t> samples(static_cast<std::size_t>(h) * w);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double v = std::round(image.pixels[i]);
    if (v < 0.0) v = 0.0;
    if (v > 255.0) v = 255.0;
    samples[i] = static_cast<std::uint8_t>(v);
  }

  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(h) * (w + 1));
  for (int y = 0; y < h; ++y) {
    raw.push_back(static_cast<std::uint8_t>(filter));
    const std::uint8_t* row = samples.data() + static_cast<std::size_t>(y) * w;
    const std::uint8_t* prev = y > 0 ? samples.data() + static_cast<std::size_t>(y - 1) * w : nullptr;
    for (int x = 0; x < w; ++x) {
      const int cur = row[x];
      const int left = x > 0 ? row[x - 1] : 0;
      const int up = prev ? prev[x] : 0;
      const int ul = (prev && x > 0) ? prev[x - 1] : 0;
      int enc = cur;
      switch (filter) {
        case 0: enc = cur; break;
        case 1: enc = cur - left; break;
        case 2: enc = cur - up; break;
        case 3: enc = cur - (left + up) / 2; break;
        case 4: enc = cur - paeth(left, up, ul); break;
        default: throw PipelineError(ErrorCode::InvalidConfig, "bad PNG filter");
      }
      raw.push_back(static_cast<std::uint8_t>(enc & 0xff));
    }
  }

  std::vector<std::uint8_t> out(kSignature, kSignature + 8);
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(w));
  put_u32(ihdr, static_cast<std::uint32_t>(h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(0);   // color type: grayscale
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter method
  ihdr.push_back(0);   // no interlace
  append_chunk(out, "IHDR", ihdr);

  for (const auto& [key, value] : text) {
    std::vector<std::uint8_t> payload(key.begin(), key.end());
    payload.push_back(0);
    payload.insert(payload.end(), value.begin(), value.end());
    append_chunk(out, "tEXt", payload);
  }

  append_chunk(out, "IDAT", deflate_all(raw));
  append_chunk(out, "IEND", {});
  return out;
}

void write_png8(const std::string& path, const GrayscaleImage& image,
                const std::map<std::string, std::string>& text) {
  const std::vector<std::uint8_t> bytes = encode_png8(image, text);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw PipelineError(ErrorCode::IoFailure, "cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw PipelineError(ErrorCode::IoFailure, "short write: " + path);
}

PngReadResult decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) {
    throw PipelineError(ErrorCode::UnsupportedImage, "not a PNG file");
  }

  std::size_t pos = 8;
  int width = 0, height = 0, bit_depth = 0, color_type = -1, interlace = 0;
  bool seen_ihdr = false, seen_iend = false;
  std::vector<std::uint8_t> idat;
  std::map<std::string, std::string> text;

  while (pos + 8 <= bytes.size() && !seen_iend) {
    const std::uint32_t len = get_u32(bytes.data() + pos);
    if (pos + 12 + len > bytes.size()) {
      throw PipelineError(ErrorCode::UnsupportedImage, "truncated PNG chunk");
    }
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const std::uint8_t* payload = bytes.data() + pos + 8;

    if (std::memcmp(type, "IHDR", 4) == 0) {
      width = static_cast<int>(get_u32(payload));
      height = static_cast<int>(get_u32(payload + 4));
      bit_depth = payload[8];
      color_type = payload[9];
      interlace = payload[12];
      seen_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "tEXt", 4) == 0) {
      const std::uint8_t* sep = static_cast<const std::uint8_t*>(std::memchr(payload, 0, len));
      if (sep) {
        text.emplace(std::string(payload, sep), std::string(sep + 1, payload + len));
      }
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      seen_iend = true;
    }
    pos += 12 + len;
  }

  if (!seen_ihdr || width <= 0 || height <= 0) {
    throw PipelineError(ErrorCode::UnsupportedImage, "PNG missing or bad IHDR");
  }
  if (color_type != 0) {
    throw PipelineError(ErrorCode::UnsupportedImage,
                        "only grayscale PNG is supported (color type " +
                            std::to_string(color_type) + ")");
  }
  if (bit_depth != 8 && bit_depth != 16) {
    throw PipelineError(ErrorCode::UnsupportedImage,
                        "unsupported grayscale bit depth " + std::to_string(bit_depth));
  }
  if (interlace != 0) {
    throw PipelineError(ErrorCode::UnsupportedImage, "interlaced PNG is not supported");
  }

  const int bpp = bit_depth / 8;  // bytes per pixel
  const std::size_t stride = static_cast<std::size_t>(width) * bpp;
  const std::size_t raw_size = (stride + 1) * static_cast<std::size_t>(height);
  std::vector<std::uint8_t> raw = inflate_all(idat, raw_size);

  // Undo per-scanline filters in place.
  std::vector<std::uint8_t> prev_row(stride, 0);
  PngReadResult result;
  result.bit_depth = bit_depth;
  result.text = std::move(text);
  result.image = GrayscaleImage(height, width);

  for (int y = 0; y < height; ++y) {
    std::uint8_t* row = raw.data() + static_cast<std::size_t>(y) * (stride + 1);
    const int filter = row[0];
    std::uint8_t* data = row + 1;
    for (std::size_t x = 0; x < stride; ++x) {
      const int left = x >= static_cast<std::size_t>(bpp) ? data[x - bpp] : 0;
      const int up = prev_row[x];
      const int ul = x >= static_cast<std::size_t>(bpp) ? prev_row[x - bpp] : 0;
      int v = data[x];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += up; break;
        case 3: v += (left + up) / 2; break;
        case 4: v += paeth(left, up, ul); break;
        default:
          throw PipelineError(ErrorCode::UnsupportedImage, "bad PNG scanline filter");
      }
      data[x] = static_cast<std::uint8_t>(v & 0xff);
    }
    std::memcpy(prev_row.data(), data, stride);

    for (int x = 0; x < width; ++x) {
      double value;
      if (bit_depth == 8) {
        value = data[x];
      } else {
        const std::uint16_t s = static_cast<std::uint16_t>((data[2 * x] << 8) | data[2 * x + 1]);
        value = static_cast<double>(s) * (255.0 / 65535.0);
      }
      result.image.at(y, x) = value;
    }
  }
  return result;
}

PngReadResult read_png(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw PipelineError(ErrorCode::MissingFile, "cannot open: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

}  // namespace sonoclass
