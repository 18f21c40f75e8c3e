#include "ambres/render.hpp"

#include <fstream>

#include <zlib.h>

#include "ambres/errors.hpp"

namespace ambres {

std::array<uint8_t, 3> color_rgb(Color c) {
  switch (c) {
    case Color::Red: return {220, 50, 47};
    case Color::Green: return {0, 160, 70};
    case Color::Blue: return {38, 110, 220};
    case Color::Yellow: return {240, 200, 0};
    case Color::Orange: return {245, 130, 30};
    case Color::Purple: return {130, 70, 200};
  }
  throw Error("unknown color");
}

std::array<int, 2> cell_center(const Cell& cell) {
  return {32 + 80 * cell.col + 24, 64 + 96 * cell.row + 16};
}

Image render_scene(const Scene& scene) {
  Image img;
  img.width = kImageSize;
  img.height = kImageSize;
  img.rgb.resize(static_cast<size_t>(kImageSize) * kImageSize * 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      uint8_t* p = img.px(x, y);
      p[0] = kTableBackground[0];
      p[1] = kTableBackground[1];
      p[2] = kTableBackground[2];
    }

  auto put = [&](int x, int y, const std::array<uint8_t, 3>& c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    uint8_t* p = img.px(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  };

  for (const SceneObject& o : scene.objects) {
    const auto [cx, cy] = cell_center(o.cell);
    const auto rgb = color_rgb(o.color);
    if (o.category == Category::Block) {
      const int half = kBlockSide / 2;
      for (int y = cy - half; y < cy + half; ++y)
        for (int x = cx - half; x < cx + half; ++x) put(x, y, rgb);
    } else {
      const int r = kBowlRadius;
      for (int y = cy - r; y <= cy + r; ++y)
        for (int x = cx - r; x <= cx + r; ++x)
          if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) put(x, y, rgb);
    }
  }
  return img;
}

namespace {

void be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& data) {
  be32(out, static_cast<uint32_t>(data.size()));
  size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  uint32_t crc = static_cast<uint32_t>(
      ::crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
  be32(out, crc);
}

}  // namespace

std::vector<uint8_t> encode_png(const Image& image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.rgb.size() != static_cast<size_t>(image.width) * image.height * 3)
    throw Error("image buffer does not match its dimensions");

  // filter byte 0 per scanline
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(image.height) * (1 + 3 * image.width));
  for (int y = 0; y < image.height; ++y) {
    raw.push_back(0);
    const uint8_t* row = image.px(0, y);
    raw.insert(raw.end(), row, row + 3 * image.width);
  }

  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw Error("png deflate failed");
  compressed.resize(bound);

  std::vector<uint8_t> ihdr;
  be32(ihdr, static_cast<uint32_t>(image.width));
  be32(ihdr, static_cast<uint32_t>(image.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // color type: truecolor
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter
  ihdr.push_back(0);  // interlace

  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  chunk(out, "IHDR", ihdr);
  chunk(out, "IDAT", compressed);
  chunk(out, "IEND", {});
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  const std::vector<uint8_t> bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace ambres
