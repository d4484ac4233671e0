#include <algorithm>
#include <bit>
#include <array>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>

#include "evadv/error.hpp"
#include "evadv/grid.hpp"

namespace evadv {

namespace fs = std::filesystem;

void render_image(const GridTensor& tensor, const fs::path& path) {
  // Split channels into the two polarity halves (voxel grids repeat on both).
  int per_side = 0;
  int neg_offset = 0;
  switch (tensor.projection) {
    case Projection::None:
      per_side = tensor.channels / 2;
      neg_offset = per_side;
      break;
    case Projection::PolarityAvg:
      per_side = tensor.channels;
      neg_offset = 0;
      break;
    case Projection::TemporalAvg:
      per_side = 1;
      neg_offset = 1;
      break;
  }
  const int w = tensor.width;
  const int h = tensor.height;
  std::vector<double> rgb(static_cast<std::size_t>(2 * w) * h * 3, 0.0);
  for (int side = 0; side < 2; ++side) {
    const int base = side == 0 ? 0 : neg_offset;
    for (int n = 0; n < per_side; ++n) {
      const int group = n * 3 / per_side;
      for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
          const std::size_t px = (static_cast<std::size_t>(y) * 2 * w + side * w + x) * 3 + group;
          rgb[px] += tensor.at(base + n, x, y);
        }
      }
    }
  }
  const auto [lo_it, hi_it] = std::minmax_element(rgb.begin(), rgb.end());
  const double lo = rgb.empty() ? 0.0 : *lo_it;
  const double range = rgb.empty() ? 0.0 : *hi_it - lo;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << "P6\n" << 2 * w << ' ' << h << "\n255\n";
  std::vector<std::uint8_t> bytes(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    const double v = range > 0.0 ? (rgb[i] - lo) / range * 255.0 : 0.0;
    bytes[i] = static_cast<std::uint8_t>(std::clamp(v + 0.5, 0.0, 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

namespace {

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_tensor_file(const GridTensor& tensor, const fs::path& path) {
  std::vector<std::uint8_t> buf;
  buf.reserve(16 + tensor.values.size() * 4);
  put_u32(buf, static_cast<std::uint32_t>(tensor.channels));
  put_u32(buf, static_cast<std::uint32_t>(tensor.width));
  put_u32(buf, static_cast<std::uint32_t>(tensor.height));
  put_u32(buf, kTensorMagic);
  for (double v : tensor.values) put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path.string());
}

GridTensor read_tensor_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 16 || get_u32(buf.data() + 12) != kTensorMagic) {
    throw Error(ErrorCode::IoFailure, path.string() + " is not a tensor file");
  }
  GridTensor t(static_cast<int>(get_u32(buf.data())), static_cast<int>(get_u32(buf.data() + 4)),
               static_cast<int>(get_u32(buf.data() + 8)));
  if (buf.size() != 16 + t.values.size() * 4) throw Error(ErrorCode::IoFailure, path.string() + " has the wrong length");
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    t.values[i] = std::bit_cast<float>(get_u32(buf.data() + 16 + 4 * i));
  }
  return t;
}

}  // namespace evadv
