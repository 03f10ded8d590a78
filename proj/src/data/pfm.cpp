#include "semistereo/data/pfm.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "semistereo/error.hpp"

namespace semistereo::data {

namespace {

std::string read_token_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) return line;
  }
  throw FormatError("PFM: truncated header");
}

std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

}  // namespace

Tensor read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic = read_token_line(in);
  if (magic == "PF") throw UnsupportedError("PFM: 3-channel file is not a disparity map: " + path.string());
  if (magic != "Pf") throw FormatError("PFM: bad header '" + magic + "' in " + path.string());

  int width = 0, height = 0;
  {
    std::istringstream dims(read_token_line(in));
    if (!(dims >> width >> height) || width <= 0 || height <= 0)
      throw FormatError("PFM: bad dimensions in " + path.string());
  }
  double scale = 0.0;
  {
    std::istringstream s(read_token_line(in));
    if (!(s >> scale) || scale == 0.0 || !std::isfinite(scale))
      throw FormatError("PFM: bad scale in " + path.string());
  }
  const bool little = scale < 0.0;
  const bool host_little = std::endian::native == std::endian::little;

  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<std::uint32_t> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * 4));
  if (static_cast<std::size_t>(in.gcount()) != n * 4) throw FormatError("PFM: truncated payload in " + path.string());

  Tensor map = Tensor::chw(1, height, width);
  for (int row = 0; row < height; ++row) {
    const int y = height - 1 - row;  // stored bottom-to-top
    for (int x = 0; x < width; ++x) {
      std::uint32_t bits = raw[static_cast<std::size_t>(row) * width + x];
      if (little != host_little) bits = byteswap32(bits);
      map(0, y, x) = std::abs(static_cast<double>(std::bit_cast<float>(bits)));
    }
  }
  return map;
}

void write_pfm(const std::filesystem::path& path, const Tensor& map) {
  if (map.rank() != 3 || map.channels() != 1) throw ShapeError("write_pfm: expects a 1xHxW map");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const int h = map.height(), w = map.width();
  out << "Pf\n" << w << ' ' << h << "\n-1.0\n";
  std::vector<std::uint32_t> raw(static_cast<std::size_t>(w) * h);
  for (int row = 0; row < h; ++row)
    for (int x = 0; x < w; ++x) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(map(0, h - 1 - row, x)));
      if constexpr (std::endian::native != std::endian::little) bits = byteswap32(bits);
      raw[static_cast<std::size_t>(row) * w + x] = bits;
    }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace semistereo::data
