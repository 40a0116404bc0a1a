#include "fitgate/core/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "fitgate/core/error.hpp"

namespace fitgate {

Grid::Grid(int width, int height, double fill) {
  if (width <= 0 || height <= 0) {
    fail(ErrorCode::kInvalidArgument, "grid dimensions must be positive");
  }
  width_ = width;
  height_ = height;
  values_.assign(static_cast<std::size_t>(width) * height, fill);
}

Grid::Grid(int width, int height, std::vector<double> values) {
  if (width <= 0 || height <= 0) {
    fail(ErrorCode::kInvalidArgument, "grid dimensions must be positive");
  }
  if (values.size() != static_cast<std::size_t>(width) * height) {
    fail(ErrorCode::kDimensionMismatch, "grid data length does not match width*height");
  }
  width_ = width;
  height_ = height;
  values_ = std::move(values);
}

Image::Image(Grid grid) : grid_(std::move(grid)) {
  for (double v : grid_.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      fail(ErrorCode::kDomain, "image intensity outside [0,1]");
    }
  }
}

Image::Image(int width, int height, std::vector<double> values)
    : Image(Grid(width, height, std::move(values))) {}

Image Image::filled(int width, int height, double value) {
  return Image(Grid(width, height, value));
}

Image Image::clamped(Grid grid) {
  for (double& v : grid.values()) {
    v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
  }
  return Image(std::move(grid), Unchecked{});
}

int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const unsigned char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_number(const char* what) {
    skip_space_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) fail(ErrorCode::kPgmHeader, std::string("PGM ") + what + " too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0) fail(ErrorCode::kPgmHeader, std::string("PGM header: missing ") + what);
    return value;
  }

  std::size_t& pos() { return pos_; }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image decode_pgm(std::span<const unsigned char> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    fail(ErrorCode::kPgmMagic, "not a binary PGM (expected magic P5)");
  }
  HeaderReader reader(bytes.subspan(2));
  if (bytes.size() > 2 && !std::isspace(bytes[2]) && bytes[2] != '#') {
    fail(ErrorCode::kPgmMagic, "not a binary PGM (expected magic P5)");
  }
  const long width = reader.read_number("width");
  const long height = reader.read_number("height");
  const long maxval = reader.read_number("maxval");
  if (width <= 0 || height <= 0) fail(ErrorCode::kPgmHeader, "PGM dimensions must be positive");
  if (maxval != 255) fail(ErrorCode::kPgmMaxval, "PGM maxval must be 255, got " + std::to_string(maxval));
  std::size_t pos = 2 + reader.pos();
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    fail(ErrorCode::kPgmHeader, "PGM header must end with a single whitespace byte");
  }
  ++pos;
  const std::size_t expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t available = bytes.size() - pos;
  if (available != expected) {
    fail(ErrorCode::kPgmPayloadSize, "PGM payload has " + std::to_string(available) +
                                         " bytes, expected " + std::to_string(expected));
  }
  std::vector<double> values(expected);
  for (std::size_t i = 0; i < expected; ++i) values[i] = bytes[pos + i] / 255.0;
  return Image(static_cast<int>(width), static_cast<int>(height), std::move(values));
}

Image load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pgm(bytes);
}

std::vector<unsigned char> encode_pgm(const Image& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + image.size());
  for (double v : image.values()) {
    const double scaled = std::round(v * 255.0);
    out.push_back(static_cast<unsigned char>(std::clamp(scaled, 0.0, 255.0)));
  }
  return out;
}

void save_image(const Image& image, const std::filesystem::path& path) {
  const auto bytes = encode_pgm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

}  // namespace fitgate
