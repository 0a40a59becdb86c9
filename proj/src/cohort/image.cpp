#include "cohortlab/cohort/image.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "cohortlab/digest.hpp"
#include "cohortlab/error.hpp"
#include "json.hpp"

namespace cohortlab::cohort {

namespace fs = std::filesystem;

void ImageVolume::set_channel(const std::string& name, std::vector<float> data) {
  for (double s : spacing) {
    if (!(s > 0.0)) throw Error(ErrorCode::invalid_argument, "image spacing must be positive");
  }
  if (data.size() != voxel_count()) {
    throw Error(ErrorCode::invalid_argument,
                "channel '" + name + "' has " + std::to_string(data.size()) + " voxels, expected " +
                    std::to_string(voxel_count()));
  }
  channels[name] = std::move(data);
}

const std::vector<float>& ImageVolume::channel(std::string_view name) const {
  auto it = channels.find(name);
  if (it == channels.end()) throw Error(ErrorCode::not_found, "no channel '" + std::string(name) + "'");
  return it->second;
}

std::string encode_pgm(const ImageVolume& image, std::string_view channel) {
  if (!image.is_2d()) throw Error(ErrorCode::invalid_argument, "PGM holds 2D images only");
  const auto& data = image.channel(channel);
  std::ostringstream header;
  header.precision(17);
  header << "P5\n# channel " << channel << "\n# spacing " << image.spacing[0] << ' '
         << image.spacing[1] << "\n"
         << image.dims[0] << ' ' << image.dims[1] << "\n65535\n";
  std::string out = header.str();
  out.reserve(out.size() + 2 * data.size());
  for (float v : data) {
    const double clamped = std::clamp(std::round(static_cast<double>(v)), 0.0, 65535.0);
    const auto u = static_cast<std::uint16_t>(clamped);
    out.push_back(static_cast<char>(u >> 8));
    out.push_back(static_cast<char>(u & 0xFF));
  }
  return out;
}

ImageVolume decode_pgm(std::string_view bytes, std::string default_channel) {
  std::size_t pos = 0;
  std::string channel = std::move(default_channel);
  std::array<double, 2> spacing{1.0, 1.0};

  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        std::size_t end = bytes.find('\n', pos);
        if (end == std::string_view::npos) end = bytes.size();
        std::istringstream comment(std::string(bytes.substr(pos + 1, end - pos - 1)));
        std::string key;
        comment >> key;
        if (key == "channel") comment >> channel;
        if (key == "spacing") comment >> spacing[0] >> spacing[1];
        pos = end;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> std::size_t {
    skip_space_and_comments();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      ++pos;
      ++digits;
    }
    if (digits == 0) throw Error(ErrorCode::parse_error, "PGM: malformed header");
    return value;
  };

  if (bytes.substr(0, 2) != "P5") throw Error(ErrorCode::parse_error, "PGM: expected P5 magic");
  pos = 2;
  const std::size_t nx = read_uint();
  const std::size_t ny = read_uint();
  const std::size_t maxval = read_uint();
  if (maxval != 65535) throw Error(ErrorCode::parse_error, "PGM: only maxval 65535 is supported");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw Error(ErrorCode::parse_error, "PGM: malformed header");
  }
  ++pos;
  if (bytes.size() - pos != 2 * nx * ny) throw Error(ErrorCode::parse_error, "PGM: truncated pixel data");

  ImageVolume image;
  image.dims = {nx, ny, 1};
  image.spacing = {spacing[0], spacing[1], 1.0};
  std::vector<float> data(nx * ny);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto hi = static_cast<unsigned char>(bytes[pos + 2 * i]);
    const auto lo = static_cast<unsigned char>(bytes[pos + 2 * i + 1]);
    data[i] = static_cast<float>((hi << 8) | lo);
  }
  image.set_channel(channel, std::move(data));
  return image;
}

void write_image_2d(const std::string& dir, const std::string& stem, const ImageVolume& image) {
  for (const auto& [name, data] : image.channels) {
    write_file((fs::path(dir) / (stem + "_" + name + ".pgm")).string(), encode_pgm(image, name));
  }
}

ImageVolume read_image_2d(const std::string& dir, const std::string& stem,
                          const std::vector<std::string>& channels) {
  ImageVolume out;
  bool first = true;
  for (const auto& name : channels) {
    const std::string path = (fs::path(dir) / (stem + "_" + name + ".pgm")).string();
    ImageVolume one = decode_pgm(read_file(path), name);
    if (first) {
      out.dims = one.dims;
      out.spacing = one.spacing;
      first = false;
    } else if (one.dims != out.dims) {
      throw Error(ErrorCode::parse_error, path + ": channel dims differ");
    }
    out.set_channel(name, std::move(one.channels.begin()->second));
  }
  return out;
}

namespace {

static_assert(sizeof(float) == 4);

void append_le(std::string& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

float read_le(std::string_view bytes, std::size_t offset) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) {
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
  }
  return std::bit_cast<float>(bits);
}

}  // namespace

void write_image_raw(const std::string& dir, const std::string& stem, const ImageVolume& image) {
  nlohmann::json header{{"dims", image.dims},
                        {"spacing", image.spacing},
                        {"dtype", "float32"},
                        {"endianness", "little"},
                        {"channels", nlohmann::json::array()}};
  for (const auto& [name, data] : image.channels) {
    const std::string file = stem + "_" + name + ".raw";
    std::string bytes;
    bytes.reserve(4 * data.size());
    for (float v : data) append_le(bytes, v);
    write_file((fs::path(dir) / file).string(), bytes);
    header["channels"].push_back({{"name", name}, {"file", file}});
  }
  write_file((fs::path(dir) / (stem + ".hdr.json")).string(), header.dump(2));
}

ImageVolume read_image_raw(const std::string& dir, const std::string& stem) {
  const std::string header_path = (fs::path(dir) / (stem + ".hdr.json")).string();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(read_file(header_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, header_path + ": " + e.what());
  }
  ImageVolume image;
  image.dims = header.at("dims").get<std::array<std::size_t, 3>>();
  image.spacing = header.at("spacing").get<std::array<double, 3>>();
  for (const auto& ch : header.at("channels")) {
    const std::string path = (fs::path(dir) / ch.at("file").get<std::string>()).string();
    const std::string bytes = read_file(path);
    if (bytes.size() != 4 * image.voxel_count()) {
      throw Error(ErrorCode::parse_error, path + ": size does not match header dims");
    }
    std::vector<float> data(image.voxel_count());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = read_le(bytes, 4 * i);
    image.set_channel(ch.at("name").get<std::string>(), std::move(data));
  }
  return image;
}

}  // namespace cohortlab::cohort

namespace cohortlab::cohort {

std::vector<double> gaussian_blur(const std::vector<double>& data,
                                  const std::array<std::size_t, 3>& dims,
                                  const std::array<double, 3>& spacing, double sigma_mm) {
  if (sigma_mm <= 0.0) return data;
  std::vector<double> cur = data;
  std::vector<double> next(data.size());
  const std::array<std::size_t, 3> stride{1, dims[0], dims[0] * dims[1]};
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t n = dims[static_cast<std::size_t>(axis)];
    if (n <= 1) continue;
    const double sigma = sigma_mm / spacing[static_cast<std::size_t>(axis)];
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
      const double w = std::exp(-0.5 * k * k / (sigma * sigma));
      kernel[static_cast<std::size_t>(k + radius)] = w;
      sum += w;
    }
    for (double& w : kernel) w /= sum;

    const std::size_t s = stride[static_cast<std::size_t>(axis)];
    for (std::size_t idx = 0; idx < cur.size(); ++idx) {
      const std::size_t pos = (idx / s) % n;
      const std::size_t base = idx - pos * s;
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const long p = std::clamp(static_cast<long>(pos) + k, 0L, static_cast<long>(n) - 1);
        acc += kernel[static_cast<std::size_t>(k + radius)] * cur[base + static_cast<std::size_t>(p) * s];
      }
      next[idx] = acc;
    }
    std::swap(cur, next);
  }
  return cur;
}

}  // namespace cohortlab::cohort
