#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace cohortlab::cohort {

/// Multi-channel voxel grid. World coordinates (mm) of voxel (i, j, k) are
/// (i * spacing[0], j * spacing[1], k * spacing[2]). A 2D image has dims[2] == 1.
struct ImageVolume {
  std::array<std::size_t, 3> dims{1, 1, 1};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::map<std::string, std::vector<float>, std::less<>> channels;

  bool is_2d() const noexcept { return dims[2] == 1; }
  std::size_t voxel_count() const noexcept { return dims[0] * dims[1] * dims[2]; }
  std::size_t index(std::size_t i, std::size_t j, std::size_t k = 0) const noexcept {
    return i + dims[0] * (j + dims[1] * k);
  }

  /// Throws Error(invalid_argument) if the size does not match dims or spacing <= 0.
  void set_channel(const std::string& name, std::vector<float> data);
  const std::vector<float>& channel(std::string_view name) const;

  bool operator==(const ImageVolume&) const = default;
};

/// Binary PGM (P5, maxval 65535, big-endian 16-bit). Values are rounded and
/// clamped to [0, 65535]; spacing and channel name travel in header comments.
std::string encode_pgm(const ImageVolume& image, std::string_view channel);
ImageVolume decode_pgm(std::string_view bytes, std::string default_channel = "I");

/// Writes one `<stem>_<channel>.pgm` per channel into `dir`.
void write_image_2d(const std::string& dir, const std::string& stem, const ImageVolume& image);
ImageVolume read_image_2d(const std::string& dir, const std::string& stem,
                          const std::vector<std::string>& channels);

/// Writes `<stem>_<channel>.raw` (little-endian float32) per channel plus the
/// `<stem>.hdr.json` sidecar carrying dims, spacing and channel names.
void write_image_raw(const std::string& dir, const std::string& stem, const ImageVolume& image);
ImageVolume read_image_raw(const std::string& dir, const std::string& stem);

}  // namespace cohortlab::cohort

namespace cohortlab::cohort {

/// Separable Gaussian smoothing of a scalar grid with clamp-to-edge borders.
/// `sigma_mm` <= 0 returns the input unchanged.
std::vector<double> gaussian_blur(const std::vector<double>& data,
                                  const std::array<std::size_t, 3>& dims,
                                  const std::array<double, 3>& spacing, double sigma_mm);

}  // namespace cohortlab::cohort
