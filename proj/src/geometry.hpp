#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace supwma {

/// RAS coordinate in millimeters.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

/// Ordered polyline; at least two points with non-zero arc length once
/// validated.
struct Streamline {
  std::vector<Point3> points;

  std::size_t size() const noexcept { return points.size(); }
  friend bool operator==(const Streamline&, const Streamline&) = default;
};

struct StreamlineSet {
  std::vector<Streamline> streamlines;
  std::optional<std::vector<std::int32_t>> labels;

  std::size_t size() const noexcept { return streamlines.size(); }
  friend bool operator==(const StreamlineSet&, const StreamlineSet&) = default;
};

/// 4x4 row-major matrix with last row (0,0,0,1).
class AffineTransform {
 public:
  AffineTransform();  // identity
  explicit AffineTransform(const std::array<double, 16>& row_major);

  static AffineTransform translation(double dx, double dy, double dz);

  const std::array<double, 16>& matrix() const noexcept { return m_; }
  Point3 apply(const Point3& p) const noexcept;

 private:
  std::array<double, 16> m_;
};

double arc_length(const Streamline& s);

/// Throws kInvalidArgument unless the streamline has >= 2 finite points and
/// positive arc length.
void validate(const Streamline& s);
void validate(const StreamlineSet& set, std::optional<std::int32_t> class_count = {});

/// Linear interpolation at `n` points equidistant in cumulative arc length.
/// Endpoints are copied from the input exactly.
Streamline resample(const Streamline& s, std::size_t n);

StreamlineSet apply_affine(const StreamlineSet& set, const AffineTransform& t);

Streamline reverse(const Streamline& s);

// SLP1: "SLP1", u32 count, then per streamline u16 point count followed by
// count*3 float32 (x,y,z interleaved). Little-endian throughout.
StreamlineSet read_slp(const std::filesystem::path& path);
void write_slp(const StreamlineSet& set, const std::filesystem::path& path);

/// CSV with header `index,label`.
std::vector<std::int32_t> read_labels(const std::filesystem::path& path,
                                      std::optional<std::size_t> expected_count = {});
void write_labels(const std::vector<std::int32_t>& labels, const std::filesystem::path& path);

/// 16 whitespace-separated numbers, row-major.
AffineTransform read_affine(const std::filesystem::path& path);

}  // namespace supwma
