#include "geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "error.hpp"

namespace supwma {

namespace {

static_assert(std::endian::native == std::endian::little,
              "SLP1 I/O assumes a little-endian host");

constexpr char kSlpMagic[4] = {'S', 'L', 'P', '1'};

double distance(const Point3& a, const Point3& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double dz = b.z - a.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

bool finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T value;
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    fail(ErrorCode::kFormat, "truncated file: " + path.string());
  }
  return value;
}

}  // namespace

AffineTransform::AffineTransform()
    : m_{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1} {}

AffineTransform::AffineTransform(const std::array<double, 16>& row_major) : m_(row_major) {
  for (double v : m_) {
    require(std::isfinite(v), ErrorCode::kInvalidArgument, "affine matrix has non-finite entry");
  }
  require(m_[12] == 0.0 && m_[13] == 0.0 && m_[14] == 0.0 && m_[15] == 1.0,
          ErrorCode::kInvalidArgument, "affine matrix last row must be (0,0,0,1)");
  const double det = m_[0] * (m_[5] * m_[10] - m_[6] * m_[9]) -
                     m_[1] * (m_[4] * m_[10] - m_[6] * m_[8]) +
                     m_[2] * (m_[4] * m_[9] - m_[5] * m_[8]);
  require(det != 0.0 && std::isfinite(det), ErrorCode::kInvalidArgument,
          "affine linear block is singular");
}

AffineTransform AffineTransform::translation(double dx, double dy, double dz) {
  return AffineTransform({1, 0, 0, dx, 0, 1, 0, dy, 0, 0, 1, dz, 0, 0, 0, 1});
}

Point3 AffineTransform::apply(const Point3& p) const noexcept {
  return {m_[0] * p.x + m_[1] * p.y + m_[2] * p.z + m_[3],
          m_[4] * p.x + m_[5] * p.y + m_[6] * p.z + m_[7],
          m_[8] * p.x + m_[9] * p.y + m_[10] * p.z + m_[11]};
}

double arc_length(const Streamline& s) {
  double total = 0.0;
  for (std::size_t i = 1; i < s.points.size(); ++i) total += distance(s.points[i - 1], s.points[i]);
  return total;
}

void validate(const Streamline& s) {
  require(s.points.size() >= 2, ErrorCode::kInvalidArgument, "point count < 2");
  for (const auto& p : s.points) {
    require(finite(p), ErrorCode::kInvalidArgument, "non-finite coordinate");
  }
  require(arc_length(s) > 0.0, ErrorCode::kInvalidArgument, "zero arc length");
}

void validate(const StreamlineSet& set, std::optional<std::int32_t> class_count) {
  for (std::size_t i = 0; i < set.streamlines.size(); ++i) {
    try {
      validate(set.streamlines[i]);
    } catch (const Error& e) {
      fail(e.code(), "streamline " + std::to_string(i) + ": " + e.what());
    }
  }
  if (!set.labels) return;
  require(set.labels->size() == set.streamlines.size(), ErrorCode::kInvalidArgument,
          "label count does not match streamline count");
  for (std::int32_t label : *set.labels) {
    require(label >= 0 && (!class_count || label < *class_count), ErrorCode::kInvalidArgument,
            "label out of range: " + std::to_string(label));
  }
}

Streamline resample(const Streamline& s, std::size_t n) {
  require(n >= 2, ErrorCode::kInvalidArgument, "resample point count must be >= 2");
  require(s.points.size() >= 2, ErrorCode::kInvalidArgument, "point count < 2");

  const auto& pts = s.points;
  std::vector<double> cumulative(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + distance(pts[i - 1], pts[i]);
  }
  const double total = cumulative.back();
  require(total > 0.0 && std::isfinite(total), ErrorCode::kInvalidArgument, "zero arc length");

  Streamline out;
  out.points.reserve(n);
  out.points.push_back(pts.front());
  std::size_t seg = 1;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double target = total * static_cast<double>(i) / static_cast<double>(n - 1);
    while (seg + 1 < pts.size() && cumulative[seg] < target) ++seg;
    // Zero-length segments have cumulative[seg] == cumulative[seg-1] and are
    // skipped by the loop above unless target lands exactly on them.
    const double len = cumulative[seg] - cumulative[seg - 1];
    const double t = len > 0.0 ? std::clamp((target - cumulative[seg - 1]) / len, 0.0, 1.0) : 1.0;
    const Point3& a = pts[seg - 1];
    const Point3& b = pts[seg];
    out.points.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.z + t * (b.z - a.z)});
  }
  out.points.push_back(pts.back());
  return out;
}

StreamlineSet apply_affine(const StreamlineSet& set, const AffineTransform& t) {
  StreamlineSet out;
  out.labels = set.labels;
  out.streamlines.reserve(set.streamlines.size());
  for (const auto& s : set.streamlines) {
    Streamline moved;
    moved.points.reserve(s.points.size());
    for (const auto& p : s.points) moved.points.push_back(t.apply(p));
    out.streamlines.push_back(std::move(moved));
  }
  return out;
}

Streamline reverse(const Streamline& s) {
  return Streamline{{s.points.rbegin(), s.points.rend()}};
}

StreamlineSet read_slp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());

  char magic[4];
  if (!in.read(magic, 4)) fail(ErrorCode::kFormat, "truncated file: " + path.string());
  require(std::memcmp(magic, kSlpMagic, 4) == 0, ErrorCode::kFormat, "bad magic: " + path.string());

  const auto count = get<std::uint32_t>(in, path);
  StreamlineSet set;
  set.streamlines.reserve(std::min<std::uint32_t>(count, 1u << 20));
  std::vector<float> buffer;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto npts = get<std::uint16_t>(in, path);
    require(npts >= 2, ErrorCode::kFormat,
            "point count < 2 in streamline " + std::to_string(i) + ": " + path.string());
    buffer.resize(std::size_t{npts} * 3);
    if (!in.read(reinterpret_cast<char*>(buffer.data()),
                 static_cast<std::streamsize>(buffer.size() * sizeof(float)))) {
      fail(ErrorCode::kFormat, "truncated file: " + path.string());
    }
    Streamline s;
    s.points.reserve(npts);
    for (std::size_t j = 0; j < npts; ++j) {
      const Point3 p{buffer[3 * j], buffer[3 * j + 1], buffer[3 * j + 2]};
      require(finite(p), ErrorCode::kFormat,
              "NaN or infinite coordinate in streamline " + std::to_string(i) + ": " + path.string());
      s.points.push_back(p);
    }
    set.streamlines.push_back(std::move(s));
  }
  require(in.peek() == std::char_traits<char>::eof(), ErrorCode::kFormat,
          "trailing bytes after last streamline: " + path.string());
  return set;
}

void write_slp(const StreamlineSet& set, const std::filesystem::path& path) {
  require(set.streamlines.size() <= UINT32_MAX, ErrorCode::kInvalidArgument,
          "too many streamlines for SLP1");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open for writing " + path.string());
  out.write(kSlpMagic, 4);
  put(out, static_cast<std::uint32_t>(set.streamlines.size()));
  for (const auto& s : set.streamlines) {
    require(s.points.size() >= 2 && s.points.size() <= UINT16_MAX, ErrorCode::kInvalidArgument,
            "streamline point count must be in [2, 65535] for SLP1");
    put(out, static_cast<std::uint16_t>(s.points.size()));
    for (const auto& p : s.points) {
      require(finite(p), ErrorCode::kInvalidArgument, "non-finite coordinate");
      put(out, static_cast<float>(p.x));
      put(out, static_cast<float>(p.y));
      put(out, static_cast<float>(p.z));
    }
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

std::vector<std::int32_t> read_labels(const std::filesystem::path& path,
                                      std::optional<std::size_t> expected_count) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::kFormat,
          "missing header in " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "index,label", ErrorCode::kFormat, "expected header 'index,label' in " + path.string());

  std::vector<std::int32_t> labels;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    const std::string where = path.string() + " row " + std::to_string(row + 1);
    require(comma != std::string::npos, ErrorCode::kFormat, "missing comma at " + where);
    const std::string label_text = line.substr(comma + 1);
    std::size_t used = 0;
    long long value = -1;
    try {
      value = std::stoll(label_text, &used);
    } catch (const std::exception&) {
      fail(ErrorCode::kFormat, "non-integer label at " + where);
    }
    require(used == label_text.size(), ErrorCode::kFormat, "non-integer label at " + where);
    require(value >= 0 && value <= INT32_MAX, ErrorCode::kFormat, "label must be a non-negative integer at " + where);
    labels.push_back(static_cast<std::int32_t>(value));
    ++row;
  }
  if (expected_count) {
    require(labels.size() == *expected_count, ErrorCode::kFormat,
            "label row count " + std::to_string(labels.size()) + " does not match expected " +
                std::to_string(*expected_count) + " in " + path.string());
  }
  return labels;
}

void write_labels(const std::vector<std::int32_t>& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open for writing " + path.string());
  out << "index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
  require(static_cast<bool>(out), ErrorCode::kIo, "write failed: " + path.string());
}

AffineTransform read_affine(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path.string());
  std::array<double, 16> m{};
  for (double& v : m) {
    require(static_cast<bool>(in >> v), ErrorCode::kFormat,
            "affine file must hold 16 numbers: " + path.string());
  }
  std::string extra;
  require(!(in >> extra), ErrorCode::kFormat, "affine file has more than 16 numbers: " + path.string());
  return AffineTransform(m);
}

}  // namespace supwma
