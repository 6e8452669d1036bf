#include "cloudlayer/imaging.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cloudlayer/errors.hpp"

namespace cloudlayer::imaging {
namespace fs = std::filesystem;
using nlohmann::json;

std::size_t SegmentationMask::count() const {
  return static_cast<std::size_t>(
      std::count_if(cloud.values().begin(), cloud.values().end(), [](auto c) { return c != 0; }));
}

std::vector<std::size_t> masked_indices(const SegmentationMask& mask) {
  std::vector<std::size_t> idx;
  idx.reserve(mask.cloud.size());
  for (std::size_t k = 0; k < mask.cloud.size(); ++k)
    if (mask.cloud[k] != 0) idx.push_back(k);
  return idx;
}

namespace {

struct Range {
  double lo;
  double hi;
};

Range masked_range(const Frame& frame, const SegmentationMask& mask) {
  if (!frame.kelvin.same_shape(mask.cloud))
    throw InputError("frame and mask shapes differ");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  std::size_t n = 0;
  for (std::size_t k = 0; k < mask.cloud.size(); ++k) {
    if (mask.cloud[k] == 0) continue;
    lo = std::min(lo, frame.kelvin[k]);
    hi = std::max(hi, frame.kelvin[k]);
    ++n;
  }
  if (n < 2) throw DegenerateError("normalization needs at least 2 cloud pixels");
  if (!(hi > lo)) throw DegenerateError("masked temperatures are constant; cannot normalize");
  return {lo, hi};
}

}  // namespace

std::vector<double> normalize_beta(const Frame& frame, const SegmentationMask& mask, double eps) {
  const auto [lo, hi] = masked_range(frame, mask);
  const double span = hi - lo;
  std::vector<double> out;
  for (std::size_t k = 0; k < mask.cloud.size(); ++k) {
    if (mask.cloud[k] == 0) continue;
    out.push_back(std::clamp((frame.kelvin[k] - lo) / span, eps, 1.0 - eps));
  }
  return out;
}

std::vector<double> normalize_gamma(const Frame& frame, const SegmentationMask& mask, double eps) {
  const auto [lo, hi] = masked_range(frame, mask);
  (void)hi;
  std::vector<double> out;
  for (std::size_t k = 0; k < mask.cloud.size(); ++k) {
    if (mask.cloud[k] == 0) continue;
    out.push_back(frame.kelvin[k] - lo + eps);
  }
  return out;
}

FeatureTable temperature_features(const Frame& frame, const SegmentationMask& mask, double eps) {
  FeatureTable t;
  t.pixel = masked_indices(mask);
  t.beta_t = normalize_beta(frame, mask, eps);
  t.gamma_t = normalize_gamma(frame, mask, eps);
  t.kelvin.reserve(t.pixel.size());
  for (auto k : t.pixel) t.kelvin.push_back(frame.kelvin[k]);
  return t;
}

void attach_velocity(FeatureTable& table, const RealGrid& u, const RealGrid& v, double eps) {
  const std::size_t n = table.size();
  table.u.resize(n);
  table.v.resize(n);
  table.r.resize(n);
  table.phi.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto k = table.pixel[s];
    table.u[s] = u[k];
    table.v[s] = v[k];
    table.r[s] = std::max(std::hypot(u[k], v[k]), eps);
    table.phi[s] = std::atan2(u[k], v[k]);
  }
}

// --- I/O ----------------------------------------------------------------------

namespace {

std::vector<std::vector<double>> parse_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open file: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      const char* a = p;
      const char* b = comma;
      while (a < b && (*a == ' ' || *a == '\t')) ++a;
      while (b > a && (b[-1] == ' ' || b[-1] == '\t')) --b;
      if (a < b && *a == '+') ++a;
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(a, b, value);
      if (ec != std::errc{} || ptr != b) {
        throw InputError(path.string() + ":" + std::to_string(line_no) + ": bad number '" +
                         std::string(p, comma) + "'");
      }
      row.push_back(value);
      p = comma + 1;
      if (comma == end) break;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("empty CSV file: " + path.string());
  const auto width = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width)
      throw InputError(path.string() + ": row " + std::to_string(r + 1) + " has " +
                       std::to_string(rows[r].size()) + " values, expected " +
                       std::to_string(width));
  }
  return rows;
}

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  (void)ec;
  return std::string(buf, ptr);
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

}  // namespace

RealGrid read_real_csv(const fs::path& path) {
  const auto rows = parse_csv(path);
  RealGrid g(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) = rows[i][j];
  return g;
}

MaskGrid read_mask_csv(const fs::path& path) {
  const auto rows = parse_csv(path);
  MaskGrid g(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t j = 0; j < g.cols(); ++j) {
      const double x = rows[i][j];
      if (x != 0.0 && x != 1.0)
        throw InputError(path.string() + ": mask values must be 0 or 1");
      g(i, j) = static_cast<unsigned char>(x);
    }
  }
  return g;
}

void write_real_csv(const fs::path& path, const RealGrid& grid) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file: " + path.string());
  for (std::size_t i = 0; i < grid.rows(); ++i) {
    for (std::size_t j = 0; j < grid.cols(); ++j) {
      if (j) out << ',';
      out << format_double(grid(i, j));
    }
    out << '\n';
  }
}

void write_mask_csv(const fs::path& path, const MaskGrid& grid) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw InputError("cannot write file: " + path.string());
  for (std::size_t i = 0; i < grid.rows(); ++i) {
    for (std::size_t j = 0; j < grid.cols(); ++j) {
      if (j) out << ',';
      out << (grid(i, j) ? '1' : '0');
    }
    out << '\n';
  }
}

Sequence load_sequence(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw InputError("cannot open manifest: " + manifest_path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw InputError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  const fs::path base = manifest_path.parent_path();
  std::size_t height = 0;
  std::size_t width = 0;
  Sequence seq;
  try {
    height = doc.at("height").get<std::size_t>();
    width = doc.at("width").get<std::size_t>();
    for (const auto& entry : doc.at("frames")) {
      MaskedFrame mf;
      mf.frame.index = entry.at("t").get<std::size_t>();
      const fs::path frame_path = base / entry.at("frame").get<std::string>();
      const fs::path mask_path = base / entry.at("mask").get<std::string>();
      if (!fs::exists(frame_path)) throw InputError("missing frame file: " + frame_path.string());
      if (!fs::exists(mask_path)) throw InputError("missing mask file: " + mask_path.string());
      mf.frame.kelvin = read_real_csv(frame_path);
      mf.mask.cloud = read_mask_csv(mask_path);
      if (mf.frame.rows() != height || mf.frame.cols() != width) {
        throw InputError("shape mismatch in " + frame_path.string() + ": got " +
                         std::to_string(mf.frame.rows()) + "x" + std::to_string(mf.frame.cols()) +
                         ", expected " + std::to_string(height) + "x" + std::to_string(width));
      }
      if (!mf.frame.kelvin.same_shape(mf.mask.cloud)) {
        throw InputError("shape mismatch in " + mask_path.string() + ": mask is " +
                         std::to_string(mf.mask.cloud.rows()) + "x" +
                         std::to_string(mf.mask.cloud.cols()));
      }
      for (double x : mf.frame.kelvin.values()) {
        if (!std::isfinite(x) || x <= 0.0)
          throw InputError("non-physical temperature in " + frame_path.string());
      }
      seq.push_back(std::move(mf));
    }
  } catch (const json::exception& e) {
    throw InputError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  std::stable_sort(seq.begin(), seq.end(),
                   [](const auto& a, const auto& b) { return a.frame.index < b.frame.index; });
  for (std::size_t k = 1; k < seq.size(); ++k) {
    if (seq[k].frame.index == seq[k - 1].frame.index)
      throw InputError("duplicate frame index " + std::to_string(seq[k].frame.index) + " in " +
                       manifest_path.string());
  }
  return seq;
}

fs::path write_sequence(const fs::path& dir, const Sequence& seq) {
  fs::create_directories(dir);
  json doc;
  doc["height"] = seq.empty() ? 0 : seq.front().frame.rows();
  doc["width"] = seq.empty() ? 0 : seq.front().frame.cols();
  doc["frames"] = json::array();
  for (const auto& mf : seq) {
    char frame_name[32];
    char mask_name[32];
    std::snprintf(frame_name, sizeof frame_name, "frame_%04zu.csv", mf.frame.index);
    std::snprintf(mask_name, sizeof mask_name, "mask_%04zu.csv", mf.frame.index);
    write_real_csv(dir / frame_name, mf.frame.kelvin);
    write_mask_csv(dir / mask_name, mf.mask.cloud);
    doc["frames"].push_back({{"t", mf.frame.index}, {"frame", frame_name}, {"mask", mask_name}});
  }
  const fs::path manifest = dir / "manifest.json";
  std::ofstream out(manifest);
  if (!out) throw InputError("cannot write manifest: " + manifest.string());
  out << doc.dump(2) << '\n';
  return manifest;
}

}  // namespace cloudlayer::imaging
