/*
 * Copyright (c) 2026, The fodswin authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "pipeline/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "core/error.hpp"

namespace fodswin::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_fraction(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw ArgumentError(std::string("region threshold ") + what + " must lie in [0,1]");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// Slice plane geometry: rows and columns in volume coordinates.
struct Plane {
  int rows = 0;
  int cols = 0;
  std::size_t voxel(const Dims3& d, Axis axis, int index, int r, int c) const {
    int x = 0, y = 0, z = 0;
    switch (axis) {
      case Axis::X: x = index; y = c; z = r; break;
      case Axis::Y: x = c; y = index; z = r; break;
      case Axis::Z: x = c; y = r; z = index; break;
    }
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(d[0]) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(d[1]) * z);
  }
};

void write_pgm(const std::filesystem::path& path, int width, int height, const std::vector<unsigned char>& px) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IOError("cannot open '" + path.string() + "' for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (!out) throw IOError("failed writing '" + path.string() + "'");
}

}  // namespace

void RegionRule::validate() const {
  if (name.empty()) throw ArgumentError("region rule needs a name");
  check_fraction(wm_min, "wm");
  check_fraction(cgm_min, "cgm");
  check_fraction(sgm_min, "sgm");
}

RegionRule wm_rule() { return {"WM", 0.7, 0.0, 0.0}; }
RegionRule wm_cgm_rule() { return {"WM_CGM", 0.3, 0.3, 0.0}; }
RegionRule wm_sgm_rule() { return {"WM_SGM", 0.3, 0.0, 0.3}; }
std::vector<RegionRule> standard_rules() { return {wm_rule(), wm_cgm_rule(), wm_sgm_rule()}; }

Mask region_mask(const TissueFractions& fractions, const RegionRule& rule) {
  fractions.validate();
  rule.validate();
  Mask m = Mask::filled(fractions.spatial(), false);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const bool in = fractions.wm.data[i] >= rule.wm_min && fractions.cgm.data[i] >= rule.cgm_min &&
                    fractions.sgm.data[i] >= rule.sgm_min;
    m.values[i] = in ? 1 : 0;
  }
  return m;
}

double quantile_type7(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw EmptySelectionError("quantile of an empty set");
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("quantile probability must lie in [0,1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

AccStats describe(std::vector<double> values, std::size_t n_undefined) {
  if (values.empty()) throw EmptySelectionError("no values to describe");
  std::sort(values.begin(), values.end());
  AccStats s;
  s.n_voxels = values.size();
  s.n_undefined = n_undefined;
  s.min = values.front();
  s.max = values.back();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(values.size()));
  s.lower_quartile = quantile_type7(values, 0.25);
  s.upper_quartile = quantile_type7(values, 0.75);
  return s;
}

std::vector<double> masked_values(const sh::AccMap& map, const Mask& mask) {
  if (map.dims != mask.dims) throw ArgumentError("ACC map and mask differ in shape");
  std::vector<double> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i] && map.state[i] == sh::AccState::Defined) out.push_back(map.values[i]);
  return out;
}

AccStats acc_stats(const sh::AccMap& map, const Mask& mask) {
  if (map.dims != mask.dims) throw ArgumentError("ACC map and mask differ in shape");
  std::size_t undefined = 0, selected = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i] || map.state[i] == sh::AccState::NotSelected) continue;
    ++selected;
    if (map.state[i] == sh::AccState::Undefined) ++undefined;
  }
  if (selected == 0) throw EmptySelectionError("the selection contains no voxels");
  if (undefined == selected)
    throw AllUndefinedError("all " + std::to_string(selected) + " selected voxels have undefined ACC");
  return describe(masked_values(map, mask), undefined);
}

HeatmapFiles export_heatmap_slice(const sh::AccMap& map, Axis axis, int index, const std::filesystem::path& stem) {
  const int a = static_cast<int>(axis);
  if (index < 0 || index >= map.dims[a])
    throw ArgumentError("slice index " + std::to_string(index) + " outside [0, " + std::to_string(map.dims[a]) + ")");
  Plane plane;
  switch (axis) {
    case Axis::X: plane = {map.dims[2], map.dims[1]}; break;
    case Axis::Y: plane = {map.dims[2], map.dims[0]}; break;
    case Axis::Z: plane = {map.dims[1], map.dims[0]}; break;
  }
  const std::size_t n = static_cast<std::size_t>(plane.rows) * static_cast<std::size_t>(plane.cols);
  std::vector<unsigned char> img(n, 0), valid(n, 0);
  std::string csv;
  char buf[40];
  for (int r = 0; r < plane.rows; ++r) {
    for (int c = 0; c < plane.cols; ++c) {
      const std::size_t v = plane.voxel(map.dims, axis, index, r, c);
      const std::size_t p = static_cast<std::size_t>(r) * plane.cols + c;
      if (c > 0) csv += ',';
      if (map.state[v] != sh::AccState::Defined) continue;
      const double acc = std::clamp(map.values[v], -1.0, 1.0);
      img[p] = static_cast<unsigned char>(std::lround((acc + 1.0) * 127.5));
      valid[p] = 255;
      std::snprintf(buf, sizeof(buf), "%.17g", map.values[v]);
      csv += buf;
    }
    csv += '\n';
  }
  HeatmapFiles files;
  files.image = stem;
  files.image += ".pgm";
  files.mask = stem;
  files.mask += "_mask.pgm";
  files.csv = stem;
  files.csv += ".csv";
  write_pgm(files.image, plane.cols, plane.rows, img);
  write_pgm(files.mask, plane.cols, plane.rows, valid);
  write_text(files.csv, csv);
  return files;
}

std::vector<std::vector<double>> read_heatmap_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      if (cell.empty()) {
        row.push_back(kNaN);
      } else {
        try {
          row.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw FormatError("bad CSV cell '" + cell + "' in " + path.string());
        }
      }
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Report compare_methods(const std::vector<NamedAccMap>& maps, const TissueFractions& fractions,
                       const std::vector<RegionRule>& rules) {
  fractions.validate();
  std::vector<Mask> masks;
  for (const auto& r : rules) masks.push_back(region_mask(fractions, r));
  Report report;
  for (const auto& [method, map] : maps) {
    if (map.dims != fractions.spatial())
      throw ArgumentError("ACC map for '" + method + "' has shape " + to_string(map.dims) + ", fractions have " +
                          to_string(fractions.spatial()));
    for (std::size_t r = 0; r < rules.size(); ++r) {
      ReportRow row{method, rules[r].name, {}, {}};
      try {
        row.stats = acc_stats(map, masks[r]);
      } catch (const EmptySelectionError&) {
        row.stats = {kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, 0, 0};
        row.note = "no voxels";
      } catch (const AllUndefinedError&) {
        std::size_t n = 0;
        for (std::size_t i = 0; i < masks[r].size(); ++i)
          if (masks[r][i] && map.state[i] == sh::AccState::Undefined) ++n;
        row.stats = {kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, 0, n};
        row.note = "all undefined";
      }
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

std::string report_csv(const Report& report) {
  std::ostringstream os;
  os << "method,region,n_voxels,n_undefined,Min,Max,Mean,STD,LQ,UQ\n";
  for (const auto& r : report.rows) {
    const AccStats& s = r.stats;
    os << r.method << ',' << r.region << ',' << s.n_voxels << ',' << s.n_undefined << ',' << fmt(s.min) << ','
       << fmt(s.max) << ',' << fmt(s.mean) << ',' << fmt(s.std) << ',' << fmt(s.lower_quartile) << ','
       << fmt(s.upper_quartile) << '\n';
  }
  return os.str();
}

std::string report_table(const Report& report) {
  const std::vector<std::string> header = {"method", "region", "n_voxels", "n_undefined", "Min",
                                           "Max",    "Mean",   "STD",      "LQ",          "UQ"};
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& r : report.rows) {
    const AccStats& s = r.stats;
    auto val = [](double v) { return std::isnan(v) ? std::string("-") : fmt(v); };
    cells.push_back({r.method, r.region, std::to_string(s.n_voxels), std::to_string(s.n_undefined), val(s.min),
                     val(s.max), val(s.mean), val(s.std), val(s.lower_quartile), val(s.upper_quartile)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string& s = row[c];
      const std::string pad(width[c] - s.size(), ' ');
      out += c < 2 ? s + pad : pad + s;
      out += c + 1 < row.size() ? "  " : "\n";
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IOError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IOError("failed writing '" + path.string() + "'");
}

}  // namespace fodswin::eval
