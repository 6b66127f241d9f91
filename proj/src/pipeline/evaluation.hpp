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

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "core/sh.hpp"
#include "core/volume.hpp"

namespace fodswin::eval {

/// Minimum tissue fractions a voxel must reach (all conditions inclusive).
struct RegionRule {
  std::string name;
  double wm_min = 0.0;
  double cgm_min = 0.0;
  double sgm_min = 0.0;

  void validate() const;
};

RegionRule wm_rule();      // wm >= 0.7
RegionRule wm_cgm_rule();  // wm >= 0.3 and cgm >= 0.3
RegionRule wm_sgm_rule();  // wm >= 0.3 and sgm >= 0.3
/// WM, WM_CGM, WM_SGM in that order.
std::vector<RegionRule> standard_rules();

Mask region_mask(const TissueFractions& fractions, const RegionRule& rule);

struct AccStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population
  double lower_quartile = 0.0;
  double upper_quartile = 0.0;
  std::size_t n_voxels = 0;  // defined values entering the statistics
  std::size_t n_undefined = 0;
};

/// Type-7 (linear interpolation) quantile of ascending values.
double quantile_type7(const std::vector<double>& sorted, double p);

/// Statistics of value set; n_undefined is passed through. Throws
/// EmptySelectionError for an empty set.
AccStats describe(std::vector<double> values, std::size_t n_undefined = 0);

/// Statistics over defined ACC values at voxels that are inside mask and
/// were selected when the map was computed. Throws EmptySelectionError when
/// no voxel qualifies and AllUndefinedError when every qualifying voxel is
/// undefined.
AccStats acc_stats(const sh::AccMap& map, const Mask& mask);

/// Defined ACC values inside mask in voxel order.
std::vector<double> masked_values(const sh::AccMap& map, const Mask& mask);

enum class Axis { X = 0, Y = 1, Z = 2 };

struct HeatmapFiles {
  std::filesystem::path image;
  std::filesystem::path mask;
  std::filesystem::path csv;
};

/// Maps ACC in [-1, 1] linearly onto 0..255 (rounded); undefined and
/// unselected voxels are 0 with mask value 0 in the sidecar PGM (255 where
/// defined). The CSV holds one slice row per line, empty cells for missing
/// values. Files are <stem>.pgm, <stem>_mask.pgm and <stem>.csv.
HeatmapFiles export_heatmap_slice(const sh::AccMap& map, Axis axis, int index, const std::filesystem::path& stem);

/// Parses a CSV written by export_heatmap_slice; NaN marks empty cells.
std::vector<std::vector<double>> read_heatmap_csv(const std::filesystem::path& path);

struct ReportRow {
  std::string method;
  std::string region;
  AccStats stats;
  /// Set when the region has no defined values; the statistics are then NaN.
  std::string note;
};

struct Report {
  std::vector<ReportRow> rows;
};

using NamedAccMap = std::pair<std::string, sh::AccMap>;

/// One row per (method, region), methods outermost. Throws ArgumentError when
/// maps and fractions do not share a grid.
Report compare_methods(const std::vector<NamedAccMap>& maps, const TissueFractions& fractions,
                       const std::vector<RegionRule>& rules);

/// Header: method,region,n_voxels,n_undefined,Min,Max,Mean,STD,LQ,UQ
std::string report_csv(const Report& report);
/// Aligned plain-text rendering of the same columns.
std::string report_table(const Report& report);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fodswin::eval
