#pragma once

#include <string>
#include <vector>

#include "evdetect/cluster.hpp"
#include "evdetect/common.hpp"

namespace evdetect {

/// Fixed 20-color cluster palette (cluster c uses palette[c % 20]); noise is gray.
const std::vector<std::string>& cluster_palette();
inline constexpr const char* kNoiseColor = "#9e9e9e";

/// One circle per row of the first two columns of Y.
std::string svg_scatter(const Matrix& Y, const std::vector<int>& labels, const std::string& title = "");

/// WSS polyline with the chosen k marked.
std::string svg_elbow(const WssCurve& curve, const std::string& title = "");

struct BarGroup {
  std::string name;              // x-axis group, e.g. embedding backend
  std::vector<double> values;    // one per series
  std::vector<bool> highlighted; // optional, same length as values
};

/// Grouped bars; series names label the legend.
std::string svg_bars(const std::vector<BarGroup>& groups, const std::vector<std::string>& series,
                     const std::string& title = "", const std::string& y_label = "");

std::string svg_dendrogram(const MergeTable& table, const std::string& title = "");

/// Icicle view: one rectangle per condensed cluster spanning its lambda range,
/// width proportional to its size; selected clusters are colored.
std::string svg_condensed(const CondensedTree& tree, const std::string& title = "");

}  // namespace evdetect
