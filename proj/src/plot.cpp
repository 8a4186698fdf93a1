// Deterministic SVG emitters. No timestamps, fixed number formatting.
#include "evdetect/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

namespace evdetect {

const std::vector<std::string>& cluster_palette() {
  static const std::vector<std::string> palette = {
      "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
      "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5",
      "#c49c94", "#f7b6d2", "#dbdb8d", "#9edae5", "#393b79", "#637939"};
  return palette;
}

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kLeft = 64, kRight = 24, kTop = 40, kBottom = 56;

std::string num(double v) {
  if (!std::isfinite(v)) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string label_num(double v) {
  char buf[32];
  if (v != 0.0 && (std::abs(v) >= 1e5 || std::abs(v) < 1e-3)) std::snprintf(buf, sizeof buf, "%.2e", v);
  else std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string color_for(int label) {
  if (label < 0) return kNoiseColor;
  return cluster_palette()[static_cast<std::size_t>(label) % cluster_palette().size()];
}

class Svg {
 public:
  Svg(const std::string& title) {
    out_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
         << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
         << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty()) text(kWidth / 2, 22, title, "middle", 14);
  }
  void text(double x, double y, const std::string& s, const char* anchor = "start", int size = 11) {
    out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"" << anchor << "\"";
    if (size != 11) out_ << " font-size=\"" << size << "\"";
    out_ << ">" << escape(s) << "</text>\n";
  }
  void line(double x1, double y1, double x2, double y2, const std::string& stroke = "#333") {
    out_ << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
         << "\" stroke=\"" << stroke << "\"/>\n";
  }
  void raw(const std::string& s) { out_ << s; }
  std::ostringstream& stream() { return out_; }
  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }
  void axes() {
    line(kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom);
    line(kLeft, kTop, kLeft, kHeight - kBottom);
  }

 private:
  std::ostringstream out_;
};

struct Scale {
  double lo, hi, a, b;  // data [lo, hi] -> pixels [a, b]
  double operator()(double v) const { return hi > lo ? a + (v - lo) / (hi - lo) * (b - a) : (a + b) / 2; }
};

Scale padded(double lo, double hi, double a, double b) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad, a, b};
}

}  // namespace

std::string svg_scatter(const Matrix& Y, const std::vector<int>& labels, const std::string& title) {
  if (Y.cols() < 2) throw PreconditionError("scatter plot needs 2 columns, got " + std::to_string(Y.cols()));
  if (static_cast<Eigen::Index>(labels.size()) != Y.rows()) throw PreconditionError("scatter plot: labels do not match rows");
  Svg svg(title);
  svg.axes();
  const Scale sx = padded(Y.col(0).minCoeff(), Y.col(0).maxCoeff(), kLeft, kWidth - kRight);
  const Scale sy = padded(Y.col(1).minCoeff(), Y.col(1).maxCoeff(), kHeight - kBottom, kTop);
  // Noise first so clusters draw on top.
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
      const int l = labels[static_cast<std::size_t>(i)];
      if ((pass == 0) != (l < 0)) continue;
      svg.stream() << "<circle cx=\"" << num(sx(Y(i, 0))) << "\" cy=\"" << num(sy(Y(i, 1))) << "\" r=\"3\" fill=\""
                   << color_for(l) << "\" fill-opacity=\"0.8\"/>\n";
    }
  }
  svg.text(kLeft, kHeight - 20, "x: [" + label_num(sx.lo) + ", " + label_num(sx.hi) + "]");
  svg.text(kWidth - kRight, kHeight - 20, "y: [" + label_num(sy.lo) + ", " + label_num(sy.hi) + "]", "end");
  return svg.finish();
}

std::string svg_elbow(const WssCurve& curve, const std::string& title) {
  if (curve.ks.empty() || curve.ks.size() != curve.wss.size()) throw PreconditionError("elbow plot: empty or misaligned curve");
  Svg svg(title);
  svg.axes();
  const auto [wmin, wmax] = std::minmax_element(curve.wss.begin(), curve.wss.end());
  const Scale sx = padded(curve.ks.front(), curve.ks.back(), kLeft, kWidth - kRight);
  const Scale sy = padded(*wmin, *wmax, kHeight - kBottom, kTop);
  std::string points;
  for (std::size_t i = 0; i < curve.ks.size(); ++i) {
    if (i) points += ' ';
    points += num(sx(curve.ks[i])) + "," + num(sy(curve.wss[i]));
  }
  svg.stream() << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
  for (std::size_t i = 0; i < curve.ks.size(); ++i) {
    const bool chosen = curve.ks[i] == curve.chosen_k;
    svg.stream() << "<circle cx=\"" << num(sx(curve.ks[i])) << "\" cy=\"" << num(sy(curve.wss[i])) << "\" r=\""
                 << (chosen ? 6 : 3) << "\" fill=\"" << (chosen ? "#d62728" : "#1f77b4") << "\"/>\n";
    svg.text(sx(curve.ks[i]), kHeight - kBottom + 16, std::to_string(curve.ks[i]), "middle");
  }
  svg.text(kWidth / 2, kHeight - 16, "k (chosen " + std::to_string(curve.chosen_k) + (curve.flat ? ", flat curve" : "") + ")", "middle");
  svg.text(kLeft - 6, kTop + 4, label_num(sy.hi), "end");
  svg.text(kLeft - 6, kHeight - kBottom, label_num(sy.lo), "end");
  svg.text(14, kHeight / 2, "WSS");
  return svg.finish();
}

std::string svg_bars(const std::vector<BarGroup>& groups, const std::vector<std::string>& series,
                     const std::string& title, const std::string& y_label) {
  if (groups.empty() || series.empty()) throw PreconditionError("bar plot: no data");
  double vmax = 0.0;
  for (const auto& g : groups) {
    if (g.values.size() != series.size()) throw PreconditionError("bar plot: group \"" + g.name + "\" has wrong length");
    for (double v : g.values)
      if (std::isfinite(v)) vmax = std::max(vmax, v);
  }
  if (vmax <= 0.0) vmax = 1.0;
  Svg svg(title);
  svg.axes();
  const double plot_w = kWidth - kLeft - kRight - 120;  // legend on the right
  const double group_w = plot_w / static_cast<double>(groups.size());
  const double bar_w = group_w * 0.8 / static_cast<double>(series.size());
  const Scale sy{0.0, vmax * 1.05, kHeight - kBottom, kTop};
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double x0 = kLeft + g * group_w + group_w * 0.1;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = groups[g].values[s];
      const double h = std::isfinite(v) ? (kHeight - kBottom) - sy(v) : 0.0;
      const bool mark = s < groups[g].highlighted.size() && groups[g].highlighted[s];
      svg.stream() << "<rect x=\"" << num(x0 + s * bar_w) << "\" y=\"" << num(kHeight - kBottom - h) << "\" width=\""
                   << num(bar_w * 0.9) << "\" height=\"" << num(h) << "\" fill=\"" << color_for(static_cast<int>(s))
                   << "\"" << (mark ? " stroke=\"black\" stroke-width=\"2\"" : "") << "/>\n";
      if (mark) svg.text(x0 + (s + 0.45) * bar_w, kHeight - kBottom - h - 4, "*", "middle");
    }
    svg.text(x0 + group_w * 0.4, kHeight - kBottom + 16, groups[g].name, "middle");
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double y = kTop + 10 + 16 * s;
    svg.stream() << "<rect x=\"" << num(kWidth - 130) << "\" y=\"" << num(y - 9) << "\" width=\"10\" height=\"10\" fill=\""
                 << color_for(static_cast<int>(s)) << "\"/>\n";
    svg.text(kWidth - 115, y, series[s]);
  }
  svg.text(kLeft - 6, kTop + 4, label_num(vmax * 1.05), "end");
  svg.text(kLeft - 6, kHeight - kBottom, "0", "end");
  if (!y_label.empty()) svg.text(14, kTop - 10, y_label);
  return svg.finish();
}

std::string svg_dendrogram(const MergeTable& table, const std::string& title) {
  const int n = static_cast<int>(table.rows.size()) + 1;
  if (n < 2) throw PreconditionError("dendrogram: empty merge table");
  // Leaf order from a left-first walk down from the root.
  std::vector<int> order;
  std::vector<int> stack{2 * n - 2};
  while (!stack.empty()) {
    const int node = stack.back();
    stack.pop_back();
    if (node < n) {
      order.push_back(node);
      continue;
    }
    const auto& row = table.rows[static_cast<std::size_t>(node - n)];
    stack.push_back(row.right);
    stack.push_back(row.left);
  }
  std::vector<double> x(static_cast<std::size_t>(2 * n - 1)), h(static_cast<std::size_t>(2 * n - 1), 0.0);
  const double step = (kWidth - kLeft - kRight) / n;
  for (std::size_t i = 0; i < order.size(); ++i) x[static_cast<std::size_t>(order[i])] = kLeft + step * (i + 0.5);
  double dmax = 0.0;
  for (const auto& r : table.rows) dmax = std::max(dmax, r.distance);
  const Scale sy{0.0, dmax > 0 ? dmax * 1.05 : 1.0, kHeight - kBottom, kTop};
  Svg svg(title);
  svg.line(kLeft, kTop, kLeft, kHeight - kBottom);
  for (int s = 0; s < n - 1; ++s) {
    const auto& r = table.rows[static_cast<std::size_t>(s)];
    const auto node = static_cast<std::size_t>(n + s);
    const auto l = static_cast<std::size_t>(r.left), rr = static_cast<std::size_t>(r.right);
    x[node] = (x[l] + x[rr]) / 2;
    h[node] = r.distance;
    svg.stream() << "<path d=\"M" << num(x[l]) << ' ' << num(sy(h[l])) << " V" << num(sy(r.distance)) << " H"
                 << num(x[rr]) << " V" << num(sy(h[rr])) << "\" fill=\"none\" stroke=\"#1f77b4\"/>\n";
  }
  if (n <= 60)
    for (int leaf : order) svg.text(x[static_cast<std::size_t>(leaf)], kHeight - kBottom + 14, std::to_string(leaf), "middle", 8);
  svg.text(kLeft - 6, kTop + 4, label_num(sy.hi), "end");
  svg.text(kLeft - 6, kHeight - kBottom, "0", "end");
  svg.text(14, kTop - 10, "merge distance");
  return svg.finish();
}

std::string svg_condensed(const CondensedTree& tree, const std::string& title) {
  const int n = tree.n_points;
  if (n < 1) throw PreconditionError("condensed tree plot: empty tree");
  std::map<int, double> birth{{n, 0.0}}, death;
  std::map<int, int> size{{n, n}};
  std::map<int, std::vector<int>> children;
  double lmax = 0.0;
  for (const auto& r : tree.rows) {
    lmax = std::max(lmax, r.lambda);
    death[r.parent] = std::max(death[r.parent], r.lambda);
    if (r.child >= n) {
      birth[r.child] = r.lambda;
      size[r.child] = r.child_size;
      children[r.parent].push_back(r.child);
    }
  }
  const Scale sy{0.0, lmax > 0 ? lmax * 1.05 : 1.0, kTop, kHeight - kBottom};
  std::map<int, int> selected_index;
  for (std::size_t i = 0; i < tree.selected.size(); ++i) selected_index[tree.selected[i]] = static_cast<int>(i);
  Svg svg(title);
  svg.line(kLeft, kTop, kLeft, kHeight - kBottom);
  std::function<void(int, double, double)> draw = [&](int c, double x0, double x1) {
    const double y0 = sy(birth[c]);
    const double y1 = sy(std::max(death.count(c) ? death[c] : birth[c], birth[c]));
    const auto sel = selected_index.find(c);
    const std::string fill = sel != selected_index.end() ? color_for(sel->second) : "#e0e0e0";
    svg.stream() << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(std::max(1.0, x1 - x0 - 1))
                 << "\" height=\"" << num(std::max(1.0, y1 - y0)) << "\" fill=\"" << fill << "\" stroke=\"#555\"/>\n";
    double cursor = x0;
    for (int ch : children[c]) {
      const double w = (x1 - x0) * size[ch] / std::max(1, size[c]);
      draw(ch, cursor, cursor + w);
      cursor += w;
    }
  };
  draw(n, kLeft + 4, kWidth - kRight);
  svg.text(kLeft - 6, kTop + 4, "0", "end");
  svg.text(kLeft - 6, kHeight - kBottom, label_num(sy.hi), "end");
  svg.text(14, kTop - 10, "lambda");
  return svg.finish();
}

}  // namespace evdetect
