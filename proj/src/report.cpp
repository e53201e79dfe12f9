#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "labseq/pipeline.hpp"

namespace labseq {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
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

std::string header(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " + std::to_string(h) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::string text(double x, double y, const std::string& s, const char* anchor = "start") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
}

const char* label_colour(int label) { return label ? "#c0392b" : "#2471a3"; }

}  // namespace

std::string render_timeline_svg(const std::vector<TimelineRow>& rows) {
  constexpr int width = 900, left = 90, right = 20, top = 40, row_h = 28;
  const int height = top + row_h * static_cast<int>(rows.size()) + 30;
  std::string svg = header(width, height);
  svg += text(left, 20, "Lab events per patient; shaded band is the prediction window (red: label 1)");

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double y = top + row_h * static_cast<double>(i) + row_h / 2.0;
    Date lo = r.window.start, hi = r.window.end;
    if (!r.event_dates.empty()) {
      lo = std::min(lo, r.event_dates.front());
      hi = std::max(hi, r.event_dates.back());
    }
    const double span = std::max(1, hi - lo);
    auto x = [&](Date d) { return left + (width - left - right) * ((d - lo) / span); };

    svg += "<g class=\"patient\" data-id=\"" + escape(r.patient_id) + "\" data-label=\"" + std::to_string(r.label) +
           "\">\n";
    svg += text(left - 6, y + 4, r.patient_id, "end");
    svg += "<line x1=\"" + num(left) + "\" y1=\"" + num(y) + "\" x2=\"" + num(width - right) + "\" y2=\"" + num(y) +
           "\" stroke=\"#ccc\"/>\n";
    svg += "<rect class=\"window\" x=\"" + num(x(r.window.start)) + "\" y=\"" + num(y - 9) + "\" width=\"" +
           num(std::max(1.0, x(r.window.end) - x(r.window.start))) + "\" height=\"18\" fill=\"" +
           label_colour(r.label) + "\" fill-opacity=\"0.25\"/>\n";
    for (const auto& d : r.event_dates) {
      svg += "<circle cx=\"" + num(x(d)) + "\" cy=\"" + num(y) + "\" r=\"2.5\" fill=\"#333\"/>\n";
    }
    svg += "</g>\n";
  }
  return svg + "</svg>\n";
}

std::string render_roc_svg(const std::vector<RocPoint>& curve, double auc) {
  constexpr int size = 420, margin = 50;
  const double plot = size - 2 * margin;
  auto px = [&](double fpr) { return margin + plot * fpr; };
  auto py = [&](double tpr) { return size - margin - plot * tpr; };

  std::string svg = header(size, size);
  svg += text(size / 2.0, 24, "ROC (test set), AUC = " + num(auc), "middle");
  svg += "<rect x=\"" + num(margin) + "\" y=\"" + num(margin) + "\" width=\"" + num(plot) + "\" height=\"" +
         num(plot) + "\" fill=\"none\" stroke=\"#000\"/>\n";
  svg += "<line class=\"chance\" x1=\"" + num(px(0)) + "\" y1=\"" + num(py(0)) + "\" x2=\"" + num(px(1)) +
         "\" y2=\"" + num(py(1)) + "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  svg += "<polyline class=\"roc\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (i) svg += ' ';
    svg += num(px(curve[i].fpr)) + "," + num(py(curve[i].tpr));
  }
  svg += "\"/>\n";
  svg += text(size / 2.0, size - 15, "false positive rate", "middle");
  svg += "<text x=\"15\" y=\"" + num(size / 2.0) + "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " +
         num(size / 2.0) + ")\">true positive rate</text>\n";
  for (double t : {0.0, 0.5, 1.0}) {
    svg += text(px(t), size - margin + 14, num(t).substr(0, 3), "middle");
    svg += text(margin - 6, py(t) + 4, num(t).substr(0, 3), "end");
  }
  return svg + "</svg>\n";
}

std::string render_confusion_svg(const ConfusionMatrix& m) {
  constexpr int width = 420, height = 360, left = 110, top = 70, cell = 140;
  std::string svg = header(width, height);
  svg += text(width / 2.0, 24, "Confusion matrix at threshold " + num(m.threshold), "middle");
  svg += text(left + cell, top - 20, "predicted", "middle");
  svg += text(left + cell / 2.0, top - 5, "1", "middle");
  svg += text(left + 1.5 * cell, top - 5, "0", "middle");
  svg += text(left - 40, top + cell / 2.0, "actual 1", "end");
  svg += text(left - 40, top + 1.5 * cell, "actual 0", "end");

  struct Cell {
    const char* name;
    long n;
    CellCi ci;
    int col, row;
  };
  const Cell cells[] = {{"tp", m.tp, m.tp_ci, 0, 0},
                        {"fn", m.fn, m.fn_ci, 1, 0},
                        {"fp", m.fp, m.fp_ci, 0, 1},
                        {"tn", m.tn, m.tn_ci, 1, 1}};
  const double total = std::max<long>(1, m.total());
  for (const auto& c : cells) {
    const double x = left + cell * c.col, y = top + cell * c.row;
    svg += "<g class=\"cell\" data-cell=\"" + std::string(c.name) + "\">\n";
    svg += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + std::to_string(cell) + "\" height=\"" +
           std::to_string(cell) + "\" fill=\"#2471a3\" fill-opacity=\"" + num(0.1 + 0.8 * c.n / total) +
           "\" stroke=\"#000\"/>\n";
    svg += text(x + cell / 2.0, y + cell / 2.0, std::string(c.name) + " = " + std::to_string(c.n), "middle");
    svg += text(x + cell / 2.0, y + cell / 2.0 + 18,
                "95% CI [" + std::to_string(c.ci.lo) + ", " + std::to_string(c.ci.hi) + "]", "middle");
    svg += "</g>\n";
  }
  return svg + "</svg>\n";
}

std::string render_tsne_svg(const std::vector<std::string>& ids, const Eigen::MatrixXd& coords,
                            const std::vector<int>& labels) {
  constexpr int size = 480, margin = 30;
  std::string svg = header(size, size + 20);
  svg += text(size / 2.0, 20, "t-SNE of GRU embeddings (test set; red: label 1)", "middle");
  if (coords.rows() == 0) return svg + "</svg>\n";
  const double x0 = coords.col(0).minCoeff(), x1 = coords.col(0).maxCoeff();
  const double y0 = coords.col(1).minCoeff(), y1 = coords.col(1).maxCoeff();
  const double scale = (size - 2 * margin) / std::max({x1 - x0, y1 - y0, 1e-12});
  for (Eigen::Index i = 0; i < coords.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    svg += "<circle class=\"point\" data-id=\"" + escape(ids[k]) + "\" cx=\"" +
           num(margin + (coords(i, 0) - x0) * scale) + "\" cy=\"" + num(20 + margin + (y1 - coords(i, 1)) * scale) +
           "\" r=\"3\" fill=\"" + label_colour(labels[k]) + "\" fill-opacity=\"0.7\"/>\n";
  }
  return svg + "</svg>\n";
}

}  // namespace labseq
