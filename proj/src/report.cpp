#include "sigat/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "sigat/error.hpp"
#include "sigat/format.hpp"

namespace sigat {

std::vector<EpochRecord> parse_metrics_csv(std::string_view text, const std::string& source) {
  std::vector<EpochRecord> records;
  std::size_t line_no = 0;
  std::size_t start = 0;
  bool header = true;
  while (start < text.size()) {
    std::size_t stop = text.find('\n', start);
    if (stop == std::string_view::npos) stop = text.size();
    std::string_view line = text.substr(start, stop - start);
    start = stop + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (header) {
      if (line != "epoch,train_loss,val_loss,val_acc") {
        fail(ErrorCode::kParse, source + ":1: expected header 'epoch,train_loss,val_loss,val_acc'");
      }
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t f = 0;
    while (true) {
      const std::size_t comma = line.find(',', f);
      fields.push_back(line.substr(f, comma == std::string_view::npos ? std::string_view::npos : comma - f));
      if (comma == std::string_view::npos) break;
      f = comma + 1;
    }
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    if (fields.size() != 4) fail(ErrorCode::kParse, where + "expected 4 fields");
    const auto epoch = parse_count(fields[0]);
    const auto train = parse_real(fields[1]);
    const auto val = parse_real(fields[2]);
    const auto acc = parse_real(fields[3]);
    if (!epoch || !train || !val || !acc) fail(ErrorCode::kParse, where + "malformed number");
    records.push_back({static_cast<std::size_t>(*epoch), *train, *val, *acc, 0.0});
  }
  if (header) fail(ErrorCode::kParse, source + ": empty metrics file");
  return records;
}

std::vector<double> nice_ticks(double lo, double hi, std::size_t target) {
  if (!(hi > lo)) {
    const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
    lo -= pad;
    hi += pad;
  }
  const double raw = (hi - lo) / static_cast<double>(std::max<std::size_t>(target, 1));
  const double magnitude = std::pow(10.0, std::floor(std::log10(raw)));
  const double residual = raw / magnitude;
  const double step = (residual <= 1.0 ? 1.0 : residual <= 2.0 ? 2.0 : residual <= 5.0 ? 5.0 : 10.0) * magnitude;
  std::vector<double> ticks;
  const double first = std::floor(lo / step) * step;
  const double last = std::ceil(hi / step) * step;
  for (double t = first; t <= last + step * 0.5; t += step) {
    ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  }
  return ticks;
}

namespace {

struct Panel {
  double left, top, width, height;
};

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(6) << v;
  return out.str();
}

struct SeriesSpec {
  const char* name;
  const char* color;
  double EpochRecord::*field;
};

void draw_panel(std::ostringstream& svg, const Panel& panel, const std::string& title,
                const std::vector<EpochRecord>& records, const std::vector<SeriesSpec>& series) {
  double y_lo = INFINITY;
  double y_hi = -INFINITY;
  for (const auto& s : series) {
    for (const auto& r : records) {
      y_lo = std::min(y_lo, r.*(s.field));
      y_hi = std::max(y_hi, r.*(s.field));
    }
  }
  double x_lo = static_cast<double>(records.front().epoch);
  double x_hi = static_cast<double>(records.back().epoch);
  const std::vector<double> yt = nice_ticks(y_lo, y_hi);
  const std::vector<double> xt = nice_ticks(x_lo, x_hi);
  y_lo = yt.front();
  y_hi = yt.back();
  x_lo = xt.front();
  x_hi = xt.back();
  auto px = [&](double x) { return panel.left + (x - x_lo) / (x_hi - x_lo) * panel.width; };
  auto py = [&](double y) { return panel.top + panel.height - (y - y_lo) / (y_hi - y_lo) * panel.height; };

  svg << "<g class=\"panel\">\n";
  svg << "<text x=\"" << fmt(panel.left) << "\" y=\"" << fmt(panel.top - 8) << "\" font-size=\"14\">" << title
      << "</text>\n";
  svg << "<rect x=\"" << fmt(panel.left) << "\" y=\"" << fmt(panel.top) << "\" width=\"" << fmt(panel.width)
      << "\" height=\"" << fmt(panel.height) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (double t : yt) {
    svg << "<line class=\"tick\" x1=\"" << fmt(panel.left - 4) << "\" y1=\"" << fmt(py(t)) << "\" x2=\""
        << fmt(panel.left) << "\" y2=\"" << fmt(py(t)) << "\" stroke=\"#444\"/>"
        << "<text x=\"" << fmt(panel.left - 6) << "\" y=\"" << fmt(py(t) + 4)
        << "\" font-size=\"10\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
  }
  for (double t : xt) {
    svg << "<line class=\"tick\" x1=\"" << fmt(px(t)) << "\" y1=\"" << fmt(panel.top + panel.height) << "\" x2=\""
        << fmt(px(t)) << "\" y2=\"" << fmt(panel.top + panel.height + 4) << "\" stroke=\"#444\"/>"
        << "<text x=\"" << fmt(px(t)) << "\" y=\"" << fmt(panel.top + panel.height + 16)
        << "\" font-size=\"10\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
  }
  double legend_y = panel.top + 14;
  for (const auto& s : series) {
    svg << "<polyline class=\"line " << s.name << "\" fill=\"none\" stroke=\"" << s.color << "\" points=\"";
    for (std::size_t i = 0; i < records.size(); ++i) {
      svg << (i ? " " : "") << fmt(px(static_cast<double>(records[i].epoch))) << ',' << fmt(py(records[i].*(s.field)));
    }
    svg << "\"/>\n";
    for (const auto& r : records) {
      svg << "<circle class=\"point " << s.name << "\" cx=\"" << fmt(px(static_cast<double>(r.epoch))) << "\" cy=\""
          << fmt(py(r.*(s.field))) << "\" r=\"2\" fill=\"" << s.color << "\"/>\n";
    }
    svg << "<text x=\"" << fmt(panel.left + panel.width - 90) << "\" y=\"" << fmt(legend_y) << "\" font-size=\"11\" fill=\""
        << s.color << "\">" << s.name << "</text>\n";
    legend_y += 14;
  }
  svg << "<text x=\"" << fmt(panel.left + panel.width / 2) << "\" y=\"" << fmt(panel.top + panel.height + 30)
      << "\" font-size=\"11\" text-anchor=\"middle\">epoch</text>\n";
  svg << "</g>\n";
}

}  // namespace

std::string render_svg(const std::vector<EpochRecord>& records) {
  if (records.empty()) fail(ErrorCode::kContract, "cannot render an empty metrics table");
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"600\" viewBox=\"0 0 720 600\">\n";
  svg << "<rect width=\"720\" height=\"600\" fill=\"white\"/>\n";
  draw_panel(svg, {70, 40, 620, 200}, "loss", records,
             {{"train_loss", "#1f77b4", &EpochRecord::train_loss}, {"val_loss", "#ff7f0e", &EpochRecord::val_loss}});
  draw_panel(svg, {70, 340, 620, 200}, "validation accuracy", records,
             {{"val_acc", "#2ca02c", &EpochRecord::val_acc}});
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace sigat
