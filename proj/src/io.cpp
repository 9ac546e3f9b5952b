#include "nnpde/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "nnpde/errors.hpp"

namespace nnpde {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

}  // namespace

void write_train_header(std::ostream& out) {
  out << "epoch,j,rmse_rel,grad_norm,rate,clipped,best_rmse\n";
}

void write_train_record(std::ostream& out, const TrainRecord& r) {
  const auto old = out.precision(17);
  out << r.epoch << ',' << r.j << ',' << r.rmse_rel << ',' << r.grad_norm << ',' << r.rate << ','
      << (r.clipped ? 1 : 0) << ',' << r.best_rmse << '\n';
  out.precision(old);
}

std::vector<TrainRecord> read_train_log(std::istream& in) {
  const CsvTable t = read_csv(in);
  const char* names[] = {"epoch", "j", "rmse_rel", "grad_norm", "rate", "clipped", "best_rmse"};
  std::size_t idx[7];
  for (int k = 0; k < 7; ++k) idx[k] = t.column_index(names[k]);
  std::vector<TrainRecord> out;
  for (const auto& row : t.rows) {
    out.push_back({static_cast<int>(row[idx[0]]), row[idx[1]], row[idx[2]], row[idx[3]], row[idx[4]],
                   row[idx[5]] != 0.0, row[idx[6]]});
  }
  return out;
}

std::size_t CsvTable::column_index(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw DataError("CSV has no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const std::size_t k = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[k]);
  return out;
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV is empty");
  t.header = split(trim_cr(line));
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim_cr(line);
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw DataError("CSV line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(t.header.size()));
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
      } catch (const std::exception&) {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return read_csv(in);
}

void write_svg(std::ostream& out, const std::vector<PlotSeries>& series, const PlotOptions& o) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  const double left = 70, right = 150, top = 40, bottom = 50;
  const double pw = o.width - left - right, ph = o.height - top - bottom;

  auto ty = [&](double v) { return o.log_y ? std::log10(v) : v; };
  auto usable = [&](double xv, double yv) {
    return std::isfinite(xv) && std::isfinite(yv) && (!o.log_y || yv > 0.0);
  };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (!usable(s.x[k], s.y[k])) continue;
      x0 = std::min(x0, s.x[k]);
      x1 = std::max(x1, s.x[k]);
      y0 = std::min(y0, ty(s.y[k]));
      y1 = std::max(y1, ty(s.y[k]));
    }
  }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return top + (y1 - ty(v)) / (y1 - y0) * ph; };

  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << o.width
      << "\" height=\"" << o.height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << o.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape_xml(o.title) << "</text>\n"
      << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    const double gx = left + pw * k / 4.0, gy = top + ph - ph * k / 4.0;
    out << "<text x=\"" << gx << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\" font-size=\"11\">"
        << fmt(xv) << "</text>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << gy + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
        << (o.log_y ? fmt(std::pow(10.0, yv), 3) : fmt(yv)) << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << o.height - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">" << escape_xml(o.x_label) << "</text>\n"
      << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
      << "transform=\"rotate(-90 16 " << top + ph / 2 << ")\">"
      << escape_xml(o.y_label + (o.log_y ? " (log)" : "")) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = colors[si % 8];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t k = 0; k < std::min(s.x.size(), s.y.size()); ++k) {
      if (!usable(s.x[k], s.y[k])) continue;
      out << (first ? "" : " ") << fmt(px(s.x[k]), 7) << ',' << fmt(py(s.y[k]), 7);
      first = false;
    }
    out << "\"/>\n";
    const double ly = top + 14 + 18.0 * si;
    out << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 30
        << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << left + pw + 35 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
        << escape_xml(s.name) << "</text>\n";
  }
  out << "</svg>\n";
}

void plot_csv(const std::filesystem::path& csv, const std::string& x_column,
              const std::vector<std::string>& y_columns, const PlotOptions& options,
              const std::filesystem::path& svg) {
  const CsvTable t = read_csv(csv);
  std::vector<PlotSeries> series;
  const auto xs = t.column(x_column);
  for (const auto& c : y_columns) series.push_back({c, xs, t.column(c)});
  std::ofstream out(svg);
  if (!out) throw DataError("cannot write " + svg.string());
  write_svg(out, series, options);
}

nlohmann::json params_to_json(const NetParams& p) {
  nlohmann::json w = nlohmann::json::array();
  for (const auto& wi : p.w) w.push_back({wi[0], wi[1]});
  return {{"n", p.n},     {"beta", p.beta}, {"activation", to_string(p.activation)},
          {"c", p.c},     {"w_t", p.w_t},   {"w", w},
          {"eta", p.eta}, {"seed", p.seed}};
}

NetParams params_from_json(const nlohmann::json& j) {
  NetParams p;
  try {
    p.n = j.at("n").get<int>();
    p.beta = j.at("beta").get<double>();
    p.activation = activation_from_string(j.at("activation").get<std::string>());
    p.c = j.at("c").get<std::vector<double>>();
    p.w_t = j.at("w_t").get<std::vector<double>>();
    p.eta = j.at("eta").get<std::vector<double>>();
    for (const auto& wi : j.at("w")) p.w.push_back({wi.at(0).get<double>(), wi.at(1).get<double>()});
    p.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed parameter JSON: ") + e.what());
  }
  p.validate();
  return p;
}

void save_params(const std::filesystem::path& path, const NetParams& p) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << params_to_json(p).dump(2) << '\n';
}

NetParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return params_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("cannot parse ") + path.string() + ": " + e.what());
  }
}

}  // namespace nnpde
