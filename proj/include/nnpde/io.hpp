#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnpde/shallow_net.hpp"

namespace nnpde {

struct TrainRecord {
  int epoch = 0;
  double j = 0.0;
  double rmse_rel = 0.0;
  double grad_norm = 0.0;
  double rate = 0.0;
  bool clipped = false;
  double best_rmse = 0.0;
};

// "epoch,j,rmse_rel,grad_norm,rate,clipped,best_rmse", 17 significant digits.
void write_train_header(std::ostream& out);
void write_train_record(std::ostream& out, const TrainRecord& r);
std::vector<TrainRecord> read_train_log(std::istream& in);

// Numeric CSV with one header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
};

struct PlotOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  int width = 720;
  int height = 440;
};

// SVG 1.1 line plot, one polyline per series. Non-positive values are dropped on a log axis.
void write_svg(std::ostream& out, const std::vector<PlotSeries>& series, const PlotOptions& options);

// Plots columns of a CSV file against one of its columns.
void plot_csv(const std::filesystem::path& csv, const std::string& x_column,
              const std::vector<std::string>& y_columns, const PlotOptions& options,
              const std::filesystem::path& svg);

nlohmann::json params_to_json(const NetParams& p);
NetParams params_from_json(const nlohmann::json& j);
void save_params(const std::filesystem::path& path, const NetParams& p);
NetParams load_params(const std::filesystem::path& path);

}  // namespace nnpde
