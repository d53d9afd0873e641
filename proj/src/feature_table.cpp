#include "elqa/feature_table.hpp"

#include <fstream>
#include <sstream>

#include "elqa/error.hpp"
#include "elqa/text.hpp"

namespace elqa {

const std::vector<std::string>& feature_columns() {
  static const std::vector<std::string> kColumns = {"measurement_id", "mean",  "min",          "max",
                                                    "skewness",       "kurtosis_excess", "slope", "slope_stderr",
                                                    "capacitance_F"};
  return kColumns;
}

std::string features_csv(const std::vector<FeatureVector>& features) {
  std::string out = join_csv_record(feature_columns()) + "\n";
  for (const auto& f : features) {
    out += join_csv_record({f.measurement_id, format_double(f.mean), format_double(f.min), format_double(f.max),
                            format_double(f.skewness), format_double(f.kurtosis_excess), format_double(f.slope),
                            format_double(f.slope_stderr),
                            f.capacitance_F ? format_double(*f.capacitance_F) : std::string()});
    out += "\n";
  }
  return out;
}

std::vector<FeatureVector> read_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile(path.string());
  const std::string name = path.filename().string();
  auto fail = [&](std::size_t line, const std::string& what) {
    throw MalformedRow(name + ":" + std::to_string(line) + " (" + what + ")");
  };

  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) fail(1, "empty file");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split_csv_record(line);
  if (!header || *header != feature_columns()) fail(1, "unexpected header");

  std::vector<FeatureVector> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_record(line);
    if (!fields || fields->size() != feature_columns().size()) fail(line_no, "wrong field count");
    const auto& f = *fields;
    auto number = [&](std::size_t col) {
      const auto v = parse_double(f[col]);
      if (!v) fail(line_no, "bad number in " + feature_columns()[col]);
      return *v;
    };
    FeatureVector fv;
    fv.measurement_id = f[0];
    if (fv.measurement_id.empty()) fail(line_no, "empty measurement_id");
    fv.mean = number(1);
    fv.min = number(2);
    fv.max = number(3);
    fv.skewness = number(4);
    fv.kurtosis_excess = number(5);
    fv.slope = number(6);
    fv.slope_stderr = number(7);
    if (!f[8].empty()) fv.capacitance_F = number(8);
    out.push_back(std::move(fv));
  }
  return out;
}

PointMatrix feature_matrix(const std::vector<FeatureVector>& features) {
  bool with_capacitance = !features.empty();
  for (const auto& f : features) with_capacitance = with_capacitance && f.capacitance_F.has_value();
  std::vector<std::string> ids;
  std::vector<std::vector<double>> rows;
  for (const auto& f : features) {
    ids.push_back(f.measurement_id);
    rows.push_back({f.mean, f.min, f.max, f.skewness, f.kurtosis_excess, f.slope, f.slope_stderr});
    if (with_capacitance) rows.back().push_back(*f.capacitance_F);
  }
  return PointMatrix(std::move(ids), std::move(rows));
}

std::string labels_csv(const PointMatrix& m, const ClusterAssignment& assignment) {
  std::string out = "measurement_id,label\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out += csv_field(m.ids()[i]) + "," + std::to_string(assignment.labels[i]) + "\n";
  }
  return out;
}

}  // namespace elqa
