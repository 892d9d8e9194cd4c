#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "fruitscan/error.hpp"
#include "fruitscan/pipeline.hpp"
#include "serialization.hpp"

namespace fruitscan {

namespace {

using nlohmann::json;

std::string percent(const std::optional<double>& value) {
  if (!value) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *value);
  return buf;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string feature_label(const std::vector<std::string>& features) {
  std::string out;
  for (const auto& f : features) {
    if (!out.empty()) out += '+';
    for (char c : f) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out.empty() ? "-" : out;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

json optional_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

std::string caption(const EvaluationReport& r) {
  return "Accuracy (%) per category, trained with " + std::to_string(r.train_per_class) +
         " images per category (split seed " + std::to_string(r.split_seed) + ")";
}

std::string footer(const EvaluationReport& r) {
  return "pooled accuracy " + percent(r.overall_accuracy) + "% over " +
         std::to_string(r.classified) + " classified of " + std::to_string(r.test_size) +
         " test images; ties " + std::to_string(r.ties) + "; skipped " +
         std::to_string(r.skipped.size());
}

std::string render_table(std::span<const EvaluationReport> reports) {
  const auto& classes = reports.front().classes;
  std::vector<std::string> header{"Features"};
  for (const auto& c : classes) header.push_back(capitalize(c));
  header.push_back("Average");

  std::vector<std::vector<std::string>> rows;
  for (const auto& r : reports) {
    std::vector<std::string> row{feature_label(r.features)};
    for (const auto& acc : r.per_class_accuracy) row.push_back(percent(acc));
    row.push_back(percent(r.average_accuracy));
    rows.push_back(std::move(row));
  }

  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = header[c].size();
    for (const auto& row : rows) widths[c] = std::max(widths[c], row[c].size());
  }
  const auto render_row = [&](const std::vector<std::string>& cells) {
    std::string line = pad_right(cells[0], widths[0]);
    for (std::size_t c = 1; c < cells.size(); ++c) line += "  " + pad_left(cells[c], widths[c]);
    return line + "\n";
  };

  std::string out = caption(reports.front()) + "\n";
  out += render_row(header);
  for (const auto& row : rows) out += render_row(row);
  for (const auto& r : reports) {
    out += (reports.size() > 1 ? feature_label(r.features) + ": " : std::string()) + footer(r) +
           "\n";
  }
  return out;
}

}  // namespace

ReportFormat parse_report_format(const std::string& text) {
  if (text == "json") return ReportFormat::Json;
  if (text == "csv") return ReportFormat::Csv;
  if (text == "table") return ReportFormat::Table;
  fail(ErrorKind::Parse, "unknown report format '" + text + "' (expected json, csv or table)");
}

std::string emit_report(const EvaluationReport& report, ReportFormat format) {
  require(report.classes.size() == report.confusion.size() &&
              report.classes.size() == report.per_class_accuracy.size(),
          "report: class count does not match confusion or accuracy rows");
  switch (format) {
    case ReportFormat::Json: {
      json skipped = json::array();
      for (const auto& s : report.skipped) {
        skipped.push_back({{"path", s.path.generic_string()}, {"reason", s.reason}});
      }
      json per_class = json::array();
      for (const auto& a : report.per_class_accuracy) per_class.push_back(optional_to_json(a));
      const json j = {
          {"classes", report.classes},
          {"confusion", report.confusion},
          {"per_class_accuracy", per_class},
          {"overall_accuracy", report.overall_accuracy},
          {"average_accuracy", optional_to_json(report.average_accuracy)},
          {"ties", report.ties},
          {"test_size", report.test_size},
          {"classified", report.classified},
          {"skipped", skipped},
          {"split", {{"train_per_class", report.train_per_class}, {"seed", report.split_seed}}},
          {"features", report.features},
          {"descriptor", descriptor_config_to_json(report.descriptor)},
      };
      return j.dump(2) + "\n";
    }
    case ReportFormat::Csv: {
      std::string out = "class,accuracy\n";
      for (std::size_t c = 0; c < report.classes.size(); ++c) {
        out += report.classes[c] + "," + percent(report.per_class_accuracy[c]) + "\n";
      }
      out += "average," + percent(report.average_accuracy) + "\n";
      return out;
    }
    case ReportFormat::Table:
      return render_table(std::span(&report, 1));
  }
  fail(ErrorKind::Precondition, "unknown report format");
}

EvaluationReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    EvaluationReport r;
    r.classes = j.at("classes").get<std::vector<std::string>>();
    r.confusion = j.at("confusion").get<std::vector<std::vector<std::size_t>>>();
    for (const auto& a : j.at("per_class_accuracy")) r.per_class_accuracy.push_back(optional_from_json(a));
    r.overall_accuracy = j.at("overall_accuracy").get<double>();
    r.average_accuracy = optional_from_json(j.at("average_accuracy"));
    r.ties = j.at("ties").get<std::size_t>();
    r.test_size = j.at("test_size").get<std::size_t>();
    r.classified = j.at("classified").get<std::size_t>();
    for (const auto& s : j.at("skipped")) {
      r.skipped.push_back({s.at("path").get<std::string>(), s.at("reason").get<std::string>()});
    }
    r.train_per_class = j.at("split").at("train_per_class").get<std::size_t>();
    r.split_seed = j.at("split").at("seed").get<std::uint64_t>();
    r.features = j.at("features").get<std::vector<std::string>>();
    r.descriptor = descriptor_config_from_json(j.at("descriptor"));
    return r;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed report: ") + e.what());
  }
}

std::string emit_comparison_table(std::span<const EvaluationReport> reports) {
  require(!reports.empty(), "comparison table: no reports");
  for (const auto& r : reports) {
    require(r.classes == reports.front().classes, "comparison table: reports differ in classes");
  }
  return render_table(reports);
}

}  // namespace fruitscan
