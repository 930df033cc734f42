#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vtac/error.hpp"
#include "vtac/matrix.hpp"
#include "vtac/text.hpp"

namespace vtac {

/// One row per alarm event: `record_id,<feature names...>,label`.
struct FeatureTable {
  std::vector<std::string> record_ids;
  std::vector<std::string> names;
  Matrix features;
  std::vector<int> labels;
};

inline std::string format_feature_csv(const FeatureTable& t, std::string_view comment = {}) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + '\n';
  out += "record_id";
  for (const auto& n : t.names) out += ',' + n;
  out += ",label\n";
  for (std::size_t r = 0; r < t.features.rows; ++r) {
    out += t.record_ids[r];
    for (double v : t.features.row(r)) out += ',' + text::format_double(v);
    out += ',' + std::to_string(t.labels[r]) + '\n';
  }
  return out;
}

inline FeatureTable parse_feature_csv(std::string_view csv) {
  FeatureTable t;
  bool have_header = false;
  std::size_t line_no = 0;
  for (auto raw : text::lines(csv)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = text::split(line, ',');
    if (!have_header) {
      if (fields.size() < 3 || text::trim(fields.front()) != "record_id" || text::trim(fields.back()) != "label") {
        fail(ErrorCode::MalformedCsv, "feature CSV header must be record_id,<features...>,label");
      }
      for (std::size_t i = 1; i + 1 < fields.size(); ++i) t.names.emplace_back(text::trim(fields[i]));
      t.features.cols = t.names.size();
      have_header = true;
      continue;
    }
    if (fields.size() != t.names.size() + 2) {
      fail(ErrorCode::MalformedCsv, "feature CSV line " + std::to_string(line_no) + " has " +
                                        std::to_string(fields.size()) + " fields");
    }
    t.record_ids.emplace_back(text::trim(fields.front()));
    for (std::size_t i = 1; i + 1 < fields.size(); ++i) {
      const auto v = text::parse_number<double>(fields[i]);
      if (!v) fail(ErrorCode::MalformedCsv, "non-numeric feature on line " + std::to_string(line_no));
      t.features.data.push_back(*v);
    }
    const auto y = text::parse_number<int>(fields.back());
    if (!y || (*y != 0 && *y != 1)) fail(ErrorCode::MalformedCsv, "label must be 0 or 1 on line " + std::to_string(line_no));
    t.labels.push_back(*y);
    ++t.features.rows;
  }
  if (!have_header) fail(ErrorCode::MalformedCsv, "feature CSV has no header row");
  return t;
}

}  // namespace vtac
