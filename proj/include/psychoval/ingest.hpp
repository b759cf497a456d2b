#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "psychoval/core_stats.hpp"
#include "psychoval/errors.hpp"
#include "psychoval/matrix.hpp"

namespace psychoval {

using Response = std::optional<int>;

/// Respondents x items table of bounded Likert responses. Immutable once
/// constructed; the constructor enforces bounds, rectangularity and unique ids.
class SurveyDataset {
 public:
  SurveyDataset() = default;

  SurveyDataset(std::vector<std::string> items, std::vector<std::string> respondents,
                std::vector<Response> cells, int likert_min, int likert_max,
                std::string id_column = "id")
      : items_(std::move(items)),
        respondents_(std::move(respondents)),
        cells_(std::move(cells)),
        likert_min_(likert_min),
        likert_max_(likert_max),
        id_column_(std::move(id_column)) {
    if (likert_min_ >= likert_max_) {
      throw Error(Errc::InvalidConfig, "Likert bounds need min < max");
    }
    if (cells_.size() != items_.size() * respondents_.size()) {
      throw Error(Errc::LengthMismatch, "cell count does not match respondents x items");
    }
    check_unique(items_, "item");
    check_unique(respondents_, "respondent");
    for (std::size_t r = 0; r < n(); ++r)
      for (std::size_t c = 0; c < p(); ++c) {
        const Response v = at(r, c);
        if (v && (*v < likert_min_ || *v > likert_max_)) throw RangeError(r + 1, items_[c], *v);
      }
  }

  [[nodiscard]] std::size_t n() const noexcept { return respondents_.size(); }
  [[nodiscard]] std::size_t p() const noexcept { return items_.size(); }
  [[nodiscard]] const std::vector<std::string>& items() const noexcept { return items_; }
  [[nodiscard]] const std::vector<std::string>& respondents() const noexcept {
    return respondents_;
  }
  [[nodiscard]] int likert_min() const noexcept { return likert_min_; }
  [[nodiscard]] int likert_max() const noexcept { return likert_max_; }
  [[nodiscard]] const std::string& id_column() const noexcept { return id_column_; }

  [[nodiscard]] Response at(std::size_t respondent, std::size_t item) const noexcept {
    return cells_[respondent * items_.size() + item];
  }

  [[nodiscard]] std::optional<std::size_t> item_index(std::string_view id) const {
    const auto it = std::find(items_.begin(), items_.end(), id);
    if (it == items_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - items_.begin());
  }

  [[nodiscard]] std::size_t missing_count() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(cells_.begin(), cells_.end(), [](const Response& v) { return !v; }));
  }

  /// Responses as doubles; missing cells become NaN.
  [[nodiscard]] Matrix to_matrix() const {
    Matrix m(n(), p());
    for (std::size_t r = 0; r < n(); ++r)
      for (std::size_t c = 0; c < p(); ++c) {
        const Response v = at(r, c);
        m(r, c) = v ? static_cast<double>(*v) : std::numeric_limits<double>::quiet_NaN();
      }
    return m;
  }

  /// Column subset in the requested order. Unknown ids raise UnknownItem.
  [[nodiscard]] SurveyDataset select_items(const std::vector<std::string>& ids) const {
    std::vector<std::size_t> idx;
    for (const auto& id : ids) {
      const auto j = item_index(id);
      if (!j) throw Error(Errc::UnknownItem, "item '" + id + "' not in dataset");
      idx.push_back(*j);
    }
    std::vector<Response> cells;
    cells.reserve(n() * idx.size());
    for (std::size_t r = 0; r < n(); ++r)
      for (std::size_t j : idx) cells.push_back(at(r, j));
    return {ids, respondents_, std::move(cells), likert_min_, likert_max_, id_column_};
  }

  /// Respondent subset in the requested order. Unknown ids raise UnknownItem.
  [[nodiscard]] SurveyDataset select_respondents(const std::vector<std::string>& ids) const {
    std::unordered_map<std::string_view, std::size_t> row_of;
    for (std::size_t r = 0; r < n(); ++r) row_of.emplace(respondents_[r], r);
    std::vector<Response> cells;
    cells.reserve(ids.size() * p());
    for (const auto& id : ids) {
      const auto it = row_of.find(id);
      if (it == row_of.end()) throw Error(Errc::UnknownItem, "respondent '" + id + "'");
      for (std::size_t c = 0; c < p(); ++c) cells.push_back(at(it->second, c));
    }
    return {items_, ids, std::move(cells), likert_min_, likert_max_, id_column_};
  }

  bool operator==(const SurveyDataset&) const = default;

 private:
  static void check_unique(const std::vector<std::string>& ids, const char* what) {
    std::set<std::string_view> seen;
    for (const auto& id : ids)
      if (!seen.insert(id).second) {
        throw Error(Errc::DuplicateId, std::string(what) + " id '" + id + "' appears twice");
      }
  }

  std::vector<std::string> items_;
  std::vector<std::string> respondents_;
  std::vector<Response> cells_;
  int likert_min_ = 1;
  int likert_max_ = 7;
  std::string id_column_ = "id";
};

struct CsvOptions {
  int likert_min = 1;
  int likert_max = 7;
  std::string missing_token = "NA";
  /// Items stored as likert_min + likert_max - v.
  std::vector<std::string> reverse_items;
};

namespace detail {

// Splits one CSV record, honouring double-quoted fields. Returns false at EOF.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields,
                            std::size_t& line_no) {
  fields.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  ++line_no;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0;; ++i) {
    if (i == line.size()) {
      if (quoted) {
        // Quoted field spans a newline.
        std::string next;
        if (!std::getline(in, next)) throw Error(Errc::ParseError, "unterminated quoted field");
        ++line_no;
        field += '\n';
        line = std::move(next);
        i = static_cast<std::size_t>(-1);
        continue;
      }
      break;
    }
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\r' && i + 1 == line.size()) {
      // CRLF line ending.
    } else {
      field += ch;
    }
  }
  fields.push_back(std::move(field));
  return true;
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace detail

/// Parses the survey CSV dialect: header row (respondent id column, then item
/// ids), then one row per respondent of integer cells or the missing token.
[[nodiscard]] inline SurveyDataset parse_csv(std::istream& in, const CsvOptions& opt = {}) {
  std::vector<std::string> fields;
  std::size_t line_no = 0;
  if (!detail::read_csv_record(in, fields, line_no)) {
    throw Error(Errc::EmptyDataset, "CSV input has no header row");
  }
  if (!fields.empty() && fields[0].starts_with("\xEF\xBB\xBF")) fields[0].erase(0, 3);
  if (fields.size() < 2) throw Error(Errc::ParseError, "header needs an id column and items");
  const std::string id_column = fields[0];
  std::vector<std::string> items(fields.begin() + 1, fields.end());

  std::vector<bool> reversed(items.size(), false);
  for (const auto& id : opt.reverse_items) {
    const auto it = std::find(items.begin(), items.end(), id);
    if (it == items.end()) throw Error(Errc::UnknownItem, "reverse-coded item '" + id + "'");
    reversed[static_cast<std::size_t>(it - items.begin())] = true;
  }

  std::vector<std::string> respondents;
  std::vector<Response> cells;
  while (detail::read_csv_record(in, fields, line_no)) {
    if (fields.size() == 1 && detail::trim(fields[0]).empty()) continue;
    if (fields.size() != items.size() + 1) {
      throw Error(Errc::ParseError, "line " + std::to_string(line_no) + " has " +
                                        std::to_string(fields.size()) + " cells, expected " +
                                        std::to_string(items.size() + 1));
    }
    respondents.push_back(fields[0]);
    for (std::size_t c = 0; c < items.size(); ++c) {
      const std::string& raw = fields[c + 1];
      const std::string_view cell = detail::trim(raw);
      if (cell == opt.missing_token || cell.empty()) {
        cells.emplace_back(std::nullopt);
        continue;
      }
      int v = 0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw ParseError(line_no, items[c], raw);
      }
      if (v < opt.likert_min || v > opt.likert_max) throw RangeError(line_no, items[c], v);
      if (reversed[c]) v = opt.likert_min + opt.likert_max - v;
      cells.emplace_back(v);
    }
  }
  return {std::move(items), std::move(respondents), std::move(cells), opt.likert_min,
          opt.likert_max, id_column};
}

[[nodiscard]] inline SurveyDataset load_csv(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return parse_csv(in, opt);
}

/// Serializes back to the ingest dialect.
[[nodiscard]] inline std::string to_csv(const SurveyDataset& ds,
                                        const std::string& missing_token = "NA") {
  std::ostringstream out;
  out << detail::csv_quote(ds.id_column());
  for (const auto& item : ds.items()) out << ',' << detail::csv_quote(item);
  out << '\n';
  for (std::size_t r = 0; r < ds.n(); ++r) {
    out << detail::csv_quote(ds.respondents()[r]);
    for (std::size_t c = 0; c < ds.p(); ++c) {
      const Response v = ds.at(r, c);
      out << ',' << (v ? std::to_string(*v) : missing_token);
    }
    out << '\n';
  }
  return out.str();
}

struct ScaleDefinition {
  std::string name;
  std::vector<std::string> item_ids;
  bool operator==(const ScaleDefinition&) const = default;
};

/// Sidecar scale file: one `name: id1,id2,...` per line; blank lines and
/// lines starting with '#' are ignored.
[[nodiscard]] inline std::vector<ScaleDefinition> parse_scales(std::istream& in) {
  std::vector<ScaleDefinition> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto colon = t.find(':');
    if (colon == std::string_view::npos) {
      throw Error(Errc::ParseError, "scale file line " + std::to_string(line_no) + " lacks ':'");
    }
    ScaleDefinition s;
    s.name = std::string(detail::trim(t.substr(0, colon)));
    std::string_view rest = t.substr(colon + 1);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const std::string_view id = detail::trim(rest.substr(0, comma));
      if (!id.empty()) s.item_ids.emplace_back(id);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (s.name.empty() || s.item_ids.empty()) {
      throw Error(Errc::ParseError, "scale file line " + std::to_string(line_no) +
                                        " needs a name and at least one item");
    }
    out.push_back(std::move(s));
  }
  return out;
}

[[nodiscard]] inline std::vector<ScaleDefinition> load_scales(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return parse_scales(in);
}

/// Checks scale items exist in the dataset and are not repeated.
inline void validate_scale(const SurveyDataset& ds, const ScaleDefinition& scale) {
  if (scale.item_ids.empty()) throw Error(Errc::TooFewItems, "scale '" + scale.name + "' is empty");
  std::set<std::string> seen;
  for (const auto& id : scale.item_ids) {
    if (!ds.item_index(id)) {
      throw Error(Errc::UnknownItem, "scale '" + scale.name + "' names unknown item '" + id + "'");
    }
    if (!seen.insert(id).second) {
      throw Error(Errc::DuplicateId, "scale '" + scale.name + "' repeats item '" + id + "'");
    }
  }
}

enum class MissingPolicy { Listwise, Pairwise, Strict };

[[nodiscard]] inline std::string_view to_string(MissingPolicy p) noexcept {
  switch (p) {
    case MissingPolicy::Listwise: return "listwise";
    case MissingPolicy::Pairwise: return "pairwise";
    case MissingPolicy::Strict: return "strict";
  }
  return "listwise";
}

[[nodiscard]] inline MissingPolicy parse_missing_policy(std::string_view s) {
  if (s == "listwise") return MissingPolicy::Listwise;
  if (s == "pairwise") return MissingPolicy::Pairwise;
  if (s == "strict") return MissingPolicy::Strict;
  throw Error(Errc::InvalidConfig, "unknown missing-data policy '" + std::string(s) + "'");
}

/// Numeric view of a dataset after the missing-data policy. Under pairwise
/// the data keeps NaN cells and `effective_n` is the smallest per-pair count.
struct AnalysisView {
  Matrix data;
  std::vector<std::string> items;
  std::vector<std::string> respondents;
  MissingPolicy policy = MissingPolicy::Listwise;
  std::size_t total_n = 0;
  std::size_t effective_n = 0;
  std::vector<std::vector<std::size_t>> pair_n;
};

[[nodiscard]] inline AnalysisView complete_cases(const SurveyDataset& ds,
                                                 MissingPolicy policy = MissingPolicy::Listwise) {
  AnalysisView view;
  view.items = ds.items();
  view.policy = policy;
  view.total_n = ds.n();

  switch (policy) {
    case MissingPolicy::Strict:
      for (std::size_t r = 0; r < ds.n(); ++r)
        for (std::size_t c = 0; c < ds.p(); ++c)
          if (!ds.at(r, c)) {
            throw Error(Errc::MissingDataError, "respondent '" + ds.respondents()[r] +
                                                    "' is missing item '" + ds.items()[c] + "'");
          }
      [[fallthrough]];
    case MissingPolicy::Listwise: {
      std::vector<std::size_t> keep;
      for (std::size_t r = 0; r < ds.n(); ++r) {
        bool complete = true;
        for (std::size_t c = 0; c < ds.p() && complete; ++c) complete = ds.at(r, c).has_value();
        if (complete) keep.push_back(r);
      }
      if (keep.empty()) throw Error(Errc::EmptyAfterDeletion, "no complete respondents");
      view.data = Matrix(keep.size(), ds.p());
      for (std::size_t k = 0; k < keep.size(); ++k) {
        view.respondents.push_back(ds.respondents()[keep[k]]);
        for (std::size_t c = 0; c < ds.p(); ++c) view.data(k, c) = *ds.at(keep[k], c);
      }
      view.effective_n = keep.size();
      view.pair_n.assign(ds.p(), std::vector<std::size_t>(ds.p(), keep.size()));
      break;
    }
    case MissingPolicy::Pairwise: {
      view.data = ds.to_matrix();
      view.respondents = ds.respondents();
      view.pair_n = pairwise_counts(view.data);
      std::size_t smallest = ds.n();
      for (std::size_t i = 0; i < ds.p(); ++i)
        for (std::size_t j = 0; j < ds.p(); ++j) smallest = std::min(smallest, view.pair_n[i][j]);
      view.effective_n = smallest;
      break;
    }
  }
  return view;
}

[[nodiscard]] inline SymMatrix correlation_matrix(const AnalysisView& view) {
  return correlation_matrix(view.data, view.items);
}

struct ItemSummary {
  std::string item;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // n-1 denominator; NaN when n < 2
  int min = 0;
  int max = 0;
  std::size_t missing = 0;
};

[[nodiscard]] inline std::vector<ItemSummary> describe(const SurveyDataset& ds) {
  if (ds.n() == 0 || ds.p() == 0) throw Error(Errc::EmptyDataset, "dataset has no responses");
  std::vector<ItemSummary> out;
  out.reserve(ds.p());
  for (std::size_t c = 0; c < ds.p(); ++c) {
    ItemSummary s;
    s.item = ds.items()[c];
    std::vector<double> x;
    s.min = ds.likert_max();
    s.max = ds.likert_min();
    for (std::size_t r = 0; r < ds.n(); ++r) {
      const Response v = ds.at(r, c);
      if (!v) {
        ++s.missing;
        continue;
      }
      x.push_back(*v);
      s.min = std::min(s.min, *v);
      s.max = std::max(s.max, *v);
    }
    s.n = x.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (x.empty()) {
      s.mean = nan;
      s.min = s.max = 0;
    } else {
      s.mean = mean(x);
    }
    s.sd = x.size() >= 2 ? std::sqrt(sample_variance(x)) : nan;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace psychoval
