#pragma once

// Loading surveillance exports into per-state weekly series.
//
// Input is delimited text (comma or semicolon, detected from the header) with
// a header row. A ColumnMapping names the source column for each canonical
// field; the canonical layout is
//
//   year,week,state,measure,total,sars_cov_2[,region_type,gender,scale]
//
// Malformed rows are collected as rejects rather than dropped silently.

#include <compare>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sariwatch/timeseries.hpp"

namespace sariwatch {

struct EpiWeek {
  int year = 0;
  int week = 0;

  auto operator<=>(const EpiWeek&) const = default;
};

struct RawRecord {
  int year = 0;
  int week = 0;
  std::string region;
  std::string region_type = "State";
  std::string gender = "Total";
  std::string scale = "Cases";
  long total = 0;
  long sars_cov_2 = 0;
  Measure measure = Measure::cases;
};

struct Reject {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string reason;
  std::string text;
};

/// Canonical field -> source column. A source written as "@value" is a
/// constant applied to every row (e.g. measure=@deaths for a deaths-only export).
class ColumnMapping {
 public:
  static const std::vector<std::string>& required_fields();
  static const std::vector<std::string>& filter_fields();

  /// Every field maps to the column of the same name.
  static ColumnMapping canonical();
  /// key=value lines; blank lines and '#' comments ignored. Unlisted fields
  /// keep their canonical column name.
  static ColumnMapping parse(std::istream& in);
  static ColumnMapping from_file(const std::filesystem::path& path);

  const std::string& source(const std::string& field) const;
  /// Filter columns that were not named explicitly may be absent from the input.
  bool is_explicit(const std::string& field) const { return explicit_.count(field) != 0; }

 private:
  std::map<std::string, std::string> source_;
  std::set<std::string> explicit_;
};

struct RawLoad {
  std::vector<RawRecord> records;
  std::vector<Reject> rejects;
  char delimiter = ',';
};

RawLoad load_raw(const std::filesystem::path& path, const ColumnMapping& mapping);
RawLoad parse_raw(std::istream& in, const ColumnMapping& mapping, const std::string& source_name);

struct FilterReport {
  std::size_t input = 0;
  std::size_t kept = 0;
  std::size_t excluded_region_type = 0;
  std::size_t excluded_gender = 0;
  std::size_t excluded_scale = 0;
  std::size_t excluded_before_origin = 0;
};

/// region_type = State, gender = Total, scale = Cases (case-insensitive,
/// Portuguese spellings accepted).
std::vector<RawRecord> filter_records(std::span<const RawRecord> records,
                                      FilterReport* report = nullptr);

struct Imputation {
  std::string state;
  Measure measure = Measure::cases;
  EpiWeek week;
};

struct StateSeries {
  TimeSeries cases;
  TimeSeries cases_reported;
  TimeSeries deaths;
  TimeSeries deaths_reported;

  const TimeSeries& observed(Measure m) const { return m == Measure::cases ? cases : deaths; }
  const TimeSeries& reported(Measure m) const {
    return m == Measure::cases ? cases_reported : deaths_reported;
  }
};

struct StateDataset {
  /// Sorted weeks present in the data; weeks[k] is global index k + 1.
  std::vector<EpiWeek> weeks;
  std::map<std::string, StateSeries> states;
  FilterReport filter;
  std::vector<Imputation> imputations;

  Index length() const { return static_cast<Index>(weeks.size()); }
  EpiWeek week_at(Index i) const;
};

/// 1-based position of (year, week) among the dataset's weeks.
Index week_index(const StateDataset& data, int year, int week);

/// Filters, pivots by (year, week) and zero-fills missing (state, week) cells.
/// Weeks before origin are dropped. Duplicate (state, year, week, measure)
/// keys are fatal.
StateDataset filter_and_split(std::span<const RawRecord> records, EpiWeek origin = {2009, 1});

/// Canonical CSV; re-ingesting it yields the same series.
void write_canonical(std::ostream& out, const StateDataset& data);
void write_rejects(std::ostream& out, std::span<const Reject> rejects);
void write_imputations(std::ostream& out, std::span<const Imputation> imputations);
void write_filter_report(std::ostream& out, const FilterReport& report);

const std::vector<std::string>& brazilian_state_codes();

struct ReferenceTotal {
  long cases = 0;
  long deaths = 0;
};

/// Confirmed cumulative counts per state, used as a comparison column.
struct ReferenceTotals {
  std::map<std::string, ReferenceTotal> by_state;

  bool empty() const { return by_state.empty(); }
  std::optional<long> get(const std::string& state, Measure measure) const;
};

/// Columns state, cases, deaths. An empty file gives empty totals.
ReferenceTotals load_reference(const std::filesystem::path& path);
ReferenceTotals parse_reference(std::istream& in, const std::string& source_name);

/// One delimited line split into fields; double quotes group and "" escapes.
std::vector<std::string> split_delimited(const std::string& line, char delimiter);
char detect_delimiter(const std::string& header);

}  // namespace sariwatch
