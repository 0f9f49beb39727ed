#pragma once

// Batch driver over a StateDataset plus the CSV / JSON / SVG serializers.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sariwatch/detection.hpp"
#include "sariwatch/ingestion.hpp"
#include "sariwatch/novelty.hpp"

namespace sariwatch {

enum class OutputFormat { csv, json };
enum class MeasureSelection { cases, deaths, both };

struct RunConfig {
  // inertial model
  Index p = 4;
  Index s = 52;
  std::optional<Index> t = 584;        // unset: earliest change point in auto_year
  std::optional<Index> horizon = 590;  // unset: last week of the data
  Index noise_cycles = 4;
  int auto_year = 2020;

  // detection
  Index detect_p = 30;
  Index window = 30;
  double fence_k = 3.0;

  // inference
  int reps = 1000;
  double level = 0.95;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  Alternative alternative = Alternative::two_sided;
  NoiseGateForm noise_form = NoiseGateForm::one_sample;

  // selection and output
  MeasureSelection measure = MeasureSelection::both;
  std::string state = "all";
  std::filesystem::path data;
  std::filesystem::path reference;
  std::filesystem::path mapping;
  std::filesystem::path plots;
  std::filesystem::path out;
  OutputFormat format = OutputFormat::csv;
  unsigned workers = 0;  // 0: hardware concurrency

  /// Throws DomainError naming the first invalid field.
  void validate() const;
};

/// Bootstrap seed for one analysis, fixed by (global seed, state, measure).
std::uint64_t derive_seed(std::uint64_t global, const std::string& state, Measure measure);

/// (state, measure) pairs selected by the config, ordered by state code then measure.
std::vector<SeriesLabel> selected_series(const StateDataset& data, const RunConfig& config);

// ---------------------------------------------------------------------------
// events
// ---------------------------------------------------------------------------

struct SeriesEvents {
  SeriesLabel label;
  EventSet events;     // Adaptive Normalization anomalies + Change Finder change points
  std::string error;   // non-empty when detection failed for this series
};

struct EventRow {
  std::string state;
  Measure measure = Measure::cases;
  std::string kind;  // "anomaly" or "change_point"
  Index index = 0;
  EpiWeek week;

  friend bool operator==(const EventRow&, const EventRow&) = default;
};

struct EventReport {
  std::vector<SeriesEvents> series;

  std::vector<EventRow> rows(const StateDataset& data) const;
  bool partial() const;
};

EventReport cmd_events(const StateDataset& data, const RunConfig& config);

/// Earliest change point falling in the given year, if any.
std::optional<Index> first_change_point_in_year(const StateDataset& data, const EventSet& events,
                                                int year);

// ---------------------------------------------------------------------------
// estimates
// ---------------------------------------------------------------------------

struct ReportRow {
  std::string state;
  Measure measure = Measure::cases;
  std::optional<double> cum_novelty;
  std::optional<double> cum_reported;
  std::optional<double> rate;
  std::optional<double> margin;
  /// "ok", a withheld code ("°", "•", "no-reported") or "error".
  std::string gate;
  std::optional<long> reference_total;
  /// Diagnostic for error rows; not serialized.
  std::string error;

  friend bool operator==(const ReportRow& a, const ReportRow& b) {
    return a.state == b.state && a.measure == b.measure && a.cum_novelty == b.cum_novelty &&
           a.cum_reported == b.cum_reported && a.rate == b.rate && a.margin == b.margin &&
           a.gate == b.gate && a.reference_total == b.reference_total;
  }
};

struct SeriesEstimate {
  ReportRow row;
  std::optional<NoveltyResult> result;
  std::optional<EventSet> events;  // filled when t is taken from detection
};

std::vector<SeriesEstimate> run_estimates(const StateDataset& data, const ReferenceTotals* reference,
                                          const RunConfig& config);

/// Rows ordered by state code then measure; failures are isolated to their row.
std::vector<ReportRow> cmd_estimate(const StateDataset& data, const ReferenceTotals* reference,
                                    const RunConfig& config);

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

/// Columns: state, measure, cum_novelty, cum_reported, rate, margin, gate, reference_total.
void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows);
/// Same field names, numbers unrounded, absent values as null.
void write_report_json(std::ostream& out, const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_report_json(std::istream& in);
void cmd_report(std::ostream& out, const std::vector<ReportRow>& rows, OutputFormat format);

void write_events_csv(std::ostream& out, const std::vector<EventRow>& rows);
void write_events_json(std::ostream& out, const std::vector<EventRow>& rows);

struct PlotOverlay {
  IndexRange range;              // novelty window
  std::vector<double> baseline;  // one value per index in range
};

/// Observed line, optional baseline overlay, red anomaly dots and dashed
/// change-point verticals.
std::string render_svg(const TimeSeries& y, const EventSet* events, const PlotOverlay* overlay,
                       const std::string& title);

/// Writes <dir>/<state>_<measure>.svg; throws std::runtime_error on an unwritable path.
void write_svg_file(const std::filesystem::path& dir, const SeriesLabel& label,
                    const std::string& svg);

}  // namespace sariwatch
