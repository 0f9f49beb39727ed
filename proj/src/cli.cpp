#include "sariwatch/cli.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "sariwatch/errors.hpp"
#include "sariwatch/report.hpp"

namespace sariwatch::cli {

namespace {

struct Options {
  RunConfig config;
  std::string t = "584";
  std::string horizon = "590";
  std::string origin = "2009-1";
  std::string measure = "both";
  std::string format = "csv";
  std::string alternative = "two-sided";
  std::string noise_gate = "one-sample";
  std::string audit;
};

std::optional<Index> parse_index(const std::string& text, const std::string& keyword,
                                 const char* flag) {
  if (text == keyword) return std::nullopt;
  Index value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DomainError(std::string("invalid value for ") + flag + ": '" + text + "'");
  }
  return value;
}

EpiWeek parse_origin(const std::string& text) {
  const auto dash = text.find('-');
  EpiWeek w;
  if (dash != std::string::npos) {
    const auto y = std::from_chars(text.data(), text.data() + dash, w.year);
    const auto k = std::from_chars(text.data() + dash + 1, text.data() + text.size(), w.week);
    if (y.ec == std::errc() && k.ec == std::errc() && k.ptr == text.data() + text.size()) return w;
  }
  throw DomainError("invalid value for --origin: '" + text + "' (expected YEAR-WEEK)");
}

void add_common(CLI::App& cmd, Options& o) {
  RunConfig& c = o.config;
  cmd.add_option("--data", c.data, "Surveillance CSV (comma or semicolon delimited)")->required();
  cmd.add_option("--mapping", c.mapping, "key=value file naming source columns");
  cmd.add_option("--origin", o.origin, "First week kept, YEAR-WEEK")->capture_default_str();
  cmd.add_option("--measure", o.measure, "cases|deaths|both")
      ->check(CLI::IsMember({"cases", "deaths", "both"}))
      ->capture_default_str();
  cmd.add_option("--state", c.state, "State code or 'all'")->capture_default_str();
  cmd.add_option("--detect-p", c.detect_p, "Averaging terms for the detectors")->capture_default_str();
  cmd.add_option("--window", c.window, "Change Finder regression window")->capture_default_str();
  cmd.add_option("--fence-k", c.fence_k, "Boxplot fence multiplier")->capture_default_str();
  cmd.add_option("--format", o.format, "csv|json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  cmd.add_option("--out", c.out, "Output file (default: stdout)");
  cmd.add_option("--plots", c.plots, "Directory for <state>_<measure>.svg plots");
  cmd.add_option("--audit", o.audit, "Directory for rejects / imputation / filter reports");
  cmd.add_option("--workers", c.workers, "Worker threads (0: all cores)")->capture_default_str();
}

void add_estimate(CLI::App& cmd, Options& o) {
  RunConfig& c = o.config;
  cmd.add_option("--reference", c.reference, "Reference cumulative totals (state,cases,deaths)");
  cmd.add_option("--p", c.p, "Seasonal predecessors in the baseline")->capture_default_str();
  cmd.add_option("--s", c.s, "Seasonal period in weeks")->capture_default_str();
  cmd.add_option("--t", o.t, "Novelty start index, or 'auto'")->capture_default_str();
  cmd.add_option("--horizon", o.horizon, "Last week index, or 'last'")->capture_default_str();
  cmd.add_option("--noise-cycles", c.noise_cycles, "Seasons of pre-novelty residuals")
      ->capture_default_str();
  cmd.add_option("--auto-year", c.auto_year, "Year searched by --t auto")->capture_default_str();
  cmd.add_option("--reps", c.reps, "Bootstrap resamples")->capture_default_str();
  cmd.add_option("--level", c.level, "Bootstrap confidence level")->capture_default_str();
  cmd.add_option("--alpha", c.alpha, "Significance level of both gates")->capture_default_str();
  cmd.add_option("--seed", c.seed, "Global bootstrap seed")->capture_default_str();
  cmd.add_option("--alternative", o.alternative, "two-sided|greater|less")
      ->check(CLI::IsMember({"two-sided", "greater", "less"}))
      ->capture_default_str();
  cmd.add_option("--noise-gate", o.noise_gate, "one-sample|paired")
      ->check(CLI::IsMember({"one-sample", "paired"}))
      ->capture_default_str();
}

void finish_config(Options& o) {
  RunConfig& c = o.config;
  c.t = parse_index(o.t, "auto", "--t");
  c.horizon = parse_index(o.horizon, "last", "--horizon");
  c.measure = o.measure == "cases"    ? MeasureSelection::cases
              : o.measure == "deaths" ? MeasureSelection::deaths
                                      : MeasureSelection::both;
  c.format = o.format == "json" ? OutputFormat::json : OutputFormat::csv;
  c.alternative = o.alternative == "greater" ? Alternative::greater
                  : o.alternative == "less"  ? Alternative::less
                                             : Alternative::two_sided;
  c.noise_form = o.noise_gate == "paired" ? NoiseGateForm::paired : NoiseGateForm::one_sample;
  c.validate();
}

void write_audit(const std::filesystem::path& dir, const RawLoad& raw, const StateDataset& data) {
  std::filesystem::create_directories(dir);
  const auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    return f;
  };
  auto rejects = open("rejects.tsv");
  write_rejects(rejects, raw.rejects);
  auto imputations = open("imputations.tsv");
  write_imputations(imputations, data.imputations);
  auto filter = open("filter.tsv");
  write_filter_report(filter, data.filter);
}

/// Writes to the file when given, stdout otherwise.
bool emit(const std::filesystem::path& path, const std::string& text, std::ostream& out,
          std::ostream& err) {
  if (path.empty()) {
    out << text;
    return true;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << text)) {
    err << "error: cannot write " << path.string() << '\n';
    return false;
  }
  return true;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rupture detection and under-reporting estimates for weekly surveillance series",
               "sariwatch"};
  app.require_subcommand(1);
  Options events_opts;
  Options estimate_opts;
  Options ingest_opts;
  auto* events = app.add_subcommand("events", "Detect anomalies and change points per series");
  auto* estimate = app.add_subcommand("estimate", "Novelty and under-reporting rates per series");
  auto* ingest = app.add_subcommand("ingest", "Normalize an export into the canonical CSV");
  add_common(*events, events_opts);
  add_common(*estimate, estimate_opts);
  add_estimate(*estimate, estimate_opts);
  add_common(*ingest, ingest_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? success : config_error;
  }

  Options& o = events->parsed() ? events_opts : estimate->parsed() ? estimate_opts : ingest_opts;
  RunConfig& config = o.config;
  EpiWeek origin;
  try {
    finish_config(o);
    origin = parse_origin(o.origin);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return config_error;
  }

  RawLoad raw;
  StateDataset data;
  ReferenceTotals reference;
  try {
    const ColumnMapping mapping =
        config.mapping.empty() ? ColumnMapping::canonical() : ColumnMapping::from_file(config.mapping);
    raw = load_raw(config.data, mapping);
    data = filter_and_split(raw.records, origin);
    if (!config.reference.empty()) reference = load_reference(config.reference);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return ingestion_error;
  }
  if (!raw.rejects.empty()) err << "warning: " << raw.rejects.size() << " row(s) rejected\n";
  if (!data.imputations.empty())
    err << "note: " << data.imputations.size() << " missing week(s) zero-filled\n";
  if (!o.audit.empty()) {
    try {
      write_audit(o.audit, raw, data);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return config_error;
    }
  }

  std::ostringstream buffer;
  bool partial_run = false;
  try {
    if (ingest->parsed()) {
      write_canonical(buffer, data);
    } else if (events->parsed()) {
      const EventReport report = cmd_events(data, config);
      const auto rows = report.rows(data);
      if (config.format == OutputFormat::csv) {
        write_events_csv(buffer, rows);
      } else {
        write_events_json(buffer, rows);
      }
      for (const auto& se : report.series) {
        if (!se.error.empty()) {
          err << "error: " << to_string(se.label) << ": " << se.error << '\n';
          continue;
        }
        if (!config.plots.empty()) {
          const TimeSeries& y = data.states.at(se.label.region).observed(se.label.measure);
          write_svg_file(config.plots, se.label, render_svg(y, &se.events, nullptr, to_string(se.label)));
        }
      }
      partial_run = report.partial();
    } else {
      if (config.t && *config.t > data.length()) {
        err << "error: t=" << *config.t << " beyond the " << data.length() << " weeks in the data\n";
        return config_error;
      }
      if (config.horizon && *config.horizon > data.length()) {
        err << "error: horizon " << *config.horizon << " beyond the " << data.length()
            << " weeks in the data\n";
        return config_error;
      }
      const auto estimates =
          run_estimates(data, config.reference.empty() ? nullptr : &reference, config);
      std::vector<ReportRow> rows;
      for (const auto& est : estimates) {
        rows.push_back(est.row);
        if (!est.row.error.empty()) {
          err << "error: " << est.row.state << '/' << to_string(est.row.measure) << ": "
              << est.row.error << '\n';
          partial_run = true;
        }
        if (!config.plots.empty()) {
          const SeriesLabel label{est.row.state, est.row.measure};
          const TimeSeries& y = data.states.at(label.region).observed(label.measure);
          std::optional<PlotOverlay> overlay;
          if (est.result) {
            overlay.emplace();
            overlay->range = {est.result->t, est.result->t + static_cast<Index>(est.result->weeks.size()) - 1};
            for (const auto& w : est.result->weeks) overlay->baseline.push_back(w.baseline);
          }
          write_svg_file(config.plots, label,
                         render_svg(y, est.events ? &*est.events : nullptr,
                                    overlay ? &*overlay : nullptr, to_string(label)));
        }
      }
      cmd_report(buffer, rows, config.format);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return config_error;
  }

  if (!emit(config.out, buffer.str(), out, err)) return config_error;
  return partial_run ? partial : success;
}

}  // namespace sariwatch::cli
