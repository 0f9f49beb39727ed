#include "sariwatch/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sariwatch/errors.hpp"

namespace sariwatch {

namespace {

using ordered_json = nlohmann::ordered_json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  const auto count = static_cast<std::size_t>(std::min<std::size_t>(workers, n));
  if (count <= 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) fn(k);
    });
  }
}

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
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

EventSet detect(const TimeSeries& y, const RunConfig& config) {
  const EventSet an = adaptive_normalization(y, config.detect_p, config.fence_k);
  const EventSet cf = change_finder(y, config.detect_p, config.window, config.fence_k);
  return consolidate_events(an, cf);
}

}  // namespace

void RunConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw DomainError(std::string("invalid configuration: ") + what);
  };
  require(p >= 1, "p must be positive");
  require(s >= 1, "s must be positive");
  require(!t || *t >= 1, "t must be positive");
  require(!horizon || *horizon >= 1, "horizon must be positive");
  require(!t || !horizon || *t < *horizon, "t must be smaller than the horizon");
  require(noise_cycles >= 1, "noise cycles must be positive");
  require(detect_p >= 1, "detection p must be positive");
  require(window >= 2, "regression window must be at least 2");
  require(fence_k > 0, "fence multiplier must be positive");
  require(reps >= 1, "reps must be positive");
  require(level > 0 && level < 1, "level must be in (0, 1)");
  require(alpha > 0 && alpha < 1, "alpha must be in (0, 1)");
}

std::uint64_t derive_seed(std::uint64_t global, const std::string& state, Measure measure) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  const auto mix = [&](std::string_view text) {
    for (unsigned char c : text) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
  };
  mix(state);
  mix("\x1f");
  mix(to_string(measure));
  return splitmix64(global ^ h);
}

std::vector<SeriesLabel> selected_series(const StateDataset& data, const RunConfig& config) {
  std::vector<Measure> measures;
  if (config.measure != MeasureSelection::deaths) measures.push_back(Measure::cases);
  if (config.measure != MeasureSelection::cases) measures.push_back(Measure::deaths);

  std::vector<SeriesLabel> out;
  if (config.state != "all" && !data.states.count(config.state)) {
    throw LookupError("state " + config.state + " not present in dataset");
  }
  for (const auto& [state, _] : data.states) {
    if (config.state != "all" && state != config.state) continue;
    for (Measure m : measures) out.push_back({state, m});
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<EventRow> EventReport::rows(const StateDataset& data) const {
  std::vector<EventRow> out;
  for (const auto& se : series) {
    if (!se.error.empty()) continue;
    for (Index i : se.events.anomalies)
      out.push_back({se.label.region, se.label.measure, "anomaly", i, data.week_at(i)});
    for (Index i : se.events.change_points)
      out.push_back({se.label.region, se.label.measure, "change_point", i, data.week_at(i)});
  }
  return out;
}

bool EventReport::partial() const {
  return std::any_of(series.begin(), series.end(),
                     [](const SeriesEvents& s) { return !s.error.empty(); });
}

EventReport cmd_events(const StateDataset& data, const RunConfig& config) {
  const auto labels = selected_series(data, config);
  EventReport report;
  report.series.resize(labels.size());
  parallel_for(labels.size(), config.workers, [&](std::size_t k) {
    SeriesEvents& se = report.series[k];
    se.label = labels[k];
    try {
      se.events = detect(data.states.at(se.label.region).observed(se.label.measure), config);
    } catch (const std::exception& e) {
      se.error = e.what();
    }
  });
  return report;
}

std::optional<Index> first_change_point_in_year(const StateDataset& data, const EventSet& events,
                                                int year) {
  for (Index i : events.change_points) {
    if (data.week_at(i).year == year) return i;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

std::vector<SeriesEstimate> run_estimates(const StateDataset& data, const ReferenceTotals* reference,
                                          const RunConfig& config) {
  config.validate();
  const auto labels = selected_series(data, config);
  std::vector<SeriesEstimate> out(labels.size());

  parallel_for(labels.size(), config.workers, [&](std::size_t k) {
    SeriesEstimate& est = out[k];
    const SeriesLabel& label = labels[k];
    est.row.state = label.region;
    est.row.measure = label.measure;
    if (reference) est.row.reference_total = reference->get(label.region, label.measure);
    try {
      const StateSeries& ss = data.states.at(label.region);
      const TimeSeries& full = ss.observed(label.measure);

      if (!config.t || !config.plots.empty()) {
        try {
          est.events = detect(full, config);
        } catch (const std::exception&) {
          if (!config.t) throw;
        }
      }

      const Index horizon = config.horizon.value_or(data.length());
      if (horizon > data.length()) {
        throw BoundsError("horizon " + std::to_string(horizon) + " beyond the " +
                          std::to_string(data.length()) + " weeks in the data");
      }
      Index t = 0;
      if (config.t) {
        t = *config.t;
      } else {
        const auto cp = first_change_point_in_year(data, *est.events, config.auto_year);
        if (!cp) throw DomainError("no change point in " + std::to_string(config.auto_year));
        t = *cp;
      }
      if (t >= horizon) {
        throw BoundsError("novelty start " + std::to_string(t) + " not before horizon " +
                          std::to_string(horizon));
      }

      NoveltyConfig nc;
      nc.p = config.p;
      nc.s = config.s;
      nc.t = t;
      nc.noise_cycles = config.noise_cycles;
      nc.bootstrap = {config.reps, config.level, derive_seed(config.seed, label.region, label.measure)};
      nc.gates = {config.alpha, config.alternative, config.noise_form, config.s};
      est.result = estimate_novelty(full.head(horizon), ss.reported(label.measure).head(horizon), nc);

      const NoveltyResult& r = *est.result;
      est.row.cum_novelty = r.cum_novelty;
      est.row.cum_reported = r.cum_reported;
      est.row.rate = r.rate();
      if (est.row.rate) est.row.margin = r.margin;
      est.row.gate = r.withheld == Withheld::none ? "ok" : std::string(withheld_code(r.withheld));
    } catch (const std::exception& e) {
      est.row.gate = "error";
      est.row.error = e.what();
      est.result.reset();
    }
  });
  return out;
}

std::vector<ReportRow> cmd_estimate(const StateDataset& data, const ReferenceTotals* reference,
                                    const RunConfig& config) {
  std::vector<ReportRow> rows;
  for (auto& est : run_estimates(data, reference, config)) rows.push_back(std::move(est.row));
  return rows;
}

// ---------------------------------------------------------------------------

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "state,measure,cum_novelty,cum_reported,rate,margin,gate,reference_total\n";
  for (const auto& r : rows) {
    out << r.state << ',' << to_string(r.measure) << ',';
    if (r.cum_novelty) out << std::llround(*r.cum_novelty);
    out << ',';
    if (r.cum_reported) out << std::llround(*r.cum_reported);
    out << ',';
    if (r.rate) out << fixed3(*r.rate);
    out << ',';
    if (r.rate && r.margin) out << fixed3(*r.margin);
    out << ',' << r.gate << ',';
    if (r.reference_total) out << *r.reference_total;
    out << '\n';
  }
}

void write_report_json(std::ostream& out, const std::vector<ReportRow>& rows) {
  const auto opt = [](const auto& v) -> ordered_json {
    return v ? ordered_json(*v) : ordered_json(nullptr);
  };
  ordered_json doc = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json o;
    o["state"] = r.state;
    o["measure"] = to_string(r.measure);
    o["cum_novelty"] = opt(r.cum_novelty);
    o["cum_reported"] = opt(r.cum_reported);
    o["rate"] = opt(r.rate);
    o["margin"] = r.rate ? opt(r.margin) : ordered_json(nullptr);
    o["gate"] = r.gate;
    o["reference_total"] = opt(r.reference_total);
    doc.push_back(std::move(o));
  }
  out << doc.dump(2) << '\n';
}

std::vector<ReportRow> read_report_json(std::istream& in) {
  const ordered_json doc = ordered_json::parse(in);
  if (!doc.is_array()) throw DomainError("report JSON must be an array");
  const auto get = [](const ordered_json& o, const char* key) -> std::optional<double> {
    if (!o.contains(key) || o.at(key).is_null()) return std::nullopt;
    return o.at(key).get<double>();
  };
  std::vector<ReportRow> rows;
  for (const auto& o : doc) {
    ReportRow r;
    r.state = o.at("state").get<std::string>();
    const auto m = parse_measure(o.at("measure").get<std::string>());
    if (!m) throw DomainError("report JSON: unknown measure");
    r.measure = *m;
    r.cum_novelty = get(o, "cum_novelty");
    r.cum_reported = get(o, "cum_reported");
    r.rate = get(o, "rate");
    r.margin = get(o, "margin");
    r.gate = o.at("gate").get<std::string>();
    if (o.contains("reference_total") && !o.at("reference_total").is_null())
      r.reference_total = o.at("reference_total").get<long>();
    rows.push_back(std::move(r));
  }
  return rows;
}

void cmd_report(std::ostream& out, const std::vector<ReportRow>& rows, OutputFormat format) {
  if (format == OutputFormat::csv) {
    write_report_csv(out, rows);
  } else {
    write_report_json(out, rows);
  }
}

void write_events_csv(std::ostream& out, const std::vector<EventRow>& rows) {
  out << "state,measure,kind,index,year,week\n";
  for (const auto& r : rows) {
    out << r.state << ',' << to_string(r.measure) << ',' << r.kind << ',' << r.index << ','
        << r.week.year << ',' << r.week.week << '\n';
  }
}

void write_events_json(std::ostream& out, const std::vector<EventRow>& rows) {
  ordered_json doc = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json o;
    o["state"] = r.state;
    o["measure"] = to_string(r.measure);
    o["kind"] = r.kind;
    o["index"] = r.index;
    o["year"] = r.week.year;
    o["week"] = r.week.week;
    doc.push_back(std::move(o));
  }
  out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

std::string render_svg(const TimeSeries& y, const EventSet* events, const PlotOverlay* overlay,
                       const std::string& title) {
  constexpr double width = 960, height = 360, left = 60, right = 20, top = 30, bottom = 30;
  const Index n = y.size();
  double ymax = n > 0 ? y.values().maxCoeff() : 1.0;
  if (overlay) {
    for (double b : overlay->baseline) ymax = std::max(ymax, b);
  }
  ymax = std::max(ymax, 1.0) * 1.05;

  const auto px = [&](Index i) {
    return n > 1 ? left + (width - left - right) * static_cast<double>(i - 1) / static_cast<double>(n - 1)
                 : left;
  };
  const auto py = [&](double v) { return top + (height - top - bottom) * (1.0 - v / ymax); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">"
      << xml_escape(title) << "</text>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right
      << "\" y2=\"" << height - bottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << height - bottom << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << left - 6 << "\" y=\"" << top + 4
      << "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" << fmt2(ymax)
      << "</text>\n";

  if (events) {
    for (Index i : events->change_points) {
      svg << "<line class=\"change-point\" x1=\"" << fmt2(px(i)) << "\" y1=\"" << top << "\" x2=\""
          << fmt2(px(i)) << "\" y2=\"" << height - bottom
          << "\" stroke=\"gray\" stroke-dasharray=\"2 3\"/>\n";
    }
  }

  svg << "<polyline class=\"observed\" fill=\"none\" stroke=\"black\" stroke-width=\"1\" points=\"";
  for (Index i = 1; i <= n; ++i) svg << (i > 1 ? " " : "") << fmt2(px(i)) << ',' << fmt2(py(y[i]));
  svg << "\"/>\n";

  if (overlay && !overlay->baseline.empty()) {
    svg << "<polyline class=\"baseline\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < overlay->baseline.size(); ++k) {
      const Index i = overlay->range.first + static_cast<Index>(k);
      svg << (k > 0 ? " " : "") << fmt2(px(i)) << ',' << fmt2(py(overlay->baseline[k]));
    }
    svg << "\"/>\n";
  }

  if (events) {
    for (Index i : events->anomalies) {
      svg << "<circle class=\"anomaly\" cx=\"" << fmt2(px(i)) << "\" cy=\"" << fmt2(py(y[i]))
          << "\" r=\"3\" fill=\"red\"/>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_svg_file(const std::filesystem::path& dir, const SeriesLabel& label,
                    const std::string& svg) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const auto path = dir / (label.region + "_" + std::string(to_string(label.measure)) + ".svg");
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << svg)) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace sariwatch
