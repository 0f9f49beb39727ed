#include "sariwatch/ingestion.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>

#include "sariwatch/errors.hpp"

namespace sariwatch {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool one_of(const std::string& value, std::initializer_list<const char*> options) {
  const std::string v = lower(trim(value));
  return std::any_of(options.begin(), options.end(), [&](const char* o) { return v == o; });
}

bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::optional<int> parse_int(const std::string& text) {
  const std::string t = trim(text);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
  return value;
}

// Counts may be exported as "12" or "12.0"; anything non-integral is rejected.
std::optional<long> parse_count(const std::string& text) {
  const std::string t = trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
  if (!std::isfinite(value) || value != std::floor(value)) return std::nullopt;
  return static_cast<long>(value);
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot read " + path.string());
  return in;
}

}  // namespace

std::vector<std::string> split_delimited(const std::string& line, char delimiter) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        field += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delimiter) {
      out.push_back(field);
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

char detect_delimiter(const std::string& header) {
  std::size_t commas = 0;
  std::size_t semicolons = 0;
  bool quoted = false;
  for (char c : header) {
    if (c == '"') quoted = !quoted;
    if (quoted) continue;
    commas += c == ',';
    semicolons += c == ';';
  }
  return semicolons > commas ? ';' : ',';
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& ColumnMapping::required_fields() {
  static const std::vector<std::string> fields{"year",  "week",       "state",
                                               "measure", "total", "sars_cov_2"};
  return fields;
}

const std::vector<std::string>& ColumnMapping::filter_fields() {
  static const std::vector<std::string> fields{"region_type", "gender", "scale"};
  return fields;
}

ColumnMapping ColumnMapping::canonical() {
  ColumnMapping m;
  for (const auto& f : required_fields()) m.source_[f] = f;
  for (const auto& f : filter_fields()) m.source_[f] = f;
  return m;
}

ColumnMapping ColumnMapping::parse(std::istream& in) {
  ColumnMapping m = canonical();
  std::string line;
  std::size_t number = 0;
  while (read_line(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw IngestionError("mapping line " + std::to_string(number) + ": expected key=value");
    }
    const std::string key = lower(trim(t.substr(0, eq)));
    const std::string value = trim(t.substr(eq + 1));
    if (!m.source_.count(key)) {
      throw IngestionError("mapping line " + std::to_string(number) + ": unknown field '" + key + "'");
    }
    if (value.empty()) {
      throw IngestionError("mapping line " + std::to_string(number) + ": empty source for '" + key + "'");
    }
    m.source_[key] = value;
    m.explicit_.insert(key);
  }
  return m;
}

ColumnMapping ColumnMapping::from_file(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse(in);
}

const std::string& ColumnMapping::source(const std::string& field) const {
  const auto it = source_.find(field);
  if (it == source_.end()) throw LookupError("no mapping for field '" + field + "'");
  return it->second;
}

// ---------------------------------------------------------------------------

RawLoad load_raw(const std::filesystem::path& path, const ColumnMapping& mapping) {
  auto in = open_or_throw(path);
  return parse_raw(in, mapping, path.string());
}

RawLoad parse_raw(std::istream& in, const ColumnMapping& mapping, const std::string& source_name) {
  RawLoad out;
  std::string header;
  if (!read_line(in, header)) throw IngestionError(source_name + ": missing header row");
  if (header.rfind("\xEF\xBB\xBF", 0) == 0) header.erase(0, 3);
  out.delimiter = detect_delimiter(header);

  std::vector<std::string> columns = split_delimited(header, out.delimiter);
  for (auto& c : columns) c = trim(c);

  // Where each field comes from: a column position or a constant.
  struct Source {
    std::optional<std::size_t> column;
    std::optional<std::string> constant;
  };
  std::map<std::string, Source> sources;
  std::vector<std::string> missing;
  const auto resolve = [&](const std::string& field, bool required) {
    const std::string& src = mapping.source(field);
    if (!src.empty() && src.front() == '@') {
      sources[field].constant = src.substr(1);
      return;
    }
    const auto it = std::find(columns.begin(), columns.end(), src);
    if (it != columns.end()) {
      sources[field].column = static_cast<std::size_t>(it - columns.begin());
    } else if (required || mapping.is_explicit(field)) {
      missing.push_back(src + " (for " + field + ")");
    }
  };
  for (const auto& f : ColumnMapping::required_fields()) resolve(f, true);
  for (const auto& f : ColumnMapping::filter_fields()) resolve(f, false);
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw IngestionError(source_name + ": missing mapped column(s): " + list);
  }

  std::string line;
  std::size_t number = 1;
  while (read_line(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto fields = split_delimited(line, out.delimiter);
    const auto reject = [&](std::string reason) {
      out.rejects.push_back({number, std::move(reason), line});
    };
    if (fields.size() != columns.size()) {
      reject("column count mismatch");
      continue;
    }
    const auto value = [&](const std::string& field) -> std::optional<std::string> {
      const auto it = sources.find(field);
      if (it == sources.end()) return std::nullopt;
      if (it->second.constant) return *it->second.constant;
      return trim(fields[*it->second.column]);
    };

    RawRecord r;
    const auto year = parse_int(*value("year"));
    const auto week = parse_int(*value("week"));
    const auto total = parse_count(*value("total"));
    const auto covid = parse_count(*value("sars_cov_2"));
    const auto measure = parse_measure(*value("measure"));
    if (!year) { reject("invalid number in year"); continue; }
    if (!week) { reject("invalid number in week"); continue; }
    if (!total) { reject("invalid number in total"); continue; }
    if (!covid) { reject("invalid number in sars_cov_2"); continue; }
    if (!measure) { reject("unknown measure"); continue; }
    if (*week < 1 || *week > 53) { reject("week out of range"); continue; }
    if (*total < 0 || *covid < 0) { reject("negative count"); continue; }
    if (*covid > *total) { reject("reported exceeds total"); continue; }
    r.year = *year;
    r.week = *week;
    r.total = *total;
    r.sars_cov_2 = *covid;
    r.measure = *measure;
    r.region = *value("state");
    if (r.region.empty()) { reject("missing state"); continue; }
    if (auto v = value("region_type")) r.region_type = *v;
    if (auto v = value("gender")) r.gender = *v;
    if (auto v = value("scale")) r.scale = *v;
    out.records.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<RawRecord> filter_records(std::span<const RawRecord> records, FilterReport* report) {
  FilterReport local;
  FilterReport& rep = report ? *report : local;
  rep.input += records.size();
  std::vector<RawRecord> kept;
  for (const auto& r : records) {
    if (!one_of(r.region_type, {"state", "estado", "uf"})) {
      ++rep.excluded_region_type;
    } else if (!one_of(r.gender, {"total"})) {
      ++rep.excluded_gender;
    } else if (!one_of(r.scale, {"cases", "casos"})) {
      ++rep.excluded_scale;
    } else {
      kept.push_back(r);
    }
  }
  rep.kept += kept.size();
  return kept;
}

EpiWeek StateDataset::week_at(Index i) const {
  if (i < 1 || i > length()) {
    throw LookupError("week index " + std::to_string(i) + " outside 1.." + std::to_string(length()));
  }
  return weeks[static_cast<std::size_t>(i - 1)];
}

Index week_index(const StateDataset& data, int year, int week) {
  const EpiWeek key{year, week};
  const auto it = std::lower_bound(data.weeks.begin(), data.weeks.end(), key);
  if (it == data.weeks.end() || *it != key) {
    throw LookupError("week " + std::to_string(year) + "-" + std::to_string(week) +
                      " not present in dataset");
  }
  return static_cast<Index>(it - data.weeks.begin()) + 1;
}

StateDataset filter_and_split(std::span<const RawRecord> records, EpiWeek origin) {
  StateDataset data;
  std::vector<RawRecord> kept = filter_records(records, &data.filter);
  std::erase_if(kept, [&](const RawRecord& r) {
    const bool before = EpiWeek{r.year, r.week} < origin;
    data.filter.excluded_before_origin += before;
    return before;
  });
  data.filter.kept = kept.size();

  std::set<EpiWeek> weeks;
  std::set<std::string> states;
  std::set<std::tuple<std::string, int, int, int>> seen;
  for (const auto& r : kept) {
    if (!seen.emplace(r.region, r.year, r.week, static_cast<int>(r.measure)).second) {
      throw IngestionError("duplicate record for state " + r.region + ", " + std::to_string(r.year) +
                           "-" + std::to_string(r.week) + ", " + std::string(to_string(r.measure)));
    }
    weeks.insert({r.year, r.week});
    states.insert(r.region);
  }
  data.weeks.assign(weeks.begin(), weeks.end());
  const Index n = data.length();

  struct Columns {
    Eigen::VectorXd total[2];
    Eigen::VectorXd covid[2];
    std::vector<bool> present[2];
  };
  std::map<std::string, Columns> cols;
  for (const auto& s : states) {
    Columns& c = cols[s];
    for (int m = 0; m < 2; ++m) {
      c.total[m] = Eigen::VectorXd::Zero(n);
      c.covid[m] = Eigen::VectorXd::Zero(n);
      c.present[m].assign(static_cast<std::size_t>(n), false);
    }
  }
  for (const auto& r : kept) {
    Columns& c = cols[r.region];
    const int m = static_cast<int>(r.measure);
    const Index k = week_index(data, r.year, r.week) - 1;
    c.total[m](k) = static_cast<double>(r.total);
    c.covid[m](k) = static_cast<double>(r.sars_cov_2);
    c.present[m][static_cast<std::size_t>(k)] = true;
  }

  for (auto& [state, c] : cols) {
    for (int m = 0; m < 2; ++m) {
      for (Index k = 0; k < n; ++k) {
        if (!c.present[m][static_cast<std::size_t>(k)])
          data.imputations.push_back({state, static_cast<Measure>(m), data.weeks[static_cast<std::size_t>(k)]});
      }
    }
    const SeriesLabel lc{state, Measure::cases};
    const SeriesLabel ld{state, Measure::deaths};
    data.states.emplace(state, StateSeries{TimeSeries(lc, c.total[0]), TimeSeries(lc, c.covid[0]),
                                           TimeSeries(ld, c.total[1]), TimeSeries(ld, c.covid[1])});
  }
  return data;
}

void write_canonical(std::ostream& out, const StateDataset& data) {
  out << "year,week,state,measure,total,sars_cov_2\n";
  for (const auto& [state, series] : data.states) {
    for (Measure m : {Measure::cases, Measure::deaths}) {
      const auto& total = series.observed(m);
      const auto& covid = series.reported(m);
      for (Index i = 1; i <= data.length(); ++i) {
        const EpiWeek w = data.week_at(i);
        out << w.year << ',' << w.week << ',' << state << ',' << to_string(m) << ','
            << std::llround(total[i]) << ',' << std::llround(covid[i]) << '\n';
      }
    }
  }
}

void write_rejects(std::ostream& out, std::span<const Reject> rejects) {
  for (const auto& r : rejects) out << r.line << '\t' << r.reason << '\t' << r.text << '\n';
}

void write_imputations(std::ostream& out, std::span<const Imputation> imputations) {
  for (const auto& i : imputations) {
    out << i.state << '\t' << to_string(i.measure) << '\t' << i.week.year << '\t' << i.week.week
        << "\tzero-filled\n";
  }
}

void write_filter_report(std::ostream& out, const FilterReport& r) {
  out << "input\t" << r.input << "\nkept\t" << r.kept << "\nexcluded_region_type\t"
      << r.excluded_region_type << "\nexcluded_gender\t" << r.excluded_gender
      << "\nexcluded_scale\t" << r.excluded_scale << "\nexcluded_before_origin\t"
      << r.excluded_before_origin << '\n';
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& brazilian_state_codes() {
  static const std::vector<std::string> codes{"AC", "AL", "AM", "AP", "BA", "CE", "DF", "ES", "GO",
                                              "MA", "MG", "MS", "MT", "PA", "PB", "PE", "PI", "PR",
                                              "RJ", "RN", "RO", "RR", "RS", "SC", "SE", "SP", "TO"};
  return codes;
}

std::optional<long> ReferenceTotals::get(const std::string& state, Measure measure) const {
  const auto it = by_state.find(state);
  if (it == by_state.end()) return std::nullopt;
  return measure == Measure::cases ? it->second.cases : it->second.deaths;
}

ReferenceTotals load_reference(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_reference(in, path.string());
}

ReferenceTotals parse_reference(std::istream& in, const std::string& source_name) {
  ReferenceTotals out;
  std::string header;
  while (read_line(in, header) && trim(header).empty()) {
  }
  if (trim(header).empty()) return out;
  if (header.rfind("\xEF\xBB\xBF", 0) == 0) header.erase(0, 3);

  const char delim = detect_delimiter(header);
  auto columns = split_delimited(header, delim);
  for (auto& c : columns) c = lower(trim(c));
  const auto find = [&](const char* name) {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw IngestionError(source_name + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
  };
  const std::size_t c_state = find("state");
  const std::size_t c_cases = find("cases");
  const std::size_t c_deaths = find("deaths");

  const auto& known = brazilian_state_codes();
  std::vector<std::string> unknown;
  std::string line;
  std::size_t number = 1;
  while (read_line(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto fields = split_delimited(line, delim);
    const auto where = source_name + " line " + std::to_string(number);
    if (fields.size() != columns.size()) throw IngestionError(where + ": column count mismatch");
    const std::string state = trim(fields[c_state]);
    const auto cases = parse_count(fields[c_cases]);
    const auto deaths = parse_count(fields[c_deaths]);
    if (!cases || !deaths) throw IngestionError(where + ": invalid count");
    if (*cases < 0 || *deaths < 0) throw IngestionError(where + ": negative count");
    if (std::find(known.begin(), known.end(), state) == known.end()) {
      unknown.push_back(state);
      continue;
    }
    if (!out.by_state.emplace(state, ReferenceTotal{*cases, *deaths}).second) {
      throw IngestionError(where + ": duplicate state " + state);
    }
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw IngestionError(source_name + ": unknown state code(s): " + list);
  }
  return out;
}

}  // namespace sariwatch
