#include "monosurf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "monosurf/confounders.hpp"
#include "monosurf/error.hpp"
#include "monosurf/format.hpp"

namespace monosurf {
namespace {

using namespace std::chrono;

const std::array<const char*, 7> kCityColumns = {"date", "deaths_u65", "deaths_65_74", "deaths_75p",
                                                 "ozone", "temp", "dewpoint"};
const std::array<const char*, 5> kMetaColumns = {"city_id", "lat", "lon", "region", "population"};

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

[[noreturn]] void schema_fail(const std::filesystem::path& file, std::size_t line, const std::string& what) {
  throw SchemaError(file.string() + ":" + std::to_string(line) + ": " + what);
}

double parse_number(const std::string& cell, const std::filesystem::path& file, std::size_t line,
                    const std::string& column) {
  if (cell.empty()) return kMissing;
  double value = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    schema_fail(file, line, "column '" + column + "' has non-numeric value '" + cell + "'");
  }
  return value;
}

std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header,
                                                std::span<const char* const> required,
                                                const std::filesystem::path& file) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;
  for (const char* col : required) {
    if (!index.contains(col)) schema_fail(file, 1, std::string("missing required column '") + col + "'");
  }
  return index;
}

std::string city_file_name(const SchemaConfig& schema, const std::string& id) {
  std::string name = schema.city_file_pattern;
  const auto pos = name.find("{id}");
  if (pos != std::string::npos) name.replace(pos, 4, id);
  return name;
}

struct MetaRow {
  std::string id;
  LatLon location;
  std::string region;
  std::int64_t population = 0;
};

std::vector<MetaRow> read_metadata(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw SchemaError("cannot open metadata file " + file.string());
  std::string line;
  if (!std::getline(in, line)) schema_fail(file, 1, "empty metadata file");
  const auto idx = header_index(split_csv_line(line), kMetaColumns, file);
  std::vector<MetaRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    auto cell = [&](const char* name) -> const std::string& {
      const auto i = idx.at(name);
      if (i >= cells.size()) schema_fail(file, lineno, std::string("missing cell for '") + name + "'");
      return cells[i];
    };
    MetaRow row;
    row.id = cell("city_id");
    if (row.id.empty()) schema_fail(file, lineno, "empty city_id");
    row.location.lat = parse_number(cell("lat"), file, lineno, "lat");
    row.location.lon = parse_number(cell("lon"), file, lineno, "lon");
    row.region = cell("region");
    const double pop = parse_number(cell("population"), file, lineno, "population");
    if (is_missing(row.location.lat) || is_missing(row.location.lon)) schema_fail(file, lineno, "missing coordinates");
    if (row.location.lat < -90.0 || row.location.lat > 90.0) schema_fail(file, lineno, "lat outside [-90, 90]");
    if (row.location.lon < -180.0 || row.location.lon > 180.0) schema_fail(file, lineno, "lon outside [-180, 180]");
    if (is_missing(pop) || pop <= 0.0 || pop != std::floor(pop)) {
      schema_fail(file, lineno, "population must be a positive integer");
    }
    row.population = static_cast<std::int64_t>(pop);
    for (const auto& other : rows)
      if (other.id == row.id) schema_fail(file, lineno, "duplicate city_id '" + row.id + "'");
    rows.push_back(std::move(row));
  }
  return rows;
}

CityData read_city(const MetaRow& meta, const std::filesystem::path& file, IngestionReport& report) {
  std::ifstream in(file);
  if (!in) throw SchemaError("cannot open city file " + file.string());
  std::string line;
  if (!std::getline(in, line)) schema_fail(file, 1, "empty city file");
  const auto idx = header_index(split_csv_line(line), kCityColumns, file);

  CityData city;
  city.city_id = meta.id;
  city.location = meta.location;
  city.region = meta.region;
  city.population = meta.population;
  report.city_id = meta.id;

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    auto cell = [&](const char* name) -> const std::string& {
      const auto i = idx.at(name);
      if (i >= cells.size()) schema_fail(file, lineno, std::string("missing cell for '") + name + "'");
      return cells[i];
    };
    DayRecord rec;
    try {
      rec.date = parse_date(cell("date"));
    } catch (const SchemaError& e) {
      schema_fail(file, lineno, e.what());
    }
    for (int a = 0; a < kAgeGroups; ++a) {
      const char* col = kCityColumns[1 + a];
      const double v = parse_number(cell(col), file, lineno, col);
      if (!is_missing(v) && (v < 0.0 || v != std::floor(v))) {
        schema_fail(file, lineno, std::string("death count in '") + col + "' must be a non-negative integer");
      }
      rec.deaths[a] = v;
    }
    rec.ozone = parse_number(cell("ozone"), file, lineno, "ozone");
    rec.temp = parse_number(cell("temp"), file, lineno, "temp");
    rec.dewpoint = parse_number(cell("dewpoint"), file, lineno, "dewpoint");
    if (!city.days.empty()) {
      const Date prev = city.days.back().date;
      if (rec.date == prev) schema_fail(file, lineno, "duplicate date " + format_date(rec.date));
      if (rec.date < prev) schema_fail(file, lineno, "dates must be strictly increasing");
    }
    for (int a = 0; a < kAgeGroups; ++a) report.missing[a] += is_missing(rec.deaths[a]);
    report.missing[3] += is_missing(rec.ozone);
    report.missing[4] += is_missing(rec.temp);
    report.missing[5] += is_missing(rec.dewpoint);
    city.days.push_back(rec);
  }
  report.rows_read = city.days.size();
  return city;
}

std::string cell_or_empty(double v) { return is_missing(v) ? std::string() : format_number(v); }

}  // namespace

Date parse_date(const std::string& iso) {
  auto digits = [&](std::size_t from, std::size_t count) {
    for (std::size_t i = from; i < from + count; ++i)
      if (!std::isdigit(static_cast<unsigned char>(iso[i]))) return false;
    return true;
  };
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-' || !digits(0, 4) || !digits(5, 2) || !digits(8, 2)) {
    throw SchemaError("invalid date '" + iso + "' (expected YYYY-MM-DD)");
  }
  const int y = std::stoi(iso.substr(0, 4));
  const auto m = static_cast<unsigned>(std::stoi(iso.substr(5, 2)));
  const auto d = static_cast<unsigned>(std::stoi(iso.substr(8, 2)));
  const year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw SchemaError("invalid calendar date '" + iso + "'");
  return sys_days{ymd};
}

std::string format_date(Date d) {
  const year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

bool DayRecord::complete() const noexcept {
  for (double v : deaths)
    if (is_missing(v)) return false;
  return !is_missing(ozone) && !is_missing(temp) && !is_missing(dewpoint) && !is_missing(temp_rm) &&
         !is_missing(dewpoint_rm);
}

std::vector<double> CityData::ozone() const {
  std::vector<double> out;
  out.reserve(days.size());
  for (const auto& d : days) out.push_back(d.ozone);
  return out;
}

std::vector<double> CityData::temp() const {
  std::vector<double> out;
  out.reserve(days.size());
  for (const auto& d : days) out.push_back(d.temp);
  return out;
}

void validate_city(const CityData& city) {
  if (city.city_id.empty()) throw SchemaError("city with empty id");
  if (city.location.lat < -90.0 || city.location.lat > 90.0 || city.location.lon < -180.0 ||
      city.location.lon > 180.0) {
    throw SchemaError("city " + city.city_id + ": coordinates out of range");
  }
  if (city.population <= 0) throw SchemaError("city " + city.city_id + ": population must be positive");
  for (std::size_t t = 0; t < city.days.size(); ++t) {
    const auto& d = city.days[t];
    if (t > 0 && !(city.days[t - 1].date < d.date)) {
      throw SchemaError("city " + city.city_id + ": dates not strictly increasing at " + format_date(d.date));
    }
    for (double v : d.deaths)
      if (!is_missing(v) && (v < 0.0 || v != std::floor(v))) {
        throw SchemaError("city " + city.city_id + ": invalid death count on " + format_date(d.date));
      }
  }
}

LoadedCities load_cities(const std::filesystem::path& dir, const SchemaConfig& schema) {
  if (!std::filesystem::is_directory(dir)) throw SchemaError("data directory does not exist: " + dir.string());
  auto meta = read_metadata(dir / schema.metadata_file);
  std::sort(meta.begin(), meta.end(), [](const MetaRow& a, const MetaRow& b) { return a.id < b.id; });
  LoadedCities out;
  for (const auto& row : meta) {
    IngestionReport report;
    out.cities.push_back(read_city(row, dir / city_file_name(schema, row.id), report));
    out.reports.push_back(report);
  }
  return out;
}

void write_city_csv(const CityData& city, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot write " + path.string());
  out << "date,deaths_u65,deaths_65_74,deaths_75p,ozone,temp,dewpoint\n";
  for (const auto& d : city.days) {
    out << format_date(d.date);
    for (double v : d.deaths) out << ',' << cell_or_empty(v);
    out << ',' << cell_or_empty(d.ozone) << ',' << cell_or_empty(d.temp) << ',' << cell_or_empty(d.dewpoint) << '\n';
  }
}

void write_metadata_csv(std::span<const CityData> cities, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot write " + path.string());
  out << "city_id,lat,lon,region,population\n";
  for (const auto& c : cities) {
    out << c.city_id << ',' << format_number(c.location.lat) << ',' << format_number(c.location.lon) << ','
        << c.region << ',' << c.population << '\n';
  }
}

bool in_ozone_season(Date d) {
  const unsigned m = static_cast<unsigned>(year_month_day{d}.month());
  return m >= 4 && m <= 10;
}

CityData ozone_season_filter(const CityData& city) {
  CityData out = city;
  out.days.clear();
  for (const auto& d : city.days)
    if (in_ozone_season(d.date)) out.days.push_back(d);
  return out;
}

CityData prepare_city(const CityData& raw, int running_window, IngestionReport* report) {
  validate_city(raw);
  std::vector<Date> dates;
  std::vector<double> temp, dew;
  for (const auto& d : raw.days) {
    dates.push_back(d.date);
    temp.push_back(d.temp);
    dew.push_back(d.dewpoint);
  }
  const auto temp_rm = running_mean(dates, temp, running_window);
  const auto dew_rm = running_mean(dates, dew, running_window);

  CityData out = raw;
  out.days.clear();
  std::size_t out_of_season = 0, dropped = 0;
  for (std::size_t t = 0; t < raw.days.size(); ++t) {
    DayRecord rec = raw.days[t];
    rec.temp_rm = temp_rm[t];
    rec.dewpoint_rm = dew_rm[t];
    if (!in_ozone_season(rec.date)) {
      ++out_of_season;
      continue;
    }
    if (!rec.complete()) {
      ++dropped;
      continue;
    }
    out.days.push_back(rec);
  }
  if (report != nullptr) {
    report->city_id = raw.city_id;
    if (report->rows_read == 0) report->rows_read = raw.days.size();
    report->rows_out_of_season = out_of_season;
    report->rows_dropped = dropped;
  }
  return out;
}

double great_circle_km(LatLon a, LatLon b) {
  constexpr double to_rad = std::numbers::pi / 180.0;
  const double phi1 = a.lat * to_rad;
  const double phi2 = b.lat * to_rad;
  const double dphi = (b.lat - a.lat) * to_rad;
  const double dlambda = (b.lon - a.lon) * to_rad;
  const double s1 = std::sin(0.5 * dphi);
  const double s2 = std::sin(0.5 * dlambda);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

Eigen::MatrixXd distance_matrix(std::span<const LatLon> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = great_circle_km(points[i], points[j]);
  return d;
}

}  // namespace monosurf
