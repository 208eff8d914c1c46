#pragma once

// City time series, CSV ingestion and validation, the ozone-season filter and
// great-circle distances.
//
// City CSV columns:     date,deaths_u65,deaths_65_74,deaths_75p,ozone,temp,dewpoint
// Metadata CSV columns: city_id,lat,lon,region,population
// Dates are ISO (YYYY-MM-DD); an empty cell marks a missing value. Ozone is in
// ppb, temperature and dewpoint in degrees Fahrenheit.

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace monosurf {

using Date = std::chrono::sys_days;

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) noexcept { return v != v; }

inline constexpr int kAgeGroups = 3;
inline constexpr std::array<const char*, kAgeGroups> kAgeGroupLabels = {"u65", "65_74", "75p"};

Date parse_date(const std::string& iso);
std::string format_date(Date d);

struct DayRecord {
  Date date{};
  std::array<double, kAgeGroups> deaths{kMissing, kMissing, kMissing};
  double ozone = kMissing;
  double temp = kMissing;
  double dewpoint = kMissing;
  // Trailing running means; filled by prepare_city before season filtering.
  double temp_rm = kMissing;
  double dewpoint_rm = kMissing;

  bool complete() const noexcept;
};

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

struct CityData {
  std::string city_id;
  LatLon location;
  std::string region;
  std::int64_t population = 0;
  std::vector<DayRecord> days;

  std::vector<double> ozone() const;
  std::vector<double> temp() const;
};

struct IngestionReport {
  std::string city_id;
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;
  std::size_t rows_out_of_season = 0;
  /// Missing cells per column, in city-CSV column order (deaths x3, ozone, temp, dewpoint).
  std::array<std::size_t, 6> missing{};
};

struct LoadedCities {
  std::vector<CityData> cities;  // sorted by city_id
  std::vector<IngestionReport> reports;
};

struct SchemaConfig {
  std::string metadata_file = "metadata.csv";
  /// City file name pattern; "{id}" is replaced by the city id.
  std::string city_file_pattern = "{id}.csv";
};

/// Reads `<dir>/metadata.csv` and one CSV per listed city. Throws SchemaError
/// with file and line on any violation.
LoadedCities load_cities(const std::filesystem::path& dir, const SchemaConfig& schema = {});

void write_city_csv(const CityData& city, const std::filesystem::path& path);
void write_metadata_csv(std::span<const CityData> cities, const std::filesystem::path& path);

/// Validates ordering, counts and coordinates; throws SchemaError.
void validate_city(const CityData& city);

/// Keeps April 1 through October 31 of every year.
CityData ozone_season_filter(const CityData& city);
bool in_ozone_season(Date d);

/// Running means (window days, trailing) -> ozone-season filter -> complete-case
/// row drop. The report, when given, receives the drop counts.
CityData prepare_city(const CityData& raw, int running_window, IngestionReport* report = nullptr);

/// Haversine distance in km with Earth radius 6371.0088 km.
double great_circle_km(LatLon a, LatLon b);
inline constexpr double kEarthRadiusKm = 6371.0088;

Eigen::MatrixXd distance_matrix(std::span<const LatLon> points);

}  // namespace monosurf
