#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "railhaz/schemas.hpp"
#include "railhaz/timeparse.hpp"

namespace railhaz::ingest {

struct raw_stop {
  std::string spot_name;
  double spot_km = 0.0;
  std::optional<io::minutes_t> planned_arrival;
  std::optional<io::minutes_t> planned_departure;
  std::optional<io::minutes_t> actual_arrival;
  std::optional<io::minutes_t> actual_departure;
  bool imputed_arrival = false;
  bool imputed_departure = false;
  long source_line = 0;  // 1-based line in operations.csv
};

/** One (train number, departure date) run, stops sorted by spot_km. */
struct run {
  std::string train_number;
  std::string train_type;
  std::string date;
  std::vector<raw_stop> stops;

  std::string id() const { return train_number + "_" + date; }
};

enum class missing_class {
  departure_only = 1,
  arrival_only = 2,
  both = 3,
};

/** Missingness of the actual times at one spot; the origin has no arrival
    and the terminus no departure, so those fields never count as missing. */
std::optional<missing_class> classify_missing(raw_stop const& stop,
                                              bool first, bool last);

struct parse_result {
  std::vector<run> runs;
  std::vector<io::reject_row> rejects;
};

parse_result parse_operations(std::string const& path);

struct line_spot {
  std::string name;
  double km = 0.0;
  double easting = 0.0;
  double northing = 0.0;
};

/** line.csv keyed by spot name. */
std::map<std::string, line_spot> read_line_geometry(std::string const& path);

struct weather_grid {
  struct point {
    std::string id;
    double easting = 0.0;
    double northing = 0.0;
  };
  // Lexicographic (easting, northing) order; nearest-point ties resolve to
  // the lowest index.
  std::vector<point> points;
  std::map<std::pair<std::size_t, io::minutes_t>, std::array<double, 4>> values;

  std::size_t nearest(double easting, double northing) const;
  std::array<double, 4> const& at(std::size_t point_idx,
                                  io::minutes_t hour) const;
  bool in_bounds(double easting, double northing) const;
};

weather_grid read_weather(std::string const& path);

/** Forward LOCF pass; throws when the run cannot be imputed (missing first
    actual departure, incomplete planned times). */
run impute_locf(run r);

struct section_indicator {
  std::size_t start_stop = 0;
  std::size_t end_stop = 0;
  double start_km = 0.0;
  double stop_km = 0.0;
  bool primary_delay = false;
  int arrival_state = 1;
  bool imputed = false;
  int stratum = 1;
  double temperature_c = 0.0;
  double humidity_pct = 0.0;
  double snow_depth_cm = 0.0;
  int precip_cat = 0;
};

/** Delay indicators per section from a fully imputed run. */
std::vector<section_indicator> derive_indicators(run const& r);

void assign_strata(std::vector<section_indicator>& records);

/** Fills section covariates: nearest grid point per endpoint spot at its
    rounded hour, averaged across the two endpoints; precipitation averaged
    in mm, then categorized (0 iff exactly 0). */
void join_weather(std::vector<section_indicator>& records, run const& r,
                  std::map<std::string, line_spot> const& line,
                  weather_grid const& grid);

struct ingest_result {
  std::vector<io::section_row> sections;
  std::vector<io::panel_row> panel;
  std::vector<io::reject_row> rejects;
  std::size_t runs_parsed = 0;
  std::size_t runs_kept = 0;
};

ingest_result run_pipeline(std::string const& ops_path,
                           std::string const& line_path,
                           std::string const& weather_path);

}  // namespace railhaz::ingest
