#pragma once

#include <string>
#include <vector>

#include "railhaz/cox.hpp"
#include "railhaz/ctmc.hpp"

namespace railhaz::io {

/** One (departure spot, arrival spot) interval of a run, as written to
    sections.csv. Distances are km from the line origin. */
struct section_row {
  std::string train_id;
  int stratum = 1;  // event order number
  double start_km = 0.0;
  double stop_km = 0.0;
  bool primary_delay = false;
  int arrival_state = 1;  // 1 punctual, 2 delayed
  double temperature_c = 0.0;
  double humidity_pct = 0.0;
  double snow_depth_cm = 0.0;
  int precip_cat = 0;
  bool imputed = false;
};

/** One panel.csv row; covariates describe the section starting at this spot
    (the final spot of a run repeats the previous section's values). */
struct panel_row {
  std::string train_id;
  double km = 0.0;
  int state = 1;
  double temperature_c = 0.0;
  double humidity_pct = 0.0;
  double snow_depth_cm = 0.0;
  int precip_cat = 0;
};

struct reject_row {
  std::string scope;  // "row" or "train"
  std::string train_id;
  std::string date;
  long row_number = 0;  // 1-based line in ops.csv, 0 when not row-scoped
  std::string reason;
  std::string detail;
};

inline std::vector<std::string> const kCovariateNames = {
    "temperature_c", "humidity_pct", "snow_depth_cm", "precip_cat"};

std::string sections_to_csv(std::vector<section_row> const& rows);
std::vector<section_row> sections_from_csv_file(std::string const& path);

std::string panel_to_csv(std::vector<panel_row> const& rows);
std::vector<panel_row> panel_from_csv_file(std::string const& path);

std::string rejects_to_csv(std::vector<reject_row> const& rows);

enum class clock_layout { gap, calendar };

/** Counting-process dataset from section rows. Gap layout restarts the
    distance clock at the previous event; calendar keeps line distances. */
cox::cox_dataset build_cox_dataset(std::vector<section_row> const& rows,
                                   clock_layout layout = clock_layout::gap,
                                   bool stratified = true);

/** Panel paths grouped per train in file order; interval covariates come
    from the left observation. */
std::vector<ctmc::panel_path> build_panel_paths(
    std::vector<panel_row> const& rows);

}  // namespace railhaz::io
