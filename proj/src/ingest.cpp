#include "railhaz/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "railhaz/common.hpp"
#include "railhaz/csv.hpp"

namespace railhaz::ingest {

namespace {

struct time_field {
  char const* name;
  std::optional<io::minutes_t> raw_stop::*member;
};

constexpr std::array<time_field, 4> kTimeFields = {{
    {"planned_arrival", &raw_stop::planned_arrival},
    {"planned_departure", &raw_stop::planned_departure},
    {"actual_arrival", &raw_stop::actual_arrival},
    {"actual_departure", &raw_stop::actual_departure},
}};

io::minutes_t need(std::optional<io::minutes_t> const& t, char const* what,
                   std::string const& spot) {
  if (!t) {
    throw validation_error{std::string{what} + " missing at spot " + spot};
  }
  return *t;
}

}  // namespace

std::optional<missing_class> classify_missing(raw_stop const& stop, bool first,
                                              bool last) {
  bool const arr_missing = !first && !stop.actual_arrival;
  bool const dep_missing = !last && !stop.actual_departure;
  if (arr_missing && dep_missing) {
    return missing_class::both;
  }
  if (arr_missing) {
    return missing_class::arrival_only;
  }
  if (dep_missing) {
    return missing_class::departure_only;
  }
  return std::nullopt;
}

parse_result parse_operations(std::string const& path) {
  auto const t = io::read_csv(path);
  auto const c_train = t.col("train_number");
  auto const c_type = t.col("train_type");
  auto const c_spot = t.col("spot_name");
  auto const c_km = t.col("spot_km");
  auto const c_date = t.col("date");
  std::array<std::size_t, 4> c_time{};
  for (std::size_t f = 0; f != 4; ++f) {
    c_time[f] = t.col(kTimeFields[f].name);
  }

  parse_result out;
  std::map<std::pair<std::string, std::string>, std::size_t> run_index;

  for (std::size_t i = 0; i != t.rows.size(); ++i) {
    long const line = static_cast<long>(i) + 2;  // header is line 1
    auto const& cells = t.rows[i];
    std::string const& train = cells[c_train];
    std::string const& date_s = cells[c_date];

    auto const reject = [&](std::string reason, std::string detail) {
      out.rejects.push_back(
          {"row", train, date_s, line, std::move(reason), std::move(detail)});
    };

    if (train.empty()) {
      reject("missing train number", "");
      continue;
    }
    auto const day = io::parse_date(date_s);
    if (!day) {
      reject("invalid date", "'" + date_s + "'");
      continue;
    }
    if (cells[c_spot].empty()) {
      reject("missing spot name", "");
      continue;
    }
    auto const km = io::parse_double(cells[c_km]);
    if (!km || !(*km >= 0.0) || !std::isfinite(*km)) {
      reject("invalid spot_km", "'" + cells[c_km] + "'");
      continue;
    }

    raw_stop stop;
    stop.spot_name = cells[c_spot];
    stop.spot_km = *km;
    stop.source_line = line;
    for (std::size_t f = 0; f != 4; ++f) {
      std::string const& cell = cells[c_time[f]];
      if (cell.empty()) {
        continue;
      }
      auto const parsed = io::parse_time(cell, *day);
      if (parsed) {
        stop.*(kTimeFields[f].member) = *parsed;
      } else {
        reject("malformed time",
               std::string{kTimeFields[f].name} + "='" + cell + "'");
      }
    }

    auto const key = std::make_pair(train, date_s);
    auto const [it, fresh] = run_index.try_emplace(key, out.runs.size());
    if (fresh) {
      run r;
      r.train_number = train;
      r.train_type = cells[c_type];
      r.date = date_s;
      out.runs.push_back(std::move(r));
    }
    out.runs[it->second].stops.push_back(std::move(stop));
  }

  // File order is schedule order; a strict distance decrease is a run-level
  // inconsistency, equal distances collapse to the first occurrence.
  std::vector<run> kept;
  for (auto& r : out.runs) {
    bool ok = true;
    for (std::size_t j = 1; j < r.stops.size(); ++j) {
      if (r.stops[j].spot_km < r.stops[j - 1].spot_km) {
        out.rejects.push_back({"train", r.train_number, r.date, 0,
                               "non-monotone spot_km",
                               "at spot " + r.stops[j].spot_name});
        ok = false;
        break;
      }
    }
    if (!ok) {
      continue;
    }
    std::vector<raw_stop> dedup;
    for (auto& s : r.stops) {
      if (!dedup.empty() && s.spot_km == dedup.back().spot_km) {
        out.rejects.push_back({"row", r.train_number, r.date, s.source_line,
                               "duplicate spot_km",
                               "spot " + s.spot_name + " dropped"});
        continue;
      }
      dedup.push_back(std::move(s));
    }
    r.stops = std::move(dedup);
    kept.push_back(std::move(r));
  }
  out.runs = std::move(kept);
  return out;
}

std::map<std::string, line_spot> read_line_geometry(std::string const& path) {
  auto const t = io::read_csv(path);
  auto const c_name = t.col("spot_name");
  auto const c_km = t.col("spot_km");
  auto const c_e = t.col("easting_km");
  auto const c_n = t.col("northing_km");
  std::map<std::string, line_spot> out;
  for (std::size_t i = 0; i != t.rows.size(); ++i) {
    line_spot s;
    s.name = t.rows[i][c_name];
    auto const km = io::parse_double(t.rows[i][c_km]);
    auto const e = io::parse_double(t.rows[i][c_e]);
    auto const n = io::parse_double(t.rows[i][c_n]);
    if (s.name.empty() || !km || !e || !n) {
      throw validation_error{"line.csv: bad row " + std::to_string(i + 2)};
    }
    s.km = *km;
    s.easting = *e;
    s.northing = *n;
    if (!out.emplace(s.name, s).second) {
      throw validation_error{"line.csv: duplicate spot " + s.name};
    }
  }
  if (out.empty()) {
    throw validation_error{"line.csv: no spots"};
  }
  return out;
}

std::size_t weather_grid::nearest(double easting, double northing) const {
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i != points.size(); ++i) {
    double const de = points[i].easting - easting;
    double const dn = points[i].northing - northing;
    double const d2 = de * de + dn * dn;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

std::array<double, 4> const& weather_grid::at(std::size_t point_idx,
                                              io::minutes_t hour) const {
  auto const it = values.find({point_idx, hour});
  if (it == values.end()) {
    throw validation_error{"no weather value for point " +
                           points[point_idx].id + " at " +
                           io::format_time(hour)};
  }
  return it->second;
}

bool weather_grid::in_bounds(double easting, double northing) const {
  double min_e = std::numeric_limits<double>::infinity(), max_e = -min_e;
  double min_n = min_e, max_n = -min_e;
  for (auto const& p : points) {
    min_e = std::min(min_e, p.easting);
    max_e = std::max(max_e, p.easting);
    min_n = std::min(min_n, p.northing);
    max_n = std::max(max_n, p.northing);
  }
  return easting >= min_e && easting <= max_e && northing >= min_n &&
         northing <= max_n;
}

weather_grid read_weather(std::string const& path) {
  auto const t = io::read_csv(path);
  auto const c_id = t.col("point_id");
  auto const c_e = t.col("easting_km");
  auto const c_n = t.col("northing_km");
  auto const c_hour = t.col("hour");
  auto const c_temp = t.col("temperature_c");
  auto const c_hum = t.col("humidity_pct");
  auto const c_snow = t.col("snow_depth_cm");
  auto const c_precip = t.col("precip_mm");

  struct raw_value {
    std::string id;
    io::minutes_t hour;
    std::array<double, 4> v;
  };
  std::vector<raw_value> raw;
  std::map<std::string, weather_grid::point> points;
  for (std::size_t i = 0; i != t.rows.size(); ++i) {
    std::string const where = "weather.csv row " + std::to_string(i + 2);
    auto const e = io::parse_double(t.rows[i][c_e]);
    auto const n = io::parse_double(t.rows[i][c_n]);
    if (t.rows[i][c_id].empty() || !e || !n) {
      throw validation_error{where + ": bad point fields"};
    }
    std::string const& hour_s = t.rows[i][c_hour];
    auto const hour = hour_s.size() >= 11 ? io::parse_time(hour_s, 0)
                                          : std::nullopt;
    if (!hour || *hour % 60 != 0) {
      throw validation_error{where + ": hour must be an ISO timestamp on the "
                             "hour, got '" + hour_s + "'"};
    }
    raw_value rv;
    rv.id = t.rows[i][c_id];
    rv.hour = *hour;
    for (std::size_t f = 0; f != 4; ++f) {
      std::size_t const col =
          f == 0 ? c_temp : f == 1 ? c_hum : f == 2 ? c_snow : c_precip;
      auto const v = io::parse_double(t.rows[i][col]);
      if (!v || !std::isfinite(*v)) {
        throw validation_error{where + ": bad weather value"};
      }
      rv.v[f] = *v;
    }
    auto const [it, fresh] = points.try_emplace(
        rv.id, weather_grid::point{rv.id, *e, *n});
    if (!fresh && (it->second.easting != *e || it->second.northing != *n)) {
      throw validation_error{where + ": point " + rv.id +
                             " has inconsistent coordinates"};
    }
    raw.push_back(std::move(rv));
  }
  if (points.empty()) {
    throw validation_error{"weather.csv: no grid points"};
  }

  weather_grid grid;
  for (auto const& [id, p] : points) {
    grid.points.push_back(p);
  }
  std::sort(grid.points.begin(), grid.points.end(),
            [](auto const& a, auto const& b) {
              return std::tie(a.easting, a.northing, a.id) <
                     std::tie(b.easting, b.northing, b.id);
            });
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i != grid.points.size(); ++i) {
    index[grid.points[i].id] = i;
  }
  for (auto const& rv : raw) {
    auto const key = std::make_pair(index[rv.id], rv.hour);
    if (!grid.values.emplace(key, rv.v).second) {
      throw validation_error{"weather.csv: duplicate value for point " +
                             rv.id + " at " + io::format_time(rv.hour)};
    }
  }
  return grid;
}

run impute_locf(run r) {
  auto const m = r.stops.size();
  if (m == 0) {
    throw validation_error{"empty run"};
  }
  for (std::size_t j = 0; j != m; ++j) {
    if (j + 1 != m && !r.stops[j].planned_departure) {
      throw validation_error{"planned departure missing at spot " +
                             r.stops[j].spot_name};
    }
    if (j != 0 && !r.stops[j].planned_arrival) {
      throw validation_error{"planned arrival missing at spot " +
                             r.stops[j].spot_name};
    }
  }
  if (!r.stops[0].actual_departure) {
    throw validation_error{
        "first actual departure missing; run cannot seed imputation"};
  }
  for (std::size_t j = 1; j != m; ++j) {
    auto& cur = r.stops[j];
    auto const& prev = r.stops[j - 1];
    if (!cur.actual_arrival) {
      io::minutes_t const drive =
          *cur.planned_arrival - *prev.planned_departure;
      cur.actual_arrival = *prev.actual_departure + drive;
      cur.imputed_arrival = true;
    }
    if (j + 1 != m && !cur.actual_departure) {
      io::minutes_t const dwell =
          *cur.planned_departure - *cur.planned_arrival;
      cur.actual_departure = *cur.actual_arrival + dwell;
      cur.imputed_departure = true;
    }
  }
  return r;
}

std::vector<section_indicator> derive_indicators(run const& r) {
  std::vector<section_indicator> out;
  auto const m = r.stops.size();
  for (std::size_t j = 0; j + 1 < m; ++j) {
    auto const& a = r.stops[j];
    auto const& b = r.stops[j + 1];
    if (!(b.spot_km > a.spot_km)) {
      throw validation_error{"zero-length section at spot " + b.spot_name};
    }
    io::minutes_t const pd = need(a.planned_departure, "planned departure",
                                  a.spot_name);
    io::minutes_t const pa = need(b.planned_arrival, "planned arrival",
                                  b.spot_name);
    io::minutes_t const ad = need(a.actual_departure, "actual departure",
                                  a.spot_name);
    io::minutes_t const aa = need(b.actual_arrival, "actual arrival",
                                  b.spot_name);
    if (pa - pd < 0) {
      throw validation_error{"negative planned running time into spot " +
                             b.spot_name};
    }
    section_indicator s;
    s.start_stop = j;
    s.end_stop = j + 1;
    s.start_km = a.spot_km;
    s.stop_km = b.spot_km;
    s.primary_delay = (aa - ad) - (pa - pd) >= 3;
    s.arrival_state = (aa - pa) > 5 ? 2 : 1;
    s.imputed = a.imputed_departure || b.imputed_arrival;
    out.push_back(s);
  }
  return out;
}

void assign_strata(std::vector<section_indicator>& records) {
  int k = 1;
  for (auto& rec : records) {
    rec.stratum = k;
    if (rec.primary_delay) {
      ++k;
    }
  }
}

void join_weather(std::vector<section_indicator>& records, run const& r,
                  std::map<std::string, line_spot> const& line,
                  weather_grid const& grid) {
  auto const locate = [&](raw_stop const& stop) -> line_spot const& {
    auto const it = line.find(stop.spot_name);
    if (it == line.end()) {
      throw validation_error{"spot '" + stop.spot_name +
                             "' not in line geometry"};
    }
    if (std::fabs(it->second.km - stop.spot_km) > 1e-6) {
      throw validation_error{"spot '" + stop.spot_name +
                             "' distance disagrees with line geometry"};
    }
    if (!grid.in_bounds(it->second.easting, it->second.northing)) {
      throw validation_error{"spot '" + stop.spot_name +
                             "' outside weather grid region"};
    }
    return it->second;
  };

  for (auto& rec : records) {
    auto const& a = r.stops[rec.start_stop];
    auto const& b = r.stops[rec.end_stop];
    auto const& ga = locate(a);
    auto const& gb = locate(b);
    auto const va = grid.at(grid.nearest(ga.easting, ga.northing),
                            io::round_to_hour(need(a.actual_departure,
                                                   "actual departure",
                                                   a.spot_name)));
    auto const vb = grid.at(grid.nearest(gb.easting, gb.northing),
                            io::round_to_hour(need(b.actual_arrival,
                                                   "actual arrival",
                                                   b.spot_name)));
    rec.temperature_c = 0.5 * (va[0] + vb[0]);
    rec.humidity_pct = 0.5 * (va[1] + vb[1]);
    rec.snow_depth_cm = 0.5 * (va[2] + vb[2]);
    double const precip_mm = 0.5 * (va[3] + vb[3]);
    rec.precip_cat = precip_mm == 0.0 ? 0 : 1;
  }
}

ingest_result run_pipeline(std::string const& ops_path,
                           std::string const& line_path,
                           std::string const& weather_path) {
  auto parsed = parse_operations(ops_path);
  auto const line = read_line_geometry(line_path);
  auto const grid = read_weather(weather_path);

  ingest_result out;
  out.rejects = std::move(parsed.rejects);
  out.runs_parsed = parsed.runs.size();

  for (auto const& r : parsed.runs) {
    try {
      run const imp = impute_locf(r);
      auto recs = derive_indicators(imp);
      if (recs.empty()) {
        throw validation_error{"run has fewer than two spots"};
      }
      assign_strata(recs);
      join_weather(recs, imp, line, grid);

      std::string const id = imp.id();
      for (auto const& rec : recs) {
        io::section_row row;
        row.train_id = id;
        row.stratum = rec.stratum;
        row.start_km = rec.start_km;
        row.stop_km = rec.stop_km;
        row.primary_delay = rec.primary_delay;
        row.arrival_state = rec.arrival_state;
        row.temperature_c = rec.temperature_c;
        row.humidity_pct = rec.humidity_pct;
        row.snow_depth_cm = rec.snow_depth_cm;
        row.precip_cat = rec.precip_cat;
        row.imputed = rec.imputed;
        out.sections.push_back(std::move(row));
      }

      // Origin state comes from the departure lateness; the following spots
      // carry the arrival state of the section ending there. Covariates use
      // the section starting at the spot, repeated for the terminus.
      io::minutes_t const dep0 = *imp.stops[0].actual_departure;
      io::minutes_t const pdep0 = *imp.stops[0].planned_departure;
      for (std::size_t j = 0; j != imp.stops.size(); ++j) {
        auto const& cov = recs[std::min(j, recs.size() - 1)];
        io::panel_row row;
        row.train_id = id;
        row.km = imp.stops[j].spot_km;
        row.state = j == 0 ? (dep0 - pdep0 > 5 ? 2 : 1)
                           : recs[j - 1].arrival_state;
        row.temperature_c = cov.temperature_c;
        row.humidity_pct = cov.humidity_pct;
        row.snow_depth_cm = cov.snow_depth_cm;
        row.precip_cat = cov.precip_cat;
        out.panel.push_back(std::move(row));
      }
      ++out.runs_kept;
    } catch (validation_error const& e) {
      out.rejects.push_back(
          {"train", r.train_number, r.date, 0, "run excluded", e.what()});
    }
  }
  return out;
}

}  // namespace railhaz::ingest
