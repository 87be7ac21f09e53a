#include "railhaz/schemas.hpp"

#include <map>

#include "railhaz/common.hpp"
#include "railhaz/csv.hpp"

namespace railhaz::io {

namespace {

double need_double(csv_table const& t, std::size_t row, std::size_t col,
                   std::string const& what) {
  auto const v = parse_double(t.rows[row][col]);
  if (!v) {
    throw validation_error{what + " is not a number at data row " +
                           std::to_string(row + 1) + ": '" +
                           t.rows[row][col] + "'"};
  }
  return *v;
}

long long need_int(csv_table const& t, std::size_t row, std::size_t col,
                   std::string const& what) {
  auto const v = parse_int(t.rows[row][col]);
  if (!v) {
    throw validation_error{what + " is not an integer at data row " +
                           std::to_string(row + 1) + ": '" +
                           t.rows[row][col] + "'"};
  }
  return *v;
}

template <typename Row>
std::vector<std::vector<Row const*>> group_by_train(
    std::vector<Row> const& rows) {
  std::vector<std::vector<Row const*>> groups;
  std::map<std::string, std::size_t> index;
  for (auto const& r : rows) {
    auto const [it, fresh] = index.try_emplace(r.train_id, groups.size());
    if (fresh) {
      groups.emplace_back();
    }
    groups[it->second].push_back(&r);
  }
  return groups;
}

}  // namespace

std::string sections_to_csv(std::vector<section_row> const& rows) {
  std::string out =
      "train_id,stratum,start_km,stop_km,primary_delay,arrival_state,"
      "temperature_c,humidity_pct,snow_depth_cm,precip_cat,imputed\n";
  for (auto const& r : rows) {
    out += join_csv({csv_escape(r.train_id), std::to_string(r.stratum),
                     format_g6(r.start_km), format_g6(r.stop_km),
                     r.primary_delay ? "1" : "0",
                     std::to_string(r.arrival_state),
                     format_g6(r.temperature_c), format_g6(r.humidity_pct),
                     format_g6(r.snow_depth_cm), std::to_string(r.precip_cat),
                     r.imputed ? "1" : "0"});
    out += '\n';
  }
  return out;
}

std::vector<section_row> sections_from_csv_file(std::string const& path) {
  auto const t = read_csv(path);
  auto const c_train = t.col("train_id");
  auto const c_stratum = t.col("stratum");
  auto const c_start = t.col("start_km");
  auto const c_stop = t.col("stop_km");
  auto const c_delta = t.col("primary_delay");
  auto const c_state = t.col("arrival_state");
  auto const c_temp = t.col("temperature_c");
  auto const c_hum = t.col("humidity_pct");
  auto const c_snow = t.col("snow_depth_cm");
  auto const c_precip = t.col("precip_cat");
  auto const c_imputed = t.find_col("imputed");
  std::vector<section_row> rows;
  rows.reserve(t.rows.size());
  for (std::size_t i = 0; i != t.rows.size(); ++i) {
    section_row r;
    r.train_id = t.rows[i][c_train];
    r.stratum = static_cast<int>(need_int(t, i, c_stratum, "stratum"));
    r.start_km = need_double(t, i, c_start, "start_km");
    r.stop_km = need_double(t, i, c_stop, "stop_km");
    r.primary_delay = need_int(t, i, c_delta, "primary_delay") != 0;
    r.arrival_state = static_cast<int>(need_int(t, i, c_state, "arrival_state"));
    r.temperature_c = need_double(t, i, c_temp, "temperature_c");
    r.humidity_pct = need_double(t, i, c_hum, "humidity_pct");
    r.snow_depth_cm = need_double(t, i, c_snow, "snow_depth_cm");
    r.precip_cat = static_cast<int>(need_int(t, i, c_precip, "precip_cat"));
    if (r.arrival_state != 1 && r.arrival_state != 2) {
      throw validation_error{"arrival_state must be 1 or 2 at data row " +
                             std::to_string(i + 1)};
    }
    if (c_imputed) {
      r.imputed = need_int(t, i, *c_imputed, "imputed") != 0;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string panel_to_csv(std::vector<panel_row> const& rows) {
  std::string out =
      "train_id,km,state,temperature_c,humidity_pct,snow_depth_cm,precip_cat\n";
  for (auto const& r : rows) {
    out += join_csv({csv_escape(r.train_id), format_g6(r.km),
                     std::to_string(r.state), format_g6(r.temperature_c),
                     format_g6(r.humidity_pct), format_g6(r.snow_depth_cm),
                     std::to_string(r.precip_cat)});
    out += '\n';
  }
  return out;
}

std::vector<panel_row> panel_from_csv_file(std::string const& path) {
  auto const t = read_csv(path);
  auto const c_train = t.col("train_id");
  auto const c_km = t.col("km");
  auto const c_state = t.col("state");
  auto const c_temp = t.col("temperature_c");
  auto const c_hum = t.col("humidity_pct");
  auto const c_snow = t.col("snow_depth_cm");
  auto const c_precip = t.col("precip_cat");
  std::vector<panel_row> rows;
  rows.reserve(t.rows.size());
  for (std::size_t i = 0; i != t.rows.size(); ++i) {
    panel_row r;
    r.train_id = t.rows[i][c_train];
    r.km = need_double(t, i, c_km, "km");
    r.state = static_cast<int>(need_int(t, i, c_state, "state"));
    r.temperature_c = need_double(t, i, c_temp, "temperature_c");
    r.humidity_pct = need_double(t, i, c_hum, "humidity_pct");
    r.snow_depth_cm = need_double(t, i, c_snow, "snow_depth_cm");
    r.precip_cat = static_cast<int>(need_int(t, i, c_precip, "precip_cat"));
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string rejects_to_csv(std::vector<reject_row> const& rows) {
  std::string out = "scope,train_id,date,row_number,reason,detail\n";
  for (auto const& r : rows) {
    out += join_csv({csv_escape(r.scope), csv_escape(r.train_id),
                     csv_escape(r.date),
                     r.row_number > 0 ? std::to_string(r.row_number) : "",
                     csv_escape(r.reason), csv_escape(r.detail)});
    out += '\n';
  }
  return out;
}

cox::cox_dataset build_cox_dataset(std::vector<section_row> const& rows,
                                   clock_layout layout, bool stratified) {
  cox::cox_dataset data;
  data.covariate_names = kCovariateNames;
  std::size_t k_max = 0;
  for (auto const& train : group_by_train(rows)) {
    int expected = 1;
    double clock_zero = train.front()->start_km;
    std::size_t events = 0;
    for (auto const* r : train) {
      if (r->stratum != expected) {
        throw validation_error{"train " + r->train_id +
                               ": stratum sequence is invalid (saw " +
                               std::to_string(r->stratum) + ", expected " +
                               std::to_string(expected) + ")"};
      }
      cox::cox_row row;
      // The pooled model treats every event cycle of a train as its own
      // at-risk unit; the id suffix keeps interval disjointness per cycle.
      row.train_id = stratified
                         ? r->train_id
                         : r->train_id + "#" + std::to_string(r->stratum);
      row.stratum = stratified ? r->stratum : 1;
      if (layout == clock_layout::gap) {
        row.entry = r->start_km - clock_zero;
        row.exit = r->stop_km - clock_zero;
      } else {
        row.entry = r->start_km;
        row.exit = r->stop_km;
      }
      row.event = r->primary_delay;
      row.x = Eigen::Vector4d{r->temperature_c, r->humidity_pct,
                              r->snow_depth_cm,
                              static_cast<double>(r->precip_cat)};
      data.rows.push_back(std::move(row));
      if (r->primary_delay) {
        ++expected;
        ++events;
        clock_zero = r->stop_km;
      }
    }
    k_max = std::max(k_max, events);
  }
  data.k_max = k_max;
  return data;
}

std::vector<ctmc::panel_path> build_panel_paths(
    std::vector<panel_row> const& rows) {
  std::vector<ctmc::panel_path> paths;
  for (auto const& train : group_by_train(rows)) {
    ctmc::panel_path path;
    path.train_id = train.front()->train_id;
    for (auto const* r : train) {
      ctmc::panel_obs o;
      o.km = r->km;
      o.state = r->state;
      o.x = Eigen::Vector4d{r->temperature_c, r->humidity_pct, r->snow_depth_cm,
                            static_cast<double>(r->precip_cat)};
      path.observations.push_back(std::move(o));
    }
    paths.push_back(std::move(path));
  }
  return paths;
}

}  // namespace railhaz::io
