#pragma once

#include <map>
#include <string>
#include <vector>

#include "railhaz/cox.hpp"
#include "railhaz/ctmc.hpp"
#include "railhaz/stats.hpp"

namespace railhaz::report {

/** Table 4 style: hazard ratio and CI to 3 decimals, p to 4 decimals with
    values below 1e-4 printed as "<0.0001". */
std::string format_p(double p);
std::string format_ratio(double v);

std::string cox_table_csv(cox::cox_fit const& fit, double level = 0.95);
std::string cox_fit_json(cox::cox_fit const& fit);
std::string survival_curves_csv(std::vector<cox::survival_curve> const& curves);

std::string ctmc_tables_csv(ctmc::ctmc_fit const& fit, double level = 0.95);
std::string ctmc_fit_json(ctmc::ctmc_fit const& fit);
std::string evolution_csv(ctmc::evolution const& evo);

std::string lrt_json(stats::lrt_result const& r);

/** Human-readable display name for a covariate column. */
std::string display_name(std::string const& covariate);

std::uint64_t fnv1a64(std::string_view data);

/** manifest.json content; inputs are paths whose bytes get hashed. */
std::string manifest_json(std::string const& subcommand,
                          std::vector<std::string> const& inputs,
                          std::map<std::string, std::string> const& options);

}  // namespace railhaz::report
