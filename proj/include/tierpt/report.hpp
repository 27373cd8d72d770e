#pragma once

#include <string>

#include <json.hpp>

#include "tierpt/config.hpp"
#include "tierpt/engine.hpp"

namespace tierpt {

// Key order is fixed so that equal reports serialize to identical bytes.
nlohmann::ordered_json report_to_json(const Report& r);

std::string walk_latency_csv(const Report& r);
std::string pt_distribution_csv(const Report& r);
std::string migrations_csv(const Report& r);

// Writes summary.json, walk_latency.csv, pt_distribution.csv,
// migrations.csv and effective_config into `dir`, creating it if needed.
void write_outputs(const Report& r, const RunConfig& cfg,
                   const std::string& dir);

}  // namespace tierpt
