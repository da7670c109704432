#pragma once

#include <string>

#include "json.hpp"

#include "dln/experiments.hpp"
#include "dln/landscape.hpp"

namespace dln {

inline constexpr int kSchemaVersion = 1;

nlohmann::json to_json(const KernelChainReport& r);
nlohmann::json to_json(const CriticalPointReport& r);
nlohmann::json to_json(const OptimizerConfig& c);
nlohmann::json to_json(const ExperimentConfig& c);
/// Everything except the wall-clock time, which would break reproducibility.
nlohmann::json to_json(const RunResult& r);
nlohmann::json to_json(const Theorem1Report& r);
nlohmann::json to_json(const Theorem2Report& r);
nlohmann::json to_json(const SaddleReport& r);
nlohmann::json to_json(const BottleneckReport& r);
nlohmann::json to_json(const NonconvexReport& r);

/// Top-level report document: {"schema_version", "experiment", "seed", "result"}.
nlohmann::json report_document(const std::string& experiment, std::uint64_t seed,
                               nlohmann::json result);

/// "{experiment}-{seed}.report.json"
std::string report_file_name(const std::string& experiment, std::uint64_t seed);

/// Columns iter,F,grad_norm,step.
std::string trace_to_csv(const std::vector<TracePoint>& trace);

}  // namespace dln
