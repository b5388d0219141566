#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "gdpen/certification.hpp"
#include "gdpen/experiment.hpp"
#include "gdpen/solver.hpp"

namespace gdpen {

using Json = nlohmann::json;

// Non-finite doubles are written as null.
Json to_json(const PhaseConfig& cfg);
Json to_json(const PhaseResult& res);
Json to_json(const CertificateReport& rep);
Json to_json(const WitnessReport& rep);
Json to_json(const EstimateResult& res);
Json to_json(const ConverseReport& rep);

PhaseConfig phase_config_from_json(const Json& j);
PhaseResult phase_result_from_json(const Json& j);

/// One row per (size, n) with every metric as a column.
std::string phase_csv(const PhaseResult& res);
/// Success vs n and success vs rescaled n, side by side.
std::string phase_svg(const PhaseResult& res);

/// Human-readable summary of a certificate.
std::string certificate_table(const CertificateReport& rep);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Writes phase.json, phase.csv and phase.svg into `dir`.
void emit_report(const PhaseResult& res, const std::filesystem::path& dir);

}  // namespace gdpen
