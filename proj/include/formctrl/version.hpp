#pragma once

#include <string>

namespace formctrl {

inline constexpr const char* kToolVersion = "0.1.0";

// Frozen identifier of the report layout; every emitted report embeds it and
// the contract tests pin the layout to this value.
inline constexpr const char* kReportSchemaVersion = "1";

inline std::string report_schema_version() { return kReportSchemaVersion; }

}  // namespace formctrl
