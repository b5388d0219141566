#pragma once

#include <filesystem>

#include "gdpen/penalty.hpp"
#include "gdpen/report.hpp"

namespace gdpen {

/// Comma-separated numbers; a first line that does not parse as numbers is
/// treated as a header. Blank lines are skipped.
Matrix read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const std::filesystem::path& path, const Matrix& m);

/// Matrix Market `coordinate` (general or symmetric) and `array` formats.
Matrix read_matrix_market(const std::filesystem::path& path);

/// Dispatches on the extension: .mtx is Matrix Market, anything else CSV.
Matrix read_matrix(const std::filesystem::path& path);

/// A single row or column read as a vector.
Vector read_vector(const std::filesystem::path& path);
void write_vector_csv(const std::filesystem::path& path, const Vector& v);

/// Penalty description:
///   {"kind": "lasso", "p": 5, "active": [0, 2], "free": []}
///   {"kind": "group_lasso", "p": 6, "groups": [[0,1],[2,3]], "active": [0],
///    "duplicate_overlaps": false, "subspace_basis": "S.csv"}
///   {"kind": "analysis", "D": "D.csv" | [[...], ...], "base": {...}}
///   {"kind": "hybrid", "first": {...}, "second": {...}}
/// "active" may be the string "all". Relative paths resolve against `base_dir`.
PenaltySpec penalty_spec_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Penalty read_penalty(const std::filesystem::path& path);

}  // namespace gdpen
