#pragma once

#include <string>

#include "nearopt/ellitope.h"
#include "nearopt/types.h"

namespace nearopt {

/// Dense row-major CSV, one matrix row per line.
Matrix read_csv(const std::string& path);
void write_csv(const std::string& path, const Matrix& m);

/// Parses {n, K, tset: {variant, p}, S: [...], P?}. Each S entry is a CSV path
/// (relative to the descriptor's directory) or an inline row-major array, either
/// nested rows or a flat list of n*n numbers. A product set is given as
/// tset: {variant: "product", factors: [{variant, K, p}, ...]}.
RawEllitope read_ellitope(const std::string& path);
RawEllitope parse_ellitope(const std::string& json_text, const std::string& base_dir = ".");
/// Inverse of parse_ellitope with inline arrays.
std::string ellitope_to_json(const RawEllitope& raw);

}  // namespace nearopt
