#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "vesselseg/dataset.hpp"

namespace vesselseg {

/// Shortest decimal text with at most 9 significant digits.
std::string format_value(double v);

/// ARFF layout:
///   @RELATION <name>
///   @ATTRIBUTE <feature> NUMERIC     (one per feature, config order)
///   @ATTRIBUTE class {background,vessel}
///   @DATA
///   v1,v2,...,vD,<class>
std::string to_arff(const Dataset& ds);

/// Accepts comments (%), blank lines, case-insensitive keywords, quoted
/// names, and NUMERIC/REAL/INTEGER attributes. The class attribute must be
/// the last one. Errors: ParseError (with line), SchemaError.
Dataset from_arff(std::string_view text);

void export_arff(const Dataset& ds, const std::filesystem::path& path);
Dataset import_arff(const std::filesystem::path& path);

/// Header of feature names plus "class", CRLF line endings, RFC-4180 quoting.
std::string to_csv(const Dataset& ds);
Dataset from_csv(std::string_view text, std::string relation = "vessels");

void export_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset import_csv(const std::filesystem::path& path);

}  // namespace vesselseg
