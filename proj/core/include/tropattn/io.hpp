#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tropattn/census.hpp"
#include "tropattn/types.hpp"

namespace tropattn {

/// Shortest round-trip representation ("%.17g"-equivalent, locale independent).
std::string format_number(double x);
std::string format_number(const BigInt& x);

std::string csv_join(std::initializer_list<std::string> cells);
std::string csv_join(const std::vector<std::string>& cells);

/// First line of every CSV the tools write: "# schema: <name>/<version>".
std::string csv_schema_line(const std::string& schema);

inline constexpr const char* kCensusSchema = "tropattn.census/1";

/// N,d,H,d_ff,L,n,seed,n_distinct,n_boundary,lower,upper
std::string census_csv_header();
std::string census_csv_row(std::uint64_t n_tokens, std::uint64_t dim, std::uint64_t n_heads,
                           std::uint64_t d_ff, std::uint64_t depth, const CensusReport& report,
                           const BigInt& lower, const BigInt& upper);

nlohmann::json to_json(const CensusReport& r);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace tropattn
