#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "wallinfer/core.hpp"

namespace wallinfer::io {

inline constexpr const char* kCampaignHeader =
    "t_min,temp_int_C,flux_int_Wm2,temp_ext_C,flux_ext_Wm2";

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double x);
double parse_double(std::string_view text);

/// Campaign CSV: the fixed five-column header, one row per sample.
/// Timestamps must be uniformly spaced (relative tolerance 1e-9).
Campaign read_campaign_csv(std::istream& in, Stage stage = Stage::raw);
Campaign read_campaign_csv(const std::filesystem::path& path, Stage stage = Stage::raw);
void write_campaign_csv(std::ostream& out, const Campaign& c);
void write_campaign_csv(const std::filesystem::path& path, const Campaign& c);

/// Plain numeric table with a header row; used for chains and plot-ready output.
void write_table_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows);

}  // namespace wallinfer::io
