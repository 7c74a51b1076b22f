#include "wallinfer/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace wallinfer::io {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw DataError("cannot parse number '" + std::string(text) + "'");
  }
  return value;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

Campaign read_campaign_csv(std::istream& in, Stage stage) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("campaign CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  if (line != kCampaignHeader) {
    throw DataError("campaign CSV header must be '" + std::string(kCampaignHeader) + "', got '" +
                    line + "'");
  }
  std::vector<double> t;
  Campaign c;
  c.stage = stage;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != 5) {
      throw DataError("campaign CSV row " + std::to_string(row) + " has " +
                      std::to_string(fields.size()) + " fields, expected 5");
    }
    try {
      t.push_back(parse_double(fields[0]));
      c.temp_int.values.push_back(parse_double(fields[1]));
      c.flux_int.values.push_back(parse_double(fields[2]));
      c.temp_ext.values.push_back(parse_double(fields[3]));
      c.flux_ext.values.push_back(parse_double(fields[4]));
    } catch (const DataError& e) {
      throw DataError("campaign CSV row " + std::to_string(row) + ": " + e.what());
    }
  }
  if (t.empty()) throw DataError("campaign CSV has no data rows");
  const double t0 = t.front();
  const double dt = t.size() > 1 ? t[1] - t[0] : 1.0;
  if (!(dt > 0.0)) throw DataError("campaign CSV timestamps must increase");
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double expected = t0 + static_cast<double>(i) * dt;
    if (std::abs(t[i] - expected) > 1e-9 * std::max({1.0, std::abs(expected), dt})) {
      throw DataError("campaign CSV timestamps are not uniform at row " + std::to_string(i + 2));
    }
  }
  for (TimeSeries* s : {&c.temp_int, &c.temp_ext, &c.flux_int, &c.flux_ext}) {
    s->t0 = t0;
    s->dt_sample = dt;
  }
  return c;
}

Campaign read_campaign_csv(const std::filesystem::path& path, Stage stage) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open campaign CSV '" + path.string() + "'");
  return read_campaign_csv(in, stage);
}

void write_campaign_csv(std::ostream& out, const Campaign& c) {
  require_valid(c);
  out << kCampaignHeader << '\n';
  for (std::size_t i = 0; i < c.size(); ++i) {
    out << format_double(c.temp_int.time(i)) << ',' << format_double(c.temp_int.values[i]) << ','
        << format_double(c.flux_int.values[i]) << ',' << format_double(c.temp_ext.values[i])
        << ',' << format_double(c.flux_ext.values[i]) << '\n';
  }
}

void write_campaign_csv(const std::filesystem::path& path, const Campaign& c) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_campaign_csv(out, c);
}

void write_table_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_double(row[j]);
    out << '\n';
  }
}

}  // namespace wallinfer::io
