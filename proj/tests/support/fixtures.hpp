#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "poly/core/errors.hpp"
#include "poly/core/text.hpp"

#ifndef POLY_FIXTURE_DIR
#error "POLY_FIXTURE_DIR must be defined"
#endif

namespace poly::testing {

inline std::string fixture_path(const std::string& name) { return std::string(POLY_FIXTURE_DIR) + "/" + name; }

struct LeaderboardRow {
  std::string model;
  std::vector<int> tenths;  // six dialect accuracies, in tenths of a percent
  int avg_tenths = 0;       // published average
  std::vector<double> values() const {
    std::vector<double> v;
    for (int t : tenths) v.push_back(t / 10.0);
    return v;
  }
};

inline int parse_tenths(const std::string& s) {
  auto parts = text::split(s, '.');
  if (parts.size() != 2 || parts[1].size() != 1) throw ParseError("expected one decimal place: " + s);
  return std::stoi(parts[0]) * 10 + std::stoi(parts[1]);
}

inline std::vector<LeaderboardRow> read_leaderboard() {
  std::ifstream in(fixture_path("leaderboard_grid.csv"));
  if (!in) throw ConfigError("missing leaderboard fixture");
  std::string line;
  std::getline(in, line);
  std::vector<LeaderboardRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = text::split(line, ',');
    LeaderboardRow r;
    r.model = f[0];
    for (int i = 1; i <= 6; ++i) r.tenths.push_back(parse_tenths(f[static_cast<std::size_t>(i)]));
    r.avg_tenths = parse_tenths(f[7]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace poly::testing
