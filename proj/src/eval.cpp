#include "ectn/eval.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <numeric>
#include <ostream>

namespace ectn {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

Metrics aggregate(std::span<const Metrics> runs) {
  if (runs.empty()) throw Error(ErrorCode::EmptyInput, "no runs to aggregate");
  Metrics out;
  for (const Metrics& m : runs) {
    out.rmse += m.rmse;
    out.mae += m.mae;
    out.count += m.count;
  }
  out.rmse /= static_cast<double>(runs.size());
  out.mae /= static_cast<double>(runs.size());
  return out;
}

std::vector<double> friedman_rank(const ResultTable& table, bool lower_is_better) {
  const std::size_t n = table.columns.size();
  if (n < 2) throw Error(ErrorCode::DegenerateTable, "need at least two models");
  if (table.cells.empty()) throw Error(ErrorCode::DegenerateTable, "need at least one row");

  std::vector<double> sums(n, 0.0);
  std::vector<std::size_t> order(n);
  for (const auto& row : table.cells) {
    if (row.size() != n) throw Error(ErrorCode::DegenerateTable, "ragged result table");
    for (double v : row)
      if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateTable, "non-finite cell");

    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return lower_is_better ? row[x] < row[y] : row[x] > row[y];
    });
    // runs of equal values share the mean of positions first+1 .. last+1
    for (std::size_t first = 0; first < n;) {
      std::size_t last = first;
      while (last + 1 < n && row[order[last + 1]] == row[order[first]]) ++last;
      const double shared = 0.5 * static_cast<double>(first + last) + 1.0;
      for (std::size_t q = first; q <= last; ++q) sums[order[q]] += shared;
      first = last + 1;
    }
  }
  for (double& s : sums) s /= static_cast<double>(table.cells.size());
  return sums;
}

void write_result_csv(const ResultTable& table, std::span<const double> ranks, std::ostream& out) {
  out << "case";
  for (const auto& c : table.columns) out << ',' << c;
  out << '\n';
  for (std::size_t r = 0; r < table.cells.size(); ++r) {
    out << (r < table.rows.size() ? table.rows[r] : std::to_string(r));
    for (double v : table.cells[r]) out << ',' << format_double(v);
    out << '\n';
  }
  if (!ranks.empty()) {
    out << "F-Rank";
    for (double v : ranks) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::Io, "write failure");
}

void write_metrics_csv(const Metrics& m, std::ostream& out) {
  out << "rmse,mae,count\n" << format_double(m.rmse) << ',' << format_double(m.mae) << ',' << m.count << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failure");
}

Metrics read_metrics_csv(std::istream& in) {
  std::string header, line;
  if (!std::getline(in, header) || !std::getline(in, line))
    throw Error(ErrorCode::MalformedLine, "metrics csv needs a header and a row");
  Metrics m;
  const auto c1 = line.find(',');
  const auto c2 = line.find(',', c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw Error(ErrorCode::MalformedLine, "metrics row: " + line);
  const char* s = line.data();
  auto r1 = std::from_chars(s, s + c1, m.rmse);
  auto r2 = std::from_chars(s + c1 + 1, s + c2, m.mae);
  auto r3 = std::from_chars(s + c2 + 1, s + line.size(), m.count);
  if (r1.ec != std::errc() || r2.ec != std::errc() || r3.ec != std::errc())
    throw Error(ErrorCode::MalformedLine, "metrics row: " + line);
  return m;
}

}  // namespace ectn
