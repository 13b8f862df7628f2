#pragma once

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ectn/error.hpp"
#include "ectn/model.hpp"
#include "ectn/tensor.hpp"

namespace ectn {

struct Metrics {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t count = 0;
};

/// RMSE and MAE of the biased prediction over the given entry positions.
template <typename Scalar>
Metrics evaluate(const EctnModel<Scalar>& model, const ObservedTensor& t, std::span<const std::size_t> positions) {
  if (positions.empty()) throw Error(ErrorCode::EmptyEvalSet, "no positions to evaluate");
  if (model.dims() != t.dims()) throw Error(ErrorCode::DimMismatch, "model and tensor dims differ");
  double sq = 0.0, abs = 0.0;
  for (std::size_t p : positions) {
    const Entry& e = t[p];
    const double residual = e.value - static_cast<double>(model.predict_unchecked(e.i, e.j, e.k));
    sq += residual * residual;
    abs += std::abs(residual);
  }
  const auto n = static_cast<double>(positions.size());
  return Metrics{std::sqrt(sq / n), abs / n, positions.size()};
}

/// Mean RMSE and mean MAE across runs; count is the total entry count.
Metrics aggregate(std::span<const Metrics> runs);

/// One metric for a grid of dataset cases (rows) by models (columns).
struct ResultTable {
  std::vector<std::string> rows;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> cells;  // cells[row][column]
};

/// Friedman mean rank per column. Within each row the best value gets rank 1;
/// ties share the average of their rank positions. Throws DegenerateTable for
/// fewer than two columns, no rows, ragged rows or non-finite cells.
std::vector<double> friedman_rank(const ResultTable& table, bool lower_is_better = true);

/// Header of model ids, one row per case, then an "F-Rank" row.
void write_result_csv(const ResultTable& table, std::span<const double> ranks, std::ostream& out);

/// "rmse,mae,count" header plus one row.
void write_metrics_csv(const Metrics& m, std::ostream& out);
Metrics read_metrics_csv(std::istream& in);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace ectn
