#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dcsr::kernels {

// Inner products of one query against every row of a row-major float matrix.
// The serial version is the reference the parallel one is tested against;
// both accumulate each row in double in ascending column order, so results
// are bit-identical regardless of thread count.

void inner_products_serial(std::span<const float> rows, std::size_t dim,
                           std::span<const double> query, std::span<double> out);

void inner_products(std::span<const float> rows, std::size_t dim,
                    std::span<const double> query, std::span<double> out);

// Many queries against the same rows: out is queries x rows, row-major.
void score_matrix_serial(std::span<const float> rows, std::size_t dim,
                         std::span<const double> queries, std::span<double> out);

void score_matrix(std::span<const float> rows, std::size_t dim,
                  std::span<const double> queries, std::span<double> out);

// Indices of the top_m scores, ordered by score descending and then by the
// caller's tie order (lower rank value first).
std::vector<std::size_t> select_top(std::span<const double> scores,
                                    std::span<const std::size_t> tie_rank,
                                    std::size_t top_m);

int max_threads();
void set_threads(int threads);

}  // namespace dcsr::kernels
