#include "dcsr/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <numeric>

#include "dcsr/errors.hpp"

namespace dcsr::kernels {

namespace {

// Rows per parallel block; each block writes a disjoint slice of `out`.
constexpr std::size_t kRowBlock = 256;

inline double row_dot(const float* row, const double* query, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t d = 0; d < dim; ++d) acc += static_cast<double>(row[d]) * query[d];
  return acc;
}

void check_shapes(std::span<const float> rows, std::size_t dim, std::span<const double> query,
                  std::span<double> out) {
  if (dim == 0 || rows.size() % dim != 0) fail(ErrorKind::DimensionError, "row matrix is not a multiple of dim");
  if (query.size() != dim) fail(ErrorKind::DimensionError, "query dim does not match index dim");
  if (out.size() != rows.size() / dim) fail(ErrorKind::DimensionError, "output size does not match row count");
}

}  // namespace

void inner_products_serial(std::span<const float> rows, std::size_t dim, std::span<const double> query,
                           std::span<double> out) {
  check_shapes(rows, dim, query, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = row_dot(rows.data() + i * dim, query.data(), dim);
}

void inner_products(std::span<const float> rows, std::size_t dim, std::span<const double> query,
                    std::span<double> out) {
  check_shapes(rows, dim, query, out);
  const auto n = static_cast<std::int64_t>(out.size());
  const auto blocks = (n + static_cast<std::int64_t>(kRowBlock) - 1) / static_cast<std::int64_t>(kRowBlock);
#pragma omp parallel for schedule(static) if (blocks > 1)
  for (std::int64_t b = 0; b < blocks; ++b) {
    const std::int64_t begin = b * static_cast<std::int64_t>(kRowBlock);
    const std::int64_t end = std::min(n, begin + static_cast<std::int64_t>(kRowBlock));
    for (std::int64_t i = begin; i < end; ++i) {
      out[static_cast<std::size_t>(i)] =
          row_dot(rows.data() + static_cast<std::size_t>(i) * dim, query.data(), dim);
    }
  }
}

void score_matrix_serial(std::span<const float> rows, std::size_t dim, std::span<const double> queries,
                         std::span<double> out) {
  if (dim == 0 || queries.size() % dim != 0) fail(ErrorKind::DimensionError, "query matrix is not a multiple of dim");
  const std::size_t q = queries.size() / dim;
  const std::size_t n = rows.size() / dim;
  if (out.size() != q * n) fail(ErrorKind::DimensionError, "output size does not match queries x rows");
  for (std::size_t i = 0; i < q; ++i) {
    inner_products_serial(rows, dim, queries.subspan(i * dim, dim), out.subspan(i * n, n));
  }
}

void score_matrix(std::span<const float> rows, std::size_t dim, std::span<const double> queries,
                  std::span<double> out) {
  if (dim == 0 || queries.size() % dim != 0) fail(ErrorKind::DimensionError, "query matrix is not a multiple of dim");
  const auto q = static_cast<std::int64_t>(queries.size() / dim);
  const std::size_t n = rows.size() / dim;
  if (out.size() != static_cast<std::size_t>(q) * n) {
    fail(ErrorKind::DimensionError, "output size does not match queries x rows");
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < q; ++i) {
    const auto qi = static_cast<std::size_t>(i);
    const double* query = queries.data() + qi * dim;
    double* dst = out.data() + qi * n;
    for (std::size_t r = 0; r < n; ++r) dst[r] = row_dot(rows.data() + r * dim, query, dim);
  }
}

std::vector<std::size_t> select_top(std::span<const double> scores, std::span<const std::size_t> tie_rank,
                                    std::size_t top_m) {
  if (tie_rank.size() != scores.size()) fail(ErrorKind::DimensionError, "tie ranks must cover every score");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(top_m, order.size());
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return tie_rank[a] < tie_rank[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), better);
  order.resize(take);
  return order;
}

int max_threads() { return omp_get_max_threads(); }

void set_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace dcsr::kernels
