#include "gridcast/kernels.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace gridcast::kern {

namespace detail {

bool avx2_available() {
#if defined(GRIDCAST_HAVE_AVX2)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

double sum_scalar(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

double dot_scalar(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sse_about_scalar(std::span<const double> x, double center) {
  double s = 0.0;
  for (double v : x) {
    const double d = v - center;
    s += d * d;
  }
  return s;
}

double abs_diff_sum_scalar(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s;
}

double weighted_l1_scalar(std::span<const double> a, std::span<const double> b,
                          std::span<const double> inv_scale) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += inv_scale[i] * std::fabs(a[i] - b[i]);
  return s;
}

void axpy_scalar(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

std::size_t count_greater_scalar(std::span<const double> x, double threshold) {
  std::size_t c = 0;
  for (double v : x) c += (v > threshold) ? 1 : 0;
  return c;
}

void nearest_centroid_scalar(std::span<const double> px, std::span<const double> py,
                             std::span<const double> cx, std::span<const double> cy,
                             std::span<int> out_index, std::span<double> out_dist2) {
  const std::size_t k = cx.size();
  for (std::size_t i = 0; i < px.size(); ++i) {
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      const double dx = px[i] - cx[j];
      const double dy = py[i] - cy[j];
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d2) {
        best_d2 = d2;
        best = static_cast<int>(j);
      }
    }
    out_index[i] = best;
    out_dist2[i] = best_d2;
  }
}

}  // namespace detail

namespace {

struct KernelTable {
  double (*sum)(std::span<const double>);
  double (*dot)(std::span<const double>, std::span<const double>);
  double (*sse_about)(std::span<const double>, double);
  double (*abs_diff_sum)(std::span<const double>, std::span<const double>);
  double (*weighted_l1)(std::span<const double>, std::span<const double>,
                        std::span<const double>);
  void (*axpy)(double, std::span<const double>, std::span<double>);
  std::size_t (*count_greater)(std::span<const double>, double);
  void (*nearest_centroid)(std::span<const double>, std::span<const double>,
                           std::span<const double>, std::span<const double>,
                           std::span<int>, std::span<double>);
  std::string_view name;
};

constexpr KernelTable kScalarTable = {
    detail::sum_scalar,          detail::dot_scalar,
    detail::sse_about_scalar,    detail::abs_diff_sum_scalar,
    detail::weighted_l1_scalar,  detail::axpy_scalar,
    detail::count_greater_scalar, detail::nearest_centroid_scalar,
    "scalar"};

#if defined(GRIDCAST_HAVE_AVX2)
constexpr KernelTable kAvx2Table = {
    detail::sum_avx2,          detail::dot_avx2,
    detail::sse_about_avx2,    detail::abs_diff_sum_avx2,
    detail::weighted_l1_avx2,  detail::axpy_avx2,
    detail::count_greater_avx2, detail::nearest_centroid_avx2,
    "avx2"};
#endif

const KernelTable& resolve_table() {
#if defined(GRIDCAST_HAVE_AVX2)
  if (detail::avx2_available()) return kAvx2Table;
#endif
  return kScalarTable;
}

const KernelTable* g_active = &resolve_table();

}  // namespace

double sum(std::span<const double> x) { return g_active->sum(x); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("kern::dot: size mismatch");
  return g_active->dot(a, b);
}

double sse_about(std::span<const double> x, double center) {
  return g_active->sse_about(x, center);
}

double abs_diff_sum(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("kern::abs_diff_sum: size mismatch");
  return g_active->abs_diff_sum(a, b);
}

double weighted_l1(std::span<const double> a, std::span<const double> b,
                   std::span<const double> inv_scale) {
  if (a.size() != b.size() || a.size() != inv_scale.size())
    throw std::invalid_argument("kern::weighted_l1: size mismatch");
  return g_active->weighted_l1(a, b, inv_scale);
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("kern::axpy: size mismatch");
  g_active->axpy(a, x, y);
}

std::size_t count_greater(std::span<const double> x, double threshold) {
  return g_active->count_greater(x, threshold);
}

void nearest_centroid(std::span<const double> px, std::span<const double> py,
                      std::span<const double> cx, std::span<const double> cy,
                      std::span<int> out_index, std::span<double> out_dist2) {
  if (px.size() != py.size() || cx.size() != cy.size() ||
      out_index.size() != px.size() || out_dist2.size() != px.size())
    throw std::invalid_argument("kern::nearest_centroid: size mismatch");
  if (cx.empty()) throw std::invalid_argument("kern::nearest_centroid: no centroids");
  g_active->nearest_centroid(px, py, cx, cy, out_index, out_dist2);
}

std::string_view active_backend() { return g_active->name; }

void force_backend(std::string_view name) {
  if (name == "scalar") {
    g_active = &kScalarTable;
    return;
  }
#if defined(GRIDCAST_HAVE_AVX2)
  if (name == "avx2") {
    if (!detail::avx2_available())
      throw std::runtime_error("kern: avx2 not supported on this CPU");
    g_active = &kAvx2Table;
    return;
  }
#endif
  throw std::runtime_error("kern: unknown backend '" + std::string(name) + "'");
}

}  // namespace gridcast::kern
