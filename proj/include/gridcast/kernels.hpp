#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops used across the library. Every kernel has a
// scalar reference implementation and may have SIMD variants; the active
// variant is picked once at startup from CPU capabilities and can be
// overridden for equivalence testing.

namespace gridcast::kern {

/// Sum of all elements.
double sum(std::span<const double> x);

/// Dot product. Sizes must match.
double dot(std::span<const double> a, std::span<const double> b);

/// Sum of squared deviations from `center`: sum((x_i - center)^2).
double sse_about(std::span<const double> x, double center);

/// Sum of absolute differences: sum(|a_i - b_i|).
double abs_diff_sum(std::span<const double> a, std::span<const double> b);

/// Scale-weighted L1 distance: sum(inv_scale_i * |a_i - b_i|).
double weighted_l1(std::span<const double> a, std::span<const double> b,
                   std::span<const double> inv_scale);

/// y_i += a * x_i.
void axpy(double a, std::span<const double> x, std::span<double> y);

/// Number of elements strictly greater than `threshold`.
std::size_t count_greater(std::span<const double> x, double threshold);

/// For each 2-d point (px_i, py_i), index of the nearest centroid
/// (cx_j, cy_j) and the squared distance to it. Ties keep the lowest index.
void nearest_centroid(std::span<const double> px, std::span<const double> py,
                      std::span<const double> cx, std::span<const double> cy,
                      std::span<int> out_index, std::span<double> out_dist2);

/// Name of the variant currently dispatched to ("scalar" or "avx2").
std::string_view active_backend();

/// Force a specific variant; throws if it is not available on this CPU.
void force_backend(std::string_view name);

namespace detail {

bool avx2_available();

double sum_scalar(std::span<const double> x);
double dot_scalar(std::span<const double> a, std::span<const double> b);
double sse_about_scalar(std::span<const double> x, double center);
double abs_diff_sum_scalar(std::span<const double> a, std::span<const double> b);
double weighted_l1_scalar(std::span<const double> a, std::span<const double> b,
                          std::span<const double> inv_scale);
void axpy_scalar(double a, std::span<const double> x, std::span<double> y);
std::size_t count_greater_scalar(std::span<const double> x, double threshold);
void nearest_centroid_scalar(std::span<const double> px, std::span<const double> py,
                             std::span<const double> cx, std::span<const double> cy,
                             std::span<int> out_index, std::span<double> out_dist2);

#if defined(GRIDCAST_HAVE_AVX2)
double sum_avx2(std::span<const double> x);
double dot_avx2(std::span<const double> a, std::span<const double> b);
double sse_about_avx2(std::span<const double> x, double center);
double abs_diff_sum_avx2(std::span<const double> a, std::span<const double> b);
double weighted_l1_avx2(std::span<const double> a, std::span<const double> b,
                        std::span<const double> inv_scale);
void axpy_avx2(double a, std::span<const double> x, std::span<double> y);
std::size_t count_greater_avx2(std::span<const double> x, double threshold);
void nearest_centroid_avx2(std::span<const double> px, std::span<const double> py,
                           std::span<const double> cx, std::span<const double> cy,
                           std::span<int> out_index, std::span<double> out_dist2);
#endif

}  // namespace detail

}  // namespace gridcast::kern
