#pragma once

// Orthogonal and biorthogonal block transforms (DCT-II, Hadamard, block
// wavelet) in 1D and separable 2D form, plus matrix-product references and
// convolution oracles used by the property suites.

#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "tpnet/tensor.hpp"

namespace tpnet::transforms {

enum class TransformKind { DCT, HT, BWT };

std::string_view to_string(TransformKind kind);
TransformKind parse_transform_kind(std::string_view name);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);
int log2_exact(std::size_t n);

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Two-channel analysis filter bank applied as a full M-stage subband tree.
// Filtering is periodic per stage; both branches are split at every stage.
struct FilterBankSpec {
  std::vector<double> h;  // low-pass
  std::vector<double> g;  // high-pass
  int stages = 1;

  static FilterBankSpec hadamard(std::size_t n);
  static FilterBankSpec bior13(std::size_t n);
};

// Polyphase synthesis taps recovering x[2i + r] from the low/high branches:
//   x[2i + r] = sum_j low_r[j] * low[i + first + j] + high_r[j] * high[i + first + j]
struct SynthesisFilters {
  int first = 0;
  std::vector<double> low_even, high_even, low_odd, high_odd;
};

// Inverts one periodic analysis stage numerically and reads off the taps.
// Requires the analysis polyphase matrix to have an FIR inverse.
SynthesisFilters derive_synthesis(const std::vector<double>& h, const std::vector<double>& g);

// One analysis stage on a branch of even length L: [low (L/2) | high (L/2)].
Matrix<double> analysis_stage_matrix(const std::vector<double>& h, const std::vector<double>& g,
                                     std::size_t length);

template <std::floating_point T>
std::vector<T> dct1d(std::span<const T> x);
template <std::floating_point T>
std::vector<T> idct1d(std::span<const T> x);

// X = H_N x / sqrt(N); self-inverse.
template <std::floating_point T>
std::vector<T> ht1d(std::span<const T> x);

// Output subbands are ordered depth-first with the low-pass branch first.
template <std::floating_point T>
std::vector<T> bwt1d(std::span<const T> x, const FilterBankSpec& spec);
template <std::floating_point T>
std::vector<T> ibwt1d(std::span<const T> x, const FilterBankSpec& spec);

// Separable 2D transform over the last two axes of a [C, H, W] tensor.
template <std::floating_point T>
BasicTensor<T> transform2d(const BasicTensor<T>& x, TransformKind kind, bool inverse);

// Transform matrices assembled from the defining formulas (DCT cosine kernel,
// Kronecker Hadamard recursion, product of filter-bank stage matrices).
Matrix<double> dct_matrix(std::size_t n);
Matrix<double> idct_matrix(std::size_t n);
Matrix<double> hadamard_matrix(std::size_t n);  // unnormalized, entries +-1
Matrix<double> bwt_matrix(std::size_t n, const FilterBankSpec& spec);
Matrix<double> transform_matrix(TransformKind kind, std::size_t n, bool inverse);

// Reference 2D transform: Y = M_h X M_w^T per channel.
template <std::floating_point T>
BasicTensor<T> matrix_oracle2d(const BasicTensor<T>& x, TransformKind kind, bool inverse);

// Zero-pads the last two axes up to powers of two (rank 3 or 4).
template <typename T>
BasicTensor<T> pad_pow2(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> truncate(const BasicTensor<T>& x, std::size_t height, std::size_t width);

// Keeps the low-frequency quarter of a DCT-domain [C, H, W] tensor and
// inverts it at half size.
template <std::floating_point T>
BasicTensor<T> idct2_truncate(const BasicTensor<T>& x);

// a~[k] = a[|N - 1 - k|], k = 0..2N-2.
template <std::floating_point T>
std::vector<T> symmetric_extend_kernel(std::span<const T> a);

// y = a~ * x with x extended half-sample symmetrically at both ends and the
// kernel centred on its middle tap.
template <std::floating_point T>
std::vector<T> symmetric_convolve_oracle(std::span<const T> a, std::span<const T> x);

// y[n] = sum_m a[m] x[n xor m].
template <std::floating_point T>
std::vector<T> dyadic_convolve_oracle(std::span<const T> a, std::span<const T> x);

}  // namespace tpnet::transforms
