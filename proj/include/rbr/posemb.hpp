#ifndef RBR_POSEMB_HPP_
#define RBR_POSEMB_HPP_

#include <cstddef>
#include <vector>

namespace rbr {

/// k-th of n frequencies spaced geometrically from 1 to 1e4 (n == 1 gives 1).
double ladder_frequency(std::size_t k, std::size_t n);

/// Appends (sin(f_k u), cos(f_k u)) for k in [0, num_freqs).
void append_sinusoid(double u, std::size_t num_freqs, std::vector<float>& out);

/// Row block then column block; emb_dim must be divisible by 4.
std::vector<float> sinusoid_2d(double row, double col, std::size_t emb_dim);

/// x, y, z blocks; emb_dim must be divisible by 6.
std::vector<float> sinusoid_3d(double x, double y, double z,
                               std::size_t emb_dim);

}  // namespace rbr

#endif  // RBR_POSEMB_HPP_
