#include "rbr/posemb.hpp"

#include <cmath>
#include <string>

#include "rbr/error.hpp"

namespace rbr {

double ladder_frequency(std::size_t k, std::size_t n) {
  if (n <= 1) return 1.0;
  return std::pow(1.0e4, static_cast<double>(k) / static_cast<double>(n - 1));
}

void append_sinusoid(double u, std::size_t num_freqs, std::vector<float>& out) {
  for (std::size_t k = 0; k < num_freqs; ++k) {
    const double angle = ladder_frequency(k, num_freqs) * u;
    out.push_back(static_cast<float>(std::sin(angle)));
    out.push_back(static_cast<float>(std::cos(angle)));
  }
}

std::vector<float> sinusoid_2d(double row, double col, std::size_t emb_dim) {
  if (emb_dim == 0 || emb_dim % 4 != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "2D embedding size must be a positive multiple of 4, got " +
                    std::to_string(emb_dim));
  }
  std::vector<float> out;
  out.reserve(emb_dim);
  append_sinusoid(row, emb_dim / 4, out);
  append_sinusoid(col, emb_dim / 4, out);
  return out;
}

std::vector<float> sinusoid_3d(double x, double y, double z,
                               std::size_t emb_dim) {
  if (emb_dim == 0 || emb_dim % 6 != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "3D embedding size must be a positive multiple of 6, got " +
                    std::to_string(emb_dim));
  }
  std::vector<float> out;
  out.reserve(emb_dim);
  append_sinusoid(x, emb_dim / 6, out);
  append_sinusoid(y, emb_dim / 6, out);
  append_sinusoid(z, emb_dim / 6, out);
  return out;
}

}  // namespace rbr
