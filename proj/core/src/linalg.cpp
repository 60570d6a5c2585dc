#include "fmlab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fmlab {

EigenSym eigh(const std::vector<double>& a_in, size_t d) {
  if (a_in.size() != d * d) throw std::invalid_argument("eigh: bad matrix size");
  std::vector<double> a(d * d);
  for (size_t i = 0; i < d; ++i) {
    for (size_t j = 0; j < d; ++j) {
      a[i * d + j] = 0.5 * (a_in[i * d + j] + a_in[j * d + i]);
    }
  }
  std::vector<double> v(d * d, 0.0);
  for (size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;

  auto off_diag = [&]() {
    double s = 0.0;
    for (size_t i = 0; i < d; ++i) {
      for (size_t j = i + 1; j < d; ++j) s += a[i * d + j] * a[i * d + j];
    }
    return s;
  };

  for (int sweep = 0; sweep < 100 && off_diag() > 1e-30; ++sweep) {
    for (size_t p = 0; p < d; ++p) {
      for (size_t q = p + 1; q < d; ++q) {
        double apq = a[p * d + q];
        if (std::abs(apq) < 1e-300) continue;
        double app = a[p * d + p], aqq = a[q * d + q];
        double tau = (aqq - app) / (2.0 * apq);
        double t = (tau >= 0 ? 1.0 : -1.0) /
                   (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        for (size_t i = 0; i < d; ++i) {
          double aip = a[i * d + p], aiq = a[i * d + q];
          a[i * d + p] = c * aip - s * aiq;
          a[i * d + q] = s * aip + c * aiq;
        }
        for (size_t i = 0; i < d; ++i) {
          double api = a[p * d + i], aqi = a[q * d + i];
          a[p * d + i] = c * api - s * aqi;
          a[q * d + i] = s * api + c * aqi;
        }
        for (size_t i = 0; i < d; ++i) {
          double vip = v[i * d + p], viq = v[i * d + q];
          v[i * d + p] = c * vip - s * viq;
          v[i * d + q] = s * vip + c * viq;
        }
      }
    }
  }

  EigenSym out;
  out.values.resize(d);
  for (size_t i = 0; i < d; ++i) out.values[i] = a[i * d + i];
  // Sort ascending, permuting columns of v accordingly.
  std::vector<size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t x, size_t y) { return out.values[x] < out.values[y]; });
  EigenSym sorted;
  sorted.values.resize(d);
  sorted.vectors.assign(d * d, 0.0);
  for (size_t j = 0; j < d; ++j) {
    sorted.values[j] = out.values[order[j]];
    for (size_t i = 0; i < d; ++i) {
      sorted.vectors[i * d + j] = v[i * d + order[j]];
    }
  }
  return sorted;
}

std::vector<double> matmul_sq(const std::vector<double>& a,
                              const std::vector<double>& b, size_t d) {
  std::vector<double> c(d * d, 0.0);
  for (size_t i = 0; i < d; ++i) {
    for (size_t k = 0; k < d; ++k) {
      double aik = a[i * d + k];
      for (size_t j = 0; j < d; ++j) c[i * d + j] += aik * b[k * d + j];
    }
  }
  return c;
}

void mean_cov(const std::vector<double>& x, size_t n, size_t d,
              std::vector<double>& mean, std::vector<double>& cov) {
  if (n == 0) throw std::invalid_argument("mean_cov: empty input");
  mean.assign(d, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t c = 0; c < d; ++c) mean[c] += x[i * d + c];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  cov.assign(d * d, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t r = 0; r < d; ++r) {
      double dr = x[i * d + r] - mean[r];
      for (size_t c = r; c < d; ++c) {
        cov[r * d + c] += dr * (x[i * d + c] - mean[c]);
      }
    }
  }
  for (size_t r = 0; r < d; ++r) {
    for (size_t c = r; c < d; ++c) {
      cov[r * d + c] /= static_cast<double>(n);
      cov[c * d + r] = cov[r * d + c];
    }
  }
}

}  // namespace fmlab
