#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace advlab {

// Row-major dense matrix of doubles. resize() keeps capacity so hot loops
// can reuse one buffer across batches without reallocating.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.resize(r * c);
  }

  void fill(double v) { data.assign(data.size(), v); }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return data.size(); }
};

// out[n x o] = x[n x i] * W^T + b, with W stored [o x i].
inline void affine_forward(const Mat& x, const Mat& w,
                           const std::vector<double>& b, Mat& out) {
  if (x.cols != w.cols) throw std::invalid_argument("affine_forward: inner dimensions differ");
  if (b.size() != w.rows) throw std::invalid_argument("affine_forward: bias length differs from output width");
  out.resize(x.rows, w.rows);
  for (std::size_t n = 0; n < x.rows; ++n) {
    const double* xr = x.row(n);
    double* or_ = out.row(n);
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double* wr = w.row(o);
      double acc = b[o];
      for (std::size_t i = 0; i < x.cols; ++i) acc += xr[i] * wr[i];
      or_[o] = acc;
    }
  }
}

// Gradients of the affine map above given upstream dL/dout.
//   dW[o x i] += sum_n dout[n][o] * x[n][i]
//   db[o]     += sum_n dout[n][o]
//   dx[n x i]  = dout[n x o] * W
inline void affine_backward(const Mat& x, const Mat& w, const Mat& dout,
                            Mat& dw, std::vector<double>& db, Mat& dx) {
  dw.resize(w.rows, w.cols);
  dw.fill(0.0);
  db.assign(w.rows, 0.0);
  dx.resize(x.rows, x.cols);
  for (std::size_t n = 0; n < x.rows; ++n) {
    const double* xr = x.row(n);
    const double* dr = dout.row(n);
    double* dxr = dx.row(n);
    for (std::size_t i = 0; i < x.cols; ++i) dxr[i] = 0.0;
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double g = dr[o];
      db[o] += g;
      double* dwr = dw.row(o);
      const double* wr = w.row(o);
      for (std::size_t i = 0; i < x.cols; ++i) {
        dwr[i] += g * xr[i];
        dxr[i] += g * wr[i];
      }
    }
  }
}

// Input gradient alone: dx[n x i] = dout[n x o] * W[o x i].
inline void affine_backward_input(const Mat& w, const Mat& dout, Mat& dx) {
  dx.resize(dout.rows, w.cols);
  for (std::size_t n = 0; n < dout.rows; ++n) {
    const double* dr = dout.row(n);
    double* dxr = dx.row(n);
    for (std::size_t i = 0; i < w.cols; ++i) dxr[i] = 0.0;
    for (std::size_t o = 0; o < w.rows; ++o) {
      const double g = dr[o];
      const double* wr = w.row(o);
      for (std::size_t i = 0; i < w.cols; ++i) dxr[i] += g * wr[i];
    }
  }
}

inline void relu_forward(const Mat& x, Mat& out) {
  out.resize(x.rows, x.cols);
  for (std::size_t i = 0; i < x.size(); ++i)
    out.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
}

// ReLU derivative at exactly zero is taken as zero.
inline void relu_backward(const Mat& pre, const Mat& dout, Mat& dx) {
  dx.resize(pre.rows, pre.cols);
  for (std::size_t i = 0; i < pre.size(); ++i)
    dx.data[i] = pre.data[i] > 0.0 ? dout.data[i] : 0.0;
}

}  // namespace advlab
