#pragma once

// Small dense/convolutional layers with hand-written backward passes.
//
// Activations of spatial layers are row-major (channels, batch * H * W)
// matrices, so each channel plane of each sample is contiguous. Dense
// activations are column-major (features, batch).

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trussrl/rng.hpp"

namespace trussrl::nn {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <class T>
struct Parameter {
    std::string name;
    Matrix<T> value;
    Matrix<T> grad;

    Parameter() = default;
    Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Matrix<T>::Zero(rows, cols)), grad(Matrix<T>::Zero(rows, cols)) {}
};

template <class T>
void init_normal(Matrix<T>& m, double stddev, Rng& rng) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = static_cast<T>(stddev * rng.normal());
}

/// 3x3 convolution with stride 1 and zero padding 1, preserving spatial size.
template <class T>
class Conv2d {
public:
    Conv2d(int in_channels, int out_channels, int height, int width, const std::string& name)
        : in_(in_channels), out_(out_channels), height_(height), width_(width),
          weight(name + ".weight", out_channels, in_channels * 9), bias(name + ".bias", out_channels, 1) {}

    void init(Rng& rng) {
        init_normal(weight.value, std::sqrt(2.0 / (in_ * 9)), rng);
        bias.value.setZero();
    }

    RowMatrix<T> forward(const RowMatrix<T>& x, int batch) {
        im2col(x, batch);
        RowMatrix<T> y = weight.value * cols_;
        y.colwise() += bias.value.col(0);
        return y;
    }

    RowMatrix<T> backward(const RowMatrix<T>& dy, int batch) {
        weight.grad.noalias() += dy * cols_.transpose();
        bias.grad.col(0) += dy.rowwise().sum();
        const RowMatrix<T> dcols = weight.value.transpose() * dy;
        return col2im(dcols, batch);
    }

    int in_channels() const { return in_; }
    int out_channels() const { return out_; }

    Parameter<T> weight;
    Parameter<T> bias;

private:
    void im2col(const RowMatrix<T>& x, int batch) {
        const int P = height_ * width_;
        cols_.setZero(in_ * 9, static_cast<Eigen::Index>(batch) * P);
        for (int c = 0; c < in_; ++c)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    T* dst = cols_.row(c * 9 + ky * 3 + kx).data();
                    const T* src = x.row(c).data();
                    const int dy = ky - 1, dx = kx - 1;
                    for (int b = 0; b < batch; ++b)
                        for (int y = 0; y < height_; ++y) {
                            const int sy = y + dy;
                            if (sy < 0 || sy >= height_) continue;
                            const int x0 = std::max(0, -dx), x1 = std::min(width_, width_ - dx);
                            const T* s = src + b * P + sy * width_ + dx;
                            T* d = dst + b * P + y * width_;
                            for (int xx = x0; xx < x1; ++xx) d[xx] = s[xx];
                        }
                }
    }

    RowMatrix<T> col2im(const RowMatrix<T>& dcols, int batch) const {
        const int P = height_ * width_;
        RowMatrix<T> dx = RowMatrix<T>::Zero(in_, static_cast<Eigen::Index>(batch) * P);
        for (int c = 0; c < in_; ++c)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const T* src = dcols.row(c * 9 + ky * 3 + kx).data();
                    T* dst = dx.row(c).data();
                    const int dy = ky - 1, ddx = kx - 1;
                    for (int b = 0; b < batch; ++b)
                        for (int y = 0; y < height_; ++y) {
                            const int sy = y + dy;
                            if (sy < 0 || sy >= height_) continue;
                            const int x0 = std::max(0, -ddx), x1 = std::min(width_, width_ - ddx);
                            const T* s = src + b * P + y * width_;
                            T* d = dst + b * P + sy * width_ + ddx;
                            for (int xx = x0; xx < x1; ++xx) d[xx] += s[xx];
                        }
                }
        return dx;
    }

    int in_, out_, height_, width_;
    RowMatrix<T> cols_;
};

/// Per-sample normalisation over all (channel, position) entries with a
/// per-channel affine transform.
template <class T>
class LayerNorm2d {
public:
    LayerNorm2d(int channels, int positions, const std::string& name)
        : channels_(channels), positions_(positions), gamma(name + ".gamma", channels, 1), beta(name + ".beta", channels, 1) {
        gamma.value.setOnes();
    }

    RowMatrix<T> forward(const RowMatrix<T>& x, int batch) {
        const int P = positions_;
        const T n = static_cast<T>(channels_ * P);
        xhat_.resize(x.rows(), x.cols());
        inv_std_.resize(batch);
        RowMatrix<T> y(x.rows(), x.cols());
        for (int b = 0; b < batch; ++b) {
            const auto block = x.middleCols(static_cast<Eigen::Index>(b) * P, P);
            const T mean = block.sum() / n;
            const T var = (block.array() - mean).square().sum() / n;
            const T inv = T(1) / std::sqrt(var + T(kEps));
            inv_std_(b) = inv;
            xhat_.middleCols(static_cast<Eigen::Index>(b) * P, P) = (block.array() - mean) * inv;
        }
        for (int c = 0; c < channels_; ++c)
            y.row(c) = xhat_.row(c).array() * gamma.value(c, 0) + beta.value(c, 0);
        return y;
    }

    RowMatrix<T> backward(const RowMatrix<T>& dy, int batch) {
        const int P = positions_;
        const T n = static_cast<T>(channels_ * P);
        RowMatrix<T> dxhat(dy.rows(), dy.cols());
        for (int c = 0; c < channels_; ++c) {
            gamma.grad(c, 0) += (dy.row(c).array() * xhat_.row(c).array()).sum();
            beta.grad(c, 0) += dy.row(c).sum();
            dxhat.row(c) = dy.row(c) * gamma.value(c, 0);
        }
        RowMatrix<T> dx(dy.rows(), dy.cols());
        for (int b = 0; b < batch; ++b) {
            const auto g = dxhat.middleCols(static_cast<Eigen::Index>(b) * P, P);
            const auto xh = xhat_.middleCols(static_cast<Eigen::Index>(b) * P, P);
            const T sum_g = g.sum();
            const T sum_gx = (g.array() * xh.array()).sum();
            dx.middleCols(static_cast<Eigen::Index>(b) * P, P) =
                (inv_std_(b) / n) * (n * g.array() - sum_g - xh.array() * sum_gx);
        }
        return dx;
    }

    Parameter<T> gamma;
    Parameter<T> beta;

private:
    static constexpr double kEps = 1e-5;
    int channels_, positions_;
    RowMatrix<T> xhat_;
    Vector<T> inv_std_;
};

template <class T>
class Linear {
public:
    Linear(int in, int out, const std::string& name) : weight(name + ".weight", out, in), bias(name + ".bias", out, 1) {}

    void init(Rng& rng, double stddev) {
        init_normal(weight.value, stddev, rng);
        bias.value.setZero();
    }

    Matrix<T> forward(const Matrix<T>& x) {
        input_ = x;
        Matrix<T> y = weight.value * x;
        y.colwise() += bias.value.col(0);
        return y;
    }

    Matrix<T> backward(const Matrix<T>& dy) {
        weight.grad.noalias() += dy * input_.transpose();
        bias.grad.col(0) += dy.rowwise().sum();
        return weight.value.transpose() * dy;
    }

    Parameter<T> weight;
    Parameter<T> bias;

private:
    Matrix<T> input_;
};

/// Adam with bias correction; state is kept per parameter in registration order.
template <class T>
class Adam {
public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-5)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Parameter<T>*>& params, double lr) {
        ensure_state(params);
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        const T step = static_cast<T>(lr * std::sqrt(c2) / c1);
        const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
        const T eps = static_cast<T>(eps_ * std::sqrt(c2));
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto& g = params[k]->grad;
            m_[k] = b1 * m_[k] + (T(1) - b1) * g;
            v_[k] = b2 * v_[k] + (T(1) - b2) * g.cwiseProduct(g);
            params[k]->value.array() -= step * m_[k].array() / (v_[k].array().sqrt() + eps);
        }
    }

    long long steps() const { return t_; }
    void set_steps(long long t) { t_ = t; }
    std::vector<Matrix<T>>& first_moments() { return m_; }
    std::vector<Matrix<T>>& second_moments() { return v_; }

    void ensure_state(const std::vector<Parameter<T>*>& params) {
        if (!m_.empty()) return;
        for (auto* p : params) {
            m_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
            v_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
        }
    }

private:
    double beta1_, beta2_, eps_;
    long long t_ = 0;
    std::vector<Matrix<T>> m_, v_;
};

template <class T>
double grad_norm(const std::vector<Parameter<T>*>& params) {
    double s = 0;
    for (auto* p : params) s += static_cast<double>(p->grad.squaredNorm());
    return std::sqrt(s);
}

/// Scales gradients so their global L2 norm is at most max_norm; returns the norm before clipping.
template <class T>
double clip_grad_norm(const std::vector<Parameter<T>*>& params, double max_norm) {
    const double norm = grad_norm(params);
    if (max_norm > 0 && norm > max_norm) {
        const T scale = static_cast<T>(max_norm / (norm + 1e-6));
        for (auto* p : params) p->grad *= scale;
    }
    return norm;
}

}  // namespace trussrl::nn
