#pragma once

#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "detm/errors.hpp"

namespace detm {

/// Matrix-valued affine form c0 + sum_k y_k * coeff[k] over scalar decision
/// variables indexed into a flat vector y.
class AffineMat {
  public:
    AffineMat() = default;
    AffineMat(Eigen::Index rows, Eigen::Index cols)
        : rows_(rows), cols_(cols), c0_(Eigen::MatrixXd::Zero(rows, cols)) {}

    static AffineMat constant(Eigen::MatrixXd m) {
        AffineMat a(m.rows(), m.cols());
        a.c0_ = std::move(m);
        return a;
    }

    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return cols_; }
    const Eigen::MatrixXd& constant_part() const { return c0_; }
    const std::map<int, Eigen::MatrixXd>& terms() const { return lin_; }

    void add_term(int var, const Eigen::MatrixXd& coeff) {
        auto it = lin_.find(var);
        if (it == lin_.end())
            lin_.emplace(var, coeff);
        else
            it->second += coeff;
    }

    AffineMat& operator+=(const AffineMat& o) {
        check_same(o);
        c0_ += o.c0_;
        for (const auto& [k, v] : o.lin_) add_term(k, v);
        return *this;
    }

    AffineMat& operator-=(const AffineMat& o) {
        check_same(o);
        c0_ -= o.c0_;
        for (const auto& [k, v] : o.lin_) add_term(k, -v);
        return *this;
    }

    AffineMat scaled(double f) const {
        AffineMat out(rows_, cols_);
        out.c0_ = f * c0_;
        for (const auto& [k, v] : lin_) out.lin_.emplace(k, f * v);
        return out;
    }

    AffineMat transposed() const {
        AffineMat out(cols_, rows_);
        out.c0_ = c0_.transpose();
        for (const auto& [k, v] : lin_) out.lin_.emplace(k, v.transpose());
        return out;
    }

    friend AffineMat operator*(const Eigen::MatrixXd& lhs, const AffineMat& a) {
        AffineMat out(lhs.rows(), a.cols_);
        out.c0_ = lhs * a.c0_;
        for (const auto& [k, v] : a.lin_) out.lin_.emplace(k, lhs * v);
        return out;
    }

    friend AffineMat operator*(const AffineMat& a, const Eigen::MatrixXd& rhs) {
        AffineMat out(a.rows_, rhs.cols());
        out.c0_ = a.c0_ * rhs;
        for (const auto& [k, v] : a.lin_) out.lin_.emplace(k, v * rhs);
        return out;
    }

    friend AffineMat operator+(AffineMat a, const AffineMat& b) { return a += b; }
    friend AffineMat operator-(AffineMat a, const AffineMat& b) { return a -= b; }

    /// Kronecker product of a constant with this form.
    AffineMat kron_left(const Eigen::MatrixXd& k) const {
        AffineMat out(k.rows() * rows_, k.cols() * cols_);
        out.c0_ = kron_dense(k, c0_);
        for (const auto& [idx, v] : lin_) out.lin_.emplace(idx, kron_dense(k, v));
        return out;
    }

    /// Accumulates `small` into this form at block offset (r0, c0).
    void place(Eigen::Index r0, Eigen::Index c0, const AffineMat& small) {
        if (r0 + small.rows_ > rows_ || c0 + small.cols_ > cols_)
            throw DimensionMismatch("affine block placement out of range");
        c0_.block(r0, c0, small.rows_, small.cols_) += small.c0_;
        for (const auto& [k, v] : small.lin_) {
            auto it = lin_.find(k);
            if (it == lin_.end())
                it = lin_.emplace(k, Eigen::MatrixXd::Zero(rows_, cols_)).first;
            it->second.block(r0, c0, small.rows_, small.cols_) += v;
        }
    }

    Eigen::MatrixXd eval(const Eigen::VectorXd& y) const {
        Eigen::MatrixXd m = c0_;
        for (const auto& [k, v] : lin_) m += y(k) * v;
        return m;
    }

    double max_asymmetry() const {
        double worst = (c0_ - c0_.transpose()).cwiseAbs().maxCoeff();
        for (const auto& [k, v] : lin_)
            worst = std::max(worst, (v - v.transpose()).cwiseAbs().maxCoeff());
        return worst;
    }

  private:
    static Eigen::MatrixXd kron_dense(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
        Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j)
                out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        return out;
    }

    void check_same(const AffineMat& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw DimensionMismatch("affine matrix shape mismatch");
    }

    Eigen::Index rows_ = 0;
    Eigen::Index cols_ = 0;
    Eigen::MatrixXd c0_;
    std::map<int, Eigen::MatrixXd> lin_;
};

/// Allocates scalar decision variables and hands out matrix views over them.
class VariableSpace {
  public:
    int count() const { return count_; }

    /// Fresh symmetric k x k matrix variable (k(k+1)/2 scalars).
    AffineMat symmetric(int k) {
        AffineMat a(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = i; j < k; ++j) {
                Eigen::MatrixXd e = Eigen::MatrixXd::Zero(k, k);
                e(i, j) = 1.0;
                e(j, i) = 1.0;
                a.add_term(count_++, e);
            }
        return a;
    }

    /// Fresh full r x c matrix variable (r*c scalars).
    AffineMat full(int r, int c) {
        AffineMat a(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) {
                Eigen::MatrixXd e = Eigen::MatrixXd::Zero(r, c);
                e(i, j) = 1.0;
                a.add_term(count_++, e);
            }
        return a;
    }

  private:
    int count_ = 0;
};

}  // namespace detm
