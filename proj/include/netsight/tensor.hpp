#pragma once

#include <array>
#include <cmath>
#include <initializer_list>
#include <memory>
#include <vector>

#include "netsight/common.hpp"

namespace netsight {

/// Dense value container of rank 1..3 with an optional gradient slot of the
/// same shape. Rank-1 tensors map to a 1×k row, rank-2 to a matrix; rank-3
/// tensors expose per-leading-index matrix slices. Storage is row-major.
class Tensor {
public:
    Tensor() = default;
    Tensor(Tensor&&) = default;
    Tensor& operator=(Tensor&&) = default;
    Tensor(const Tensor& o)
        : rank_(o.rank_), dims_(o.dims_), values_(o.values_) {
        if (o.grad_) grad_ = std::make_unique<std::vector<Scalar>>(*o.grad_);
    }
    Tensor& operator=(const Tensor& o) {
        if (this != &o) {
            rank_ = o.rank_;
            dims_ = o.dims_;
            values_ = o.values_;
            grad_ = o.grad_ ? std::make_unique<std::vector<Scalar>>(*o.grad_) : nullptr;
        }
        return *this;
    }

    static Tensor zeros(std::initializer_list<Eigen::Index> dims) {
        return Tensor(std::vector<Eigen::Index>(dims));
    }
    static Tensor zeros(const std::vector<Eigen::Index>& dims) { return Tensor(dims); }

    static Tensor scalar(Scalar v) {
        Tensor t({1, 1});
        t.values_[0] = v;
        return t;
    }

    static Tensor row(const std::vector<Scalar>& v) {
        Tensor t(std::vector<Eigen::Index>{static_cast<Eigen::Index>(v.size())});
        t.values_ = v;
        return t;
    }

    static Tensor from_matrix(const Matrix& m) {
        Tensor t({m.rows(), m.cols()});
        t.mat() = m;
        return t;
    }

    int rank() const { return rank_; }
    Eigen::Index dim(int i) const { return dims_[static_cast<size_t>(i)]; }
    Eigen::Index size() const { return static_cast<Eigen::Index>(values_.size()); }

    /// Rows/cols of the 2-D view (rank-1 maps to 1×k; invalid for rank 3).
    Eigen::Index rows() const { return rank_ == 1 ? 1 : dims_[0]; }
    Eigen::Index cols() const { return rank_ == 1 ? dims_[0] : dims_[1]; }

    MatMap mat() {
        require(rank_ <= 2, "Tensor::mat requires rank <= 2");
        return MatMap(values_.data(), rows(), cols());
    }
    CMatMap mat() const {
        require(rank_ <= 2, "Tensor::mat requires rank <= 2");
        return CMatMap(values_.data(), rows(), cols());
    }

    /// Matrix slice t of a rank-3 tensor.
    MatMap slice(Eigen::Index t) {
        require(rank_ == 3, "Tensor::slice requires rank 3");
        return MatMap(values_.data() + t * dims_[1] * dims_[2], dims_[1], dims_[2]);
    }
    CMatMap slice(Eigen::Index t) const {
        require(rank_ == 3, "Tensor::slice requires rank 3");
        return CMatMap(values_.data() + t * dims_[1] * dims_[2], dims_[1], dims_[2]);
    }

    ArrMap flat() { return ArrMap(values_.data(), size()); }
    CArrMap flat() const { return CArrMap(values_.data(), size()); }

    Scalar& operator()(Eigen::Index i) { return values_[static_cast<size_t>(i)]; }
    Scalar operator()(Eigen::Index i) const { return values_[static_cast<size_t>(i)]; }
    Scalar& operator()(Eigen::Index r, Eigen::Index c) {
        return values_[static_cast<size_t>(r * cols() + c)];
    }
    Scalar operator()(Eigen::Index r, Eigen::Index c) const {
        return values_[static_cast<size_t>(r * cols() + c)];
    }

    bool same_shape(const Tensor& o) const { return rank_ == o.rank_ && dims_ == o.dims_; }

    bool all_finite() const {
        for (Scalar v : values_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool has_grad() const { return grad_ != nullptr; }

    /// Allocates (zeroed) the gradient slot if absent.
    void ensure_grad() {
        if (!grad_) grad_ = std::make_unique<std::vector<Scalar>>(values_.size(), 0.0);
    }

    MatMap grad_mat() {
        ensure_grad();
        return MatMap(grad_->data(), rows(), cols());
    }
    CMatMap grad_mat() const {
        require(grad_ != nullptr, "gradient not allocated");
        return CMatMap(grad_->data(), rows(), cols());
    }
    ArrMap grad_flat() {
        ensure_grad();
        return ArrMap(grad_->data(), size());
    }
    CArrMap grad_flat() const {
        require(grad_ != nullptr, "gradient not allocated");
        return CArrMap(grad_->data(), size());
    }

    Tensor clone_value() const {
        Tensor t;
        t.rank_ = rank_;
        t.dims_ = dims_;
        t.values_ = values_;
        return t;
    }

private:
    explicit Tensor(const std::vector<Eigen::Index>& dims) {
        require(!dims.empty() && dims.size() <= 3, "Tensor rank must be 1..3");
        rank_ = static_cast<int>(dims.size());
        Eigen::Index n = 1;
        for (size_t i = 0; i < dims.size(); ++i) {
            require(dims[i] >= 1, "Tensor dims must be positive");
            dims_[i] = dims[i];
            n *= dims[i];
        }
        values_.assign(static_cast<size_t>(n), 0.0);
    }

    int rank_ = 0;
    std::array<Eigen::Index, 3> dims_{1, 1, 1};
    std::vector<Scalar> values_;
    std::unique_ptr<std::vector<Scalar>> grad_;
};

}  // namespace netsight
