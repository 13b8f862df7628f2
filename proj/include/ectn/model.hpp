#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "ectn/error.hpp"
#include "ectn/random.hpp"
#include "ectn/tensor.hpp"

namespace ectn {

struct ModelConfig {
  Index rank = 5;          // R
  Index expansion = 5;     // M
  double init_scale = 0.1;
  std::uint64_t seed = 1;
};

/// Which parameter block a ParamRef addresses.
enum class Block { A, B, C, D, E, F };

/// Handle to one scalar parameter. `m` and `r` are ignored where the block
/// has no such axis (C ignores m; D, E, F ignore both).
struct ParamRef {
  Block block = Block::A;
  Index entity = 0;
  Index m = 0;
  Index r = 0;
};

/// Extended CP model: y_ijk ≈ Σ_r Σ_m a_imr b_jmr c_kr + d_i + e_j + f_k.
///
/// A and B are stored row-major as (entity) × (M·R) with column m·R + r, so
/// row i of A is the contiguous (m, r) block a_i·· touched per observation.
template <typename Scalar_ = double>
class EctnModel {
 public:
  using Scalar = Scalar_;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  EctnModel() = default;

  /// Zero-initialized model. Throws InvalidConfig on non-positive dims, R or M.
  EctnModel(Dims dims, Index rank, Index expansion) : dims_(dims), rank_(rank), expansion_(expansion) {
    if (!dims.positive()) throw Error(ErrorCode::InvalidConfig, "model dims must be positive");
    if (rank < 1 || expansion < 1) throw Error(ErrorCode::InvalidConfig, "rank and expansion must be >= 1");
    A_ = Matrix::Zero(dims.users, rank * expansion);
    B_ = Matrix::Zero(dims.services, rank * expansion);
    C_ = Matrix::Zero(dims.times, rank);
    d_ = Vector::Zero(dims.users);
    e_ = Vector::Zero(dims.services);
    f_ = Vector::Zero(dims.times);
  }

  const Dims& dims() const noexcept { return dims_; }
  Index rank() const noexcept { return rank_; }
  Index expansion() const noexcept { return expansion_; }
  Index parameter_count() const noexcept {
    return A_.size() + B_.size() + C_.size() + d_.size() + e_.size() + f_.size();
  }

  Scalar& a(Index i, Index m, Index r) { return A_(i, m * rank_ + r); }
  Scalar a(Index i, Index m, Index r) const { return A_(i, m * rank_ + r); }
  Scalar& b(Index j, Index m, Index r) { return B_(j, m * rank_ + r); }
  Scalar b(Index j, Index m, Index r) const { return B_(j, m * rank_ + r); }
  Scalar& c(Index k, Index r) { return C_(k, r); }
  Scalar c(Index k, Index r) const { return C_(k, r); }

  Matrix& A() noexcept { return A_; }
  const Matrix& A() const noexcept { return A_; }
  Matrix& B() noexcept { return B_; }
  const Matrix& B() const noexcept { return B_; }
  Matrix& C() noexcept { return C_; }
  const Matrix& C() const noexcept { return C_; }
  Vector& d() noexcept { return d_; }
  const Vector& d() const noexcept { return d_; }
  Vector& e() noexcept { return e_; }
  const Vector& e() const noexcept { return e_; }
  Vector& f() noexcept { return f_; }
  const Vector& f() const noexcept { return f_; }

  Scalar& param(const ParamRef& p) {
    switch (p.block) {
      case Block::A: return a(p.entity, p.m, p.r);
      case Block::B: return b(p.entity, p.m, p.r);
      case Block::C: return c(p.entity, p.r);
      case Block::D: return d_(p.entity);
      case Block::E: return e_(p.entity);
      case Block::F: break;
    }
    return f_(p.entity);
  }
  Scalar param(const ParamRef& p) const { return const_cast<EctnModel&>(*this).param(p); }

  /// z_ij,r = Σ_m a_imr b_jmr for every r (length R).
  RowVector z_row(Index i, Index j) const {
    const RowVector ab = A_.row(i).cwiseProduct(B_.row(j));
    return Eigen::Map<const Matrix>(ab.data(), expansion_, rank_).colwise().sum();
  }

  /// Σ_r Σ_m a_imr b_jmr c_kr, unchecked. Summation runs r outer, m inner,
  /// strictly in index order, so results are reproducible bit for bit.
  Scalar core_unchecked(Index i, Index j, Index k) const {
    const Scalar* ai = A_.row(i).data();
    const Scalar* bj = B_.row(j).data();
    Scalar sum(0);
    for (Index r = 0; r < rank_; ++r) {
      Scalar z(0);
      for (Index m = 0; m < expansion_; ++m) z += ai[m * rank_ + r] * bj[m * rank_ + r];
      sum += z * C_(k, r);
    }
    return sum;
  }

  Scalar predict_unchecked(Index i, Index j, Index k) const {
    return core_unchecked(i, j, k) + d_(i) + e_(j) + f_(k);
  }

  void check_indices(Index i, Index j, Index k) const {
    if (i < 0 || i >= dims_.users || j < 0 || j >= dims_.services || k < 0 || k >= dims_.times)
      throw Error(ErrorCode::IndexOutOfRange, "prediction index (" + std::to_string(i) + "," +
                                                  std::to_string(j) + "," + std::to_string(k) +
                                                  ") outside model dims");
  }

  bool nonnegative() const {
    return (A_.array() >= 0).all() && (B_.array() >= 0).all() && (C_.array() >= 0).all() &&
           (d_.array() >= 0).all() && (e_.array() >= 0).all() && (f_.array() >= 0).all();
  }

  friend bool operator==(const EctnModel& x, const EctnModel& y) {
    return x.dims_ == y.dims_ && x.rank_ == y.rank_ && x.expansion_ == y.expansion_ && x.A_ == y.A_ &&
           x.B_ == y.B_ && x.C_ == y.C_ && x.d_ == y.d_ && x.e_ == y.e_ && x.f_ == y.f_;
  }

 private:
  Dims dims_;
  Index rank_ = 0;
  Index expansion_ = 0;
  Matrix A_, B_, C_;
  Vector d_, e_, f_;
};

using EctnModeld = EctnModel<double>;

/// Fills every parameter with an independent uniform draw from (0, init_scale].
/// Draw order: A, B, C (row-major), then d, e, f.
template <typename Scalar = double>
EctnModel<Scalar> init_random(Dims dims, const ModelConfig& cfg) {
  if (!(cfg.init_scale > 0.0)) throw Error(ErrorCode::InvalidConfig, "init_scale must be > 0");
  EctnModel<Scalar> model(dims, cfg.rank, cfg.expansion);
  Rng rng(cfg.seed);
  const auto fill = [&](auto& block) {
    Scalar* p = block.data();
    for (Index n = 0; n < block.size(); ++n) p[n] = static_cast<Scalar>(cfg.init_scale * uniform_positive(rng));
  };
  fill(model.A());
  fill(model.B());
  fill(model.C());
  fill(model.d());
  fill(model.e());
  fill(model.f());
  return model;
}

template <typename Scalar>
Scalar predict_core(const EctnModel<Scalar>& model, Index i, Index j, Index k) {
  model.check_indices(i, j, k);
  return model.core_unchecked(i, j, k);
}

template <typename Scalar>
Scalar predict(const EctnModel<Scalar>& model, Index i, Index j, Index k) {
  model.check_indices(i, j, k);
  return model.predict_unchecked(i, j, k);
}

/// Z_r = A_r B_rᵀ, with A_r the |I|×M frontal slice (columns r, R+r, ...).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> intermediate_z(const EctnModel<Scalar>& model, Index r) {
  if (r < 0 || r >= model.rank()) throw Error(ErrorCode::IndexOutOfRange, "rank index " + std::to_string(r));
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto cols = Eigen::seqN(r, model.expansion(), model.rank());
  const Mat a_r = model.A()(Eigen::all, cols);
  const Mat b_r = model.B()(Eigen::all, cols);
  return a_r * b_r.transpose();
}

/// With M = 1 the model must coincide with a biased CP model whose factor
/// columns are a_i0r, b_j0r, c_kr. Compares every (i,j,k) exactly.
template <typename Scalar>
bool as_biased_cp_check(const EctnModel<Scalar>& model) {
  if (model.expansion() != 1) throw Error(ErrorCode::ExpansionNotOne, "expansion must be 1");
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Mat U = model.A();
  const Mat V = model.B();
  const Mat W = model.C();
  const Dims& n = model.dims();
  for (Index i = 0; i < n.users; ++i)
    for (Index j = 0; j < n.services; ++j)
      for (Index k = 0; k < n.times; ++k) {
        Scalar cp(0);
        for (Index r = 0; r < model.rank(); ++r) cp += U(i, r) * V(j, r) * W(k, r);
        cp = cp + model.d()(i) + model.e()(j) + model.f()(k);
        if (cp != model.predict_unchecked(i, j, k)) return false;
      }
  return true;
}

}  // namespace ectn
