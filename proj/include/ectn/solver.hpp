#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <span>
#include <thread>
#include <vector>

#include "ectn/data.hpp"
#include "ectn/error.hpp"
#include "ectn/model.hpp"
#include "ectn/tensor.hpp"

namespace ectn {

/// Order in which one epoch applies the multiplicative rule.
enum class Schedule {
  /// A, then B, then C, then (d, e, f); ŷ is recomputed before each block.
  Sequential,
  /// Every N, D from the start-of-epoch model, all blocks applied at once.
  /// Prone to growing period-2 oscillation near a fit.
  Simultaneous,
};

struct UpdateOptions {
  /// Parameters whose update denominator falls below this are left unchanged.
  double min_denominator = 1e-12;
  /// The training set is cut into this many contiguous chunks whose
  /// accumulators are reduced in chunk order. Results depend on `partitions`
  /// only, never on `threads`.
  std::size_t partitions = 1;
  std::size_t threads = 1;
  Schedule schedule = Schedule::Sequential;
};

struct TrainConfig {
  ModelConfig model;
  double lambda = 0.0;
  Index max_epochs = 1000;
  double tol = 1e-5;
  UpdateOptions update;
};

/// Parameter blocks as a bit mask.
enum BlockMask : unsigned {
  kBlockA = 1u,
  kBlockB = 2u,
  kBlockC = 4u,
  kBlockBias = 8u,  // d, e and f together
  kAllBlocks = 15u,
};

struct TrainReport {
  Index epochs_run = 0;
  double initial_loss = 0.0;
  std::vector<double> loss_trace;    // objective after each epoch
  std::vector<double> epoch_seconds;
  bool converged = false;            // false: stopped by the epoch cap
  double wall_time_per_epoch = 0.0;  // mean of epoch_seconds
};

template <typename Scalar>
struct TrainResult {
  EctnModel<Scalar> model;
  TrainReport report;
};

namespace detail {

template <typename Scalar>
void check_dims(const EctnModel<Scalar>& model, const ObservedTensor& t) {
  if (model.dims() != t.dims()) throw Error(ErrorCode::DimMismatch, "model and tensor dims differ");
}

inline void check_config(const TrainConfig& cfg) {
  if (!(cfg.lambda >= 0.0)) throw Error(ErrorCode::InvalidConfig, "lambda must be >= 0");
  if (!(cfg.tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "tol must be > 0");
  if (cfg.max_epochs < 1) throw Error(ErrorCode::InvalidConfig, "max_epochs must be >= 1");
  if (!(cfg.update.min_denominator > 0.0)) throw Error(ErrorCode::InvalidConfig, "min_denominator must be > 0");
  if (cfg.update.partitions < 1 || cfg.update.threads < 1)
    throw Error(ErrorCode::InvalidConfig, "partitions and threads must be >= 1");
}

}  // namespace detail

/// Regularized training objective over the given positions:
///   Σ (y − ŷ)² + λ (‖a_i··‖² + ‖b_j··‖² + ‖c_k·‖² + d_i² + e_j² + f_k²)
/// with the penalty charged once per observed entry.
template <typename Scalar>
Scalar objective(const EctnModel<Scalar>& model, const ObservedTensor& t, std::span<const std::size_t> positions,
                 double lambda) {
  detail::check_dims(model, t);
  using Vector = typename EctnModel<Scalar>::Vector;
  const Vector a_sq = model.A().rowwise().squaredNorm();
  const Vector b_sq = model.B().rowwise().squaredNorm();
  const Vector c_sq = model.C().rowwise().squaredNorm();
  const auto lam = static_cast<Scalar>(lambda);

  Scalar loss(0);
  for (std::size_t p : positions) {
    const Entry& y = t[p];
    const Scalar residual = static_cast<Scalar>(y.value) - model.predict_unchecked(y.i, y.j, y.k);
    const Scalar penalty = a_sq(y.i) + b_sq(y.j) + c_sq(y.k) + model.d()(y.i) * model.d()(y.i) +
                           model.e()(y.j) * model.e()(y.j) + model.f()(y.k) * model.f()(y.k);
    loss += residual * residual + lam * penalty;
  }
  return loss;
}

/// Numerators N(θ) and denominators D(θ) of the multiplicative update, one
/// per parameter, laid out like the model blocks.
template <typename Scalar>
struct UpdateTerms {
  using Matrix = typename EctnModel<Scalar>::Matrix;
  using Vector = typename EctnModel<Scalar>::Vector;

  unsigned blocks = kAllBlocks;
  Matrix num_a, den_a, num_b, den_b, num_c, den_c;
  Vector num_d, den_d, num_e, den_e, num_f, den_f;

  /// Zeroed accumulators for the blocks in `blocks`; other blocks stay empty.
  explicit UpdateTerms(const EctnModel<Scalar>& model, unsigned blocks = kAllBlocks) : blocks(blocks) {
    const auto zero = [](Matrix& num, Matrix& den, const Matrix& like) {
      num = Matrix::Zero(like.rows(), like.cols());
      den = Matrix::Zero(like.rows(), like.cols());
    };
    const auto zero_vec = [](Vector& num, Vector& den, const Vector& like) {
      num = Vector::Zero(like.size());
      den = Vector::Zero(like.size());
    };
    if (blocks & kBlockA) zero(num_a, den_a, model.A());
    if (blocks & kBlockB) zero(num_b, den_b, model.B());
    if (blocks & kBlockC) zero(num_c, den_c, model.C());
    if (blocks & kBlockBias) {
      zero_vec(num_d, den_d, model.d());
      zero_vec(num_e, den_e, model.e());
      zero_vec(num_f, den_f, model.f());
    }
  }

  UpdateTerms& operator+=(const UpdateTerms& o) {
    num_a += o.num_a, den_a += o.den_a, num_b += o.num_b, den_b += o.den_b;
    num_c += o.num_c, den_c += o.den_c;
    num_d += o.num_d, den_d += o.den_d, num_e += o.num_e, den_e += o.den_e;
    num_f += o.num_f, den_f += o.den_f;
    return *this;
  }

  bool all_finite() const {
    return num_a.allFinite() && den_a.allFinite() && num_b.allFinite() && den_b.allFinite() &&
           num_c.allFinite() && den_c.allFinite() && num_d.allFinite() && den_d.allFinite() &&
           num_e.allFinite() && den_e.allFinite() && num_f.allFinite() && den_f.allFinite();
  }

  /// (N, D) for one parameter.
  std::pair<Scalar, Scalar> at(const EctnModel<Scalar>& model, const ParamRef& p) const {
    const Index col = p.m * model.rank() + p.r;
    switch (p.block) {
      case Block::A: return {num_a(p.entity, col), den_a(p.entity, col)};
      case Block::B: return {num_b(p.entity, col), den_b(p.entity, col)};
      case Block::C: return {num_c(p.entity, p.r), den_c(p.entity, p.r)};
      case Block::D: return {num_d(p.entity), den_d(p.entity)};
      case Block::E: return {num_e(p.entity), den_e(p.entity)};
      case Block::F: break;
    }
    return {num_f(p.entity), den_f(p.entity)};
  }
};

/// Adds the contribution of every listed entry to `terms`, with ŷ taken from
/// the current (unmodified) model state.
template <typename Scalar>
void accumulate(const EctnModel<Scalar>& model, const ObservedTensor& t, std::span<const std::size_t> positions,
                double lambda, UpdateTerms<Scalar>& terms) {
  const unsigned blocks = terms.blocks;
  using RowVector = typename EctnModel<Scalar>::RowVector;
  using Matrix = typename EctnModel<Scalar>::Matrix;
  const Index R = model.rank();
  const Index M = model.expansion();
  const Index MR = R * M;
  const auto lam = static_cast<Scalar>(lambda);

  RowVector c_tiled(MR), ab(MR), bc(MR), ac(MR), z(R);
  for (std::size_t p : positions) {
    const Entry& entry = t[p];
    const Index i = entry.i, j = entry.j, k = entry.k;
    const auto y = static_cast<Scalar>(entry.value);
    const auto a_i = model.A().row(i);
    const auto b_j = model.B().row(j);
    const auto c_k = model.C().row(k);

    for (Index m = 0; m < M; ++m) c_tiled.segment(m * R, R) = c_k;
    ab.noalias() = a_i.cwiseProduct(b_j);
    z.noalias() = Eigen::Map<const Matrix>(ab.data(), M, R).colwise().sum();
    const Scalar yhat = z.dot(c_k) + model.d()(i) + model.e()(j) + model.f()(k);

    if (blocks & kBlockA) {
      bc.noalias() = b_j.cwiseProduct(c_tiled);
      terms.num_a.row(i) += y * bc;
      terms.den_a.row(i) += lam * a_i + yhat * bc;
    }
    if (blocks & kBlockB) {
      ac.noalias() = a_i.cwiseProduct(c_tiled);
      terms.num_b.row(j) += y * ac;
      terms.den_b.row(j) += lam * b_j + yhat * ac;
    }
    if (blocks & kBlockC) {
      terms.num_c.row(k) += y * z;
      terms.den_c.row(k) += lam * c_k + yhat * z;
    }
    if (blocks & kBlockBias) {
      terms.num_d(i) += y;
      terms.den_d(i) += lam * model.d()(i) + yhat;
      terms.num_e(j) += y;
      terms.den_e(j) += lam * model.e()(j) + yhat;
      terms.num_f(k) += y;
      terms.den_f(k) += lam * model.f()(k) + yhat;
    }
  }
}

/// Full-pass update terms of `blocks` for the training positions, reduced
/// over opts.partitions chunks in order (chunks may run on up to opts.threads
/// workers).
template <typename Scalar>
UpdateTerms<Scalar> update_terms(const EctnModel<Scalar>& model, const ObservedTensor& t,
                                 std::span<const std::size_t> positions, double lambda, unsigned blocks = kAllBlocks,
                                 const UpdateOptions& opts = {}) {
  detail::check_dims(model, t);
  const std::size_t partitions = std::max<std::size_t>(1, std::min(opts.partitions, positions.size()));
  if (partitions == 1) {
    UpdateTerms<Scalar> terms(model, blocks);
    accumulate(model, t, positions, lambda, terms);
    return terms;
  }

  std::vector<UpdateTerms<Scalar>> partial(partitions, UpdateTerms<Scalar>(model, blocks));
  const auto chunk = [&](std::size_t c) {
    const std::size_t lo = positions.size() * c / partitions;
    const std::size_t hi = positions.size() * (c + 1) / partitions;
    accumulate(model, t, positions.subspan(lo, hi - lo), lambda, partial[c]);
  };
  const std::size_t workers = std::min(std::max<std::size_t>(opts.threads, 1), partitions);
  if (workers == 1) {
    for (std::size_t c = 0; c < partitions; ++c) chunk(c);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < partitions; c += workers) chunk(c);
      });
  }
  for (std::size_t c = 1; c < partitions; ++c) partial[0] += partial[c];
  return std::move(partial[0]);
}

/// θ ← θ·N/D for every parameter of the accumulated blocks with
/// D ≥ min_denominator; all others unchanged.
template <typename Scalar>
void apply_update(EctnModel<Scalar>& model, const UpdateTerms<Scalar>& terms, double min_denominator) {
  if (!terms.all_finite()) throw Error(ErrorCode::NonFiniteAccumulator, "update numerator or denominator not finite");
  const auto floor = static_cast<Scalar>(min_denominator);
  const auto step = [floor](auto& theta, const auto& num, const auto& den) {
    theta.array() = (den.array() >= floor).select(theta.array() * (num.array() / den.array()), theta.array());
  };
  if (terms.blocks & kBlockA) step(model.A(), terms.num_a, terms.den_a);
  if (terms.blocks & kBlockB) step(model.B(), terms.num_b, terms.den_b);
  if (terms.blocks & kBlockC) step(model.C(), terms.num_c, terms.den_c);
  if (terms.blocks & kBlockBias) {
    step(model.d(), terms.num_d, terms.den_d);
    step(model.e(), terms.num_e, terms.den_e);
    step(model.f(), terms.num_f, terms.den_f);
  }
}

/// One multiplicative sweep over the training positions. Every parameter's
/// N and D are sums over its mode slice; see Schedule for the block order.
template <typename Scalar>
EctnModel<Scalar> epoch_update(EctnModel<Scalar> model, const ObservedTensor& t,
                               std::span<const std::size_t> positions, double lambda,
                               const UpdateOptions& opts = {}) {
  if (opts.schedule == Schedule::Simultaneous) {
    apply_update(model, update_terms(model, t, positions, lambda, kAllBlocks, opts), opts.min_denominator);
    return model;
  }
  for (unsigned block : {kBlockA, kBlockB, kBlockC, kBlockBias})
    apply_update(model, update_terms(model, t, positions, lambda, block, opts), opts.min_denominator);
  return model;
}

/// Central finite difference of objective() with respect to one parameter.
template <typename Scalar>
Scalar gradient_fd(const EctnModel<Scalar>& model, const ObservedTensor& t, std::span<const std::size_t> positions,
                   double lambda, const ParamRef& param, double h) {
  EctnModel<Scalar> probe = model;
  const Scalar theta = model.param(param);
  probe.param(param) = theta + static_cast<Scalar>(h);
  const Scalar up = objective(probe, t, positions, lambda);
  probe.param(param) = theta - static_cast<Scalar>(h);
  const Scalar down = objective(probe, t, positions, lambda);
  return (up - down) / static_cast<Scalar>(2 * h);
}

/// Runs epochs from `start` until successive objectives differ by less than
/// cfg.tol or cfg.max_epochs is reached.
template <typename Scalar>
TrainResult<Scalar> train_from(EctnModel<Scalar> start, const ObservedTensor& t,
                               std::span<const std::size_t> positions, const TrainConfig& cfg) {
  detail::check_config(cfg);
  detail::check_dims(start, t);
  if (positions.empty()) throw Error(ErrorCode::EmptyTrainSet, "training set is empty");

  using Clock = std::chrono::steady_clock;
  TrainResult<Scalar> out{std::move(start), {}};
  TrainReport& report = out.report;
  double previous = static_cast<double>(objective(out.model, t, positions, cfg.lambda));
  report.initial_loss = previous;

  for (Index epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto begin = Clock::now();
    out.model = epoch_update(std::move(out.model), t, positions, cfg.lambda, cfg.update);
    const double loss = static_cast<double>(objective(out.model, t, positions, cfg.lambda));
    report.epoch_seconds.push_back(std::chrono::duration<double>(Clock::now() - begin).count());
    report.loss_trace.push_back(loss);
    report.epochs_run = epoch;
    if (!std::isfinite(loss)) throw Error(ErrorCode::NonFiniteAccumulator, "objective became non-finite");
    if (std::abs(loss - previous) < cfg.tol) {
      report.converged = true;
      break;
    }
    previous = loss;
  }

  double total = 0.0;
  for (double s : report.epoch_seconds) total += s;
  report.wall_time_per_epoch = total / static_cast<double>(report.epoch_seconds.size());
  return out;
}

template <typename Scalar = double>
TrainResult<Scalar> train(const ObservedTensor& t, std::span<const std::size_t> positions, const TrainConfig& cfg) {
  detail::check_config(cfg);
  if (positions.empty()) throw Error(ErrorCode::EmptyTrainSet, "training set is empty");
  return train_from(init_random<Scalar>(t.dims(), cfg.model), t, positions, cfg);
}

template <typename Scalar = double>
TrainResult<Scalar> train(const ObservedTensor& t, const DatasetSplit& split, const TrainConfig& cfg) {
  return train<Scalar>(t, std::span<const std::size_t>(split.train), cfg);
}

}  // namespace ectn
