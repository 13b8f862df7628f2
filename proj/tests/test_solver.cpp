#include <doctest.h>

#include <cmath>

#include "ectn/solver.hpp"
#include "oracles.hpp"

using namespace ectn;

namespace {

ObservedTensor random_tensor(Dims dims, std::size_t count, std::uint64_t seed, double scale = 3.0) {
  return ObservedTensor::build(dims, oracle::random_entries(dims, count, seed, scale));
}

/// Tensor whose values are exactly the predictions of `m` on `count` random coordinates.
ObservedTensor fitted_tensor(const EctnModeld& m, std::size_t count, std::uint64_t seed) {
  auto entries = oracle::random_entries(m.dims(), count, seed);
  for (Entry& e : entries) e.value = predict(m, e.i, e.j, e.k);
  return ObservedTensor::build(m.dims(), std::move(entries));
}

EctnModeld unit_model() {
  EctnModeld m({1, 1, 1}, 1, 1);
  m.a(0, 0, 0) = m.b(0, 0, 0) = m.c(0, 0) = 1.0;
  return m;
}

}  // namespace

TEST_CASE("objective examples") {
  const auto m = init_random({3, 3, 3}, ModelConfig{2, 2, 1.0, 3});
  const auto exact = fitted_tensor(m, 10, 4);
  const auto all = oracle::iota_positions(exact.size());
  CHECK(objective(m, exact, all, 0.0) < 1e-24);

  const auto single = ObservedTensor::build({1, 1, 1}, {{0, 0, 0, 2.0}});
  const std::vector<std::size_t> one{0};
  CHECK(objective(EctnModeld({1, 1, 1}, 1, 1), single, one, 0.0) == 4.0);

  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto t = random_tensor({3, 3, 3}, 20, seed);
    const auto r = init_random({3, 3, 3}, ModelConfig{2, 3, 1.0, seed + 100});
    const auto pos = oracle::iota_positions(t.size());
    CHECK(oracle::rel_err(objective(r, t, pos, 0.4), oracle::objective(r, t, pos, 0.4)) < 1e-12);
  }

  CHECK_THROWS_AS(objective(EctnModeld({2, 1, 1}, 1, 1), single, one, 0.0), Error);
}

TEST_CASE("update terms match the brute-force scan") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dims dims{4, 3, 5};
    const auto t = random_tensor(dims, 25, seed);
    const auto m = init_random(dims, ModelConfig{2, 2, 1.0, seed});
    const auto pos = oracle::iota_positions(t.size());
    const double lambda = seed % 2 ? 0.4 : 0.0;
    const auto terms = update_terms(m, t, pos, lambda);
    for (const ParamRef& p : oracle::all_params(m)) {
      const auto [n, d] = terms.at(m, p);
      const auto [on, od] = oracle::update_terms(m, t, pos, lambda, p);
      CHECK(n == doctest::Approx(on).epsilon(1e-12));
      CHECK(d == doctest::Approx(od).epsilon(1e-12));
    }
  }
}

TEST_CASE("epoch_update single-entry hand evaluation") {
  const auto t = ObservedTensor::build({1, 1, 1}, {{0, 0, 0, 2.0}});
  const std::vector<std::size_t> pos{0};
  const EctnModeld start = unit_model();

  const auto terms = update_terms(start, t, pos, 0.0);
  // ŷ = 1: every factor ratio is 2/1, every bias ratio is Σy / Σŷ = 2/1
  CHECK(terms.at(start, {Block::A, 0, 0, 0}) == std::pair{2.0, 1.0});
  CHECK(terms.at(start, {Block::C, 0, 0, 0}) == std::pair{2.0, 1.0});
  CHECK(terms.at(start, {Block::D, 0, 0, 0}) == std::pair{2.0, 1.0});

  UpdateOptions jacobi;
  jacobi.schedule = Schedule::Simultaneous;
  const auto next = epoch_update(start, t, pos, 0.0, jacobi);
  CHECK(next.a(0, 0, 0) == 2.0);
  CHECK(next.b(0, 0, 0) == 2.0);
  CHECK(next.c(0, 0) == 2.0);
  // multiplicative rule: a zero bias stays at zero whatever its ratio
  CHECK(next.d()(0) == 0.0);
  CHECK(next.e()(0) == 0.0);
  CHECK(next.f()(0) == 0.0);

  EctnModeld biased = start;
  biased.d()(0) = biased.e()(0) = biased.f()(0) = 1.0;
  // ŷ = 4, λ = 0: bias ratio 2/4, factor ratio 2/4
  const auto after = epoch_update(biased, t, pos, 0.0, jacobi);
  CHECK(after.d()(0) == 0.5);
  CHECK(after.a(0, 0, 0) == 0.5);

  // block order: a ← 1·2/1 = 2, then ŷ = 2 so b, c and the zero biases stay put
  const auto sequential = epoch_update(start, t, pos, 0.0);
  CHECK(sequential.a(0, 0, 0) == 2.0);
  CHECK(sequential.b(0, 0, 0) == 1.0);
  CHECK(sequential.c(0, 0) == 1.0);
  CHECK(sequential.d()(0) == 0.0);
  CHECK(objective(sequential, t, pos, 0.0) == 0.0);
}

TEST_CASE("perfect fit with lambda = 0 is a fixed point") {
  const auto m = init_random({4, 4, 4}, ModelConfig{2, 2, 1.0, 11});
  const auto t = fitted_tensor(m, 30, 12);
  const auto pos = oracle::iota_positions(t.size());
  for (Schedule schedule : {Schedule::Sequential, Schedule::Simultaneous}) {
    UpdateOptions opts;
    opts.schedule = schedule;
    const auto next = epoch_update(m, t, pos, 0.0, opts);
    for (const ParamRef& p : oracle::all_params(m)) {
      const double before = m.param(p);
      CHECK(std::abs(next.param(p) - before) <= 1e-12 * before);
    }
  }
}

TEST_CASE("entities without observations keep their parameters") {
  // user 2, service 3 and time 1 never appear
  const auto t = ObservedTensor::build({3, 4, 2}, {{0, 0, 0, 1.0}, {1, 2, 0, 2.0}, {0, 1, 0, 0.5}});
  const auto pos = oracle::iota_positions(t.size());
  const auto m = init_random({3, 4, 2}, ModelConfig{2, 2, 0.5, 8});
  const auto next = epoch_update(m, t, pos, 0.4);
  CHECK(next.A().row(2) == m.A().row(2));
  CHECK(next.B().row(3) == m.B().row(3));
  CHECK(next.C().row(1) == m.C().row(1));
  CHECK(next.d()(2) == m.d()(2));
  CHECK(next.e()(3) == m.e()(3));
  CHECK(next.f()(1) == m.f()(1));
  CHECK_FALSE(next.A().row(0) == m.A().row(0));
}

TEST_CASE("regularization pulls zero-evidence parameters to zero") {
  // every observed value is 0, so every numerator is 0
  const auto t = ObservedTensor::build({2, 2, 2}, {{0, 0, 0, 0.0}, {1, 1, 1, 0.0}});
  const auto pos = oracle::iota_positions(t.size());
  const auto m = init_random({2, 2, 2}, ModelConfig{1, 2, 1.0, 2});
  const auto next = epoch_update(m, t, pos, 0.8);
  CHECK(next.A().isZero(0));
  CHECK(next.d().isZero(0));
  CHECK(next.f().isZero(0));
}

TEST_CASE("non-finite accumulators are reported") {
  const auto t = ObservedTensor::build({1, 1, 1}, {{0, 0, 0, 1e308}});
  const std::vector<std::size_t> pos{0};
  EctnModeld m = unit_model();
  m.a(0, 0, 0) = 1e308;
  try {
    (void)epoch_update(m, t, pos, 0.0);
    FAIL("expected NonFiniteAccumulator");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteAccumulator);
  }
}

TEST_CASE("gradient_fd examples") {
  const auto t = ObservedTensor::build({1, 1, 1}, {{0, 0, 0, 2.0}});
  const std::vector<std::size_t> pos{0};
  CHECK(gradient_fd(unit_model(), t, pos, 0.0, {Block::A, 0, 0, 0}, 1e-5) == doctest::Approx(-2.0).epsilon(1e-4));

  const auto m = init_random({3, 3, 3}, ModelConfig{2, 2, 1.0, 21});
  const auto exact = fitted_tensor(m, 15, 22);
  const auto all = oracle::iota_positions(exact.size());
  for (const ParamRef& p : oracle::all_params(m)) CHECK(std::abs(gradient_fd(m, exact, all, 0.0, p, 1e-5)) < 1e-6);
}

TEST_CASE("multiplicative ratio moves against the gradient") {
  // ∂ε/∂θ = 2 (D − N), so the sign of 1 − N/D is the gradient's sign
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const Dims dims{2 + static_cast<Index>(seed % 4), 2 + static_cast<Index>((seed + 1) % 4), 2 + static_cast<Index>((seed + 2) % 4)};
    const auto t = random_tensor(dims, static_cast<std::size_t>(dims.volume() / 2), seed);
    const auto m = init_random(dims, ModelConfig{1 + static_cast<Index>(seed % 3), 1 + static_cast<Index>((seed + 1) % 3), 1.0, seed});
    const auto pos = oracle::iota_positions(t.size());
    const double lambda = seed % 2 ? 0.4 : 0.0;
    const auto terms = update_terms(m, t, pos, lambda);
    for (const ParamRef& p : oracle::all_params(m)) {
      const auto [n, d] = terms.at(m, p);
      if (d == 0.0) continue;
      const double fd = gradient_fd(m, t, pos, lambda, p, 1e-6);
      CHECK(fd == doctest::Approx(2.0 * (d - n)).epsilon(1e-5).scale(1.0));
      if (std::abs(fd) > 1e-8) {
        CHECK((1.0 - n / d > 0) == (fd > 0));
        ++checked;
      }
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("partitions change nothing but the reduction, threads change nothing at all") {
  const auto t = random_tensor({10, 12, 6}, 300, 5);
  const auto pos = oracle::iota_positions(t.size());
  const auto m = init_random({10, 12, 6}, ModelConfig{3, 2, 0.5, 6});
  const auto serial = epoch_update(m, t, pos, 0.4);
  UpdateOptions opts;
  opts.partitions = 4;
  const auto four = epoch_update(m, t, pos, 0.4, opts);
  opts.threads = 3;
  const auto four_threaded = epoch_update(m, t, pos, 0.4, opts);
  CHECK(four == four_threaded);
  CHECK((four.A() - serial.A()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((four.C() - serial.C()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("train: epoch cap, determinism, nonnegativity") {
  const auto t = random_tensor({6, 7, 5}, 80, 9);
  const auto pos = oracle::iota_positions(t.size());
  TrainConfig cfg;
  cfg.model = ModelConfig{2, 2, 0.1, 3};
  cfg.lambda = 0.4;

  cfg.max_epochs = 1;
  const auto once = train(t, pos, cfg);
  CHECK(once.report.epochs_run == 1);
  CHECK(once.report.loss_trace.size() == 1);
  CHECK_FALSE(once.report.converged);

  cfg.max_epochs = 50;
  const auto r1 = train(t, pos, cfg);
  const auto r2 = train(t, pos, cfg);
  CHECK(r1.report.loss_trace == r2.report.loss_trace);
  CHECK(r1.model == r2.model);
  CHECK(r1.model.nonnegative());
  CHECK(static_cast<Index>(r1.report.loss_trace.size()) == r1.report.epochs_run);
  for (double loss : r1.report.loss_trace) CHECK((std::isfinite(loss) && loss >= 0.0));
  CHECK(r1.report.wall_time_per_epoch >= 0.0);
}

TEST_CASE("train error paths") {
  const auto t = random_tensor({3, 3, 3}, 5, 1);
  TrainConfig cfg;
  const std::vector<std::size_t> none;
  try {
    (void)train(t, none, cfg);
    FAIL("expected EmptyTrainSet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyTrainSet);
  }
  cfg.tol = 0.0;
  CHECK_THROWS_AS(train(t, oracle::iota_positions(5), cfg), Error);
}

TEST_CASE("noiseless ECTN data is recovered on held-out entries") {
  // multiplicative updates get there slowly; the budget here is generous on
  // purpose, the 1000-epoch version lives in the acceptance suite
  SyntheticSpec spec;
  spec.dims = {20, 30, 10};
  spec.rank = 2;
  spec.expansion = 2;
  spec.density = 0.2;
  spec.seed = 17;
  const auto data = generate_synthetic(spec);
  REQUIRE(data.tensor.size() == 1200);
  const auto s = split(data.tensor, {0.8, 0.0, 0.2}, 1);
  TrainConfig cfg;
  cfg.model = ModelConfig{2, 2, 0.1, 1};
  cfg.lambda = 0.0;
  cfg.tol = 1e-300;
  cfg.max_epochs = 10000;
  const auto result = train(data.tensor, s.train, cfg);
  double mean = 0.0;
  for (std::size_t p : s.test) mean += data.tensor[p].value;
  mean /= static_cast<double>(s.test.size());
  double sq = 0.0;
  for (std::size_t p : s.test) {
    const Entry& e = data.tensor[p];
    const double r = e.value - oracle::dense_predict(result.model, e.i, e.j, e.k);
    sq += r * r;
  }
  const double rmse = std::sqrt(sq / static_cast<double>(s.test.size()));
  MESSAGE("held-out rmse " << rmse << " vs 1% of mean " << 0.01 * mean);
  CHECK(rmse <= 0.01 * mean);
}
