#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "lcgnn/bank.hpp"
#include "lcgnn/objective.hpp"

using namespace lcgnn;

namespace {

Tensor random_row(std::int64_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Tensor t(1, dim, 0.0);
  for (double& v : t.values) {
    v = dist(rng);
  }
  return t;
}

}  // namespace

TEST_CASE("zero weights and bias give the uniform distribution") {
  ClassifierParams clf{Parameter("w", Tensor(3, 4, 0.0)), Parameter("b", Tensor(1, 4, 0.0))};
  const Tensor probs = classifier_forward(clf, Tensor::row({1.0, -2.0, 0.5}));
  for (double p : probs.values) {
    CHECK(p == doctest::Approx(0.25).epsilon(1e-14));
  }
}

TEST_CASE("probabilities sum to one on random inputs") {
  std::mt19937_64 rng(44);
  ClassifierParams clf = init_classifier(6, 3, 5);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor probs = classifier_forward(clf, random_row(6, rng));
    double sum = 0.0;
    for (double p : probs.values) {
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::fabs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("a logit gap of ten saturates the sigmoid") {
  ClassifierParams clf{Parameter("w", Tensor(2, 2, 0.0)), Parameter("b", Tensor(1, 2, 0.0))};
  clf.bias.value.at(0, 0) = 10.0;
  const Tensor probs = classifier_forward(clf, Tensor::row({0.3, 0.7}));
  CHECK(probs.at(0, 0) == doctest::Approx(0.99995).epsilon(1e-4));
  CHECK(probs.at(0, 1) == doctest::Approx(0.00005).epsilon(2e-1));
  CHECK(probs.at(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-12));
}

TEST_CASE("classifier rejects mismatched representation width") {
  ClassifierParams clf = init_classifier(4, 2, 1);
  CHECK_THROWS_AS(classifier_forward(clf, Tensor::row({1.0, 2.0})), std::invalid_argument);
}

TEST_CASE("training dropout in the public forward is seeded and deterministic") {
  ClassifierParams clf = init_classifier(8, 2, 2);
  std::mt19937_64 rng(3);
  const Tensor rep = random_row(8, rng);
  const Tensor a = classifier_forward(clf, rep, 0.5, true, 42);
  const Tensor b = classifier_forward(clf, rep, 0.5, true, 42);
  CHECK(a.values == b.values);
}

TEST_CASE("cross entropy of a perfect prediction is zero") {
  Tensor perfect(1, 3, 0.0);
  perfect.at(0, 2) = 1.0;
  const Tensor preds[] = {perfect};
  const std::int32_t labels[] = {2};
  CHECK(cross_entropy_loss(preds, labels) == 0.0);
}

TEST_CASE("cross entropy of uniform predictions is ln C") {
  const Tensor preds[] = {Tensor(1, 5, 0.2), Tensor(1, 5, 0.2)};
  const std::int32_t labels[] = {0, 3};
  CHECK(cross_entropy_loss(preds, labels) == doctest::Approx(std::log(5.0)).epsilon(1e-14));
}

TEST_CASE("a quarter of the mass on the truth costs ln 4") {
  Tensor p(1, 4, 0.25);
  const Tensor preds[] = {p};
  const std::int32_t labels[] = {1};
  CHECK(cross_entropy_loss(preds, labels) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
}

TEST_CASE("zero mass on the true class is clamped, not infinite") {
  Tensor p(1, 2, 0.0);
  p.at(0, 0) = 1.0;
  const Tensor preds[] = {p};
  const std::int32_t labels[] = {1};
  const double loss = cross_entropy_loss(preds, labels);
  CHECK(std::isfinite(loss));
  CHECK(loss == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
}

TEST_CASE("cross entropy validates labels and stays nonnegative") {
  const Tensor preds[] = {Tensor(1, 3, 1.0 / 3.0)};
  const std::int32_t bad[] = {3};
  CHECK_THROWS_AS(cross_entropy_loss(preds, bad), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy_loss({}, {}), std::invalid_argument);

  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor p(1, 4, 0.0);
    double sum = 0.0;
    for (double& v : p.values) {
      v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      sum += v;
    }
    for (double& v : p.values) {
      v /= sum;
    }
    const Tensor preds2[] = {p};
    const std::int32_t labels2[] = {static_cast<std::int32_t>(rng() % 4)};
    CHECK(cross_entropy_loss(preds2, labels2) >= 0.0);
  }
}

TEST_CASE("nll on the tape picks out the true-class log probability") {
  std::mt19937_64 rng(21);
  ClassifierParams clf = init_classifier(5, 3, 9);
  const Tensor rep = random_row(5, rng);
  Tape tape;
  const ValueId lsm = classifier_log_probs(tape, clf, tape.constant(rep), 0.0, false);
  const ValueId nll = nll_loss(tape, lsm, 1);
  CHECK(tape.scalar(nll) == doctest::Approx(-tape.value(lsm).at(0, 1)).epsilon(1e-15));
  CHECK_THROWS_AS(nll_loss(tape, lsm, 7), std::invalid_argument);
}

TEST_CASE("mixed loss arithmetic") {
  Tape tape;
  const ValueId cls = tape.constant(Tensor::scalar(0.5));
  const ValueId lc = tape.constant(Tensor::scalar(0.2));
  CHECK(tape.scalar(mixed_loss(tape, cls, lc, 0.0)) == 0.5);
  CHECK(tape.scalar(mixed_loss(tape, cls, lc, 0.5)) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(tape.scalar(mixed_loss(tape, cls, lc, 1.0)) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK_THROWS_AS(mixed_loss(tape, cls, lc, -0.1), std::invalid_argument);
  CHECK(mixed_loss_value(0.5, 0.2, 0.5) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("gradient of the mixed loss is the weighted sum of part gradients") {
  std::mt19937_64 rng(31);
  const double beta = 0.7;
  const double tau = 0.3;
  MemoryBank bank = init_memory_bank(std::vector<std::int32_t>{0, 1, 0, 1}, 4, 17);
  ClassifierParams clf = init_classifier(4, 2, 23);
  Parameter rep("rep", random_row(4, rng));

  auto grad_of = [&](bool with_cls, bool with_lc, double weight) {
    rep.zero_grad();
    for (Parameter* p : clf.parameters()) {
      p->zero_grad();
    }
    Tape tape;
    const ValueId r = tape.parameter(rep);
    ValueId loss{};
    if (with_cls && with_lc) {
      const ValueId cls = nll_loss(tape, classifier_log_probs(tape, clf, r, 0.0, false), 1);
      const ValueId lc = label_contrastive_loss_single(tape, r, 1, bank, tau);
      loss = mixed_loss(tape, cls, lc, weight);
    } else if (with_cls) {
      loss = nll_loss(tape, classifier_log_probs(tape, clf, r, 0.0, false), 1);
    } else {
      loss = label_contrastive_loss_single(tape, r, 1, bank, tau);
    }
    tape.backward(loss);
    std::vector<double> grads = rep.grad.values;
    for (Parameter* p : clf.parameters()) {
      grads.insert(grads.end(), p->grad.values.begin(), p->grad.values.end());
    }
    return grads;
  };

  const auto total = grad_of(true, true, beta);
  const auto cls_only = grad_of(true, false, 0.0);
  const auto lc_only = grad_of(false, true, 0.0);
  REQUIRE(total.size() == cls_only.size());
  for (std::size_t i = 0; i < total.size(); ++i) {
    const double expected = cls_only[i] + beta * lc_only[i];
    CHECK(std::fabs(total[i] - expected) <=
          1e-12 * std::max({1.0, std::fabs(total[i]), std::fabs(expected)}));
  }
}

TEST_CASE("predict_class returns the argmax") {
  ClassifierParams clf{Parameter("w", Tensor(2, 3, 0.0)), Parameter("b", Tensor(1, 3, 0.0))};
  clf.bias.value.at(0, 2) = 4.0;
  CHECK(predict_class(clf, Tensor::row({0.0, 0.0})) == 2);
}
