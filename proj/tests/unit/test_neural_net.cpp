#include <doctest.h>

#include <cmath>

#include "inhomarkov/neural_net.hpp"
#include "inhomarkov/rng.hpp"

using namespace inhomarkov;

namespace {

MlpParams zero_net(std::vector<std::size_t> widths) {
  MlpParams p = init_params(widths, 0);
  for (auto& l : p.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  return p;
}

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index k = 0;
  for (double x : v) m(k++, 0) = x;
  return m;
}

}  // namespace

TEST_CASE("init_params") {
  const std::vector<std::size_t> w = default_widths(3, 55);
  CHECK(w == std::vector<std::size_t>{3, 64, 128, 256, 128, 64, 55});
  const MlpParams a = init_params(w, 42);
  const MlpParams b = init_params(w, 42);
  CHECK(a.layers[0].weight.rows() == 64);
  CHECK(a.layers[0].weight.cols() == 3);
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    CHECK(a.layers[k].weight == b.layers[k].weight);
    CHECK(a.layers[k].bias.isZero(0.0));
    const double bound = std::sqrt(6.0 / static_cast<double>(w[k] + w[k + 1]));
    CHECK(a.layers[k].weight.cwiseAbs().maxCoeff() <= bound);
  }
  CHECK(init_params(w, 43).layers[0].weight != a.layers[0].weight);
  CHECK_THROWS_AS(init_params(std::vector<std::size_t>{3, 0, 2}, 1), InputError);
  CHECK_THROWS_AS(init_params(std::vector<std::size_t>{3}, 1), InputError);
}

TEST_CASE("gelu") {
  CHECK(gelu(0.0) == 0.0);
  CHECK(gelu(1.0) == doctest::Approx(0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0)))).epsilon(1e-15));
  CHECK(gelu(1.0) == doctest::Approx(0.841345).epsilon(1e-6));
  CHECK(std::abs(gelu(10.0) - 10.0) < 1e-9);
  const double h = 1e-6;
  for (double x : {-3.0, -0.7, 0.0, 0.4, 2.5})
    CHECK(gelu_derivative(x) == doctest::Approx((gelu(x + h) - gelu(x - h)) / (2 * h)).epsilon(1e-8));
}

TEST_CASE("forward") {
  const MlpParams zero = zero_net({3, 4, 2});
  CHECK(forward(zero, column({1, 2, 3}), Mode::eval).isZero(0.0));

  // One hidden unit: h = gelu(2x + 1), logits = [3h - 1, -h].
  MlpParams toy = zero_net({1, 1, 2});
  toy.layers[0].weight(0, 0) = 2.0;
  toy.layers[0].bias(0) = 1.0;
  toy.layers[1].weight(0, 0) = 3.0;
  toy.layers[1].weight(1, 0) = -1.0;
  toy.layers[1].bias(0) = -1.0;
  const double hid = 0.5 * 0.5 * (1.0 + std::erf(0.5 / std::sqrt(2.0)));  // gelu(0.5)
  const Matrix out = forward(toy, column({-0.25}), Mode::eval);
  CHECK(out(0, 0) == doctest::Approx(3.0 * hid - 1.0).epsilon(1e-15));
  CHECK(out(1, 0) == doctest::Approx(-hid).epsilon(1e-15));

  const MlpParams p = init_params(default_widths(5, 7), 3);
  Rng rng(9);
  Matrix x(5, 6);
  for (auto& v : x.reshaped()) v = rng.normal();
  const Matrix eval = forward(p, x, Mode::eval);
  CHECK(forward(p, x, Mode::train, 0.0, &rng) == eval);
  CHECK(forward(p, x, Mode::eval) == eval);
  CHECK((forward_eval(p, x.col(2)) - eval.col(2)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(forward_eval(p, x.col(2)) == forward_eval(p, x.col(2)));

  ForwardCache cache;
  const Matrix dropped = forward(p, x, Mode::train, 0.5, &rng, &cache);
  CHECK(dropped != eval);
  REQUIRE(cache.masks.size() == 5);
  for (const auto& m : cache.masks)
    for (double v : m.reshaped()) CHECK((v == 0.0 || v == 2.0));
  CHECK(forward_with_masks(p, x, cache.masks) == dropped);

  Matrix bad = x;
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(forward(p, bad, Mode::eval), InputError);
  CHECK_THROWS_AS(forward(p, Matrix::Zero(4, 1), Mode::eval), InputError);
}

TEST_CASE("softmax") {
  Vector z(2);
  z << 0.0, 0.0;
  CHECK(softmax(z)(0) == 0.5);
  z << std::log(2.0), 0.0;
  CHECK(softmax(z)(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(softmax(z)(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  Rng rng(1);
  Vector w(9);
  for (auto& v : w) v = 10.0 * rng.normal();
  const Vector p = softmax(w);
  CHECK(std::abs(p.sum() - 1.0) < 1e-12);
  CHECK((softmax((w.array() + 123.4).matrix()) - p).cwiseAbs().maxCoeff() < 1e-12);
  Vector huge(2);
  huge << 1000.0, 0.0;
  CHECK(softmax(huge)(0) == 1.0);
}

TEST_CASE("smoothed targets and cross entropy") {
  Vector expect(5);
  expect << 0, 0.1, 0.8, 0.1, 0;
  CHECK((smoothed_targets(2, 5, 0.1) - expect).cwiseAbs().maxCoeff() < 1e-15);
  expect << 0.9, 0.1, 0, 0, 0;
  CHECK((smoothed_targets(0, 5, 0.1) - expect).cwiseAbs().maxCoeff() < 1e-15);
  expect << 0, 0, 0, 0.1, 0.9;
  CHECK((smoothed_targets(4, 5, 0.1) - expect).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(smoothed_targets(3, 5, 0.0) == Vector::Unit(5, 3));
  CHECK_THROWS_AS(smoothed_targets(0, 1, 0.1), InputError);
  CHECK_THROWS_AS(smoothed_targets(0, 5, 0.5), InputError);
  CHECK_THROWS_AS(smoothed_targets(5, 5, 0.1), InputError);

  CHECK(cross_entropy(Vector::Unit(4, 1), Vector::Unit(4, 1)) == 0.0);
  CHECK(cross_entropy(Vector::Constant(55, 1.0 / 55), Vector::Unit(55, 7)) == doctest::Approx(std::log(55.0)).epsilon(1e-14));
  CHECK(std::log(55.0) == doctest::Approx(4.0073).epsilon(1e-4));
  Vector half(2);
  half << 0.5, 0.5;
  CHECK(cross_entropy(half, Vector::Unit(2, 0)) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(cross_entropy(Vector::Unit(2, 0), Vector::Unit(2, 1)) == doctest::Approx(-std::log(1e-12)));

  // Gibbs: cross entropy against a smoothed target is at least its entropy.
  Rng rng(12);
  for (int k = 0; k < 50; ++k) {
    Vector logits(6);
    for (auto& v : logits) v = 2.0 * rng.normal();
    const Vector q = smoothed_targets(rng.index(6), 6, 0.05);
    double hq = 0.0;
    for (double v : q)
      if (v > 0) hq -= v * std::log(v);
    CHECK(cross_entropy(softmax(logits), q) >= hq - 1e-12);
  }
}

TEST_CASE("backward") {
  const MlpParams p = init_params(std::vector<std::size_t>{3, 8, 8, 4}, 5);
  Rng rng(6);
  Matrix x(3, 5);
  for (auto& v : x.reshaped()) v = rng.normal();
  Matrix q = Matrix::Zero(4, 5);
  for (Eigen::Index c = 0; c < 5; ++c) q(static_cast<Eigen::Index>(rng.index(4)), c) = 1.0;

  ForwardCache cache;
  const Matrix probs = softmax_columns(forward(p, x, Mode::eval, 0.0, nullptr, &cache));
  const MlpGradients g = backward(p, cache, probs, q);
  // The logit-layer bias gradient is the batch mean of p - q.
  CHECK((g.layers.back().bias - (probs - q).rowwise().mean()).cwiseAbs().maxCoeff() < 1e-15);

  // Central differences on every parameter.
  auto loss = [&](const MlpParams& params) {
    const Matrix pr = softmax_columns(forward(params, x, Mode::eval));
    double total = 0.0;
    for (Eigen::Index c = 0; c < 5; ++c) total += cross_entropy(pr.col(c), q.col(c));
    return total / 5.0;
  };
  double worst = 0.0;
  MlpParams probe = p;
  for (std::size_t l = 0; l < p.layers.size(); ++l)
    for (Eigen::Index k = 0; k < p.layers[l].weight.size(); ++k) {
      double& w = probe.layers[l].weight.reshaped()(k);
      const double saved = w;
      w = saved + 1e-5;
      const double up = loss(probe);
      w = saved - 1e-5;
      const double down = loss(probe);
      w = saved;
      const double num = (up - down) / 2e-5;
      const double ana = g.layers[l].weight.reshaped()(k);
      worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-7}));
    }
  CHECK(worst <= 1e-4);

  // A (near) perfect prediction has (near) zero gradient.
  MlpParams confident = zero_net({2, 2, 2});
  confident.layers[1].bias << 60.0, 0.0;
  ForwardCache c2;
  const Matrix in = Matrix::Ones(2, 1);
  const Matrix pr = softmax_columns(forward(confident, in, Mode::eval, 0.0, nullptr, &c2));
  const MlpGradients g2 = backward(confident, c2, pr, Matrix(Vector::Unit(2, 0)));
  double norm = 0.0;
  for (const auto& l : g2.layers) norm += l.weight.squaredNorm() + l.bias.squaredNorm();
  CHECK(std::sqrt(norm) < 1e-20);
}

TEST_CASE("adam_step") {
  MlpParams p = zero_net({1, 1});
  p.layers[0].weight(0, 0) = 1.0;
  MlpGradients g = p.zeros_like();
  g.layers[0].weight(0, 0) = 2.0;
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.0;
  AdamState st = AdamState::for_params(p);
  adam_step(p, g, st, cfg);
  CHECK(p.layers[0].weight(0, 0) == doctest::Approx(1.0 - 0.1).epsilon(1e-7));
  CHECK(st.step == 1);

  MlpParams q = init_params(std::vector<std::size_t>{2, 3, 2}, 1);
  const MlpParams before = q;
  AdamState s2 = AdamState::for_params(q);
  adam_step(q, q.zeros_like(), s2, cfg);
  for (std::size_t l = 0; l < q.layers.size(); ++l) CHECK(q.layers[l].weight == before.layers[l].weight);

  // lr = 0 leaves parameters unchanged even with decay on.
  TrainConfig frozen;
  frozen.learning_rate = 0.0;
  MlpGradients noisy = q.zeros_like();
  noisy.layers[0].weight.setConstant(0.3);
  adam_step(q, noisy, s2, frozen);
  for (std::size_t l = 0; l < q.layers.size(); ++l) CHECK(q.layers[l].weight == before.layers[l].weight);

  // Clipping: norm 10 scaled to 1. With wd = 0 the moments see g / 10.
  MlpParams r = zero_net({1, 1});
  MlpGradients big = r.zeros_like();
  big.layers[0].weight(0, 0) = 6.0;
  big.layers[0].bias(0) = 8.0;
  TrainConfig clip;
  clip.grad_clip_norm = 1.0;
  clip.weight_decay = 0.0;
  AdamState s3 = AdamState::for_params(r);
  adam_step(r, big, s3, clip);
  CHECK(s3.first_moment.layers[0].weight(0, 0) == doctest::Approx(0.1 * 0.6).epsilon(1e-12));
  CHECK(s3.first_moment.layers[0].bias(0) == doctest::Approx(0.1 * 0.8).epsilon(1e-12));

  // Decoupled decay acts on the parameters, not through the gradient.
  MlpParams d = zero_net({1, 1});
  d.layers[0].weight(0, 0) = 2.0;
  TrainConfig decay;
  decay.learning_rate = 0.1;
  decay.weight_decay = 0.5;
  AdamState s4 = AdamState::for_params(d);
  adam_step(d, d.zeros_like(), s4, decay);
  CHECK(d.layers[0].weight(0, 0) == doctest::Approx(2.0 * (1.0 - 0.05)).epsilon(1e-15));

  MlpGradients inf = p.zeros_like();
  inf.layers[0].bias(0) = std::numeric_limits<double>::infinity();
  const MlpParams snapshot = p;
  const auto step_before = st.step;
  CHECK_THROWS_AS(adam_step(p, inf, st, cfg), NumericalError);
  CHECK(p.layers[0].weight == snapshot.layers[0].weight);
  CHECK(st.step == step_before);
}

namespace {

// Two-state flip chain with state-conditioned one-hot inputs plus a constant feature.
Dataset flip_dataset(std::size_t count) {
  Dataset d;
  d.classes = 2;
  d.inputs = Matrix::Zero(3, static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) {
    const int s = static_cast<int>(k % 2);
    d.inputs(s, static_cast<Eigen::Index>(k)) = 1.0;
    d.inputs(2, static_cast<Eigen::Index>(k)) = 0.3;
    d.labels.push_back(1 - s);
  }
  return d;
}

}  // namespace

TEST_CASE("train") {
  const Dataset tr = flip_dataset(200);
  const Dataset va = flip_dataset(50);
  TrainConfig cfg;
  cfg.seed = 3;
  cfg.max_epochs = 40;
  cfg.learning_rate = 3e-3;
  const MlpParams init = init_params(default_widths(3, 2), 8);
  const TrainResult a = train(init, tr, va, cfg);
  CHECK_FALSE(a.diverged);
  const Vector p0 = softmax(forward_eval(a.best, tr.inputs.col(0)));
  const Vector p1 = softmax(forward_eval(a.best, tr.inputs.col(1)));
  CHECK(p0(1) >= 0.95);
  CHECK(p1(0) >= 0.95);

  const TrainResult b = train(init, tr, va, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    CHECK(a.history[k].train_nll == b.history[k].train_nll);
    CHECK(a.history[k].val_nll == b.history[k].val_nll);
  }
  CHECK(a.best.layers[0].weight == b.best.layers[0].weight);

  TrainConfig frozen = cfg;
  frozen.learning_rate = 0.0;
  frozen.patience = 1;
  const TrainResult f = train(init, tr, va, frozen);
  CHECK(f.history.size() == 2);
  CHECK(f.history[0].val_nll == f.history[1].val_nll);
  CHECK(f.history[0].train_nll == f.history[1].train_nll);
  for (std::size_t l = 0; l < init.layers.size(); ++l) CHECK(f.best.layers[l].weight == init.layers[l].weight);

  TrainConfig bad = cfg;
  bad.dropout_p = 1.0;
  CHECK_THROWS_AS(train(init, tr, va, bad), InputError);
  bad = cfg;
  bad.patience = 0;
  CHECK_THROWS_AS(train(init, tr, va, bad), InputError);
  CHECK_THROWS_AS(train(init, tr, Dataset{Matrix(3, 0), {}, 2}, cfg), InputError);

  // Runaway learning rate: reported as divergence, history kept.
  TrainConfig wild = cfg;
  wild.learning_rate = 1e300;
  wild.grad_clip_norm = 1e300;
  wild.weight_decay = 0.0;
  const TrainResult w = train(init, tr, va, wild);
  CHECK(w.diverged);
  CHECK_FALSE(w.message.empty());
  CHECK(w.best.all_finite());
}

TEST_CASE("checkpoint round trip is bit exact") {
  const MlpParams p = init_params(default_widths(4, 3), 77);
  TrainConfig cfg;
  cfg.seed = 123456789012345ULL;
  cfg.label_smoothing_eps = 0.05;
  const auto j = nlohmann::json::parse(params_to_json(p).dump());
  const MlpParams back = params_from_json(j);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    CHECK(back.layers[l].weight == p.layers[l].weight);
    CHECK(back.layers[l].bias == p.layers[l].bias);
  }
  const TrainConfig c2 = config_from_json(nlohmann::json::parse(config_to_json(cfg).dump()));
  CHECK(c2.seed == cfg.seed);
  CHECK(c2.label_smoothing_eps == cfg.label_smoothing_eps);
  CHECK(c2.patience == cfg.patience);
}
