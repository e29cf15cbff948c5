#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "gradcheck.hpp"
#include "oracle.hpp"
#include "porflow/picnn/checkpoint.hpp"
#include "porflow/picnn/picnn.hpp"
#include "porflow/sim/newton.hpp"

using namespace porflow;
namespace fs = std::filesystem;

namespace {

ControlSchedule two_well_schedule(int steps) {
  ControlSchedule s;
  s.dt = 2.0;
  s.n_steps = steps;
  s.values = {std::vector<double>(steps, 1200.0), std::vector<double>(steps, 2400.0)};
  return s;
}

picnn::CheckpointSet tiny_training(int steps, int max_epochs) {
  const auto rc = testing::small_case(4, 4);
  picnn::TrainOptions opt;
  opt.spec = nn::NetworkSpec{2, 2, 2};
  opt.config.max_epochs = max_epochs;
  return picnn::train_all(rc, two_well_schedule(steps), opt);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("porflow_test_" + name);
  fs::remove_all(p);
  return p;
}

ErrorKind load_error(const fs::path& dir, const nn::NetworkSpec* spec = nullptr) {
  try {
    (void)picnn::load_checkpoints(dir, spec);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_SUITE("picnn") {

TEST_CASE("smooth-L1 branches meet at beta") {
  for (double beta : {0.5, 1.0, 10.0}) {
    const double e = 1e-9 * beta;
    CHECK(std::abs(picnn::smooth_l1_value(beta - e, beta) - picnn::smooth_l1_value(beta + e, beta)) < 1e-12 * beta + 2 * e);
    CHECK(picnn::smooth_l1_value(beta, beta) == doctest::Approx(0.5 * beta).epsilon(1e-15));
    CHECK(std::abs(picnn::smooth_l1_slope(beta - e, beta) - picnn::smooth_l1_slope(beta + e, beta)) < 1e-8);
  }
  CHECK(picnn::smooth_l1_value(2.0, 10.0) == doctest::Approx(0.2));
  CHECK(picnn::smooth_l1_value(-30.0, 10.0) == doctest::Approx(25.0));
}

TEST_CASE("smooth-L1 is mean-reduced and differentiable") {
  const std::vector<double> v{-20.0, -1.0, 0.0, 3.0, 15.0};
  std::vector<double> g(v.size());
  const double l = picnn::smooth_l1(v, 10.0, g);
  CHECK(l == doctest::Approx((15.0 + 0.05 + 0.0 + 0.45 + 10.0) / 5.0));
  CHECK(g[0] == doctest::Approx(-0.2));
  CHECK(g[3] == doctest::Approx(0.3 / 5.0));
  CHECK(picnn::smooth_l1({}, 10.0) == 0.0);
}

TEST_CASE("learning rate decays stepwise") {
  picnn::TrainerConfig c;
  CHECK(c.learning_rate(0) == doctest::Approx(0.01));
  CHECK(c.learning_rate(99) == doctest::Approx(0.01));
  CHECK(c.learning_rate(100) == doctest::Approx(0.01 * 0.995));
  CHECK(c.learning_rate(250) == doctest::Approx(0.01 * 0.995 * 0.995));
}

TEST_CASE("adam follows the bias-corrected update") {
  picnn::TrainerConfig c;
  picnn::Adam adam(1, c);
  std::vector<float> w{1.0f};
  adam.step(w, std::vector<float>{0.5f}, 0.01);
  // First step: m_hat = g, v_hat = g^2, so the move is lr * g / (|g| + eps).
  CHECK(w[0] == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)).epsilon(1e-6));
  adam.step(w, std::vector<float>{-1.0f}, 0.01);
  const double m = 0.9 * 0.1 * 0.5 + 0.1 * -1.0;
  const double v = 0.999 * 0.001 * 0.25 + 0.001 * 1.0;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  CHECK(w[0] == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8) - 0.01 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-5));
  CHECK(adam.steps_taken() == 2);
}

TEST_CASE("controls are rasterized into their channels") {
  const auto rc = testing::small_case(4, 3);
  const picnn::ControlBounds b;
  const auto img = picnn::rasterize_controls(rc, std::vector<double>{750.0, 2450.0}, b);
  CHECK(img.height == 3);
  CHECK(img.width == 4);
  CHECK(img.at(1, 0, 0) == doctest::Approx(0.5));
  CHECK(img.at(0, 2, 3) == doctest::Approx(0.75));
  double total = 0.0;
  for (float v : img.data) total += v;
  CHECK(total == doctest::Approx(1.25));
  CHECK_THROWS_AS(picnn::rasterize_controls(rc, std::vector<double>{1600.0, 2400.0}, b), Error);
  CHECK_THROWS_AS(picnn::rasterize_controls(rc, std::vector<double>{1000.0, 2200.0}, b), Error);
}

TEST_CASE("padding keeps pixels in place") {
  const auto rc = testing::small_case(5, 3);
  const auto img = picnn::rasterize_controls(rc, std::vector<double>{1500.0, 2500.0}, {});
  const auto pad = picnn::pad_image(img, 8);
  CHECK(pad.height == 8);
  CHECK(pad.width == 8);
  CHECK(pad.at(1, 0, 0) == 1.0f);
  CHECK(pad.at(0, 2, 4) == 1.0f);
  CHECK(pad.at(0, 7, 7) == 0.0f);
}

TEST_CASE("scaling layers map the unit interval onto the physical window") {
  picnn::ScalingParams s{0.2, 0.2, 2100.0, 5000.0};
  CHECK(s.pressure(0.0) == 2100.0);
  CHECK(s.pressure(1.0) == 5000.0);
  CHECK(s.saturation(0.0) == doctest::Approx(0.2));
  CHECK(s.saturation(1.0) == doctest::Approx(0.8));
  const auto rc = testing::small_case(2, 2);
  auto sched = two_well_schedule(2);
  const auto d = picnn::ScalingParams::defaults(rc, sched);
  CHECK(d.p_min == 2200.0);
  CHECK(d.p_max == 3500.0);
  s.p_min = 2450.0;
  CHECK_THROWS_AS(s.validate_against(rc, sched), Error);
}

TEST_CASE("physics loss vanishes at the Newton solution") {
  const auto rc = testing::small_case(4, 4);
  const auto sched = two_well_schedule(1);
  fvm::Discretization d(rc);
  const auto traj = sim::simulate(d, sched, {});
  const double l = picnn::physics_loss(d, traj.states[1], traj.states[0], sched.controls_at(1), 2.0, 10.0);
  CHECK(l < 1e-6);
  CHECK(picnn::physics_loss(d, rc.initial, rc.initial, sched.controls_at(1), 2.0, 10.0) > 1.0);
}

TEST_CASE("physics loss gradient with respect to the state") {
  const auto rc = testing::small_case(4, 4, 6);
  fvm::Discretization d(rc);
  State xk, xkm1;
  testing::random_states(rc, 5, xk, xkm1);
  const std::vector<double> u{1200.0, 2400.0};
  picnn::StateGradient g;
  (void)picnn::physics_loss(d, xk, xkm1, u, 2.0, 10.0, &g);
  for (std::size_t c : {0u, 5u, 15u}) {
    for (int which = 0; which < 2; ++which) {
      auto& v = which == 0 ? xk.pressure[c] : xk.sw[c];
      const double v0 = v;
      const double h = which == 0 ? 1e-4 : 1e-7;
      v = v0 + h;
      const double lp = picnn::physics_loss(d, xk, xkm1, u, 2.0, 10.0);
      v = v0 - h;
      const double lm = picnn::physics_loss(d, xk, xkm1, u, 2.0, 10.0);
      v = v0;
      const double an = which == 0 ? g.pressure[c] : g.sw[c];
      CHECK(an == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4));
    }
  }
}

TEST_CASE("physics loss gradient with respect to the weights") {
  const auto r = testing::physics_gradient_check(nn::NetworkSpec{2, 3, 4}, 20, 3);
  CHECK(r.checked == 20);
  CHECK(r.worst_relative < 1e-3);
}

TEST_CASE("data loss and missing observations") {
  const auto rc = testing::small_case(3, 3);
  State s(rc.cells(), 3000.0, 0.3);
  std::vector<double> g(rc.cells(), 0.0);
  CHECK(picnn::data_loss(rc, s, std::vector<double>{2990.0}, g) == doctest::Approx(10.0));
  CHECK(g[8] == 1.0);
  try {
    (void)picnn::data_loss(rc, s, std::vector<double>{std::numeric_limits<double>::quiet_NaN()});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingObservation);
  }
}

TEST_CASE("decoded predictions respect the bounds for any weights") {
  const auto rc = testing::small_case(6, 6);
  const picnn::ScalingParams sc{0.2, 0.2, 2200.0, 3500.0};
  nn::ParallelUNet<float> net(nn::NetworkSpec{2, 3, 2});
  const auto img = picnn::pad_image(picnn::rasterize_controls(rc, std::vector<double>{1000.0, 2400.0}, {}), 8);
  std::mt19937_64 rng(1);
  std::normal_distribution<float> big(0.0f, 30.0f);
  for (int t = 0; t < 50; ++t) {
    net.init_kaiming(t);
    if (t % 2) for (auto& p : net.parameters()) p += big(rng);
    const auto out = net.forward(img.data, img.height, img.width, false);
    const State s = picnn::decode_output<float>(out, rc.grid, sc);
    for (std::size_t c = 0; c < rc.cells(); ++c) {
      CHECK((s.pressure[c] >= 2200.0 && s.pressure[c] <= 3500.0));
      CHECK((s.sw[c] >= 0.2 - 1e-12 && s.sw[c] <= 0.8 + 1e-12));
    }
  }
}

TEST_CASE("training reaches sigma on an easy step and stops early") {
  const auto rc = testing::small_case(4, 4);
  picnn::TrainOptions opt;
  opt.spec = nn::NetworkSpec{2, 2, 4};
  opt.config.sigma = 1e6;
  opt.config.max_epochs = 50;
  const auto set = picnn::train_all(rc, two_well_schedule(2), opt);
  REQUIRE(set.steps() == 2);
  CHECK(set.reports[0].reached_sigma);
  CHECK(set.reports[0].epochs_used == 0);
}

TEST_CASE("training is deterministic and stops at max_epochs") {
  const auto a = tiny_training(2, 5);
  const auto b = tiny_training(2, 5);
  REQUIRE(a.steps() == 2);
  CHECK(a.reports[1].epochs_used == 5);
  CHECK(a.weights == b.weights);
  CHECK(a.reports[1].final_loss == b.reports[1].final_loss);
}

TEST_CASE("inference reproduces the training-time predictions") {
  const auto set = tiny_training(3, 4);
  const auto rc = testing::small_case(4, 4);
  const auto traj = picnn::infer_trajectory(set, rc, two_well_schedule(3));
  REQUIRE(traj.steps() == 3);
  for (int k = 1; k <= 3; ++k)
    for (std::size_t c = 0; c < rc.cells(); ++c) {
      CHECK(traj.states[k].pressure[c] == doctest::Approx(set.states[k - 1].pressure[c]).epsilon(1e-12));
      CHECK(traj.states[k].sw[c] == doctest::Approx(set.states[k - 1].sw[c]).epsilon(1e-12));
    }
}

TEST_CASE("checkpoints round-trip exactly") {
  const auto set = tiny_training(2, 3);
  const auto dir = scratch_dir("ckpt_roundtrip");
  picnn::save_checkpoints(set, dir);
  CHECK(fs::exists(dir / picnn::checkpoint_file_name(1)));
  CHECK(picnn::checkpoint_file_name(12) == "ckpt_0012.bin");
  const auto back = picnn::load_checkpoints(dir, &set.spec);
  CHECK(back.weights == set.weights);
  CHECK(back.spec.hash() == set.spec.hash());
  CHECK(back.scaling.p_max == set.scaling.p_max);
  CHECK(back.reports[1].epochs_used == set.reports[1].epochs_used);
  fs::remove_all(dir);
}

TEST_CASE("damaged checkpoints are rejected with the right error") {
  const auto set = tiny_training(2, 2);
  const auto dir = scratch_dir("ckpt_damage");
  picnn::save_checkpoints(set, dir);
  const fs::path f = dir / picnn::checkpoint_file_name(2);
  const auto size = fs::file_size(f);

  SUBCASE("truncation") {
    fs::resize_file(f, size / 2);
    CHECK(load_error(dir) == ErrorKind::CorruptCheckpoint);
  }
  SUBCASE("flipped byte") {
    std::fstream s(f, std::ios::in | std::ios::out | std::ios::binary);
    s.seekp(static_cast<std::streamoff>(size / 2));
    s.put('\x5a');
    s.close();
    CHECK(load_error(dir) == ErrorKind::CorruptCheckpoint);
  }
  SUBCASE("version") {
    std::fstream s(f, std::ios::in | std::ios::out | std::ios::binary);
    s.seekp(8);
    s.put('\x07');
    s.close();
    CHECK(load_error(dir) == ErrorKind::VersionMismatch);
  }
  SUBCASE("missing file") {
    fs::remove(f);
    CHECK(load_error(dir) == ErrorKind::MissingCheckpoint);
  }
  SUBCASE("different network") {
    nn::NetworkSpec other = set.spec;
    other.base_channels += 1;
    CHECK(load_error(dir, &other) == ErrorKind::SpecHashMismatch);
  }
  fs::remove_all(dir);
}

}  // TEST_SUITE
