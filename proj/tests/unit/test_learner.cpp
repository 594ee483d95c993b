#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "../support/lstm_oracle.hpp"
#include "../support/store_fixtures.hpp"
#include "d2k/common/error.hpp"
#include "d2k/dynamics/model_io.hpp"
#include "d2k/learner/evaluate.hpp"
#include "d2k/learner/trainer.hpp"

using namespace d2k;
using namespace d2k::learner;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}


// Sequences with torques a smooth function of the features.
Dataset synthetic(int n_seq, int length, int n_joints, std::uint64_t seed, store::Purpose purpose = store::Purpose::train) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 6.28);
  Dataset d;
  for (int s = 0; s < n_seq; ++s) {
    Sequence seq;
    seq.id = "seq-" + std::to_string(s);
    seq.purpose = purpose;
    seq.x.resize(3 * n_joints, length);
    seq.y.resize(n_joints, length);
    const double p = phase(rng);
    for (int t = 0; t < length; ++t) {
      for (int j = 0; j < n_joints; ++j) {
        const double q = std::sin(0.05 * t + p + j);
        const double qd = 0.05 * std::cos(0.05 * t + p + j);
        const double qdd = -0.0025 * q;
        seq.x(j, t) = q;
        seq.x(n_joints + j, t) = qd;
        seq.x(2 * n_joints + j, t) = qdd;
        seq.y(j, t) = 3.0 * q + 0.5 * j;
      }
    }
    d.push_back(std::move(seq));
  }
  return d;
}

HyperParams small_hp() {
  HyperParams hp;
  hp.n_recurrent_layers = 1;
  hp.hidden_size = 16;
  hp.learning_rate = 1e-2;
  hp.sequence_length = 20;
  hp.batch_size = 8;
  hp.epochs = 30;
  hp.rng_seed = 5;
  return hp;
}

}  // namespace

TEST(Lstm, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(3);
  const Eigen::Index n_in = 3, n_out = 2, T = 3, B = 2;
  Network net = Network::init(n_in, n_out, 1, 4, 17);
  // Larger biases so every gate is away from its linear region.
  net.layers[0].b = random_matrix(16, 1, rng, 0.5);
  const MatrixXd x = random_matrix(n_in, T * B, rng);
  const MatrixXd y = random_matrix(n_out, T * B, rng);

  Gradients grad = zeros_like(net);
  loss_and_gradient(net, x, y, B, 0, grad);
  auto analytic = oracle::lstm_parameters(grad);
  auto params = oracle::lstm_parameters(net);
  ASSERT_EQ(analytic.size(), params.size());
  const double h = 1e-6;
  Gradients scratch = zeros_like(net);
  for (std::size_t p = 0; p < params.size(); ++p) {
    const double keep = *params[p];
    *params[p] = keep + h;
    const double up = loss_and_gradient(net, x, y, B, 0, scratch);
    *params[p] = keep - h;
    const double down = loss_and_gradient(net, x, y, B, 0, scratch);
    *params[p] = keep;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(*analytic[p]), 1e-6});
    EXPECT_LE(std::abs(numeric - *analytic[p]) / scale, 1e-4) << "parameter " << p;
  }
}

TEST(Lstm, GradientMatchesForTwoLayersAndFrozenPrefix) {
  std::mt19937_64 rng(8);
  const Eigen::Index T = 4, B = 1;
  Network net = Network::init(3, 2, 2, 4, 2);
  const MatrixXd x = random_matrix(3, T * B, rng);
  const MatrixXd y = random_matrix(2, T * B, rng);
  Gradients full = zeros_like(net);
  const double loss = loss_and_gradient(net, x, y, B, 0, full);

  // Gradient with layer 0 frozen: inputs enter at layer 1.
  const MatrixXd h0 = net.hidden_after(x, B, 1);
  Gradients part = zeros_like(net);
  EXPECT_NEAR(loss_and_gradient(net, h0, y, B, 1, part), loss, 1e-14);
  EXPECT_TRUE(part.layers[1].W.isApprox(full.layers[1].W, 1e-12));
  EXPECT_TRUE(part.readout.W.isApprox(full.readout.W, 1e-12));
  EXPECT_EQ(part.layers[0].W.norm(), 0.0);

  auto params = oracle::lstm_parameters(net);
  auto analytic = oracle::lstm_parameters(full);
  const double h = 1e-6;
  Gradients scratch = zeros_like(net);
  for (std::size_t p = 0; p < params.size(); ++p) {
    const double keep = *params[p];
    *params[p] = keep + h;
    const double up = loss_and_gradient(net, x, y, B, 0, scratch);
    *params[p] = keep - h;
    const double down = loss_and_gradient(net, x, y, B, 0, scratch);
    *params[p] = keep;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(*analytic[p]), 1e-6});
    EXPECT_LE(std::abs(numeric - *analytic[p]) / scale, 1e-4) << "parameter " << p;
  }
}

TEST(Lstm, ForwardMatchesHandRolledRecurrence) {
  std::mt19937_64 rng(11);
  Network net = Network::init(6, 2, 1, 4, 9);
  const MatrixXd x = random_matrix(6, 3, rng);
  const MatrixXd got = net.forward(x, 1);
  const MatrixXd want = oracle::lstm_forward(net, x);
  EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-12);

  Network deep = Network::init(6, 2, 3, 16, 4);
  const MatrixXd xs = random_matrix(6, 25, rng);
  EXPECT_LE((deep.forward(xs, 1) - oracle::lstm_forward(deep, xs)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Lstm, BatchedForwardEqualsSeparateSequences) {
  std::mt19937_64 rng(12);
  Network net = Network::init(6, 2, 2, 16, 1);
  const MatrixXd a = random_matrix(6, 5, rng);
  const MatrixXd b = random_matrix(6, 5, rng);
  MatrixXd batch(6, 10);
  for (int t = 0; t < 5; ++t) {
    batch.col(2 * t) = a.col(t);
    batch.col(2 * t + 1) = b.col(t);
  }
  const MatrixXd out = net.forward(batch, 2);
  const MatrixXd oa = net.forward(a, 1);
  const MatrixXd ob = net.forward(b, 1);
  for (int t = 0; t < 5; ++t) {
    EXPECT_LE((out.col(2 * t) - oa.col(t)).norm(), 1e-13);
    EXPECT_LE((out.col(2 * t + 1) - ob.col(t)).norm(), 1e-13);
  }
}

TEST(Lstm, InitWithinFanInBound) {
  Network net = Network::init(21, 7, 2, 32, 3);
  EXPECT_LE(net.layers[0].W.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(21.0 + 32.0));
  EXPECT_LE(net.layers[1].U.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(64.0));
  EXPECT_LE(net.readout.W.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(32.0));
  EXPECT_GT(net.layers[0].W.cwiseAbs().maxCoeff(), 0.5 / std::sqrt(53.0));
}

TEST(Lstm, ClippingBoundsNorm) {
  Network net = Network::init(3, 2, 1, 4, 1);
  Gradients g = zeros_like(net);
  g.readout.W.setConstant(10.0);
  g.layers[0].W.setConstant(-3.0);
  const double before = clip_gradients(g, 0, 1.0);
  EXPECT_GT(before, 1.0);
  const double after = std::sqrt(g.readout.W.squaredNorm() + g.readout.b.squaredNorm() + g.layers[0].W.squaredNorm() +
                                 g.layers[0].U.squaredNorm() + g.layers[0].b.squaredNorm());
  EXPECT_NEAR(after, 1.0, 1e-12);
  Gradients small = zeros_like(net);
  small.readout.b.setConstant(0.1);
  const Gradients copy = small;
  clip_gradients(small, 0, 1.0);
  EXPECT_TRUE(small == copy);
}

TEST(Model, InitDeterministicAndShaped) {
  HyperParams hp;
  hp.n_recurrent_layers = 1;
  hp.hidden_size = 16;
  hp.rng_seed = 42;
  const auto a = init_model(hp, 7);
  const auto b = init_model(hp, 7);
  EXPECT_TRUE(a.net == b.net);
  EXPECT_EQ(a.id, b.id);
  EXPECT_EQ(a.net.readout.W.rows(), 7);
  EXPECT_EQ(a.net.readout.W.cols(), 16);
  EXPECT_FALSE(a.validation_mae.has_value());
  hp.rng_seed = 43;
  const auto c = init_model(hp, 7);
  EXPECT_FALSE(a.net == c.net);
  EXPECT_NE(a.id, c.id);
}

TEST(Model, InvalidHyperParamsRejected) {
  HyperParams hp;
  hp.n_recurrent_layers = 4;
  EXPECT_THROW(init_model(hp, 7), ValidationError);
  hp = {};
  hp.hidden_size = 24;
  EXPECT_THROW(init_model(hp, 7), ValidationError);
  hp = {};
  hp.unfrozen_layers = 6;
  EXPECT_THROW(hp.validate(), ValidationError);
  hp = {};
  hp.epochs = 0;
  EXPECT_THROW(hp.validate(), ValidationError);
  hp = {};
  hp.learning_rate = -1.0;
  EXPECT_THROW(hp.validate(), ValidationError);
}

TEST(Model, ZeroReadoutPredictsOutputMean) {
  auto ckpt = init_model(small_hp(), 3);
  ckpt.output_norm.mean = VectorXd::LinSpaced(3, -2.0, 5.0);
  ckpt.output_norm.std = VectorXd::Constant(3, 4.0);
  ckpt.net.readout.W.setZero();
  ckpt.net.readout.b.setZero();
  std::mt19937_64 rng(1);
  const MatrixXd out = forward(ckpt, random_matrix(9, 12, rng));
  for (Eigen::Index t = 0; t < out.cols(); ++t) EXPECT_LE((out.col(t) - ckpt.output_norm.mean).norm(), 1e-15);
}

TEST(Model, ForwardIsPureAndChecksInput) {
  const auto ckpt = init_model(small_hp(), 3);
  std::mt19937_64 rng(2);
  const MatrixXd x = random_matrix(9, 10, rng);
  const MatrixXd first = forward(ckpt, x);
  EXPECT_EQ(first.cols(), 10);
  EXPECT_TRUE(forward(ckpt, x) == first);
  // Prefix outputs only depend on the prefix.
  EXPECT_TRUE(forward(ckpt, x.leftCols(4)) == first.leftCols(4));
  EXPECT_THROW(forward(ckpt, random_matrix(8, 10, rng)), DimensionError);
  MatrixXd bad = x;
  bad(0, 3) = std::nan("");
  EXPECT_THROW(forward(ckpt, bad), NonFiniteError);
}

TEST(Model, NormalizationRoundTrip) {
  std::mt19937_64 rng(4);
  MatrixXd x = random_matrix(5, 40, rng, 3.0);
  x.row(2).setConstant(1.5);
  const auto n = Normalization::fit(x);
  EXPECT_EQ(n.std[2], 1.0);
  EXPECT_TRUE((n.std.array() > 0).all());
  EXPECT_LE((n.invert(n.apply(x)) - x).cwiseAbs().maxCoeff(), 1e-12);
  const MatrixXd z = n.apply(x);
  EXPECT_LE(z.rowwise().mean().cwiseAbs().maxCoeff(), 1e-12);

  auto ckpt = init_model(small_hp(), 3);
  ckpt.input_norm = Normalization::fit(random_matrix(9, 30, rng, 2.0));
  const MatrixXd xs = random_matrix(9, 8, rng);
  const MatrixXd a = forward(ckpt, xs);
  const MatrixXd b = forward(ckpt, ckpt.input_norm.invert(ckpt.input_norm.apply(xs)));
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Checkpoint, SaveLoadRoundTrip) {
  auto ckpt = init_model(small_hp(), 7);
  ckpt.validation_mae = 0.25;
  ckpt.provenance = {"view-1", "abc", std::string("ckpt-parent")};
  assign_id(ckpt);
  const auto dir = fixture::temp_dir("ckpt");
  save_checkpoint(ckpt, dir / "a.json");
  const auto back = load_checkpoint(dir / "a.json");
  EXPECT_EQ(back.id, ckpt.id);
  EXPECT_TRUE(back.net == ckpt.net);
  EXPECT_EQ(back.validation_mae, ckpt.validation_mae);
  EXPECT_EQ(back.provenance.parent_id, ckpt.provenance.parent_id);
  EXPECT_EQ(to_json(back).dump(), to_json(ckpt).dump());
}

TEST(Checkpoint, TamperedOrInconsistentRejected) {
  const auto ckpt = init_model(small_hp(), 7);
  auto j = to_json(ckpt);
  j["readout"]["b"][0] = 123.0;
  EXPECT_THROW(checkpoint_from_json(j), ValidationError);

  // Consistent hash but wrong shapes.
  auto k = to_json(ckpt);
  k["readout"]["W"]["rows"] = 6;
  k["readout"]["W"]["data"] = std::vector<double>(6 * 16, 0.0);
  k.erase("content_hash");
  k["content_hash"] = content_hash(k.dump());
  EXPECT_THROW(checkpoint_from_json(k), ValidationError);

  const auto dir = fixture::temp_dir("ckpt-bad");
  std::ofstream(dir / "x.json") << "{not json";
  EXPECT_THROW(load_checkpoint(dir / "x.json"), ValidationError);
}

TEST(Dataset, FoldsHoldOutEachTrajectoryOnce) {
  const auto two = make_folds(2, 2, 1);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].size() + two[1].size(), 2u);
  EXPECT_NE(two[0], two[1]);
  const auto many = make_folds(11, 3, 9);
  std::vector<int> seen(11, 0);
  for (const auto& f : many) {
    EXPECT_GE(f.size(), 3u);
    for (auto i : f) ++seen[i];
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_THROW(make_folds(5, 1, 0), ValidationError);
  EXPECT_THROW(make_folds(2, 3, 0), ValidationError);
}

TEST(Dataset, FromRecordStacksFeatures) {
  const auto rec = fixture::make_record(3, 12, "lab", store::Purpose::validation, "inst-a");
  const auto s = to_sequence(rec);
  EXPECT_EQ(s.x.rows(), 21);
  EXPECT_EQ(s.length(), 12);
  EXPECT_EQ(s.purpose, store::Purpose::validation);
  EXPECT_EQ(s.x(7 + 2, 5), rec.qd(2, 5));
  EXPECT_EQ(s.x(14 + 6, 11), rec.qdd(6, 11));
  EXPECT_EQ(s.y(4, 0), rec.tau(4, 0));
}

TEST(Train, TwoFoldsOnTwoTrajectories) {
  auto hp = small_hp();
  hp.epochs = 2;
  const auto data = synthetic(2, 60, 2, 1);
  const auto r = train(data, hp, {.folds = 2});
  ASSERT_EQ(r.folds.size(), 2u);
  ASSERT_EQ(r.fold_losses.size(), 2u);
  EXPECT_EQ(r.folds[0].size(), 1u);
  EXPECT_EQ(r.folds[1].size(), 1u);
  EXPECT_NE(r.folds[0][0], r.folds[1][0]);
  EXPECT_NEAR(r.cross_validation_loss, 0.5 * (r.fold_losses[0] + r.fold_losses[1]), 1e-15);
  EXPECT_EQ(r.ckpt.validation_mae, r.cross_validation_loss);
  EXPECT_EQ(r.ckpt.provenance.data_hash, dataset_hash(data));
  EXPECT_FALSE(r.ckpt.provenance.parent_id.has_value());
}

TEST(Train, ConstantTargetConverges) {
  auto data = synthetic(6, 100, 3, 2);
  for (auto& s : data) s.y.setConstant(2.5);
  const auto r = train(data, small_hp());
  EXPECT_LT(r.cross_validation_loss, 0.01);
  EXPECT_LT(r.train_loss.back(), r.train_loss.front());
}

TEST(Train, LearnsSmoothMapping) {
  const auto data = synthetic(8, 120, 3, 3);
  Dataset val = synthetic(2, 120, 3, 33);
  auto hp = small_hp();
  TrainOptions opt;
  opt.validation = &val;
  const auto r = train(data, hp, opt);
  ASSERT_EQ(r.validation_mae.size(), static_cast<std::size_t>(hp.epochs));
  // Constant predictor baseline: mean absolute deviation of the targets.
  const MatrixXd y = stack_targets(val);
  const double mad = (y.colwise() - y.rowwise().mean()).cwiseAbs().mean();
  EXPECT_LT(r.validation_mae.back(), 0.2 * mad);
  EXPECT_LT(r.cross_validation_loss, 0.2 * mad);
}

TEST(Train, DeterministicGivenSeed) {
  auto hp = small_hp();
  hp.epochs = 3;
  const auto data = synthetic(4, 60, 2, 4);
  const auto a = train(data, hp);
  const auto b = train(data, hp);
  EXPECT_TRUE(a.ckpt.net == b.ckpt.net);
  EXPECT_EQ(a.ckpt.id, b.ckpt.id);
  EXPECT_EQ(a.cross_validation_loss, b.cross_validation_loss);
  hp.rng_seed = 6;
  EXPECT_FALSE(train(data, hp).ckpt.net == a.ckpt.net);
}

TEST(Train, ShortTrajectoriesSkippedOrRejected) {
  auto hp = small_hp();
  hp.epochs = 1;
  auto data = synthetic(4, 60, 2, 5);
  data.push_back(synthetic(1, 5, 2, 6).front());
  data.back().id = "short";
  const auto r = train(data, hp, {.cross_validate = false});
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings.front().find("short"), std::string::npos);

  hp.sequence_length = 100;
  EXPECT_THROW(train(data, hp, {.cross_validate = false}), ValidationError);
  EXPECT_THROW(train(Dataset{}, hp), ValidationError);
}

TEST(Finetune, ReadoutOnlyChangesReadout) {
  const auto data = synthetic(6, 80, 3, 7);
  auto hp = small_hp();
  hp.n_recurrent_layers = 2;
  hp.epochs = 5;
  const auto parent = train(data, hp, {.cross_validate = false}).ckpt;

  auto shifted = data;
  for (auto& s : shifted) s.y.array() += 0.7;
  hp.unfrozen_layers = 1;
  const auto child = finetune(parent, shifted, hp);
  EXPECT_EQ(child.trainable_groups, 1u);
  EXPECT_TRUE(child.ckpt.net.layers == parent.net.layers);
  EXPECT_FALSE(child.ckpt.net.readout == parent.net.readout);
  EXPECT_EQ(to_json(child.ckpt)["input_norm"], to_json(parent)["input_norm"]);
  EXPECT_EQ(to_json(child.ckpt)["output_norm"], to_json(parent)["output_norm"]);
  EXPECT_EQ(child.ckpt.provenance.parent_id, parent.id);

  hp.unfrozen_layers = 2;
  const auto two = finetune(parent, shifted, hp);
  EXPECT_TRUE(two.ckpt.net.layers[0] == parent.net.layers[0]);
  EXPECT_FALSE(two.ckpt.net.layers[1] == parent.net.layers[1]);
}

TEST(Finetune, InvalidDepthRejected) {
  const auto data = synthetic(3, 60, 2, 8);
  auto hp = small_hp();
  hp.epochs = 1;
  const auto parent = train(data, hp, {.cross_validate = false}).ckpt;
  hp.unfrozen_layers = 0;
  EXPECT_THROW(finetune(parent, data, hp), ValidationError);
  hp.unfrozen_layers = 3;  // 1 recurrent layer + readout = 2 groups
  EXPECT_THROW(finetune(parent, data, hp), ValidationError);
  hp.unfrozen_layers = 1;
  hp.hidden_size = 32;
  EXPECT_THROW(finetune(parent, data, hp), ValidationError);
}

TEST(Finetune, NoForgettingOnParentData) {
  const auto data = synthetic(6, 100, 3, 9);
  auto hp = small_hp();
  const auto parent = train(data, hp).ckpt;
  hp.learning_rate = 1e-4;
  hp.epochs = 5;
  hp.unfrozen_layers = 2;
  const auto child = finetune(parent, data, hp);
  EXPECT_LE(child.cross_validation_loss, *parent.validation_mae * 1.1);
}

TEST(Evaluate, PassthroughIsZeroAndMeanIsMad) {
  auto data = synthetic(3, 50, 3, 10, store::Purpose::evaluation);
  const VectorXd tau_max = VectorXd::Constant(3, 20.0);
  const auto exact = evaluate([&](const MatrixXd& x) {
    for (const auto& s : data) {
      if (s.x == x) return s.y;
    }
    return MatrixXd();
  }, data, tau_max);
  EXPECT_EQ(exact.mae, 0.0);
  EXPECT_EQ(exact.sensor_floor, 0.15);

  const MatrixXd y = stack_targets(data);
  const VectorXd mean = y.rowwise().mean();
  const auto constant = evaluate([&](const MatrixXd& x) {
    return MatrixXd(mean.replicate(1, x.cols()));
  }, data, tau_max);
  double mad = 0.0;
  for (Eigen::Index j = 0; j < y.rows(); ++j) {
    for (Eigen::Index t = 0; t < y.cols(); ++t) mad += std::abs(y(j, t) - mean[j]);
  }
  mad /= static_cast<double>(y.size());
  EXPECT_NEAR(constant.mae, mad, 1e-12);
  // max |target| per joint is 3 + 0.5 j (reached within 50 steps only approximately)
  const VectorXd max_abs = y.cwiseAbs().rowwise().maxCoeff();
  EXPECT_NEAR(constant.theoretical_max_mae, 20.0 + max_abs.mean(), 1e-12);
  EXPECT_LE(constant.mae, constant.theoretical_max_mae);
}

TEST(Evaluate, TrainedCheckpointWithinBounds) {
  auto hp = small_hp();
  hp.epochs = 5;
  const auto ckpt = train(synthetic(4, 80, 7, 11), hp, {.cross_validate = false}).ckpt;
  const auto model = dynamics::default_robot_model();
  const auto r = evaluate(ckpt, synthetic(2, 80, 7, 12, store::Purpose::evaluation), model);
  EXPECT_GE(r.mae, 0.0);
  EXPECT_LE(r.mae, r.theoretical_max_mae);
  EXPECT_EQ(r.per_joint_mae.size(), 7);
  EXPECT_NEAR(r.per_joint_mae.mean(), r.mae, 1e-12);
  const auto back = eval_report_from_json(to_json(r));
  EXPECT_EQ(back.mae, r.mae);
}

TEST(Evaluate, RejectsEmptyOrWrongPurpose) {
  const auto ckpt = init_model(small_hp(), 7);
  const auto model = dynamics::default_robot_model();
  EXPECT_THROW(evaluate(ckpt, Dataset{}, model), ValidationError);
  EXPECT_THROW(evaluate(ckpt, synthetic(1, 20, 7, 1, store::Purpose::train), model), ValidationError);
}
