// Per-observer recursion: forgetting factor, predict / innovate / correct,
// weight handling, and the synchronous step.

#include "stt/estimator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <vector>

namespace {

using stt::Bearing;
using stt::EstimatorState;
using stt::Innovation;
using stt::Mat3;
using stt::Mat6;
using stt::NeighborMessage;
using stt::PseudoMeasurement;
using stt::StepWeights;
using stt::SttParams;
using stt::TransitionModel;
using stt::Vec3;
using stt::Vec6;

constexpr double kTight = 1e-12;

SttParams paper_params(double sigma_nu = 3.0) {
  SttParams p;
  p.c = 1.8202;
  p.gamma1 = 7.1609;
  p.gamma2 = 6.1323;
  p.sigma_nu = sigma_nu;
  return p;
}

// ===== parameter validation =====

TEST(SttParams, Validation) {
  EXPECT_NO_THROW(paper_params().validate());
  SttParams p = paper_params();
  p.c = 0.0;
  EXPECT_THROW(p.validate(), stt::ConfigError);
  p = paper_params();
  p.gamma1 = p.gamma2;  // strict ordering required
  EXPECT_THROW(p.validate(), stt::ConfigError);
  p = paper_params();
  p.gamma2 = -1.0;
  EXPECT_THROW(p.validate(), stt::ConfigError);
  p = paper_params();
  p.sigma_nu = 0.0;
  EXPECT_THROW(p.validate(), stt::ConfigError);
}

TEST(SttParams, MeasurementWeight) {
  const Mat3 r = paper_params(0.5).measurement_weight();
  EXPECT_NEAR((r - 4.0 * Mat3::Identity()).norm(), 0.0, kTight);
}

// ===== forgetting_factor =====

TEST(ForgettingFactor, LagZero) {
  const SttParams p = paper_params();
  const double norm_a = 1.05125;
  EXPECT_NEAR(stt::forgetting_factor(p, norm_a, 0),
              1.0 / (norm_a * (1.0 + p.gamma1)), kTight);
}

TEST(ForgettingFactor, RatioBetweenLags) {
  const SttParams p = paper_params();
  const double norm_a = 1.05125;
  const double ratio = p.gamma2 / (norm_a * (1.0 + p.gamma1));
  EXPECT_LT(ratio, 1.0);
  double prev = stt::forgetting_factor(p, norm_a, 0);
  for (int lag = 1; lag <= 8; ++lag) {
    const double cur = stt::forgetting_factor(p, norm_a, lag);
    EXPECT_NEAR(cur / prev, ratio, 1e-14);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(ForgettingFactor, PinnedValueTwoExpressions) {
  const SttParams p = paper_params();
  const double norm_a = 1.05125;
  const double got = stt::forgetting_factor(p, norm_a, 1);
  // Two independent writings of the same quantity.
  const double direct = p.gamma2 / std::pow(norm_a * (1.0 + p.gamma1), 2);
  const double chained =
      stt::forgetting_factor(p, norm_a, 0) * p.gamma2 /
      (norm_a * (1.0 + p.gamma1));
  EXPECT_NEAR(got, direct, 1e-15);
  EXPECT_NEAR(got, chained, 1e-15);
  EXPECT_NEAR(got, 0.0833, 1e-4);
}

TEST(ForgettingFactor, NegativeLagRejected) {
  EXPECT_THROW(stt::forgetting_factor(paper_params(), 1.0, -1),
               stt::ConfigError);
}

// ===== predict =====

TEST(Predict, StationaryEstimateKeepsPosition) {
  const TransitionModel f(0.1);
  EstimatorState s;
  s.x << 4, 5, 6, 0, 0, 0;
  const auto pred = stt::predict(s, f, paper_params());
  EXPECT_NEAR((pred.x - s.x).norm(), 0.0, kTight);
}

TEST(Predict, IdentityGainMatchesDirectEvaluation) {
  const TransitionModel f(0.1);
  const SttParams p = paper_params();
  EstimatorState s;  // m = I
  const auto pred = stt::predict(s, f, p);
  const Mat6 expect = (f.matrix() * f.matrix().transpose()).inverse() /
                      ((1.0 + p.gamma1) * f.norm());
  EXPECT_NEAR((pred.m_pred - expect).norm(), 0.0, 1e-10);
}

TEST(Predict, SingularGainRejected) {
  const TransitionModel f(0.1);
  EstimatorState s;
  s.m.setZero();
  EXPECT_THROW(stt::predict(s, f, paper_params()), stt::NumericalError);
}

// ===== weights =====

TEST(Weights, EqualSplit) {
  const StepWeights w = stt::equal_weights(2, {0, 1, 5});
  EXPECT_EQ(w.alpha.size(), 4u);
  for (const auto& [id, v] : w.alpha) EXPECT_NEAR(v, 0.25, kTight);
  EXPECT_NO_THROW(stt::validate_weights(w));
}

TEST(Weights, ValidationFailures) {
  StepWeights w = stt::equal_weights(0, {1});
  w.alpha[1] = 0.4;  // breaks the sum
  EXPECT_THROW(stt::validate_weights(w), stt::ConfigError);

  w = stt::equal_weights(0, {1});
  w.alpha[1] = -0.5;
  w.alpha[0] = 1.5;
  EXPECT_THROW(stt::validate_weights(w), stt::ConfigError);

  w = stt::equal_weights(0, {1});
  w.beta.erase(1);
  w.beta[0] = 1.0;
  EXPECT_THROW(stt::validate_weights(w), stt::ConfigError);
}

TEST(Weights, RestrictionRenormalizes) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    StepWeights w;
    double sa = 0.0, sb = 0.0;
    for (int id = 0; id < 6; ++id) {
      w.alpha[id] = u(rng);
      w.beta[id] = u(rng);
      sa += w.alpha[id];
      sb += w.beta[id];
    }
    for (auto& [id, v] : w.alpha) v /= sa;
    for (auto& [id, v] : w.beta) v /= sb;

    const StepWeights r = stt::restrict_weights(w, {0, 2, 5});
    EXPECT_NO_THROW(stt::validate_weights(r));
    EXPECT_EQ(r.alpha.size(), 3u);
  }
}

TEST(Weights, RestrictionToNothingRejected) {
  const StepWeights w = stt::equal_weights(0, {1, 2});
  EXPECT_THROW(stt::restrict_weights(w, {7}), stt::ConfigError);
}

// ===== innovate =====

TEST(Innovate, ZeroResidualNoNeighbors) {
  const SttParams p = paper_params(0.5);
  Vec6 x_pred;
  x_pred << 10, -3, 7, 1, 0, 0;
  const Bearing g(Vec3(0.6, 0.8, 0));
  // Build a measurement that is exactly consistent with x_pred.
  PseudoMeasurement own = stt::pseudo_linearize(g, Vec3(1, 1, 1));
  own.z = own.H * x_pred;
  StepWeights w;
  w.alpha[4] = 1.0;
  w.beta[4] = 1.0;
  const Innovation inn = stt::innovate(4, x_pred, own, {}, w, p);
  EXPECT_NEAR(inn.e_meas.norm(), 0.0, kTight);
  EXPECT_NEAR(inn.e_cons.norm(), 0.0, kTight);
  const Mat6 expect_s =
      Mat6::Identity() +
      p.c * (own.H.transpose() * p.measurement_weight() * own.H);
  EXPECT_NEAR((inn.S - expect_s).norm(), 0.0, 1e-10);
}

TEST(Innovate, SAlwaysSpdWithUnitFloor) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> n(0.0, 1.0);
  const SttParams p = paper_params(2.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vec6 x_pred;
    for (int i = 0; i < 6; ++i) x_pred(i) = n(rng);
    Vec3 dir;
    do {
      dir << n(rng), n(rng), n(rng);
    } while (dir.norm() < 1e-3);
    const PseudoMeasurement own =
        stt::pseudo_linearize(Bearing(dir.normalized()), Vec3(n(rng), n(rng), n(rng)));
    std::map<int, NeighborMessage> msgs;
    for (int id = 1; id <= 3; ++id) {
      Vec3 d2;
      do {
        d2 << n(rng), n(rng), n(rng);
      } while (d2.norm() < 1e-3);
      const PseudoMeasurement pm =
          stt::pseudo_linearize(Bearing(d2.normalized()), Vec3(n(rng), n(rng), n(rng)));
      NeighborMessage m;
      m.x_pred = x_pred + Vec6::Ones();
      m.z = pm.z;
      m.H = pm.H;
      msgs[id] = m;
    }
    const Innovation inn = stt::innovate(
        0, x_pred, own, msgs, stt::equal_weights(0, {1, 2, 3}), p);
    EXPECT_NEAR((inn.S - inn.S.transpose()).norm(), 0.0, kTight);
    const Eigen::SelfAdjointEigenSolver<Mat6> eig(inn.S);
    EXPECT_GE(eig.eigenvalues()(0), 1.0 - 1e-12);
  }
}

TEST(Innovate, OrthogonalPairMatchesProjectionSum) {
  // Two observers with orthogonal bearings and alpha = 1/2 each: stripping
  // the identity and the c/(2 sigma_nu^2) scale from S leaves P1 + P2 in the
  // top-left block, whose smallest eigenvalue is 1 for a 90 degree pair.
  const SttParams p = paper_params(1.7);
  Vec6 x_pred = Vec6::Zero();
  const PseudoMeasurement own =
      stt::pseudo_linearize(Bearing(Vec3(1, 0, 0)), Vec3(0, 1, 2));
  const PseudoMeasurement other =
      stt::pseudo_linearize(Bearing(Vec3(0, 1, 0)), Vec3(3, 0, 1));
  NeighborMessage m;
  m.x_pred = Vec6::Zero();
  m.z = other.z;
  m.H = other.H;
  const Innovation inn =
      stt::innovate(0, x_pred, own, {{1, m}}, stt::equal_weights(0, {1}), p);

  const double scale = p.c / (p.sigma_nu * p.sigma_nu) * 0.5;
  const Mat3 top_left = (inn.S - Mat6::Identity()).topLeftCorner<3, 3>() / scale;
  const Mat3 expect = stt::projection(Bearing(Vec3(1, 0, 0))) +
                      stt::projection(Bearing(Vec3(0, 1, 0)));
  EXPECT_NEAR((top_left - expect).norm(), 0.0, 1e-10);
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(top_left);
  EXPECT_NEAR(eig.eigenvalues()(0), 1.0, 1e-10);
}

TEST(Innovate, WeightCoverageErrors) {
  const SttParams p = paper_params();
  const PseudoMeasurement own =
      stt::pseudo_linearize(Bearing(Vec3(0, 0, 1)), Vec3(1, 2, 3));
  NeighborMessage m;
  m.H = own.H;
  m.z = own.z;

  // Weight set missing the sender.
  StepWeights w;
  w.alpha[0] = 1.0;
  w.beta[0] = 1.0;
  EXPECT_THROW(stt::innovate(0, Vec6::Zero(), own, {{1, m}}, w, p),
               stt::ConfigError);

  // Weight set with an extra id nobody sent.
  EXPECT_THROW(stt::innovate(0, Vec6::Zero(), own, {{1, m}},
                             stt::equal_weights(0, {1, 2}), p),
               stt::ConfigError);

  // Self id among the received messages.
  EXPECT_THROW(stt::innovate(1, Vec6::Zero(), own, {{1, m}},
                             stt::equal_weights(1, {1}), p),
               stt::ConfigError);
}

// ===== correct =====

TEST(Correct, ZeroInnovationKeepsPrediction) {
  const TransitionModel f(0.1);
  const SttParams p = paper_params();
  EstimatorState s;
  s.x << 1, 2, 3, 0.5, 0, 0;
  const auto pred = stt::predict(s, f, p);
  Innovation inn;
  inn.e_meas.setZero();
  inn.e_cons.setZero();
  inn.S = 2.0 * Mat6::Identity();
  const EstimatorState next = stt::correct(pred, inn, p, 1);
  EXPECT_NEAR((next.x - pred.x).norm(), 0.0, kTight);
  EXPECT_EQ(next.step, 1);
  EXPECT_NO_THROW(stt::validate_state(next));
}

TEST(Correct, GainEigenvaluesAtMostOne) {
  std::mt19937_64 rng(53);
  std::normal_distribution<double> n(0.0, 1.0);
  const TransitionModel f(0.1);
  const SttParams p = paper_params(1.0);
  for (int trial = 0; trial < 50; ++trial) {
    EstimatorState s;
    Mat6 x;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) x(i, j) = n(rng);
    s.m = x * x.transpose() + 0.05 * Mat6::Identity();
    s.m /= s.m.norm();  // keep it well scaled
    s.m += 0.01 * Mat6::Identity();
    const auto pred = stt::predict(s, f, p);
    Innovation inn;
    inn.e_meas.setZero();
    inn.e_cons.setZero();
    Mat6 y;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) y(i, j) = n(rng);
    inn.S = Mat6::Identity() + y * y.transpose();
    const EstimatorState next = stt::correct(pred, inn, p, 1);
    const Eigen::SelfAdjointEigenSolver<Mat6> eig(next.m);
    EXPECT_LE(eig.eigenvalues()(5), 1.0 + 1e-12);
  }
}

TEST(Correct, NonSpdRejectedWithDiagnostic) {
  Innovation inn;
  inn.e_meas.setZero();
  inn.e_cons.setZero();
  inn.S = -Mat6::Identity();
  stt::Prediction pred;
  pred.x = Vec6::Zero();
  pred.m_pred = Mat6::Zero();
  try {
    stt::correct(pred, inn, paper_params(), 1);
    FAIL() << "expected NumericalError";
  } catch (const stt::NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("eigenvalue"), std::string::npos);
  }
}

// ===== message serialization =====

TEST(NeighborMessage, FlatLayoutAndRoundTrip) {
  NeighborMessage m;
  m.x_pred << 1, 2, 3, 4, 5, 6;
  m.z << 7, 8, 9;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 6; ++c) m.H(r, c) = 10.0 + 6 * r + c;

  const auto a = m.to_array();
  EXPECT_EQ(a[0], 1.0);
  EXPECT_EQ(a[5], 6.0);
  EXPECT_EQ(a[6], 7.0);   // z starts after x_pred
  EXPECT_EQ(a[8], 9.0);
  EXPECT_EQ(a[9], 10.0);  // H row-major from index 9
  EXPECT_EQ(a[14], 15.0);
  EXPECT_EQ(a[15], 16.0);
  EXPECT_EQ(a[26], 27.0);

  const NeighborMessage back = NeighborMessage::from_array(a);
  EXPECT_EQ(back.x_pred, m.x_pred);
  EXPECT_EQ(back.z, m.z);
  EXPECT_EQ(back.H, m.H);
}

// ===== step: synchronous round over a tiny fixed network =====

struct MiniWorld {
  TransitionModel f{0.1};
  SttParams p = paper_params(0.005);
  Vec3 target{0, 0, 5};
  std::vector<Vec3> stations{{30, 0, 5}, {0, 30, 5}, {0, 0, 35}};
  std::vector<EstimatorState> states;

  MiniWorld() {
    for (const auto& s : stations) {
      EstimatorState st;
      st.x << s, 0, 0, 0;
      states.push_back(st);
    }
  }

  // One noiseless synchronous round; returns new states.
  void round() {
    const int n = static_cast<int>(stations.size());
    std::vector<PseudoMeasurement> own;
    std::vector<NeighborMessage> packets;
    for (int j = 0; j < n; ++j) {
      own.push_back(stt::pseudo_linearize(
          stt::unit_bearing(target, stations[j]), stations[j]));
      packets.push_back(stt::make_message(states[j], f, own[j]));
    }
    std::vector<EstimatorState> next;
    for (int i = 0; i < n; ++i) {
      std::map<int, NeighborMessage> msgs;
      std::vector<int> ids;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        msgs[j] = packets[j];
        ids.push_back(j);
      }
      next.push_back(stt::step(states[i], f, p, own[i], msgs,
                               stt::equal_weights(i, ids), i)
                         .state);
    }
    states = std::move(next);
  }
};

TEST(Step, NoiselessConvergenceWithWideAngles) {
  MiniWorld w;
  Vec6 truth;
  truth << w.target, 0, 0, 0;
  for (int k = 1; k <= 200; ++k) {
    w.round();
    for (const auto& s : w.states) EXPECT_NO_THROW(stt::validate_state(s));
  }
  for (const auto& s : w.states) {
    EXPECT_LT((s.x.head<3>() - truth.head<3>()).norm(), 1e-3);
  }
}

TEST(Step, EnvelopeContractsAtGainRatioBound) {
  MiniWorld w;
  Vec6 truth;
  truth << w.target, 0, 0, 0;
  const double bound = (1.0 + w.p.gamma2) / (1.0 + w.p.gamma1);
  double prev = 0.0;
  for (int k = 1; k <= 120; ++k) {
    w.round();
    double envelope = 0.0;
    for (const auto& s : w.states) {
      envelope = std::max(envelope, (s.x - truth).norm());
    }
    if (k > 5 && prev > 1e-10) {
      EXPECT_LE(envelope / prev, bound + 0.05) << "at step " << k;
    }
    prev = envelope;
  }
}

TEST(Step, DeterministicAcrossRuns) {
  MiniWorld a, b;
  for (int k = 0; k < 50; ++k) {
    a.round();
    b.round();
  }
  for (size_t i = 0; i < a.states.size(); ++i) {
    EXPECT_EQ(a.states[i].x, b.states[i].x);
    EXPECT_EQ(a.states[i].m, b.states[i].m);
  }
}

TEST(Step, BroadcastEchoesPredictionAndMeasurement) {
  const TransitionModel f(0.1);
  const SttParams p = paper_params();
  EstimatorState s;
  s.x << 5, 5, 5, 1, 1, 0;
  const PseudoMeasurement own =
      stt::pseudo_linearize(Bearing(Vec3(0, 0, 1)), Vec3(5, 5, 0));
  const auto res = stt::step(s, f, p, own, {}, stt::equal_weights(0, {}), 0);
  EXPECT_EQ(res.broadcast.x_pred, f.apply(s.x));
  EXPECT_EQ(res.broadcast.z, own.z);
  EXPECT_EQ(res.broadcast.H, own.H);
}

}  // namespace
