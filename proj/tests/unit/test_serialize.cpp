#include <gtest/gtest.h>

#include "json.hpp"

#include "facepain/error.hpp"
#include "facepain/rng.hpp"
#include "facepain/serialize.hpp"

using namespace facepain;

namespace {

void toy_problem(Eigen::MatrixXd& x, std::vector<int>& y) {
  Rng rng(1);
  x.resize(20, 3);
  y.resize(20);
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    y[static_cast<std::size_t>(i)] = x(i, 0) > 0 ? 1 : -1;
  }
}

}  // namespace

TEST(Serialize, MlpRoundTripIsExact) {
  MlpConfig c;
  c.input_dim = 7;
  c.hidden_widths = {5, 4, 3};
  c.seed = 9;
  const MlpModel m = init_model(c);
  EXPECT_EQ(mlp_from_json(to_json(m)), m);
}

TEST(Serialize, SvcAndSvrRoundTrip) {
  Eigen::MatrixXd x;
  std::vector<int> y;
  toy_problem(x, y);
  const SvcModel svc = train_svc(x, y, {}, KernelSpec::rbf(0.4));
  const SvcModel svc2 = svc_from_json(to_json(svc));
  std::vector<double> t(y.begin(), y.end());
  const SvrModel svr = train_svr(x, t, {}, 0.1, KernelSpec::linear());
  const SvrModel svr2 = svr_from_json(to_json(svr));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd q = x.row(i);
    EXPECT_EQ(decision_value(svc, q), decision_value(svc2, q));
    EXPECT_EQ(predict_svr(svr, q), predict_svr(svr2, q));
  }
}

TEST(Serialize, GpRoundTripRebuildsFactor) {
  Eigen::MatrixXd x(4, 1);
  x << 0.0, 0.5, 1.0, 2.0;
  Eigen::VectorXd y(4);
  y << 0.1, 0.4, 0.3, 0.9;
  const GpModel m = fit(x, y, GpHyper{{0.7}, 1.0, 0.05}, false);
  const GpModel back = gp_from_json(to_json(m));
  for (double q : {-1.0, 0.25, 1.7})
    EXPECT_NEAR(predict_mean(back, Eigen::VectorXd::Constant(1, q)), predict_mean(m, Eigen::VectorXd::Constant(1, q)), 1e-12);
}

TEST(Serialize, AggregatorAndMilRoundTrip) {
  AggregatorTrainingSet t;
  for (int i = 0; i < 10; ++i) {
    t.stats.push_back(sequence_stats(std::vector<double>{i * 0.1, i * 0.1 + 0.05}));
    t.scaled.push_back(i * 0.1);
    t.significant.push_back(i > 4);
  }
  const Aggregator agg = train_aggregator(AggregatorKind::Svc, t);
  const Aggregator back = aggregator_from_json(to_json(agg));
  const std::vector<double> probe = {0.33, 0.41};
  EXPECT_EQ(predict_sequence(agg, probe), predict_sequence(back, probe));

  Eigen::MatrixXd x;
  std::vector<int> y;
  toy_problem(x, y);
  std::vector<Bag> bags;
  for (int b = 0; b < 4; ++b) {
    Bag bag;
    bag.bag_id = std::to_string(b);
    bag.label = b % 2 == 0;
    bag.instances = x.middleRows(5 * b, 5);
    bags.push_back(bag);
  }
  const MilModel mil = train_misvm(bags, {});
  const MilModel mil2 = mil_from_json(to_json(mil));
  EXPECT_EQ(mil2.witnesses, mil.witnesses);
  EXPECT_EQ(mil2.history, mil.history);
  EXPECT_EQ(predict_bag(mil2, bags[1]), predict_bag(mil, bags[1]));
}

TEST(Serialize, EnvelopeChecked) {
  MlpConfig c;
  c.input_dim = 3;
  c.hidden_widths = {2, 2, 2};
  const std::string text = to_json(init_model(c));
  EXPECT_THROW(svc_from_json(text), FormatError);
  auto doc = nlohmann::json::parse(text);
  doc["version"] = 99;
  EXPECT_THROW(mlp_from_json(doc.dump()), FormatError);
  EXPECT_THROW(mlp_from_json("not json"), FormatError);
}
