#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hetqr/study.hpp"

#include <sstream>

using namespace hetqr;

namespace {

StudyConfig small(const std::string& scenario, Index n) {
  StudyConfig c;
  c.scenario = parse_scenario(scenario);
  c.scenario.n = n;
  c.lambda_points = 6;
  c.valid_multiplier = 5;
  c.test_multiplier = 10;
  return c;
}

}  // namespace

TEST_CASE("one replication of QR on the heteroscedastic design keeps every slope") {
  StudyConfig c = small("hetero6", 500);
  c.methods = {Method::QR};
  c.replications = 1;
  auto r = run_study(c);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].size.mean == 18.0);
  CHECK(r.true_size == 9);
  CHECK(r.failures == 0);
}

TEST_CASE("studies are reproducible and independent of the job count") {
  StudyConfig c = small("table2-ar", 100);
  c.scenario.p = 12;
  c.replications = 2;
  auto a = run_study(c);
  c.jobs = 2;
  auto b = run_study(c);
  REQUIRE(a.replications.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    REQUIRE(a.replications[i].methods.size() == b.replications[i].methods.size());
    for (std::size_t k = 0; k < a.replications[i].methods.size(); ++k) {
      const auto& x = a.replications[i].methods[k];
      const auto& y = b.replications[i].methods[k];
      CHECK(x.size == y.size);
      CHECK(x.pe == y.pe);
      CHECK(x.lambda == y.lambda);
    }
  }
  std::ostringstream ta, tb;
  write_table_csv(ta, a);
  write_table_csv(tb, b);
  CHECK(ta.str() == tb.str());
  CHECK(a.replications[0].seed != a.replications[1].seed);
}

TEST_CASE("QR is omitted when p >= n") {
  StudyConfig c = small("block-ar-normal-p20", 15);
  c.methods = {Method::QR, Method::QRLasso};
  c.replications = 1;
  auto r = run_study(c);
  REQUIRE(r.methods.size() == 1);
  CHECK(r.methods[0] == Method::QRLasso);
  CHECK_FALSE(r.notices.empty());
}

TEST_CASE("config file parsing") {
  std::istringstream in(
      "# comment\n"
      "n = 200\n"
      "scenario = table3-cs\n"
      "reps = 7\n"
      "methods = qr, hetqr\n"
      "taus = 0.1, 0.9\n"
      "lambda_points = 4   # trailing comment\n"
      "seed = 99\n");
  auto c = parse_study_config(in);
  CHECK(c.scenario.n == 200);
  CHECK(c.scenario.seed == 99);
  CHECK(c.scenario.error == ErrorDist::T3);
  CHECK(c.replications == 7);
  CHECK(c.methods == std::vector<Method>{Method::QR, Method::HetQR});
  CHECK(c.taus == std::vector<double>{0.1, 0.9});
  CHECK(c.lambda_grid().values.size() == 4);

  std::istringstream bad("colour = blue\n");
  CHECK_THROWS_AS(parse_study_config(bad), InvalidInput);
  std::istringstream noeq("reps 3\n");
  CHECK_THROWS_AS(parse_study_config(noeq), InvalidInput);
  std::istringstream badnum("reps = three\n");
  CHECK_THROWS_AS(parse_study_config(badnum), InvalidInput);
}

TEST_CASE("summary uses the standard error of the mean") {
  auto s = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == 2.5);
  CHECK(s.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(summarize({3.0}).se == 0.0);
}
