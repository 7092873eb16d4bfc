#include "multimix/model.hpp"

#include <cmath>

#include "doctest.h"
#include "multimix/numeric.hpp"
#include "oracles.hpp"

using namespace multimix;

TEST_CASE("dataset build computes totals and log coefficients") {
  Matrix y(2, 3);
  y << 2, 1, 0, 1, 1, 1;
  Matrix x = Matrix::Ones(2, 1);
  Dataset d = Dataset::build(y, x);
  CHECK(d.s(0) == 3.0);
  CHECK(d.s(1) == 3.0);
  // 3!/2!/1!/0! = 3 and 3!/1!/1!/1! = 6
  CHECK(d.log_coef(0) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(d.log_coef(1) == doctest::Approx(std::log(6.0)).epsilon(1e-12));

  Dataset bad = d;
  bad.s(0) = 4.0;
  CHECK_THROWS_AS(bad.validate(), invalid_input_error);
  Dataset bad2 = d;
  bad2.log_coef(0) += 1.0;
  CHECK_THROWS_AS(bad2.validate(), invalid_input_error);
}

TEST_CASE("category probabilities: closed-form cases") {
  SUBCASE("all-zero coefficients give the uniform distribution") {
    Matrix beta = Matrix::Zero(5, 3);
    Vector x(3);
    x << 1.0, -2.0, 0.5;
    Vector g = category_probabilities(beta, x);
    for (int j = 0; j < 6; ++j)
      CHECK(g(j) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  }
  SUBCASE("binary intercept-only identity case") {
    Matrix beta = Matrix::Zero(1, 1);
    Vector x = Vector::Ones(1);
    Vector g = category_probabilities(beta, x);
    CHECK(g(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(g(1) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("log-odds ln2, ln3 give (2/6, 3/6, 1/6)") {
    Matrix beta(2, 1);
    beta << std::log(2.0), std::log(3.0);
    Vector x = Vector::Ones(1);
    Vector g = category_probabilities(beta, x);
    CHECK(g(0) == doctest::Approx(2.0 / 6.0).epsilon(1e-14));
    CHECK(g(1) == doctest::Approx(3.0 / 6.0).epsilon(1e-14));
    CHECK(g(2) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  }
}

TEST_CASE("category probabilities: simplex property and overflow safety") {
  Rng rng(101);
  for (int rep = 0; rep < 200; ++rep) {
    int J = uniform_int(rng, 1, 6);
    int P = uniform_int(rng, 1, 4);
    Matrix beta(J, P);
    Vector x(P);
    for (int j = 0; j < J; ++j)
      for (int p = 0; p < P; ++p) beta(j, p) = (uniform01(rng) - 0.5) * 100.0;
    for (int p = 0; p < P; ++p) x(p) = (uniform01(rng) - 0.5) * 100.0;
    Vector g = category_probabilities(beta, x);
    CHECK(g.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g.minCoeff() >= 0.0);
  }
  // |eta| = 700 must not overflow anything
  Matrix beta(2, 1);
  beta << 700.0, -700.0;
  Vector x = Vector::Ones(1);
  Vector g = category_probabilities(beta, x);
  CHECK(g.allFinite());
  CHECK(g.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g(0) == doctest::Approx(1.0).epsilon(1e-12));

  Matrix nan_beta = Matrix::Zero(1, 1);
  nan_beta(0, 0) = std::nan("");
  CHECK_THROWS_AS(category_probabilities(nan_beta, x),
                  invalid_input_error);
  Vector inf_x(1);
  inf_x << std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(category_probabilities(Matrix::Zero(1, 1), inf_x),
                  invalid_input_error);
}

TEST_CASE("log multinomial pmf") {
  SUBCASE("degenerate distribution carried entirely by one category") {
    Vector y(3), theta(3);
    y << 3, 0, 0;
    theta << 1, 0, 0;
    CHECK(log_multinomial_pmf(y, 3, theta, 0.0) == 0.0);
  }
  SUBCASE("hand-checkable case log(3 * 0.25 * 0.3)") {
    Vector y(3), theta(3);
    y << 2, 1, 0;
    theta << 0.5, 0.3, 0.2;
    double lc = Dataset::row_log_coef(y);
    double expected =
        static_cast<double>(logl(oracles::direct_pmf(y, {0.5L, 0.3L, 0.2L})));
    double got = log_multinomial_pmf(y, 3, theta, lc);
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    CHECK(got == doctest::Approx(std::log(0.225)).epsilon(1e-12));
    CHECK(got == doctest::Approx(-1.49165).epsilon(1e-5));
  }
  SUBCASE("symmetric binomial gives log 1/2") {
    Vector y(2), theta(2);
    y << 1, 1;
    theta << 0.5, 0.5;
    double lc = Dataset::row_log_coef(y);
    CHECK(log_multinomial_pmf(y, 2, theta, lc) ==
          doctest::Approx(std::log(0.5)).epsilon(1e-14));
  }
  SUBCASE("zero probability with positive count is -inf, not an error") {
    Vector y(2), theta(2);
    y << 1, 1;
    theta << 1, 0;
    CHECK(log_multinomial_pmf(y, 2, theta, std::log(2.0)) == kNegInf);
  }
}

TEST_CASE("observed log-likelihood") {
  Rng rng(202);
  Dataset data = oracles::random_dataset(rng, 5, 3, 2, 5, 15);

  SUBCASE("K = 1 reduces to a sum of component pmfs") {
    MixtureParams params = oracles::random_params(rng, 1, data.J(), data.P(), 0.5);
    double expected = 0.0;
    for (int i = 0; i < data.n(); ++i) {
      Vector theta =
          category_probabilities(params.beta[0], data.x.row(i).transpose());
      expected += log_multinomial_pmf(data.y.row(i).transpose(), data.s(i),
                                      theta, data.log_coef(i));
    }
    CHECK(observed_log_likelihood(params, data) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("a mixture of identical components collapses to one") {
    MixtureParams one = oracles::random_params(rng, 1, data.J(), data.P(), 0.5);
    MixtureParams two;
    two.pi = Vector::Constant(2, 0.5);
    two.beta = {one.beta[0], one.beta[0]};
    CHECK(observed_log_likelihood(two, data) ==
          doctest::Approx(observed_log_likelihood(one, data)).epsilon(1e-12));
  }
  SUBCASE("matches the direct-space brute-force oracle") {
    for (int rep = 0; rep < 20; ++rep) {
      MixtureParams params = oracles::random_params(rng, 2, data.J(), data.P(), 0.8);
      CHECK(observed_log_likelihood(params, data) ==
            doctest::Approx(oracles::brute_observed_loglik(params, data))
                .epsilon(1e-10));
    }
  }
  SUBCASE("empty mixture is an invalid input") {
    MixtureParams params;
    params.pi = Vector();
    CHECK_THROWS_AS(observed_log_likelihood(params, data), invalid_input_error);
  }
}

TEST_CASE("likelihood normalizes over the whole sample space") {
  Rng rng(303);
  struct Case {
    int categories, total;
  };
  for (Case c : {Case{2, 2}, Case{3, 3}, Case{3, 2}}) {
    MixtureParams params = oracles::random_params(rng, 2, c.categories - 1, 1, 0.7);
    Matrix x = Matrix::Ones(1, 1);
    long double total_prob = 0.0L;
    oracles::enumerate_counts(c.categories, c.total, [&](const Vector& y) {
      Matrix ym = y.transpose();
      Dataset d = Dataset::build(ym, x);
      total_prob += expl(static_cast<long double>(
          observed_log_likelihood(params, d)));
    });
    CHECK(static_cast<double>(total_prob) == doctest::Approx(1.0).epsilon(1e-8));
  }
  // joint enumeration over two independent rows
  MixtureParams params = oracles::random_params(rng, 2, 1, 1, 0.7);
  Matrix x2 = Matrix::Ones(2, 1);
  long double total_prob = 0.0L;
  oracles::enumerate_counts(2, 2, [&](const Vector& y1) {
    oracles::enumerate_counts(2, 2, [&](const Vector& y2) {
      Matrix ym(2, 2);
      ym.row(0) = y1.transpose();
      ym.row(1) = y2.transpose();
      Dataset d = Dataset::build(ym, x2);
      total_prob += expl(static_cast<long double>(
          observed_log_likelihood(params, d)));
    });
  });
  CHECK(static_cast<double>(total_prob) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("e-step") {
  Rng rng(404);
  Dataset data = oracles::random_dataset(rng, 4, 3, 2, 5, 12);

  SUBCASE("identical components with equal weights give 1/K") {
    MixtureParams one = oracles::random_params(rng, 1, data.J(), data.P(), 0.5);
    MixtureParams three;
    three.pi = Vector::Constant(3, 1.0 / 3.0);
    three.beta = {one.beta[0], one.beta[0], one.beta[0]};
    Responsibilities w = e_step(three, data);
    for (int i = 0; i < data.n(); ++i)
      for (int k = 0; k < 3; ++k)
        CHECK(w.w(i, k) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("degenerate weights put every row in the open component") {
    MixtureParams params = oracles::random_params(rng, 2, data.J(), data.P(), 0.5);
    params.pi << 1.0, 0.0;
    Responsibilities w = e_step(params, data);
    for (int i = 0; i < data.n(); ++i) {
      CHECK(w.w(i, 0) == 1.0);
      CHECK(w.w(i, 1) == 0.0);
    }
  }
  SUBCASE("matches the direct-space oracle") {
    for (int rep = 0; rep < 20; ++rep) {
      MixtureParams params = oracles::random_params(rng, 2, data.J(), data.P(), 0.8);
      Responsibilities w = e_step(params, data);
      Matrix expected = oracles::brute_e_step(params, data);
      for (int i = 0; i < data.n(); ++i)
        for (int k = 0; k < 2; ++k)
          CHECK(w.w(i, k) == doctest::Approx(expected(i, k)).epsilon(1e-10));
      w.validate();
    }
  }
  SUBCASE("a row with no live component names the row") {
    Matrix scores(3, 2);
    scores << 0.0, -1.0, kNegInf, kNegInf, 0.5, 0.5;
    try {
      responsibilities_from_log_scores(scores);
      FAIL("expected degeneracy_error");
    } catch (const degeneracy_error& e) {
      CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
  }
}

TEST_CASE("MAP classification") {
  Responsibilities w;
  w.w.resize(3, 2);
  w.w << 0.2, 0.8, 0.5, 0.5, 1.0, 0.0;
  AllocationVector z = map_classification(w);
  CHECK(z.z[0] == 1);  // second component wins
  CHECK(z.z[1] == 0);  // ties break to the lowest index
  CHECK(z.z[2] == 0);

  Responsibilities onehot;
  onehot.w = Matrix::Zero(4, 3);
  onehot.w(0, 2) = 1.0;
  onehot.w(1, 0) = 1.0;
  onehot.w(2, 1) = 1.0;
  onehot.w(3, 2) = 1.0;
  AllocationVector zh = map_classification(onehot);
  CHECK(zh.z == std::vector<int>({2, 0, 1, 2}));
}

TEST_CASE("expected complete log-likelihood") {
  Rng rng(505);
  Dataset data = oracles::random_dataset(rng, 6, 3, 2, 4, 10);
  MixtureParams params = oracles::random_params(rng, 2, data.J(), data.P(), 0.6);

  SUBCASE("hard responsibilities equal the complete-data log-likelihood") {
    Responsibilities w = e_step(params, data);
    AllocationVector z = map_classification(w);
    Responsibilities hard;
    hard.w = Matrix::Zero(data.n(), 2);
    for (int i = 0; i < data.n(); ++i) hard.w(i, z.z[i]) = 1.0;
    double complete = 0.0;
    for (int i = 0; i < data.n(); ++i) {
      Vector theta = category_probabilities(params.beta[z.z[i]],
                                            data.x.row(i).transpose());
      complete += std::log(params.pi(z.z[i])) +
                  log_multinomial_pmf(data.y.row(i).transpose(), data.s(i),
                                      theta, data.log_coef(i));
    }
    CHECK(expected_complete_loglik(params, hard, data) ==
          doctest::Approx(complete).epsilon(1e-12));
  }
  SUBCASE("K = 1 equals the observed log-likelihood") {
    MixtureParams one = oracles::random_params(rng, 1, data.J(), data.P(), 0.6);
    Responsibilities w;
    w.w = Matrix::Ones(data.n(), 1);
    CHECK(expected_complete_loglik(one, w, data) ==
          doctest::Approx(observed_log_likelihood(one, data)).epsilon(1e-12));
  }
  SUBCASE("matches the brute-force triple loop") {
    for (int rep = 0; rep < 10; ++rep) {
      MixtureParams p = oracles::random_params(rng, 2, data.J(), data.P(), 0.8);
      Responsibilities w = oracles::random_resp(rng, data.n(), 2);
      CHECK(expected_complete_loglik(p, w, data) ==
            doctest::Approx(oracles::brute_expected_Q(p, w, data)).epsilon(1e-10));
    }
  }
  SUBCASE("zero responsibility silences a zero-weight component") {
    MixtureParams p = oracles::random_params(rng, 2, data.J(), data.P(), 0.5);
    p.pi << 1.0, 0.0;  // log pi_2 = -inf
    Responsibilities w;
    w.w = Matrix::Zero(data.n(), 2);
    w.w.col(0).setOnes();
    CHECK(std::isfinite(expected_complete_loglik(p, w, data)));
  }
}

TEST_CASE("Q gradient") {
  Rng rng(606);

  SUBCASE("zero at the analytic intercept-only optimum") {
    Dataset data = oracles::random_dataset(rng, 12, 4, 1, 10, 30);
    Responsibilities w = oracles::random_resp(rng, data.n(), 2);
    std::vector<Matrix> beta;
    for (int k = 0; k < 2; ++k) {
      double denom = (w.w.col(k).array() * data.s.array()).sum();
      Vector theta(4);
      for (int j = 0; j < 4; ++j)
        theta(j) = (w.w.col(k).array() * data.y.col(j).array()).sum() / denom;
      Matrix b(3, 1);
      for (int j = 0; j < 3; ++j) b(j, 0) = std::log(theta(j) / theta(3));
      beta.push_back(b);
    }
    Vector g = q_gradient(beta, w, data);
    CHECK(g.cwiseAbs().maxCoeff() < 1e-8);
  }

  SUBCASE("matches central finite differences of Q") {
    for (int rep = 0; rep < 50; ++rep) {
      int K = uniform_int(rng, 1, 3);
      int C = uniform_int(rng, 2, 4);
      int P = uniform_int(rng, 1, 3);
      int n = uniform_int(rng, 3, 12);
      Dataset data = oracles::random_dataset(rng, n, C, P, 3, 15);
      MixtureParams params = oracles::random_params(rng, K, data.J(), P, 0.5);
      Responsibilities w = oracles::random_resp(rng, n, K);
      Vector g = q_gradient(params.beta, w, data);
      auto f = [&](const Vector& v) {
        MixtureParams p2 = params;
        p2.beta = MixtureParams::unflatten(v, K, data.J(), P);
        return expected_complete_loglik(p2, w, data);
      };
      Vector fd = oracles::finite_diff_gradient(f, params.flatten(), 1e-5);
      double rel = (fd - g).cwiseAbs().maxCoeff() /
                   std::max(1.0, g.cwiseAbs().maxCoeff());
      CHECK(rel < 1e-5);
    }
  }

  SUBCASE("an all-zero responsibility column zeroes its block") {
    Dataset data = oracles::random_dataset(rng, 5, 3, 2, 3, 9);
    MixtureParams params = oracles::random_params(rng, 2, data.J(), 2, 0.5);
    Responsibilities w;
    w.w = Matrix::Zero(5, 2);
    w.w.col(0).setOnes();
    Vector g = q_gradient(params.beta, w, data);
    CHECK(g.tail(data.J() * data.P()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("Q Hessian block") {
  Rng rng(707);

  SUBCASE("zero responsibilities give the zero matrix") {
    Dataset data = oracles::random_dataset(rng, 5, 3, 2, 3, 9);
    Matrix beta = Matrix::Zero(2, 2);
    Vector w = Vector::Zero(5);
    CHECK(q_hessian_block(beta, w, data).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("matches finite differences of the gradient; symmetric; NSD") {
    for (int rep = 0; rep < 25; ++rep) {
      int C = uniform_int(rng, 2, 4);
      int P = uniform_int(rng, 1, 3);
      int n = uniform_int(rng, 4, 12);
      Dataset data = oracles::random_dataset(rng, n, C, P, 3, 15);
      MixtureParams params = oracles::random_params(rng, 1, data.J(), P, 0.5);
      Responsibilities w = oracles::random_resp(rng, n, 1);
      Matrix H = q_hessian_block(params.beta[0], w.w.col(0), data);
      auto grad_fn = [&](const Vector& v) {
        Matrix b(data.J(), P);
        for (int j = 0; j < data.J(); ++j)
          for (int p = 0; p < P; ++p) b(j, p) = v(j * P + p);
        return q_gradient_block(b, w.w.col(0), data);
      };
      Matrix fd = oracles::finite_diff_jacobian(grad_fn, params.flatten(), 1e-5);
      double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
      CHECK((fd - H).cwiseAbs().maxCoeff() / scale < 1e-4);
      CHECK((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale);
      Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
      CHECK(eig.eigenvalues().maxCoeff() <= 1e-8 * scale);
    }
  }
}

TEST_CASE("identifiability warnings") {
  Matrix x = Matrix::Ones(3, 1);

  SUBCASE("forty replicates support four components") {
    Matrix y(3, 2);
    y << 20, 20, 10, 30, 40, 0;
    Dataset d = Dataset::build(y, x);
    CHECK(identifiability_check(d, 4).empty());
  }
  SUBCASE("the 2K-1 boundary is inclusive") {
    Matrix y(3, 2);
    y << 2, 1, 1, 2, 3, 0;
    Dataset d = Dataset::build(y, x);  // every S_i = 3 = 2*2-1
    CHECK(identifiability_check(d, 2).empty());
    Matrix y2(3, 2);
    y2 << 1, 1, 2, 0, 1, 1;  // S = (2, 2, 2) < 3
    Dataset d2 = Dataset::build(y2, x);
    auto warnings = identifiability_check(d2, 2);
    CHECK(warnings.size() == 4);  // one per row plus the summary
  }
  SUBCASE("a single component never warns") {
    Matrix y(3, 2);
    y << 1, 0, 0, 1, 1, 0;
    Dataset d = Dataset::build(y, x);
    CHECK(identifiability_check(d, 1).empty());
  }
}

TEST_CASE("classification is invariant to monotone rescaling of scores") {
  Rng rng(808);
  for (int rep = 0; rep < 30; ++rep) {
    int K = uniform_int(rng, 2, 4);
    Dataset data = oracles::random_dataset(rng, 8, 3, 2, 4, 12);
    MixtureParams params = oracles::random_params(rng, K, data.J(), 2, 0.7);
    AllocationVector via_estep = map_classification(e_step(params, data));
    Matrix ll = component_loglik_matrix(params, data);
    double a = 0.1 + uniform01(rng) * 5.0;
    double b = (uniform01(rng) - 0.5) * 10.0;
    for (int i = 0; i < data.n(); ++i) {
      int best = 0;
      for (int k = 0; k < K; ++k) {
        double score = a * (std::log(params.pi(k)) + ll(i, k)) + b;
        if (score > a * (std::log(params.pi(best)) + ll(i, best)) + b) best = k;
      }
      CHECK(best == via_estep.z[i]);
    }
  }
}
