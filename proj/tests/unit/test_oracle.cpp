#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "sparsepca/errors.hpp"
#include "sparsepca/oracle.hpp"
#include "support.hpp"

using namespace sparsepca;

TEST_CASE("jacobi agrees with Eigen's symmetric solver") {
  std::mt19937_64 rng(3);
  for (int n = 1; n <= 9; ++n) {
    const Eigen::MatrixXd a = testing::random_gram(rng, n, 5);
    const auto ours = oracle::jacobi_eigenvalues(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(a);
    for (int i = 0; i < n; ++i) CHECK(ours[i] == doctest::Approx(ref.eigenvalues()(i)).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("max_eigenvalue closed forms") {
  Eigen::MatrixXd a(2, 2);
  a << 2.0, 1.0, 1.0, 2.0;
  CHECK(oracle::max_eigenvalue(a) == doctest::Approx(3.0));
  CHECK(oracle::max_eigenvalue(Eigen::MatrixXd::Constant(1, 1, 7.0)) == 7.0);
}

TEST_CASE("brute force on a hand-checked 2 x 2") {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 4.0, 1.0, 1.0, 2.0;
  // {1}: 4 - 1; {2}: 2 - 1; {1,2}: 3 + sqrt(2) - 2.
  auto best = oracle::brute_force_card(sigma, 1.0);
  CHECK(best.psi == doctest::Approx(3.0));
  CHECK(best.support == std::vector<Index>{0});
  CHECK(best.x.norm() == doctest::Approx(1.0));

  best = oracle::brute_force_card(sigma, 0.25);
  CHECK(best.psi == doctest::Approx(3.0 + std::sqrt(2.0) - 0.5));
  CHECK(best.support == std::vector<Index>{0, 1});
}

TEST_CASE("brute force ties prefer the smaller support") {
  // {1} and {1,2} both give 1 when lambda = 1 on diag(2, 1).
  Eigen::MatrixXd sigma = Eigen::Vector2d(2.0, 1.0).asDiagonal();
  const auto best = oracle::brute_force_card(sigma, 1.0);
  CHECK(best.support == std::vector<Index>{0});
}

TEST_CASE("brute force refuses large orders") {
  CHECK_THROWS_AS(oracle::brute_force_card(Eigen::MatrixXd::Identity(21, 21), 0.1), InfeasibleError);
}

TEST_CASE("xi scan agrees with brute force for two-row data") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + trial % 4;
    Eigen::MatrixXd a(2, n);
    for (int j = 0; j < n; ++j) a(0, j) = g(rng), a(1, j) = g(rng);
    const Eigen::MatrixXd sigma = a.transpose() * a;
    const double lambda = 0.5 * sigma.diagonal().minCoeff();
    const double psi = oracle::brute_force_card(sigma, lambda).psi;
    CHECK(oracle::xi_scan_psi(a, lambda, 20000) == doctest::Approx(psi).epsilon(1e-4));
  }
}

TEST_CASE("xi scan argument checks") {
  CHECK_THROWS_AS(oracle::xi_scan_psi(Eigen::MatrixXd::Ones(3, 2), 0.1), InfeasibleError);
  CHECK_THROWS_AS(oracle::xi_scan_psi(Eigen::MatrixXd::Ones(2, 2), 0.1, 100), InfeasibleError);
}
