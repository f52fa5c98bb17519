#include "doctest.h"

#include "borrow/covariance.hpp"
#include "borrow/errors.hpp"
#include "borrow/synthetic.hpp"

#include <Eigen/Dense>

using namespace borrow;

namespace {

Adjacency path(int n) {
  std::vector<std::pair<int, int>> edges;
  for (int k = 0; k + 1 < n; ++k) edges.emplace_back(k, k + 1);
  return Adjacency::from_edges(n, edges);
}

bool cholesky_ok(const Eigen::MatrixXd& m) { return Eigen::LLT<Eigen::MatrixXd>(m).info() == Eigen::Success; }

}  // namespace

TEST_SUITE("covariance") {

TEST_CASE("block precision holds reciprocal variances") {
  std::vector<IidBlock> one{{3, 1.0}};
  CHECK(Eigen::MatrixXd(build_block_precision(one)).isApprox(Eigen::MatrixXd::Identity(3, 3)));

  std::vector<IidBlock> two{{2, 4.0}, {3, 0.25}};
  Eigen::VectorXd expected(5);
  expected << 0.25, 0.25, 4, 4, 4;
  const Eigen::MatrixXd q = build_block_precision(two);
  CHECK((q - Eigen::MatrixXd(expected.asDiagonal())).cwiseAbs().maxCoeff() == 0.0);

  std::vector<IidBlock> zero{{2, 0.0}};
  CHECK_THROWS_AS(build_block_precision(zero), DimensionError);
}

TEST_CASE("CAR precision") {
  const Adjacency a = path(4);
  CHECK(Eigen::MatrixXd(build_car_precision(0.0, a, 2.0)).isApprox(Eigen::MatrixXd::Identity(4, 4) / 2.0));

  Eigen::Matrix2d expected;
  expected << 1, -0.5, -0.5, 1;
  CHECK((Eigen::MatrixXd(build_car_precision(0.5, path(2))) - expected).cwiseAbs().maxCoeff() < 1e-15);

  const Adjacency g = grid_adjacency(3, 4);
  for (double rho : {0.0, 0.3, 0.9}) {
    const Eigen::MatrixXd q = build_car_precision(rho, g);
    CHECK((q * Eigen::VectorXd::Ones(12) - (1.0 - rho) * Eigen::VectorXd::Ones(12)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((q - q.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(cholesky_ok(q));
  }
  CHECK_THROWS_AS(build_car_precision(1.0, g), RhoOutOfRange);
  CHECK_THROWS_AS(build_car_precision(-0.1, g), RhoOutOfRange);
}

TEST_CASE("adjacency validation") {
  std::vector<std::pair<int, int>> loop{{0, 1}, {1, 1}};
  CHECK_THROWS_AS(Adjacency::from_edges(2, loop), AsymmetricAdjacency);
  std::vector<std::pair<int, int>> dup{{0, 1}, {1, 0}};
  CHECK_THROWS_AS(Adjacency::from_edges(2, dup), AsymmetricAdjacency);
  std::vector<std::pair<int, int>> bad{{0, 5}};
  CHECK_THROWS_AS(Adjacency::from_edges(2, bad), IndexOutOfRange);
  Eigen::Matrix2d asym;
  asym << 0, 1, 0, 0;
  CHECK_THROWS_AS(Adjacency::from_dense(asym), AsymmetricAdjacency);
  Eigen::Matrix2d ok;
  ok << 0, 1, 1, 0;
  CHECK(Adjacency::from_dense(ok) == path(2));
  CHECK(path(4).hop_distances(0) == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("space-time precision") {
  std::vector<IidBlock> unit{{1, 1.0}};
  const PrecisionMatrix q1 = build_block_precision(unit);
  Eigen::Matrix2d expected;
  expected << 1.25, -0.5, -0.5, 1;
  CHECK((Eigen::MatrixXd(build_spacetime_precision(0.5, q1, 2)) - expected).cwiseAbs().maxCoeff() < 1e-15);

  const Adjacency g = grid_adjacency(2, 2);
  const PrecisionMatrix q = build_car_precision(0.4, g);
  std::vector<PrecisionMatrix> copies(3, q);
  const Eigen::MatrixXd independent = block_diagonal(copies);
  CHECK((Eigen::MatrixXd(build_spacetime_precision(0.0, q, 3)) - independent).cwiseAbs().maxCoeff() < 1e-14);

  // Dense-inverse oracle: Cov(a_t, a_{t-1}) = rho_T Var(a_{t-1}).
  const double rho_t = 0.7, sigma2 = 1.3;
  const Eigen::MatrixXd st = build_spacetime_precision(rho_t, q, 3, sigma2);
  CHECK((st - st.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE(cholesky_ok(st));
  const Eigen::MatrixXd cov = st.inverse();
  for (int t = 1; t < 3; ++t) {
    const Eigen::MatrixXd lagged = cov.block(4 * t, 4 * (t - 1), 4, 4);
    const Eigen::MatrixXd prev = cov.block(4 * (t - 1), 4 * (t - 1), 4, 4);
    CHECK((lagged - rho_t * prev).cwiseAbs().maxCoeff() < 1e-10);
  }
  // First-period marginal is the CAR covariance sigma2 Q^-1.
  CHECK((cov.topLeftCorner(4, 4) - sigma2 * Eigen::MatrixXd(q).inverse()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("shift matrix moves each block one period forward") {
  ShiftMatrix h(2, 3);
  Eigen::VectorXd a(6);
  a << 1, 2, 3, 4, 5, 6;
  Eigen::VectorXd expected(6);
  expected << 0, 0, 1, 2, 3, 4;
  CHECK(h.apply(a) == expected);
  CHECK(Eigen::VectorXd(h.to_sparse() * a) == expected);
}

TEST_CASE("large space-time shape factorizes") {
  // A 271-node planar-ish graph stands in for the areal units; shape is what matters here.
  const Adjacency g = grid_adjacency(1, 271);
  const PrecisionMatrix st = build_spacetime_precision(0.76, build_car_precision(0.57, g), 5);
  CHECK(st.rows() == 1355);
  Eigen::SimplicialLLT<SparseMatrix> llt(st);
  CHECK(llt.info() == Eigen::Success);
}

}
