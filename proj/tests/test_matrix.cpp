#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "qep/matrix.hpp"
#include "test_helpers.hpp"

using qep::Matrix;

TEST_CASE("frobenius norm on known matrices") {
    CHECK(qep::frobenius_norm(Matrix(2, 2)) == 0.0);
    CHECK(qep::frobenius_norm(Matrix::identity(2)) == Catch::Approx(std::sqrt(2.0)));
    CHECK(qep::frobenius_norm(Matrix::from_rows({{3.0, 4.0}})) == 5.0);
}

TEST_CASE("frobenius norm satisfies the triangle inequality") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix a = qeptest::random_matrix(rng, 4, 6, -5.0, 5.0);
        const Matrix b = qeptest::random_matrix(rng, 4, 6, -5.0, 5.0);
        CHECK(qep::frobenius_norm(a + b) <=
              qep::frobenius_norm(a) + qep::frobenius_norm(b) + 1e-12);
    }
}

TEST_CASE("matrix construction validates shape and finiteness") {
    CHECK_THROWS_AS(Matrix(0, 3), qep::DimensionError);
    CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), qep::DimensionError);
    CHECK_THROWS_AS(Matrix(1, 2, {1.0, std::nan("")}), qep::DimensionError);
    CHECK_THROWS_AS(Matrix(1, 1, {std::numeric_limits<double>::infinity()}),
                    qep::DimensionError);
}

TEST_CASE("matmul and transpose basics") {
    const Matrix a = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
    const Matrix b = Matrix::from_rows({{5.0, 6.0}, {7.0, 8.0}});
    const Matrix ab = a * b;
    CHECK(ab == Matrix::from_rows({{19.0, 22.0}, {43.0, 50.0}}));
    CHECK(a.transpose().transpose() == a);
    CHECK_THROWS_AS(a * Matrix(3, 2), qep::DimensionError);

    // multiply_transposed(a, b) == a * b^T
    std::mt19937_64 rng(11);
    const Matrix p = qeptest::random_matrix(rng, 3, 5);
    const Matrix q = qeptest::random_matrix(rng, 4, 5);
    CHECK(qeptest::rel_error(qep::multiply_transposed(p, q), p * q.transpose()) < 1e-15);
}

TEST_CASE("trace requires a square matrix") {
    CHECK(qep::trace(Matrix::identity(4)) == 4.0);
    CHECK_THROWS_AS(qep::trace(Matrix(2, 3)), qep::DimensionError);
}
