#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "qep/numerics.hpp"
#include "test_helpers.hpp"

using qep::DampingMode;
using qep::HessianMatrix;
using qep::Matrix;

TEST_CASE("spectral norm of simple matrices") {
    CHECK(qep::spectral_norm(Matrix::identity(3)).value == Catch::Approx(1.0));
    const Matrix diag = Matrix::from_rows({{2.0, 0.0}, {0.0, 0.5}});
    CHECK(qep::spectral_norm(diag).value == Catch::Approx(2.0));
    CHECK(qep::spectral_norm(Matrix(3, 4)).value == 0.0);
}

TEST_CASE("spectral norm matches the Jacobi SVD oracle on random matrices") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 25; ++trial) {
        const Matrix m = qeptest::random_matrix(rng, 5, 5, -2.0, 2.0);
        const auto got = qep::spectral_norm(m);
        const double want = qeptest::spectral_norm_oracle(m);
        CHECK(got.converged);
        CHECK(std::abs(got.value - want) <= 1e-6 * want);
    }
}

TEST_CASE("spectral norm reports non-convergence without failing") {
    std::mt19937_64 rng(29);
    const Matrix m = qeptest::random_matrix(rng, 6, 6);
    const auto result = qep::spectral_norm(m, 1e-16, 2);
    CHECK_FALSE(result.converged);
    CHECK(result.iterations == 2);
    CHECK(result.value > 0.0);  // last iterate still usable
}

TEST_CASE("damped hessian from activations") {
    SECTION("identity activations, mean-diagonal damping") {
        const HessianMatrix h = qep::damped_hessian(Matrix::identity(2), DampingMode::mean_diagonal());
        CHECK(h.base() == Matrix::identity(2));
        CHECK(h.damping() == 1.0);
        CHECK(h.effective() == Matrix::from_rows({{2.0, 0.0}, {0.0, 2.0}}));
    }
    SECTION("single activation row") {
        const HessianMatrix h =
            qep::damped_hessian(Matrix::from_rows({{1.0, 1.0}}), DampingMode::mean_diagonal());
        CHECK(h.base() == Matrix::from_rows({{2.0}}));
        CHECK(h.damping() == 2.0);
        CHECK(h.effective() == Matrix::from_rows({{4.0}}));
    }
    SECTION("all-zero activations cannot be damped by their mean diagonal") {
        CHECK_THROWS_AS(qep::damped_hessian(Matrix(2, 4), DampingMode::mean_diagonal()),
                        qep::SingularHessian);
    }
    SECTION("asymmetric bases are rejected") {
        CHECK_THROWS_AS(HessianMatrix(Matrix::from_rows({{1.0, 0.5}, {0.25, 1.0}}),
                                      DampingMode::none()),
                        qep::DimensionError);
        CHECK_THROWS_AS(HessianMatrix(Matrix(2, 3), DampingMode::none()), qep::DimensionError);
    }
}

TEST_CASE("solve_right computes B * H^{-1}") {
    std::mt19937_64 rng(31);
    SECTION("identity solve") {
        const Matrix b = qeptest::random_matrix(rng, 3, 4);
        const HessianMatrix h(Matrix::identity(4), DampingMode::none());
        CHECK(qeptest::rel_error(qep::solve_right(h, b), b) < 1e-14);
    }
    SECTION("scalar scaling") {
        const HessianMatrix h(Matrix::from_rows({{2.0, 0.0}, {0.0, 2.0}}), DampingMode::none());
        const Matrix x = qep::solve_right(h, Matrix::from_rows({{2.0, 4.0}}));
        CHECK(qeptest::rel_error(x, Matrix::from_rows({{1.0, 2.0}})) < 1e-15);
    }
    SECTION("random SPD matches the Gauss-Jordan inverse oracle") {
        for (int trial = 0; trial < 20; ++trial) {
            const Matrix spd = qeptest::random_spd(rng, 4);
            const Matrix b = qeptest::random_matrix(rng, 3, 4);
            const HessianMatrix h(spd, DampingMode::none());
            const Matrix want = b * qep::gauss_jordan_inverse(spd);
            CHECK(qeptest::rel_error(qep::solve_right(h, b), want) < 1e-9);
        }
    }
    SECTION("residual contract") {
        const Matrix spd = qeptest::random_spd(rng, 5);
        const Matrix b = qeptest::random_matrix(rng, 2, 5);
        const HessianMatrix h(spd, DampingMode::none());
        const Matrix x = qep::solve_right(h, b);
        CHECK(qep::frobenius_norm(x * h.effective() - b) <= 1e-8 * qep::frobenius_norm(b));
    }
    SECTION("indefinite matrix fails Cholesky") {
        const HessianMatrix h(Matrix::from_rows({{1.0, 2.0}, {2.0, 1.0}}), DampingMode::none());
        CHECK_THROWS_AS(qep::solve_right(h, Matrix(1, 2)), qep::SingularHessian);
    }
}

TEST_CASE("projection onto the activation row space") {
    SECTION("identity activations give the identity projection") {
        const auto p = qep::projection(Matrix::identity(3), DampingMode::none());
        CHECK(qeptest::rel_error(p.p, Matrix::identity(3)) < 1e-12);
    }
    SECTION("rank-one activations") {
        const auto p = qep::projection(Matrix::from_rows({{1.0, 1.0}}), DampingMode::none());
        CHECK(qeptest::rel_error(p.p, Matrix::from_rows({{0.5, 0.5}, {0.5, 0.5}})) < 1e-12);
        CHECK(qep::frobenius_norm(p.p * p.p - p.p) <= 1e-8 * qep::frobenius_norm(p.p));
    }
    SECTION("undamped projections are symmetric and idempotent") {
        std::mt19937_64 rng(37);
        for (int trial = 0; trial < 20; ++trial) {
            const Matrix x_hat = qeptest::random_matrix(rng, 4, 12);
            const Matrix p = qep::projection(x_hat, DampingMode::none()).p;
            const double norm = qep::frobenius_norm(p);
            CHECK(qep::frobenius_norm(p - p.transpose()) <= 1e-10 * norm);
            CHECK(qep::frobenius_norm(p * p - p) <= 1e-8 * norm);
        }
    }
    SECTION("damped projection of rank-deficient activations stays inside [0, 1)") {
        std::mt19937_64 rng(41);
        Matrix x_hat = qeptest::random_matrix(rng, 4, 10);
        for (std::size_t c = 0; c < x_hat.cols(); ++c) x_hat(2, c) = 0.0;  // kill one row
        const Matrix p = qep::projection(x_hat, DampingMode::mean_diagonal()).p;
        const auto eig = qep::jacobi_eigen(p);
        for (double ev : eig.values) {
            CHECK(ev >= -1e-12);
            CHECK(ev < 1.0);
        }
    }
}

TEST_CASE("projection monotonicity lemma on an alpha grid") {
    std::mt19937_64 rng(43);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix x_hat = qeptest::random_matrix(rng, 3, 9);
        const Matrix p = qep::projection(x_hat, DampingMode::none()).p;
        const Matrix z = qeptest::random_matrix(rng, 5, 9, -2.0, 2.0);
        const Matrix eye = Matrix::identity(p.rows());
        double prev = std::numeric_limits<double>::infinity();
        for (int step = 0; step <= 10; ++step) {
            const double alpha = 0.1 * step;
            const double value = qep::frobenius_norm(z * (eye - alpha * p));
            CHECK(value <= prev + 1e-12);
            prev = value;
        }
    }
}

TEST_CASE("lstsq solves the normal equations") {
    std::mt19937_64 rng(47);
    SECTION("identity design") {
        const Matrix b = qeptest::random_matrix(rng, 2, 3);
        CHECK(qeptest::rel_error(qep::lstsq(Matrix::identity(3), b), b) < 1e-14);
    }
    SECTION("scalar design") {
        CHECK(qep::lstsq(Matrix::from_rows({{2.0}}), Matrix::from_rows({{6.0}})) ==
              Matrix::from_rows({{3.0}}));
    }
    SECTION("finite-difference gradient vanishes at the solution") {
        const Matrix a = qeptest::random_matrix(rng, 3, 8);
        const Matrix b = qeptest::random_matrix(rng, 2, 8);
        const Matrix w = qep::lstsq(a, b);
        const auto objective = [&](const Matrix& m) {
            return qep::frobenius_norm_squared(b - m * a);
        };
        const double h = 1e-4;  // objective is quadratic: secant slope is exact
        double grad2 = 0.0;
        for (std::size_t r = 0; r < w.rows(); ++r) {
            for (std::size_t c = 0; c < w.cols(); ++c) {
                Matrix up = w, down = w;
                up(r, c) += h;
                down(r, c) -= h;
                const double g = (objective(up) - objective(down)) / (2.0 * h);
                grad2 += g * g;
            }
        }
        CHECK(std::sqrt(grad2) <= 1e-8);
    }
    SECTION("rank-deficient design is rejected") {
        Matrix a(2, 4);
        for (std::size_t c = 0; c < 4; ++c) {
            a(0, c) = static_cast<double>(c + 1);
            a(1, c) = 2.0 * static_cast<double>(c + 1);
        }
        CHECK_THROWS_AS(qep::lstsq(a, Matrix(1, 4)), qep::SingularHessian);
    }
}

TEST_CASE("jacobi eigensolver reconstructs symmetric matrices") {
    std::mt19937_64 rng(53);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix spd = qeptest::random_spd(rng, 5, 0.5, 8.0);
        const auto eig = qep::jacobi_eigen(spd);
        Matrix d(5, 5);
        for (std::size_t i = 0; i < 5; ++i) d(i, i) = eig.values[i];
        const Matrix rebuilt = eig.vectors * d * eig.vectors.transpose();
        CHECK(qeptest::rel_error(rebuilt, spd) < 1e-10);
        for (std::size_t i = 1; i < 5; ++i) CHECK(eig.values[i - 1] >= eig.values[i]);
    }
}
