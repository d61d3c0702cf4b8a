#include <doctest.h>

#include <flexagg/numerics.hpp>
#include <flexagg/types.hpp>

#include <cmath>
#include <limits>
#include <random>

using namespace flexagg;
using namespace flexagg::numerics;

TEST_CASE("lu_solve: diagonal system") {
    Mat a(2, 2);
    a << 2, 0, 0, 4;
    Mat b(2, 1);
    b << 1, 1;
    auto res = lu_solve(a, b);
    CHECK(res.x(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(res.x(1, 0) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(res.residual <= 1e-14);
    CHECK(res.condition_estimate >= 1.0);
}

TEST_CASE("lu_solve: identity returns the right-hand side") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Mat b(3, 2);
    for (int i = 0; i < b.size(); ++i) b(i) = uni(rng);
    auto res = lu_solve(Mat::Identity(3, 3), b);
    CHECK((res.x - b).cwiseAbs().maxCoeff() == 0.0);
    CHECK(res.condition_estimate == doctest::Approx(1.0));
}

TEST_CASE("lu_solve: rejects singular and malformed input") {
    Mat sing(2, 2);
    sing << 1, 2, 2, 4;
    CHECK_THROWS_AS(lu_solve(sing, Mat::Identity(2, 2)), SingularMatrix);
    CHECK_THROWS_AS(lu_solve(Mat::Zero(2, 3), Mat::Identity(2, 2)), SingularMatrix);
    CHECK_THROWS_AS(lu_solve(Mat::Identity(3, 3), Mat::Identity(2, 2)), SingularMatrix);
}

TEST_CASE("lu_solve: 500x500 diagonally dominant residual stays tiny") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    const int n = 500;
    Mat a(n, n);
    for (int i = 0; i < a.size(); ++i) a(i) = uni(rng);
    a.diagonal().array() += static_cast<double>(n);
    Mat b(n, 3);
    for (int i = 0; i < b.size(); ++i) b(i) = uni(rng);
    auto res = lu_solve(a, b);
    CHECK(res.residual <= 1e-10 * b.cwiseAbs().maxCoeff());
    CHECK(std::isfinite(res.condition_estimate));
}

TEST_CASE("newton_2d: affine map converges in one step") {
    auto f = [](const Vec2& x) -> Vec2 { return Vec2(2.0 * x[0] - 3.0, x[1] + 1.0); };
    auto res = newton_2d(f, Vec2(10.0, 10.0));
    CHECK(res.converged);
    CHECK(res.iterations <= 2);
    CHECK(res.x[0] == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(res.x[1] == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(res.residual <= 1e-10);
}

TEST_CASE("newton_2d: decoupled quadratic from the tutorial start") {
    auto f = [](const Vec2& x) -> Vec2 { return Vec2(x[0] * x[0] - 4.0, x[1] - 1.0); };
    auto res = newton_2d(f, Vec2(1.0, 0.0));
    CHECK(res.converged);
    CHECK(res.x[0] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("newton_2d: one-sided Jacobian near an unevaluable boundary") {
    auto f = [](const Vec2& x) -> Vec2 {
        if (x[0] < 0.0) return Vec2(std::nan(""), std::nan(""));
        return Vec2(std::sqrt(x[0]) - 1.2, x[1]);
    };
    auto res = newton_2d(f, Vec2(1e-7, 0.5));
    CHECK(res.converged);
    CHECK(res.x[0] == doctest::Approx(1.44).epsilon(1e-7));
    CHECK(std::abs(res.x[1]) <= 1e-10);
}

TEST_CASE("newton_2d: unevaluable start reports non-convergence") {
    auto f = [](const Vec2&) -> Vec2 { return Vec2(std::nan(""), 0.0); };
    auto res = newton_2d(f, Vec2(0.0, 0.0));
    CHECK_FALSE(res.converged);
    CHECK(res.iterations == 0);
    CHECK(res.residual == kInf);
}

namespace {

QpProblem box_projection(const Vec2& c) {
    QpProblem p;
    p.h = 2.0 * Mat::Identity(2, 2);
    p.g = Vec(2);
    p.g << -2.0 * c[0], -2.0 * c[1];
    p.a_ineq = Mat(4, 2);
    p.a_ineq << 1, 0, -1, 0, 0, 1, 0, -1;
    p.b_ineq = Vec::Ones(4);
    return p;
}

} // namespace

TEST_CASE("qp_solve: nearest point with one active half-space") {
    QpProblem p;
    p.h = 2.0 * Mat::Identity(2, 2);
    p.g = Vec::Zero(2);
    p.a_ineq = Mat(1, 2);
    p.a_ineq << -1, 0;  // z1 >= 1
    p.b_ineq = Vec::Constant(1, -1.0);
    auto sol = qp_solve(p);
    CHECK(sol.z[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(sol.z[1]) <= 1e-9);
    REQUIRE(sol.active_set.size() == 1);
    CHECK(sol.active_set[0] == 0);
    CHECK(sol.kkt_residual <= 1e-8);
}

TEST_CASE("qp_solve: projection onto the unit box") {
    auto p = box_projection(Vec2(2.0, -0.5));
    auto sol = qp_solve(p);
    CHECK(sol.z[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sol.z[1] == doctest::Approx(-0.5).epsilon(1e-9));
    // Objective is ||z - c||^2 - ||c||^2 for this H, g.
    CHECK(sol.objective == doctest::Approx(1.0 - 4.25).epsilon(1e-9));
    // Warm start from an interior point lands on the same solution.
    auto warm = qp_solve_from(p, Vec::Zero(2));
    CHECK((warm.z - sol.z).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("qp_solve: equality constraint splits evenly") {
    QpProblem p;
    p.h = 2.0 * Mat::Identity(2, 2);
    p.g = Vec::Zero(2);
    p.a_eq = Mat(1, 2);
    p.a_eq << 1, 1;
    p.b_eq = Vec::Constant(1, 1.0);
    auto sol = qp_solve(p);
    CHECK(sol.z[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(sol.z[1] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(sol.kkt_residual <= 1e-8);
}

TEST_CASE("qp_solve: contradictory half-spaces throw Infeasible") {
    QpProblem p;
    p.h = Mat::Identity(2, 2);
    p.g = Vec::Zero(2);
    p.a_ineq = Mat(2, 2);
    p.a_ineq << 1, 0, -1, 0;  // z1 <= -1 and z1 >= 1
    p.b_ineq = Vec(2);
    p.b_ineq << -1.0, -1.0;
    CHECK_THROWS_AS(qp_solve(p), Infeasible);
}

TEST_CASE("qp_solve: free linear descent throws Unbounded") {
    QpProblem p;
    p.h = Mat::Zero(2, 2);
    p.g = Vec(2);
    p.g << 1.0, 0.0;
    CHECK_THROWS_AS(qp_solve(p), Unbounded);
}

TEST_CASE("qp_solve: matches brute-force grid search on random problems") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::uniform_real_distribution<double> off(0.2, 1.0);
    const double lim = 1.5;
    const double step = 1e-3;
    for (int rep = 0; rep < 10; ++rep) {
        CAPTURE(rep);
        Mat m(2, 2);
        for (int i = 0; i < 4; ++i) m(i) = uni(rng);
        QpProblem p;
        // The curvature floor keeps the argmin well-conditioned, so comparing
        // arguments (not just objectives) against the grid is meaningful.
        p.h = m.transpose() * m + 0.5 * Mat::Identity(2, 2);
        p.g = Vec(2);
        p.g << uni(rng), uni(rng);
        p.a_ineq = Mat(6, 2);
        p.a_ineq << 1, 0, -1, 0, 0, 1, 0, -1, uni(rng), uni(rng), uni(rng), uni(rng);
        p.b_ineq = Vec::Constant(6, lim);
        p.b_ineq[4] = off(rng);  // random cuts keep the origin strictly inside
        p.b_ineq[5] = off(rng);

        auto sol = qp_solve(p);
        const auto feasible = [&](const Vec2& z) {
            return p.a_ineq.row(4).dot(z) <= p.b_ineq[4] &&
                   p.a_ineq.row(5).dot(z) <= p.b_ineq[5] &&
                   z.cwiseAbs().maxCoeff() <= lim;
        };
        const auto objective = [&](const Vec2& z) {
            return 0.5 * z.dot(p.h * z) + p.g.dot(z);
        };
        // Coarse pass over the box, then a fine pass around the incumbent.
        double best = std::numeric_limits<double>::infinity();
        Vec2 arg = Vec2::Zero();
        auto scan = [&](const Vec2& center, double half, double step) {
            for (double z1 = center[0] - half; z1 <= center[0] + half + 1e-12;
                 z1 += step) {
                for (double z2 = center[1] - half; z2 <= center[1] + half + 1e-12;
                     z2 += step) {
                    Vec2 z(z1, z2);
                    if (!feasible(z)) continue;
                    double obj = objective(z);
                    if (obj < best) {
                        best = obj;
                        arg = z;
                    }
                }
            }
        };
        scan(Vec2::Zero(), lim, 4e-3);
        scan(arg, 8e-3, 1e-4);
        CHECK((Vec2(sol.z[0], sol.z[1]) - arg).cwiseAbs().maxCoeff() <= 2e-3);
        CHECK(sol.objective <= best + 1e-6);
        CHECK(sol.kkt_residual <= 1e-8);
    }
}
