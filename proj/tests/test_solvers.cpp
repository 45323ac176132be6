#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gfra/metrics.hpp"
#include "gfra/rng.hpp"
#include "gfra/solvers.hpp"

using namespace gfra;

namespace {

// Exhaustive 1-sparse least-squares fit, used as a recovery oracle.
int best_single_column(const PilotMatrix& pm, const Vec& y) {
    int best = -1;
    double best_res = 1e300;
    for (int j = 0; j < pm.n; ++j) {
        const Vec a = pm.entries.col(j);
        const double c = a.dot(y) / a.squaredNorm();
        const double res = (y - c * a).squaredNorm();
        if (res < best_res) {
            best_res = res;
            best = j;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("soft threshold: worked examples") {
    Vec u(5);
    u << 3, -2, 0.5, -0.5, 0;
    Vec s = soft_threshold(u, 1.0);
    CHECK(s(0) == 2.0);
    CHECK(s(1) == -1.0);
    CHECK(s(2) == 0.0);
    CHECK(s(3) == 0.0);
    CHECK(s(4) == 0.0);
    CHECK(soft_threshold(u, 0.0) == u);
    CHECK_THROWS_AS(soft_threshold(u, -0.1), std::domain_error);
}

TEST_CASE("soft threshold is non-expansive") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        Vec a(10), b(10);
        for (int i = 0; i < 10; ++i) {
            a(i) = rng.gaussian();
            b(i) = rng.gaussian();
        }
        const double theta = std::abs(rng.gaussian());
        CHECK((soft_threshold(a, theta) - soft_threshold(b, theta)).norm() <=
              (a - b).norm() + 1e-12);
    }
}

TEST_CASE("lipschitz bound dominates the spectral norm") {
    // 2x3 matrix with known singular values
    PilotMatrix pm;
    pm.m = 2;
    pm.n = 3;
    pm.entries = Mat::Zero(2, 3);
    pm.entries(0, 0) = 3.0;
    pm.entries(1, 1) = 4.0;
    const double L = lipschitz_upper(pm);
    CHECK(L == doctest::Approx(1.01 * 16.0).epsilon(1e-9));

    PilotMatrix big = gen_pilot_matrix(40, 80, 5, true);
    const double Lb = lipschitz_upper(big);
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        Vec v(80);
        for (int i = 0; i < 80; ++i) v(i) = rng.gaussian();
        v.normalize();
        CHECK((big.entries * v).squaredNorm() <= Lb);
    }
}

TEST_CASE("ista monotonically decreases the lasso objective") {
    PilotMatrix pm = gen_pilot_matrix(30, 60, 7, true);
    AccessInstance inst = sample_instance(pm, ActivitySpec::fixed_k(5), {}, 20, 4);
    const double lambda = 0.1;
    SolveResult res = ista(pm, inst.y, lambda, 50);
    double prev = lasso_objective(pm, inst.y, Vec::Zero(pm.n), lambda);
    for (const Vec& x : res.trace.estimates) {
        const double obj = lasso_objective(pm, inst.y, x, lambda);
        CHECK(obj <= prev + 1e-10);
        prev = obj;
    }
}

TEST_CASE("ista recovers a 1-sparse noiseless signal (oracle support)") {
    PilotMatrix pm = gen_pilot_matrix(6, 8, 21, true);
    for (uint64_t seed = 0; seed < 10; ++seed) {
        AccessInstance inst = sample_instance(
            pm, ActivitySpec::fixed_k(1), {}, std::numeric_limits<double>::infinity(), seed);
        SolveResult res = ista(pm, inst.y, 1e-4, 3000, 1e-12);
        const int oracle = best_single_column(pm, inst.y);
        CHECK(oracle == inst.support[0]);
        int argmax = 0;
        res.estimate.cwiseAbs().maxCoeff(&argmax);
        CHECK(argmax == oracle);
    }
}

TEST_CASE("amp recovers a 1-sparse noiseless signal (oracle support)") {
    PilotMatrix pm = gen_pilot_matrix(6, 8, 21, true);
    int hits = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        AccessInstance inst = sample_instance(
            pm, ActivitySpec::fixed_k(1), {}, std::numeric_limits<double>::infinity(), seed);
        SolveResult res;
        try {
            res = amp(pm, inst.y, 1.5, 60);
        } catch (const std::runtime_error&) {
            continue;  // AMP is not guaranteed stable at this tiny size
        }
        int argmax = 0;
        res.estimate.cwiseAbs().maxCoeff(&argmax);
        if (argmax == best_single_column(pm, inst.y)) ++hits;
    }
    CHECK(hits >= 7);
}

TEST_CASE("amp at realistic size beats -15 dB in 30 iterations") {
    PilotMatrix pm = gen_pilot_matrix(250, 500, 7, true);
    Batch b = sample_batch(pm, ActivitySpec::bernoulli(0.1), {}, 20, 8, 32);
    Mat est = amp_batch(pm, b.y, 1.1403, 30);
    CHECK(nmse_db(est, b.x_true) < -15.0);
}

TEST_CASE("batch solvers match the single-instance paths") {
    PilotMatrix pm = gen_pilot_matrix(25, 50, 9, true);
    Batch b = sample_batch(pm, ActivitySpec::fixed_k(4), {}, 20, 6, 8);
    const double lambda = 0.2, alpha = 1.3;

    Mat xi = ista_batch(pm, b.y, lambda, 40);
    Mat xa = amp_batch(pm, b.y, alpha, 15);
    for (int i = 0; i < 8; ++i) {
        SolveResult si = ista(pm, b.y.col(i), lambda, 40);
        SolveResult sa = amp(pm, b.y.col(i), alpha, 15);
        CHECK((xi.col(i) - si.estimate).norm() < 1e-10);
        CHECK((xa.col(i) - sa.estimate).norm() < 1e-10);
        // the bookkeeping-free timing paths agree too
        const double L = lipschitz_upper(pm);
        CHECK((ista_point(pm, b.y.col(i), lambda, 40, L) - si.estimate).norm() < 1e-10);
        CHECK((amp_point(pm, b.y.col(i), alpha, 15) - sa.estimate).norm() < 1e-10);
    }
}

TEST_CASE("ista nmse trace length and monotone time stamps") {
    PilotMatrix pm = gen_pilot_matrix(20, 40, 2, true);
    Batch b = sample_batch(pm, ActivitySpec::fixed_k(3), {}, 20, 1, 4);
    std::vector<double> trace, secs;
    ista_batch(pm, b.y, 0.1, 25, &b.x_true, &trace, &secs);
    CHECK(trace.size() == 25);
    CHECK(secs.size() == 25);
    for (size_t i = 1; i < secs.size(); ++i) CHECK(secs[i] >= secs[i - 1]);
}

TEST_CASE("invalid solver arguments rejected") {
    PilotMatrix pm = gen_pilot_matrix(10, 20, 1, true);
    Vec y = Vec::Zero(10);
    CHECK_THROWS_AS(ista(pm, y, 0.0, 10), std::domain_error);
    CHECK_THROWS_AS(ista(pm, y, -1.0, 10), std::domain_error);
    CHECK_THROWS_AS(amp(pm, y, 0.0, 10), std::domain_error);
    Vec bad = Vec::Zero(9);
    CHECK_THROWS_AS(ista(pm, bad, 0.1, 10), std::invalid_argument);
}

TEST_CASE("lambda tuning lands near the NMSE-optimal grid point") {
    PilotMatrix pm = gen_pilot_matrix(50, 100, 7, true);
    Batch val = sample_batch(pm, ActivitySpec::fixed_k(8), {}, 20, 12, 64);
    const double lambda = tune_lambda(pm, val, 60);
    // tuned value must beat clearly bad choices at both extremes
    const double tuned = nmse_db(ista_batch(pm, val.y, lambda, 60), val.x_true);
    const double lo = nmse_db(ista_batch(pm, val.y, 1e-3, 60), val.x_true);
    const double hi = nmse_db(ista_batch(pm, val.y, 2.0, 60), val.x_true);
    CHECK(tuned <= lo + 1e-9);
    CHECK(tuned <= hi + 1e-9);
}
