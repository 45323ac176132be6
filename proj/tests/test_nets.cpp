#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "gfra/metrics.hpp"
#include "gfra/nets.hpp"
#include "gfra/rng.hpp"
#include "gfra/solvers.hpp"

using namespace gfra;

TEST_CASE("arch names round trip") {
    for (Arch a : {Arch::lista, Arch::lamp, Arch::lista_p, Arch::lista_h})
        CHECK(arch_from_name(arch_name(a)) == a);
    CHECK_THROWS_AS(arch_from_name("resnet"), std::invalid_argument);
}

TEST_CASE("untrained lista matches ista iterate-for-iterate") {
    PilotMatrix pm = gen_pilot_matrix(20, 40, 7, true);
    AccessInstance inst = sample_instance(pm, ActivitySpec::fixed_k(4), {}, 20, 3);
    const double L = lipschitz_upper(pm);
    const double lambda = 0.15;
    const int depth = 8;
    UnrolledModel m = init_lista(pm, depth, 0.0, lambda / L);
    ForwardResult fr = lista_forward(m, inst.y);
    SolveResult sr = ista(pm, inst.y, lambda, depth);
    REQUIRE(fr.per_layer_estimates.size() == static_cast<size_t>(depth));
    for (int t = 0; t < depth; ++t)
        CHECK((fr.per_layer_estimates[t] - sr.trace.estimates[t]).norm() < 1e-12);
    CHECK((fr.estimate - sr.estimate).norm() < 1e-12);
}

TEST_CASE("untrained lamp matches amp iterate-for-iterate") {
    PilotMatrix pm = gen_pilot_matrix(20, 40, 7, true);
    AccessInstance inst = sample_instance(pm, ActivitySpec::fixed_k(4), {}, 20, 3);
    const int depth = 6;
    UnrolledModel m = init_lamp(pm, depth);
    ForwardResult fr = lamp_forward(m, inst.y);
    SolveResult sr = amp(pm, inst.y, 1.0, depth);
    for (int t = 0; t < depth; ++t)
        CHECK((fr.per_layer_estimates[t] - sr.trace.estimates[t]).norm() < 1e-12);
}

TEST_CASE("lista-p with an all-zero prior equals lista") {
    PilotMatrix pm = gen_pilot_matrix(15, 30, 5, true);
    AccessInstance inst = sample_instance(pm, ActivitySpec::fixed_k(3), {}, 20, 8);
    UnrolledModel ml = init_lista(pm, 5, 0.0, 0.05);
    UnrolledModel mp = init_listap(pm, 5, 0.0, 0.05);
    mp.params = ml.params;  // identical weights, only the prior path differs
    mp.arch = Arch::lista_p;
    ForwardResult a = lista_forward(ml, inst.y);
    ForwardResult b = listap_forward(mp, inst.y, Vec::Zero(pm.n));
    CHECK((a.estimate - b.estimate).norm() == 0.0);
}

TEST_CASE("lista-p prior coordinates bypass shrinkage") {
    PilotMatrix pm = gen_pilot_matrix(15, 30, 5, true);
    AccessInstance inst = sample_instance(pm, ActivitySpec::fixed_k(3), {}, 20, 8);
    UnrolledModel mp = init_listap(pm, 5, 0.0, 5.0);  // huge threshold kills everything else
    Vec prior = Vec::Zero(pm.n);
    prior(inst.support[0]) = 1.0;
    ForwardResult r = listap_forward(mp, inst.y, prior);
    // non-prior coords are shrunk to zero by the large threshold
    for (int i = 0; i < pm.n; ++i)
        if (i != inst.support[0]) CHECK(r.estimate(i) == 0.0);
    // the revealed coordinate keeps its unshrunk linear value
    CHECK(r.estimate(inst.support[0]) != 0.0);
}

TEST_CASE("make_prior reveals the right number of support coordinates") {
    std::vector<int> support = {2, 5, 7, 11, 13, 17};
    Vec p = make_prior(support, 0.5, 42, 20);
    int ones = 0;
    for (int i = 0; i < 20; ++i) {
        CHECK((p(i) == 0.0 || p(i) == 1.0));
        if (p(i) == 1.0) {
            ++ones;
            CHECK(std::find(support.begin(), support.end(), i) != support.end());
        }
    }
    CHECK(ones == 3);  // ceil(0.5 * 6)
    // deterministic
    CHECK(make_prior(support, 0.5, 42, 20) == p);
    // full reveal
    CHECK(make_prior(support, 1.0, 1, 20).sum() == 6.0);
}

TEST_CASE("lista-h: forced immediate halt when scores saturate high") {
    PilotMatrix pm = gen_pilot_matrix(10, 20, 3, true);
    UnrolledModel m = init_listah(pm, 5, 0.0, 0.05, 4, 0.01, 9);
    for (int t = 0; t < 5; ++t) {
        m.params.at("wh." + std::to_string(t)).setZero();
        m.params.at("bh." + std::to_string(t)).setConstant(50.0);  // sigmoid -> 1
    }
    Vec y = Vec::Random(10);
    ForwardResult r = listah_forward(m, y);
    CHECK(r.layers_used == 1);
    REQUIRE(r.halting_weights.size() == 1);
    CHECK(r.halting_weights[0] == doctest::Approx(1.0));
}

TEST_CASE("lista-h: scores pinned low run to full depth, weights sum to one") {
    PilotMatrix pm = gen_pilot_matrix(10, 20, 3, true);
    UnrolledModel m = init_listah(pm, 5, 0.0, 0.05, 4, 0.01, 9);
    for (int t = 0; t < 5; ++t) {
        m.params.at("wh." + std::to_string(t)).setZero();
        m.params.at("bh." + std::to_string(t)).setConstant(-50.0);  // sigmoid -> 0
    }
    Vec y = Vec::Random(10);
    ForwardResult r = listah_forward(m, y);
    CHECK(r.layers_used == 5);
    const double total =
        std::accumulate(r.halting_weights.begin(), r.halting_weights.end(), 0.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    // all mass lands on the final layer here
    CHECK(r.halting_weights[4] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("lista-h: halting weights always sum to one") {
    PilotMatrix pm = gen_pilot_matrix(12, 24, 4, true);
    UnrolledModel m = init_listah(pm, 6, 0.0, 0.05, 4, 0.01, 11);
    Batch b = sample_batch(pm, ActivitySpec::fixed_k(3), {}, 20, 2, 16);
    ForwardCache c = forward_batch(m, b.y);
    for (int col = 0; col < 16; ++col) {
        CHECK(c.weights.col(col).sum() == doctest::Approx(1.0).epsilon(1e-9));
        for (int t = c.layers_used[col]; t < 6; ++t) CHECK(c.weights(t, col) == 0.0);
    }
}

TEST_CASE("lista-h: batched and single-instance paths agree") {
    PilotMatrix pm = gen_pilot_matrix(12, 24, 4, true);
    UnrolledModel m = init_listah(pm, 6, 0.0, 0.05, 4, 0.01, 11);
    Batch b = sample_batch(pm, ActivitySpec::fixed_k(3), {}, 20, 2, 8);
    ForwardCache c = forward_batch(m, b.y);
    for (int col = 0; col < 8; ++col) {
        ForwardResult r = listah_forward(m, b.y.col(col));
        CHECK(r.layers_used == c.layers_used[col]);
        CHECK((r.estimate - c.output.col(col)).norm() < 1e-12);
    }
}

TEST_CASE("lista-h: raising the stop slack never adds layers") {
    PilotMatrix pm = gen_pilot_matrix(12, 24, 4, true);
    Batch b = sample_batch(pm, ActivitySpec::fixed_k(3), {}, 20, 2, 16);
    UnrolledModel m = init_listah(pm, 6, 0.0, 0.05, 4, 0.01, 11);
    std::vector<double> eps = {0.0, 0.05, 0.2, 0.5, 0.9};
    std::vector<std::vector<int>> layers;
    for (double e : eps) {
        m.epsilon_halt = e;
        ForwardCache c = forward_batch(m, b.y);
        layers.push_back(c.layers_used);
    }
    for (size_t i = 1; i < layers.size(); ++i)
        for (size_t col = 0; col < layers[i].size(); ++col)
            CHECK(layers[i][col] <= layers[i - 1][col]);
}

TEST_CASE("permutation equivariance of lista under user relabeling") {
    // permuting pilot columns and learned weights permutes the estimate
    PilotMatrix pm = gen_pilot_matrix(10, 20, 6, true);
    AccessInstance inst = sample_instance(pm, ActivitySpec::fixed_k(3), {}, 20, 4);
    UnrolledModel m = init_lista(pm, 4, 0.0, 0.05);
    ForwardResult base = lista_forward(m, inst.y);

    std::vector<int> perm(20);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(77);
    for (int i = 19; i > 0; --i)
        std::swap(perm[i], perm[rng.below(static_cast<uint64_t>(i + 1))]);

    UnrolledModel mp = m;
    for (int t = 0; t < 4; ++t) {
        Mat w1 = m.params.at("w1." + std::to_string(t));
        Mat w2 = m.params.at("w2." + std::to_string(t));
        Mat pw1(20, 10), pw2(20, 20);
        for (int i = 0; i < 20; ++i) pw1.row(perm[i]) = w1.row(i);
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < 20; ++j) pw2(perm[i], perm[j]) = w2(i, j);
        mp.params.at("w1." + std::to_string(t)) = pw1;
        mp.params.at("w2." + std::to_string(t)) = pw2;
    }
    ForwardResult permuted = lista_forward(mp, inst.y);
    for (int i = 0; i < 20; ++i)
        CHECK(permuted.estimate(perm[i]) == doctest::Approx(base.estimate(i)).epsilon(1e-12));
}

TEST_CASE("parameter counts") {
    PilotMatrix pm = gen_pilot_matrix(10, 20, 1, true);
    // lista: depth * (n*m + n*n + 1)
    CHECK(init_lista(pm, 3, 0.0, 0.1).param_count() == 3 * (20 * 10 + 20 * 20 + 1));
    // lamp: depth * (n*m + 1)
    CHECK(init_lamp(pm, 3).param_count() == 3 * (20 * 10 + 1));
    // lista-h adds the halting head: d*m + d + 1 per layer
    const int d = 4;
    CHECK(init_listah(pm, 3, 0.0, 0.1, d, 0.01, 1).param_count() ==
          3 * (20 * 10 + 20 * 20 + 1 + d * 10 + d + 1));
}

TEST_CASE("checkpoint round trip is bit exact") {
    PilotMatrix pm = gen_pilot_matrix(10, 20, 44, true);
    UnrolledModel m = init_listah(pm, 3, 0.0, 0.07, 4, 0.02, 5);
    const std::string path = "ckpt_roundtrip.unet";
    save_checkpoint(m, path);
    UnrolledModel r = load_checkpoint(path);
    CHECK(r.arch == m.arch);
    CHECK(r.m == m.m);
    CHECK(r.n == m.n);
    CHECK(r.depth == m.depth);
    CHECK(r.pilot_seed == m.pilot_seed);
    CHECK(r.epsilon_halt == m.epsilon_halt);
    CHECK(r.halt_feat_dim == m.halt_feat_dim);
    CHECK(r.params.same_shapes(m.params));
    for (const auto& [name, t] : m.params.tensors) CHECK(r.params.at(name) == t);
    CHECK(r.pilot == m.pilot);  // regenerated from the stored seed
    std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects truncation and wrong magic") {
    PilotMatrix pm = gen_pilot_matrix(8, 16, 2, true);
    UnrolledModel m = init_lista(pm, 2, 0.0, 0.1);
    const std::string path = "ckpt_bad.unet";
    save_checkpoint(m, path);
    {
        std::ifstream is(path, std::ios::binary | std::ios::ate);
        std::vector<char> buf(static_cast<size_t>(static_cast<long>(is.tellg()) / 3));
        is.seekg(0);
        is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        os.write("NOPE", 4);
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
    std::remove(path.c_str());
}

TEST_CASE("pilot mismatch is rejected") {
    PilotMatrix pm = gen_pilot_matrix(10, 20, 7, true);
    UnrolledModel m = init_lista(pm, 2, 0.0, 0.1);
    CHECK_NOTHROW(require_pilot_match(m, pm));
    PilotMatrix other = gen_pilot_matrix(10, 20, 8, true);
    CHECK_THROWS_AS(require_pilot_match(m, other), std::runtime_error);
    PilotMatrix wrong_n = gen_pilot_matrix(10, 22, 7, true);
    CHECK_THROWS_AS(require_pilot_match(m, wrong_n), std::runtime_error);
}

TEST_CASE("forward_batch output matches single forwards for lista and lamp") {
    PilotMatrix pm = gen_pilot_matrix(14, 28, 3, true);
    Batch b = sample_batch(pm, ActivitySpec::fixed_k(4), {}, 20, 5, 6);
    UnrolledModel ml = init_lista(pm, 4, 0.0, 0.05);
    UnrolledModel ma = init_lamp(pm, 4);
    ForwardCache cl = forward_batch(ml, b.y);
    ForwardCache ca = forward_batch(ma, b.y);
    for (int i = 0; i < 6; ++i) {
        CHECK((cl.output.col(i) - lista_forward(ml, b.y.col(i)).estimate).norm() < 1e-12);
        CHECK((ca.output.col(i) - lamp_forward(ma, b.y.col(i)).estimate).norm() < 1e-12);
    }
}
