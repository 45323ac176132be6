#include "gfra/bench.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <stdexcept>

#include "gfra/rng.hpp"
#include "gfra/train.hpp"

namespace gfra {

namespace {

using Clock = std::chrono::steady_clock;

UnrolledModel load_for(const std::string& path, Arch arch, const PilotMatrix& pilots,
                       std::vector<std::string>& missing) {
    if (!std::filesystem::exists(path)) {
        missing.push_back(arch_name(arch) + " checkpoint: " + path);
        return {};
    }
    UnrolledModel model = load_checkpoint(path);
    if (model.arch != arch)
        throw std::runtime_error(path + ": expected arch " + arch_name(arch) + ", found " +
                                 arch_name(model.arch));
    require_pilot_match(model, pilots);
    return model;
}

void fail_on_missing(const std::vector<std::string>& missing) {
    if (missing.empty()) return;
    std::string msg = "missing trained checkpoints, train these first:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw std::runtime_error(msg);
}

double mean_layers(const ForwardCache& c) {
    double total = 0;
    for (int l : c.layers_used) total += l;
    return total / static_cast<double>(c.layers_used.size());
}

} // namespace

ConvergenceResult run_convergence(const BenchConfig& cfg, const std::string& lista_path,
                                  const std::string& lamp_path,
                                  const std::string& listah_path) {
    PilotMatrix pilots = gen_pilot_matrix(cfg.m, cfg.n, cfg.pilot_seed, true);
    std::vector<std::string> missing;
    UnrolledModel lista = load_for(lista_path, Arch::lista, pilots, missing);
    UnrolledModel lamp = load_for(lamp_path, Arch::lamp, pilots, missing);
    UnrolledModel listah = load_for(listah_path, Arch::lista_h, pilots, missing);
    fail_on_missing(missing);

    ChannelSpec channel;
    const auto act = ActivitySpec::bernoulli(cfg.p);
    Batch test = sample_batch(pilots, act, channel, cfg.snr_db,
                              Rng(cfg.seed).split(10).seed(), cfg.test_size);
    Batch tune = sample_batch(pilots, act, channel, cfg.snr_db, Rng(cfg.seed).split(11).seed(),
                              cfg.tune_size);

    ConvergenceResult out;
    out.tuned_lambda = cfg.lambda > 0 ? cfg.lambda
                                      : tune_lambda(pilots, tune, cfg.ista_iters);
    out.tuned_alpha = cfg.alpha > 0 ? cfg.alpha : tune_alpha(pilots, tune, cfg.amp_iters);

    auto record = [&](const std::string& solver, int depth, int iters, double nmse,
                      double layers, double secs) {
        MetricRecord r;
        r.solver = solver;
        r.depth = depth;
        r.iters = iters;
        r.p = cfg.p;
        r.snr_db = cfg.snr_db;
        r.nmse_db = nmse;
        r.mean_layers = layers;
        r.seconds = secs;
        r.instances = cfg.test_size;
        r.seed = cfg.seed;
        out.records.push_back(r);
    };

    std::vector<double> trace;
    const auto t_ista = Clock::now();
    ista_batch(pilots, test.y, out.tuned_lambda, cfg.ista_iters, &test.x_true, &trace);
    const double ista_secs = std::chrono::duration<double>(Clock::now() - t_ista).count();
    for (size_t i = 0; i < trace.size(); ++i) {
        record("ista", 0, static_cast<int>(i + 1), trace[i], 0,
               i + 1 == trace.size() ? ista_secs : 0.0);
        out.plot.push_back({static_cast<double>(i + 1), trace[i], "ista"});
    }

    trace.clear();
    const auto t_amp = Clock::now();
    amp_batch(pilots, test.y, out.tuned_alpha, cfg.amp_iters, &test.x_true, &trace);
    const double amp_secs = std::chrono::duration<double>(Clock::now() - t_amp).count();
    for (size_t i = 0; i < trace.size(); ++i) {
        record("amp", 0, static_cast<int>(i + 1), trace[i], 0,
               i + 1 == trace.size() ? amp_secs : 0.0);
        out.plot.push_back({static_cast<double>(i + 1), trace[i], "amp"});
    }

    for (const auto* model : {&lista, &lamp}) {
        const auto t0 = Clock::now();
        ForwardCache c = forward_batch(*model, test.y);
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        for (int t = 1; t <= model->depth; ++t) {
            const double nmse = nmse_db(c.x[t], test.x_true);
            record(arch_name(model->arch), t, 0, nmse, 0, t == model->depth ? secs : 0.0);
            out.plot.push_back({static_cast<double>(t), nmse, arch_name(model->arch)});
        }
    }

    {
        const auto t0 = Clock::now();
        ForwardCache c = forward_batch(listah, test.y);
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        const double nmse = nmse_db(c.output, test.x_true);
        const double layers = mean_layers(c);
        record("lista-h", listah.depth, 0, nmse, layers, secs);
        out.plot.push_back({layers, nmse, "lista-h"});
    }
    return out;
}

SweepResult run_sparsity_sweep(const BenchConfig& cfg, const std::vector<SweepModel>& models) {
    PilotMatrix pilots = gen_pilot_matrix(cfg.m, cfg.n, cfg.pilot_seed, true);
    std::vector<std::string> missing;
    struct Loaded {
        SweepModel spec;
        UnrolledModel model;
    };
    std::vector<Loaded> loaded;
    for (const auto& sm : models) {
        if (!std::filesystem::exists(sm.path)) {
            missing.push_back(sm.tag + " checkpoint: " + sm.path);
            continue;
        }
        UnrolledModel model = load_checkpoint(sm.path);
        require_pilot_match(model, pilots);
        loaded.push_back({sm, std::move(model)});
    }
    fail_on_missing(missing);

    ChannelSpec channel;
    SweepResult out;
    for (size_t li = 0; li < cfg.levels.size(); ++li) {
        const int k = cfg.levels[li];
        Batch test = sample_batch(pilots, ActivitySpec::fixed_k(k), channel, cfg.snr_db,
                                  Rng(cfg.seed).split(100 + li).seed(), cfg.test_size);
        const uint64_t prior_seed = Rng(cfg.seed).split(200 + li).seed();
        for (const auto& entry : loaded) {
            if (entry.spec.at_level > 0 && entry.spec.at_level != k) continue;
            ForwardCache c;
            if (entry.model.arch == Arch::lista_p) {
                Mat prior =
                    make_prior_batch(test.supports, cfg.reveal_fraction, prior_seed, cfg.n);
                c = forward_batch(entry.model, test.y, &prior);
            } else {
                c = forward_batch(entry.model, test.y);
            }
            MetricRecord r;
            r.solver = entry.spec.tag;
            r.depth = entry.model.depth;
            r.k = k;
            r.snr_db = cfg.snr_db;
            r.nmse_db = nmse_db(c.output, test.x_true);
            r.mean_layers =
                entry.model.arch == Arch::lista_h ? mean_layers(c) : entry.model.depth;
            r.instances = cfg.test_size;
            r.seed = cfg.seed;
            out.records.push_back(r);
            out.plot.push_back({static_cast<double>(k), r.nmse_db, entry.spec.tag});
        }
    }
    return out;
}

TimingStats time_solver(const SolverSpec& spec, const PilotMatrix& pilots, const Mat& y,
                        int repetitions) {
    if (y.cols() == 0) throw std::invalid_argument("time_solver: empty test set");
    if (repetitions < 1) throw std::invalid_argument("time_solver: repetitions must be >= 1");
    const double lipschitz =
        spec.kind == SolverSpec::Kind::ista ? lipschitz_upper(pilots) : 0.0;
    auto run_once = [&] {
        switch (spec.kind) {
            case SolverSpec::Kind::ista:
                for (Eigen::Index b = 0; b < y.cols(); ++b)
                    ista_point(pilots, y.col(b), spec.lambda, spec.iters, lipschitz);
                return;
            case SolverSpec::Kind::amp:
                for (Eigen::Index b = 0; b < y.cols(); ++b)
                    amp_point(pilots, y.col(b), spec.alpha, spec.iters);
                return;
            case SolverSpec::Kind::net:
                if (!spec.model) throw std::invalid_argument("time_solver: missing model");
                forward_batch(*spec.model, y);
                return;
        }
    };
    run_once();  // warm-up, excluded
    TimingStats stats;
    for (int r = 0; r < repetitions; ++r) {
        const auto t0 = Clock::now();
        run_once();
        stats.runs_s.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    }
    std::vector<double> sorted = stats.runs_s;
    std::sort(sorted.begin(), sorted.end());
    const auto nruns = sorted.size();
    stats.median_s = nruns % 2 ? sorted[nruns / 2]
                               : 0.5 * (sorted[nruns / 2 - 1] + sorted[nruns / 2]);
    const auto q = [&](double f) {
        return sorted[static_cast<size_t>(f * static_cast<double>(nruns - 1))];
    };
    stats.iqr_s = q(0.75) - q(0.25);
    return stats;
}

} // namespace gfra
