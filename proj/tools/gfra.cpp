// gfra: grant-free random access benchmark harness.
//
// Subcommands: gen, train, eval, bench-fig4, bench-fig5, bench-time, selftest.
// Every run writes a manifest JSON beside its outputs with the fully resolved
// configuration, so any result can be reproduced from the manifest alone.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gfra/bench.hpp"
#include "gfra/grad.hpp"
#include "gfra/io.hpp"
#include "gfra/metrics.hpp"
#include "gfra/rng.hpp"
#include "gfra/solvers.hpp"
#include "gfra/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gfra;

namespace {

constexpr const char* kVersion = "gfra 1.0.0";

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", std::gmtime(&t));
    return buf;
}

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[40];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// Output directory: explicit --out wins; otherwise runs/<cmd>-<timestamp>-s<seed>
// under $GFRA_OUT_DIR (the only environment input the tool reads).
fs::path resolve_run_dir(const std::string& cmd, uint64_t seed, const std::string& out_dir) {
    fs::path base;
    if (!out_dir.empty()) {
        base = out_dir;
    } else if (const char* env = std::getenv("GFRA_OUT_DIR")) {
        base = fs::path(env) / "runs";
    } else {
        base = "runs";
    }
    fs::path dir = base / (cmd + "-" + timestamp_now() + "-s" + std::to_string(seed));
    fs::create_directories(dir);
    return dir;
}

struct ManifestScope {
    std::string command;
    json config;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string start = iso_now();

    void write(const fs::path& path) const {
        json j;
        j["command"] = command;
        j["config"] = config;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        j["tool_version"] = kVersion;
        j["start"] = start;
        j["end"] = iso_now();
        std::ofstream os(path);
        if (!os) throw std::runtime_error("cannot write manifest " + path.string());
        os << j.dump(2) << '\n';
    }
};

TrainConfig parse_regime(TrainConfig cfg, const std::string& regime) {
    const auto colon = regime.find(':');
    const std::string kind = regime.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : regime.substr(colon + 1);
    if (kind == "bern") {
        cfg.regime = TrainConfig::Regime::bernoulli_p;
        if (!rest.empty()) cfg.p = std::stod(rest);
    } else if (kind == "fixed") {
        cfg.regime = TrainConfig::Regime::fixed_k;
        if (rest.empty()) throw std::invalid_argument("regime fixed:<k> needs a level");
        cfg.k = std::stoi(rest);
    } else if (kind == "mixed") {
        cfg.regime = TrainConfig::Regime::mixed_k;
        cfg.mixed.clear();
        std::stringstream ss(rest);
        std::string item;
        while (std::getline(ss, item, ',')) cfg.mixed.push_back(std::stoi(item));
        if (cfg.mixed.empty())
            throw std::invalid_argument("regime mixed:<k1,k2,...> needs levels");
    } else {
        throw std::invalid_argument("unknown regime '" + regime +
                                    "' (want bern:<p>, fixed:<k> or mixed:<k1,k2,...>)");
    }
    return cfg;
}

struct CommonOpts {
    int users = 500;
    int pilot_len = 250;
    uint64_t pilot_seed = 7;
    double snr_db = 20.0;
    uint64_t seed = 1;
    int threads = 1;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--users", c.users, "number of users N")->capture_default_str();
    cmd->add_option("--pilot-len", c.pilot_len, "pilot length M")->capture_default_str();
    cmd->add_option("--pilot-seed", c.pilot_seed, "pilot matrix seed")->capture_default_str();
    cmd->add_option("--snr-db", c.snr_db, "SNR in dB")->capture_default_str();
    cmd->add_option("--seed", c.seed, "data/run seed")->capture_default_str();
    cmd->add_option("--threads", c.threads, "worker threads (timing always pins to 1)")
        ->capture_default_str();
    cmd->add_option("--out-dir", c.out_dir, "base directory for run outputs")
        ->capture_default_str();
}

json common_json(const CommonOpts& c) {
    return json{{"users", c.users},   {"pilot_len", c.pilot_len},
                {"pilot_seed", c.pilot_seed}, {"snr_db", c.snr_db},
                {"seed", c.seed},     {"threads", c.threads}};
}

int run_gen(const CommonOpts& c, double prob, int active_k, int count, std::string out) {
    PilotMatrix pilots = gen_pilot_matrix(c.pilot_len, c.users, c.pilot_seed, true);
    ActivitySpec act = active_k > 0 ? ActivitySpec::fixed_k(active_k)
                                    : ActivitySpec::bernoulli(prob);
    Batch batch = sample_batch(pilots, act, ChannelSpec{}, c.snr_db, c.seed, count);
    fs::path dir;
    if (out.empty()) {
        dir = resolve_run_dir("gen", c.seed, c.out_dir);
        out = (dir / "instances.gfra").string();
    } else {
        dir = fs::path(out).parent_path();
        if (dir.empty()) dir = ".";
    }
    save_batch(out, pilots, batch);
    ManifestScope ms;
    ms.command = "gen";
    ms.config = common_json(c);
    ms.config["prob"] = prob;
    ms.config["active_k"] = active_k;
    ms.config["count"] = count;
    ms.outputs = {out};
    ms.write(dir / "manifest.json");
    std::cout << "wrote " << count << " instances to " << out << "\n";
    return 0;
}

int run_train(const CommonOpts& c, const TrainConfig& cfg, const std::string& arch_str,
              int depth, std::string out, std::string report_path, bool print_config) {
    if (print_config) {
        const std::string dumped = to_json(cfg);
        TrainConfig reloaded = train_config_from_json(dumped);
        if (to_json(reloaded) != dumped)
            throw std::runtime_error("config dump failed to round-trip");
        std::cout << dumped << "\n";
    }
    PilotMatrix pilots = gen_pilot_matrix(c.pilot_len, c.users, c.pilot_seed, true);
    const Arch arch = arch_from_name(arch_str);

    fs::path dir;
    if (out.empty()) {
        dir = resolve_run_dir("train", cfg.seed, c.out_dir);
        out = (dir / (arch_str + ".unet")).string();
    } else {
        dir = fs::path(out).parent_path();
        if (dir.empty()) dir = ".";
    }
    if (report_path.empty()) report_path = (dir / "report.csv").string();

    auto [train_set, val_set] = build_dataset(pilots, cfg);
    // tuned baseline threshold for the ISTA-equivalent start
    Batch tune = sample_batch(pilots, ActivitySpec::bernoulli(cfg.regime ==
                              TrainConfig::Regime::bernoulli_p ? cfg.p : 0.1),
                              ChannelSpec{}, cfg.snr_db, Rng(cfg.seed).split(77).seed(), 100);
    const double lambda = tune_lambda(pilots, tune, 200, 12);
    const double lipschitz = lipschitz_upper(pilots);

    UnrolledModel model;
    switch (arch) {
        case Arch::lista: model = init_lista(pilots, depth, 0, lambda / lipschitz); break;
        case Arch::lista_p: model = init_listap(pilots, depth, 0, lambda / lipschitz); break;
        case Arch::lamp: model = init_lamp(pilots, depth); break;
        case Arch::lista_h:
            model = init_listah(pilots, depth, 0, lambda / lipschitz, 8, 0.01, cfg.seed);
            break;
    }
    TrainReport report = train(model, pilots, train_set, val_set, cfg);
    save_checkpoint(model, out);

    std::ofstream rep(report_path);
    rep << "epoch,val_nmse_db\n";
    rep << "0," << report.init_val_nmse_db << "\n";
    for (size_t i = 0; i < report.val_nmse_db.size(); ++i)
        rep << (i + 1) << "," << report.val_nmse_db[i] << "\n";

    ManifestScope ms;
    ms.command = "train";
    ms.config = common_json(c);
    ms.config["arch"] = arch_str;
    ms.config["depth"] = depth;
    ms.config["train"] = json::parse(to_json(cfg));
    ms.config["init_lambda"] = lambda;
    ms.outputs = {out, report_path};
    ms.write(dir / "manifest.json");

    std::cout << "trained " << arch_str << " depth " << depth << ": best val NMSE "
              << report.best_val_nmse_db << " dB in " << report.wall_clock_s << " s ("
              << report.epochs_run << " epochs)\n";
    if (!report.diagnostic.empty())
        std::cout << "training aborted early: " << report.diagnostic
                  << " (best checkpoint retained)\n";
    std::cout << "checkpoint: " << out << "\n";
    return 0;
}

int run_eval(const CommonOpts& c, const std::string& solver, const std::string& model_path,
             int iters, const std::string& lambda_str, const std::string& alpha_str,
             int count, double reveal_fraction, std::string out) {
    PilotMatrix pilots = gen_pilot_matrix(c.pilot_len, c.users, c.pilot_seed, true);
    Batch test = sample_batch(pilots, ActivitySpec::bernoulli(0.1), ChannelSpec{}, c.snr_db,
                              Rng(c.seed).split(10).seed(), count);
    fs::path dir;
    if (out.empty()) {
        dir = resolve_run_dir("eval", c.seed, c.out_dir);
        out = (dir / "eval.csv").string();
    } else {
        dir = fs::path(out).parent_path();
        if (dir.empty()) dir = ".";
    }

    std::vector<double> nmse, secs;
    double tuned = 0;
    if (solver == "ista" || solver == "amp") {
        Batch tune = sample_batch(pilots, ActivitySpec::bernoulli(0.1), ChannelSpec{},
                                  c.snr_db, Rng(c.seed).split(11).seed(), 100);
        if (solver == "ista") {
            tuned = lambda_str == "auto" ? tune_lambda(pilots, tune, iters)
                                         : std::stod(lambda_str);
            ista_batch(pilots, test.y, tuned, iters, &test.x_true, &nmse, &secs);
        } else {
            tuned = alpha_str == "auto" ? tune_alpha(pilots, tune, iters)
                                        : std::stod(alpha_str);
            amp_batch(pilots, test.y, tuned, iters, &test.x_true, &nmse, &secs);
        }
    } else {
        if (model_path.empty())
            throw std::invalid_argument("eval: --model is required for network solvers");
        UnrolledModel model = load_checkpoint(model_path);
        require_pilot_match(model, pilots);
        const auto t0 = std::chrono::steady_clock::now();
        ForwardCache cache;
        if (model.arch == Arch::lista_p) {
            Mat prior = make_prior_batch(test.supports, reveal_fraction,
                                         Rng(c.seed).split(12).seed(), pilots.n);
            cache = forward_batch(model, test.y, &prior);
        } else {
            cache = forward_batch(model, test.y);
        }
        const double total =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        for (int t = 1; t <= model.depth; ++t) {
            nmse.push_back(nmse_db(t == model.depth ? cache.output : cache.x[t], test.x_true));
            secs.push_back(total * t / model.depth);
        }
    }

    std::ofstream os(out);
    os << "iter,nmse_db,seconds_cum\n";
    for (size_t i = 0; i < nmse.size(); ++i)
        os << (i + 1) << "," << nmse[i] << "," << secs[i] << "\n";

    ManifestScope ms;
    ms.command = "eval";
    ms.config = common_json(c);
    ms.config["solver"] = solver;
    ms.config["iters"] = iters;
    ms.config["count"] = count;
    ms.config["tuned_param"] = tuned;
    if (!model_path.empty()) ms.inputs = {model_path};
    ms.outputs = {out};
    ms.write(dir / "manifest.json");
    std::cout << "final NMSE " << (nmse.empty() ? 0.0 : nmse.back()) << " dB -> " << out
              << "\n";
    return 0;
}

int run_fig4(const CommonOpts& c, BenchConfig bc, const std::string& lista,
             const std::string& lamp, const std::string& listah) {
    fs::path dir = resolve_run_dir("bench-fig4", bc.seed, c.out_dir);
    ConvergenceResult res = run_convergence(bc, lista, lamp, listah);
    write_metric_csv((dir / "fig4.csv").string(), res.records);
    write_plot_data((dir / "fig4_plot.csv").string(), res.plot);
    ManifestScope ms;
    ms.command = "bench-fig4";
    ms.config = common_json(c);
    ms.config["tuned_lambda"] = res.tuned_lambda;
    ms.config["tuned_alpha"] = res.tuned_alpha;
    ms.config["test_size"] = bc.test_size;
    ms.inputs = {lista, lamp, listah};
    ms.outputs = {(dir / "fig4.csv").string(), (dir / "fig4_plot.csv").string()};
    ms.write(dir / "manifest.json");
    std::cout << "wrote " << (dir / "fig4.csv").string() << "\n";
    return 0;
}

int run_fig5(const CommonOpts& c, BenchConfig bc, const std::string& model_dir,
             const std::string& listah) {
    fs::path dir = resolve_run_dir("bench-fig5", bc.seed, c.out_dir);
    std::vector<SweepModel> models;
    for (int k : bc.levels)
        models.push_back({"lista", (fs::path(model_dir) /
                                    ("lista_k" + std::to_string(k) + ".unet")).string(), k});
    models.push_back(
        {"lista-act30", (fs::path(model_dir) / "lista_k30.unet").string(), 0});
    models.push_back({"lista-mix", (fs::path(model_dir) / "lista_mix.unet").string(), 0});
    models.push_back({"lista-p", (fs::path(model_dir) / "listap_mix.unet").string(), 0});
    if (!listah.empty()) models.push_back({"lista-h", listah, 0});
    SweepResult res = run_sparsity_sweep(bc, models);
    write_metric_csv((dir / "fig5.csv").string(), res.records);
    write_plot_data((dir / "fig5_plot.csv").string(), res.plot);
    ManifestScope ms;
    ms.command = "bench-fig5";
    ms.config = common_json(c);
    ms.config["levels"] = bc.levels;
    ms.config["test_size"] = bc.test_size;
    ms.config["reveal_fraction"] = bc.reveal_fraction;
    for (const auto& m : models) ms.inputs.push_back(m.path);
    ms.outputs = {(dir / "fig5.csv").string(), (dir / "fig5_plot.csv").string()};
    ms.write(dir / "manifest.json");
    std::cout << "wrote " << (dir / "fig5.csv").string() << "\n";
    return 0;
}

int run_bench_time(const CommonOpts& c, BenchConfig bc, const std::string& lista_path,
                   int reps) {
    fs::path dir = resolve_run_dir("bench-time", bc.seed, c.out_dir);
    PilotMatrix pilots = gen_pilot_matrix(bc.m, bc.n, bc.pilot_seed, true);
    UnrolledModel lista = load_checkpoint(lista_path);
    require_pilot_match(lista, pilots);
    Batch tune = sample_batch(pilots, ActivitySpec::bernoulli(bc.p), ChannelSpec{}, bc.snr_db,
                              Rng(bc.seed).split(11).seed(), bc.tune_size);
    const double lambda = bc.lambda > 0 ? bc.lambda : tune_lambda(pilots, tune, bc.ista_iters);
    const double alpha = bc.alpha > 0 ? bc.alpha : tune_alpha(pilots, tune, bc.amp_iters);
    Batch test = sample_batch(pilots, ActivitySpec::bernoulli(bc.p), ChannelSpec{}, bc.snr_db,
                              Rng(bc.seed).split(10).seed(), bc.test_size);

    SolverSpec ista_spec{SolverSpec::Kind::ista, lambda, 0, bc.ista_iters, nullptr};
    SolverSpec amp_spec{SolverSpec::Kind::amp, 0, alpha, bc.amp_iters, nullptr};
    SolverSpec net_spec{SolverSpec::Kind::net, 0, 0, 0, &lista};

    std::vector<MetricRecord> records;
    auto add = [&](const std::string& tag, const SolverSpec& spec, int iters, int depth) {
        TimingStats st = time_solver(spec, pilots, test.y, reps);
        MetricRecord r;
        r.solver = tag;
        r.iters = iters;
        r.depth = depth;
        r.p = bc.p;
        r.snr_db = bc.snr_db;
        r.seconds = st.median_s;
        r.instances = bc.test_size;
        r.seed = bc.seed;
        records.push_back(r);
        std::cout << tag << ": median " << st.median_s << " s, IQR " << st.iqr_s << " s\n";
    };
    add("ista", ista_spec, bc.ista_iters, 0);
    add("amp", amp_spec, bc.amp_iters, 0);
    add("lista", net_spec, 0, lista.depth);
    write_metric_csv((dir / "timing.csv").string(), records);
    ManifestScope ms;
    ms.command = "bench-time";
    ms.config = common_json(c);
    ms.config["repetitions"] = reps;
    ms.config["lambda"] = lambda;
    ms.config["alpha"] = alpha;
    ms.inputs = {lista_path};
    ms.outputs = {(dir / "timing.csv").string()};
    ms.write(dir / "manifest.json");
    return 0;
}

int run_selftest(bool grad) {
    PilotMatrix pilots = gen_pilot_matrix(6, 12, 3, true);
    Batch batch = sample_batch(pilots, ActivitySpec::fixed_k(2), ChannelSpec{}, 20.0, 5, 4);
    bool ok = true;
    auto check = [&](const char* name, const UnrolledModel& model, const Mat* prior,
                     Loss loss) {
        std::string worst;
        const double err =
            grad_check(model, batch.y, batch.x_true, prior, loss, 1e-5, 300, 11, &worst);
        const bool pass = err < 1e-4;
        ok = ok && pass;
        std::cout << (pass ? "ok   " : "FAIL ") << name << ": max rel err " << err
                  << (worst.empty() ? "" : " at " + worst) << "\n";
    };
    if (grad) {
        check("lista/final", init_lista(pilots, 3, 0, 0.05), nullptr, Loss::final_mse);
        check("lista/per-layer", init_lista(pilots, 3, 0, 0.05), nullptr,
              Loss::per_layer_weighted_mse);
        check("lamp", init_lamp(pilots, 3), nullptr, Loss::final_mse);
        Mat prior = make_prior_batch(batch.supports, 0.5, 21, pilots.n);
        check("lista-p", init_listap(pilots, 3, 0, 0.05), &prior, Loss::final_mse);
        check("lista-h/final", init_listah(pilots, 3, 0, 0.05, 4, 0.01, 9), nullptr,
              Loss::final_mse);
        check("lista-h/per-layer", init_listah(pilots, 3, 0, 0.05, 4, 0.01, 9), nullptr,
              Loss::per_layer_weighted_mse);
    }
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"grant-free random access solvers and unrolled-network benchmarks"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonOpts c;

    // gen
    auto* gen = app.add_subcommand("gen", "generate an instance batch");
    add_common(gen, c);
    double prob = 0.1;
    int active_k = 0, gen_count = 1000;
    std::string gen_out;
    gen->add_option("--prob", prob, "Bernoulli activation probability")->capture_default_str();
    gen->add_option("--active-k", active_k, "fixed active-user count (overrides --prob)")
        ->capture_default_str();
    gen->add_option("--count", gen_count, "instances to generate")->capture_default_str();
    gen->add_option("--out", gen_out, "output .gfra path");

    // train
    auto* tr = app.add_subcommand("train", "train an unrolled network");
    add_common(tr, c);
    std::string arch = "lista", regime = "bern:0.1", train_out, report_out, config_path;
    int depth = 16;
    bool print_config = false;
    TrainConfig tcfg;
    tr->add_option("--arch", arch, "lista|lamp|lista-p|lista-h")->capture_default_str();
    tr->add_option("--depth", depth, "layer count")->capture_default_str();
    tr->add_option("--regime", regime, "bern:<p> | fixed:<k> | mixed:<k1,k2,...>")
        ->capture_default_str();
    tr->add_option("--config", config_path, "JSON training config (flags override)");
    tr->add_option("--train-size", tcfg.train_size)->capture_default_str();
    tr->add_option("--val-size", tcfg.val_size)->capture_default_str();
    tr->add_option("--batch-size", tcfg.batch_size)->capture_default_str();
    tr->add_option("--epochs", tcfg.epochs)->capture_default_str();
    tr->add_option("--patience", tcfg.patience)->capture_default_str();
    tr->add_option("--lr", tcfg.adam.lr)->capture_default_str();
    std::string loss_str = "final_mse";
    tr->add_option("--loss", loss_str, "final_mse|per_layer_weighted_mse")
        ->capture_default_str();
    tr->add_flag("--curriculum", tcfg.curriculum, "layer-by-layer pre-training pass");
    tr->add_option("--curriculum-epochs", tcfg.curriculum_epochs)->capture_default_str();
    tr->add_option("--halt-penalty", tcfg.halt_penalty)->capture_default_str();
    tr->add_option("--reveal-fraction", tcfg.reveal_fraction)->capture_default_str();
    tr->add_flag("--print-config", print_config, "dump the resolved config as JSON");
    tr->add_option("--out", train_out, "checkpoint output path");
    tr->add_option("--report", report_out, "per-epoch validation CSV");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a solver or checkpoint");
    add_common(ev, c);
    std::string solver = "ista", model_path, lambda_str = "auto", alpha_str = "auto", eval_out;
    int eval_iters = 1000, eval_count = 2000;
    double reveal = 0.5;
    ev->add_option("--solver", solver, "ista|amp|lista|lamp|lista-p|lista-h")
        ->capture_default_str();
    ev->add_option("--model", model_path, "checkpoint for network solvers");
    ev->add_option("--iters", eval_iters, "iteration count (ista/amp)")->capture_default_str();
    ev->add_option("--lambda", lambda_str, "ISTA lambda, or 'auto'")->capture_default_str();
    ev->add_option("--alpha", alpha_str, "AMP alpha, or 'auto'")->capture_default_str();
    ev->add_option("--count", eval_count, "test instances")->capture_default_str();
    ev->add_option("--reveal-fraction", reveal)->capture_default_str();
    ev->add_option("--out", eval_out, "per-iteration CSV path");

    // bench-fig4 / fig5 / time
    auto* f4 = app.add_subcommand("bench-fig4", "convergence comparison");
    add_common(f4, c);
    std::string f4_lista = "models/lista16.unet", f4_lamp = "models/lamp16.unet",
                f4_listah = "models/listah_mix.unet";
    int test_size = 2000;
    f4->add_option("--lista", f4_lista)->capture_default_str();
    f4->add_option("--lamp", f4_lamp)->capture_default_str();
    f4->add_option("--lista-h", f4_listah)->capture_default_str();
    f4->add_option("--test-size", test_size)->capture_default_str();

    auto* f5 = app.add_subcommand("bench-fig5", "sparsity-level sweep");
    add_common(f5, c);
    std::string f5_dir = "models", f5_listah;
    f5->add_option("--models", f5_dir, "checkpoint directory")->capture_default_str();
    f5->add_option("--lista-h", f5_listah, "optional lista-h checkpoint");
    f5->add_option("--test-size", test_size)->capture_default_str();

    auto* bt = app.add_subcommand("bench-time", "runtime comparison");
    add_common(bt, c);
    std::string bt_lista = "models/lista16.unet";
    int reps = 5;
    bt->add_option("--lista", bt_lista)->capture_default_str();
    bt->add_option("--reps", reps)->capture_default_str();
    bt->add_option("--test-size", test_size)->capture_default_str();

    auto* st = app.add_subcommand("selftest", "numerical self-checks");
    bool grad_flag = false;
    st->add_flag("--grad", grad_flag, "gradient vs finite differences");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*tr) {
            if (!config_path.empty()) {
                std::ifstream is(config_path);
                if (!is) throw std::runtime_error("cannot read config " + config_path);
                std::stringstream ss;
                ss << is.rdbuf();
                TrainConfig from_file = train_config_from_json(ss.str());
                // flags given on the command line override the file
                if (!tr->count("--train-size")) tcfg.train_size = from_file.train_size;
                if (!tr->count("--val-size")) tcfg.val_size = from_file.val_size;
                if (!tr->count("--batch-size")) tcfg.batch_size = from_file.batch_size;
                if (!tr->count("--epochs")) tcfg.epochs = from_file.epochs;
                if (!tr->count("--patience")) tcfg.patience = from_file.patience;
                if (!tr->count("--lr")) tcfg.adam.lr = from_file.adam.lr;
                if (!tr->count("--curriculum")) tcfg.curriculum = from_file.curriculum;
                if (!tr->count("--curriculum-epochs"))
                    tcfg.curriculum_epochs = from_file.curriculum_epochs;
                if (!tr->count("--halt-penalty")) tcfg.halt_penalty = from_file.halt_penalty;
                if (!tr->count("--reveal-fraction"))
                    tcfg.reveal_fraction = from_file.reveal_fraction;
                if (!tr->count("--loss"))
                    loss_str = from_file.loss == Loss::final_mse ? "final_mse"
                                                                 : "per_layer_weighted_mse";
                if (!tr->count("--regime") && from_file.regime != tcfg.regime) {
                    tcfg.regime = from_file.regime;
                    tcfg.p = from_file.p;
                    tcfg.k = from_file.k;
                    tcfg.mixed = from_file.mixed;
                }
                if (!tr->count("--seed")) c.seed = from_file.seed;
                if (!tr->count("--snr-db")) c.snr_db = from_file.snr_db;
            }
            if (tr->count("--regime") || config_path.empty())
                tcfg = parse_regime(tcfg, regime);
            if (loss_str == "final_mse")
                tcfg.loss = Loss::final_mse;
            else if (loss_str == "per_layer_weighted_mse")
                tcfg.loss = Loss::per_layer_weighted_mse;
            else
                throw std::invalid_argument("unknown loss: " + loss_str);
            tcfg.seed = c.seed;
            tcfg.snr_db = c.snr_db;
            return run_train(c, tcfg, arch, depth, train_out, report_out, print_config);
        }
        if (*gen) return run_gen(c, prob, active_k, gen_count, gen_out);
        if (*ev)
            return run_eval(c, solver, model_path, eval_iters, lambda_str, alpha_str,
                            eval_count, reveal, eval_out);
        BenchConfig bc;
        bc.m = c.pilot_len;
        bc.n = c.users;
        bc.pilot_seed = c.pilot_seed;
        bc.snr_db = c.snr_db;
        bc.seed = c.seed;
        bc.test_size = test_size;
        if (*f4) return run_fig4(c, bc, f4_lista, f4_lamp, f4_listah);
        if (*f5) return run_fig5(c, bc, f5_dir, f5_listah);
        if (*bt) return run_bench_time(c, bc, bt_lista, reps);
        if (*st) return run_selftest(grad_flag);
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        for (auto& ch : msg)
            if (ch == '\n') ch = ';';
        std::cerr << "error: " << msg << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (auto& ch : msg)
            if (ch == '\n') ch = ';';
        std::cerr << "error: " << msg << "\n";
        return 4;
    }
    return 0;
}
