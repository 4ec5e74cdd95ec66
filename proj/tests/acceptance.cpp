// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
// if any fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "nhl/gradflow.hpp"
#include "nhl/experiments.hpp"
#include "nhl/kernel_ladder.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace nhl;
using namespace testing::oracle;
using testing::ball_points;
using testing::gaussian_matrix;
using testing::random_net;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

const fs::path kRuns = "acceptance_runs";

RunOutput run(const std::string& exp, const json& overrides, const std::string& dir) {
    RunConfig cfg = resolve_config(exp, json::object(), overrides);
    cfg.out_dir = kRuns / dir;
    fs::remove_all(cfg.out_dir);
    return run_experiment(cfg);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome gradient_consistency() {
    const int m = 8;
    Dataset data;
    data.inputs = gaussian_matrix(4, 10, 101);
    data.targets = gaussian_matrix(10, 1, 102).col(0);
    double worst = 0.0;
    for (double beta : {0.0, 1.0}) {
        const NetworkState net = random_net(3, m, 4, Activation::tanh, beta > 0.0, 103);
        const Params v = gf_rhs(net, data, Loss::squared, beta);
        const double md = m;
        worst = std::max(worst, compare(v.z, central_fd(net, data, [](Params& p) -> MatrixXd& { return p.z; }, -md)));
        worst = std::max(worst, compare(v.W[0], central_fd(net, data, [](Params& p) -> MatrixXd& { return p.W[0]; }, -md * md)));
        worst = std::max(worst, compare(v.a, central_fd(net, data, [](Params& p) -> VectorXd& { return p.a; }, -md)));
        if (beta > 0.0)
            for (int l = 0; l < 2; ++l)
                worst = std::max(worst, compare(v.b[l], central_fd(net, data, [l](Params& p) -> VectorXd& { return p.b[l]; },
                                                                   -beta * md)));
    }
    return {worst < 1e-5, fmt("max block relative error %.3g (< 1e-5)", worst)};
}

Outcome kernel_flow_identity() {
    const NetworkState net = random_net(3, 32, 2, Activation::tanh, false, 201);
    Dataset data;
    data.inputs = gaussian_matrix(2, 10, 202);
    data.targets = gaussian_matrix(10, 1, 203).col(0);
    GFConfig cfg;
    cfg.dt = 1e-3;
    cfg.T = 0.5;
    cfg.integrator = Integrator::rk4;
    const Trajectory tr = integrate(net, data, Loss::squared, cfg);
    double worst = 0.0;
    int checked = 0;
    for (int j = 0; j < 20; ++j, ++checked) {
        const std::size_t k = 10 + 24 * static_cast<std::size_t>(j);
        const VectorXd df = (predict(tr.states[k + 1], data.inputs) - predict(tr.states[k - 1], data.inputs)) / (2 * cfg.dt);
        const VectorXd zeta = residuals(predict(tr.states[k], data.inputs), data.targets, Loss::squared);
        const VectorXd rhs = -(tangent_gram(tr.states[k], data.inputs).entries * zeta) / data.n();
        for (int i = 0; i < data.n(); ++i) worst = std::max(worst, std::abs(df(i) - rhs(i)) / std::max(1.0, std::abs(df(i))));
    }
    return {worst < 1e-3, fmt("max relative gap %.3g over %g times (< 1e-3)", worst, checked)};
}

RunOutput fig2_first;

Outcome figure2() {
    fig2_first = run("fig2", json::object(), "fig2_a");
    const double big = fig2_first.results.at("sup_rel_dev_m2048");
    const double small = fig2_first.results.at("sup_rel_dev_m64");
    return {big < 0.10 && big < small, fmt("sup rel dev m=2048 %.4f (< 0.10), m=64 %.4f", big, small)};
}

Outcome decay() {
    const RunOutput out = run("compress", json::object(), "compress");
    const json& r = out.results;
    if (r.at("slope").is_null()) return {false, "slope undefined"};
    const double slope = r.at("slope");
    const bool below = r.at("all_below_bound");
    return {slope >= -1.25 && slope <= -0.75 && below,
            fmt("slope %.3f in [-1.25, -0.75], all means below bound: %g", slope, below ? 1.0 : 0.0)};
}

Outcome rademacher() {
    bool ok = true;
    std::string detail;
    for (auto [L, n] : {std::pair{2, 64}, {3, 64}, {3, 256}}) {
        const RunOutput out = run("rademacher", {{"L", L}, {"n", n}, {"M", 1.0}, {"num_tau", 64}},
                                  "rademacher_L" + std::to_string(L) + "_n" + std::to_string(n));
        const double est = out.results.at("estimate"), bound = out.results.at("bound");
        ok = ok && est > 0.0 && est <= bound;
        detail += fmt("(L=%g,n=%g) %.4f <= %.4f; ", L, n, est, bound);
    }
    return {ok, detail};
}

Outcome bound_suite() {
    int violations = 0, nets = 0;
    std::uint64_t seed = 6000;
    for (Activation act : {Activation::relu, Activation::tanh})
        for (int rep = 0; rep < 100; ++rep, ++nets) {
            const int L = 2 + rep % 3;
            const NetworkState net = random_net(L, 16, 3, act, false, ++seed);
            const double C = complexity_upper_bound(net, 2.0);
            const MatrixXd x = ball_points(3, 2, ++seed);
            const double f0 = forward(net, x.col(0)).f, f1 = forward(net, x.col(1)).f;
            if (std::abs(f0) > C * x.col(0).norm() * (1 + 1e-12)) ++violations;
            if (std::abs(f0 - f1) > C * (x.col(0) - x.col(1)).norm() * (1 + 1e-12)) ++violations;
        }
    return {violations == 0, fmt("%g nets, %g violations", nets, violations)};
}

Outcome psd_suite() {
    double worst = 0.0;  // most negative min eigenvalue relative to trace / n
    std::uint64_t seed = 7000;
    for (int rep = 0; rep < 30; ++rep) {
        const int L = 2 + rep % 3;
        const Activation act = rep % 2 ? Activation::tanh : Activation::relu;
        const NetworkState net = random_net(L, 24, 3, act, rep % 4 < 2, ++seed);
        const MatrixXd x = gaussian_matrix(3, 15, ++seed);
        std::vector<GramMatrix> grams;
        for (int l = 0; l < L; ++l) grams.push_back(layer_kernel_gram(net, x, l));
        grams.push_back(tangent_gram(net, x, rep % 4 < 2 ? 1.0 : 0.0));
        for (const GramMatrix& G : grams) {
            const double tr = G.entries.trace() / static_cast<double>(G.n());
            if (tr > 0.0) worst = std::min(worst, min_eigenvalue(G) / tr);
        }
    }
    return {worst >= -1e-8, fmt("worst min eigenvalue / (trace/n) = %.3g (>= -1e-8)", worst)};
}

Outcome figure3() {
    const RunOutput out = run("fig3", json::object(), "fig3");
    const json& r = out.results;
    const double mse = r.at("train_mse_final");
    const double c1 = r.at("cka_kappa1_final"), c2 = r.at("cka_kappa2_final"), c2i = r.at("cka_kappa2_initial");
    return {mse < 1e-2 && c2 > c2i && c2 > c1,
            fmt("train mse %.4f (< 0.01); cka2 %.4f -> %.4f; final cka1 %.4f", mse, c2i, c2, c1)};
}

Outcome degeneracy() {
    const RunOutput out = run("degeneracy", json::object(), "degeneracy");
    if (!out.results.contains("ratio")) return {false, "ratio undefined"};
    const double ratio = out.results.at("ratio");
    return {ratio >= 2.0 && ratio <= 8.0, fmt("std ratio m=256 / m=4096 = %.3f (in [2, 8])", ratio)};
}

Outcome determinism() {
    if (fig2_first.artifacts.empty()) fig2_first = run("fig2", json::object(), "fig2_a");
    run("fig2", json::object(), "fig2_b");
    int files = 0, same = 0;
    for (const auto& [name, cols] : fig2_first.artifacts) {
        ++files;
        same += slurp(kRuns / "fig2_a" / name) == slurp(kRuns / "fig2_b" / name);
    }
    return {files > 0 && same == files, fmt("%g of %g CSVs byte-identical", same, files)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient consistency", gradient_consistency},
        {"kernel-flow identity", kernel_flow_identity},
        {"fig2 mean-field vs particles", figure2},
        {"subsampling MSE decay", decay},
        {"Rademacher estimate below bound", rademacher},
        {"output and Lipschitz bounds", bound_suite},
        {"PSD Grams", psd_suite},
        {"fig3 training and alignment", figure3},
        {"degeneracy std ratio", degeneracy},
        {"fig2 determinism", determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    fs::create_directories(kRuns);
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d %s: %s (%s) [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed == 0 ? 0 : 1;
}
