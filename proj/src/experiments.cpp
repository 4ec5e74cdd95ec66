#include "nhl/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include "nhl/complexity_bench.hpp"
#include "nhl/csv.hpp"
#include "nhl/dataset.hpp"
#include "nhl/error.hpp"
#include "nhl/gradflow.hpp"
#include "nhl/kernel_ladder.hpp"
#include "nhl/linear_mf.hpp"
#include "nhl/sampler.hpp"
#include "nhl/seed.hpp"

namespace nhl {

namespace fs = std::filesystem;

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"train",      "linear-mf", "kernels", "compress", "rademacher",
                                                "depth-sep",  "fig2",      "fig3",    "lln",      "degeneracy"};
    return names;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kMemoryBudget = 512ull << 20;

json network_defaults(int L, int m, int d, const std::string& act, bool bias) {
    return {{"L", L},         {"m", m},         {"d", d},         {"activation", act}, {"bias", bias},
            {"std_a", 1.0},   {"std_z", 1.0},   {"std_W", 1.0},   {"std_b", 1.0}};
}

json merged(json base, const json& extra) {
    base.update(extra);
    return base;
}

json without(json base, const std::vector<std::string>& keys) {
    for (const auto& k : keys) base.erase(k);
    return base;
}

}  // namespace

json default_params(const std::string& experiment) {
    if (experiment == "train")
        return merged(network_defaults(3, 64, 1, "tanh", false),
                      {{"n", 20},          {"distribution", "gaussian"}, {"lo", 0.0},   {"hi", 1.0},
                       {"target", "sin2x"}, {"eps0", 0.5},               {"teacher_m", 256},
                       {"teacher_mean_W", 1.0}, {"loss", "squared"},     {"dt", 1e-3},  {"T", 1.0},
                       {"integrator", "rk4"},   {"beta", 0.0},           {"record_every", 10}});
    if (experiment == "linear-mf")
        return {{"d", 10}, {"L", 3}, {"n", 50}, {"dt", 1e-3}, {"T", 5.0}, {"mem_stride", 0}, {"sweeps", 3}};
    if (experiment == "kernels")
        return merged(network_defaults(3, 512, 1, "relu", true),
                      {{"n", 20},          {"distribution", "uniform_interval"}, {"lo", 0.0}, {"hi", kTwoPi},
                       {"target", "sin2x"}, {"eps0", 0.5}, {"teacher_m", 256}, {"teacher_mean_W", 1.0},
                       {"dt", 1e-2},       {"T", 0.0},   {"integrator", "euler"}, {"beta", 0.0}, {"ridge", 0.0}});
    if (experiment == "compress")
        return {{"L", 3},           {"m_teacher", 2048}, {"d", 5},        {"activation", "relu"},
                {"teacher_mean_W", 1.0}, {"n_eval", 200}, {"m_list", "8,16,32,64,128,256,512"},
                {"trials", 20}};
    if (experiment == "rademacher")
        return {{"L", 2}, {"n", 64}, {"d", 5}, {"m", 32}, {"M", 1.0}, {"num_tau", 64},
                {"steps", 200}, {"lr", 0.5}, {"restarts", 5}};
    if (experiment == "depth-sep")
        return {{"d", 2},   {"n", 200},        {"n_test", 1000}, {"target", "pyramid"}, {"eps0", 0.5},
                {"m", 64},  {"budgets", "1,2,4,8"}, {"dt", 1e-2}, {"T", 20.0}};
    if (experiment == "fig2")
        return {{"d", 10},  {"n", 50},      {"L", 3},       {"widths", "64,2048"}, {"dt", 1e-3},
                {"T", 5.0}, {"mem_stride", 0}, {"sweeps", 3}};
    if (experiment == "fig3")
        return merged(network_defaults(3, 512, 1, "relu", true),
                      {{"n", 20},    {"n_test", 200}, {"lo", 0.0},      {"hi", kTwoPi}, {"dt", 2e-2},
                       {"T", 200.0}, {"integrator", "euler"}, {"beta", 0.0}, {"record_every", 250},
                       {"seeds", 10}, {"grid_points", 64}});
    if (experiment == "lln")
        return merged(without(network_defaults(3, 0, 1, "tanh", false), {"m"}),
                      {{"n", 20},        {"n_eval", 50}, {"widths", "64,256,1024"}, {"reference_width", 4096},
                       {"seeds", 3},     {"dt", 1e-2},   {"T", 2.0},  {"integrator", "euler"},
                       {"record_every", 10}});
    if (experiment == "degeneracy")
        return merged(without(network_defaults(4, 0, 1, "tanh", false), {"m", "bias", "std_b"}),
                      {{"n", 20}, {"widths", "256,4096"}, {"dt", 1e-2}, {"T", 1.0}, {"integrator", "euler"}});
    fail("unknown_experiment", "unknown experiment '" + experiment + "'");
}

namespace {

json coerce(const std::string& key, const json& like, const json& value) {
    auto bad = [&] {
        fail("invalid_argument", "config key '" + key + "' expects a " + std::string(like.type_name()) +
                                     ", got " + value.dump());
    };
    if (like.is_boolean()) {
        if (!value.is_boolean()) bad();
        return value;
    }
    if (like.is_string()) {
        if (value.is_string()) return value;
        if (value.is_number()) return json(value.dump());  // "widths": 64 -> "64"
        bad();
    }
    if (like.is_number_integer()) {
        if (value.is_number_integer()) return value;
        if (value.is_number_float() && std::floor(value.get<double>()) == value.get<double>())
            return json(static_cast<long long>(value.get<double>()));
        bad();
    }
    if (!value.is_number()) bad();
    return json(value.get<double>());
}

}  // namespace

RunConfig resolve_config(const std::string& experiment, const json& file, const json& overrides) {
    RunConfig cfg;
    cfg.experiment = experiment;
    cfg.params = default_params(experiment);
    cfg.out_dir = fs::path("runs") / experiment;
    for (const json* src : {&file, &overrides}) {
        if (src->is_null()) continue;
        if (!src->is_object()) fail("invalid_argument", "config must be a flat JSON object");
        for (const auto& [key, value] : src->items()) {
            if (key == "seed") {
                if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<long long>() >= 0))
                    fail("invalid_argument", "seed must be a nonnegative integer");
                cfg.seed = value.get<std::uint64_t>();
            } else if (key == "out") {
                if (!value.is_string()) fail("invalid_argument", "out must be a path string");
                cfg.out_dir = value.get<std::string>();
            } else if (key == "experiment") {
                if (value != experiment)
                    fail("invalid_argument", "config is for experiment " + value.dump() + ", not '" + experiment + "'");
            } else {
                if (!cfg.params.contains(key))
                    fail("invalid_argument", "unknown config key '" + key + "' for experiment '" + experiment + "'");
                cfg.params[key] = coerce(key, cfg.params[key], value);
            }
        }
    }
    return cfg;
}

json parse_flag_value(const std::string& experiment, const std::string& key, const std::string& text) {
    const json defaults = default_params(experiment);
    if (key == "seed" || key == "out" || !defaults.contains(key)) return json(text);
    const json& like = defaults.at(key);
    try {
        if (like.is_boolean()) {
            if (text == "true" || text == "1") return true;
            if (text == "false" || text == "0") return false;
            throw std::invalid_argument(text);
        }
        if (like.is_string()) return json(text);
        std::size_t used = 0;
        if (like.is_number_integer()) {
            const long long v = std::stoll(text, &used);
            if (used != text.size()) throw std::invalid_argument(text);
            return json(v);
        }
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return json(v);
    } catch (const std::logic_error&) {
        fail("invalid_argument", "--" + key + " expects a " + std::string(like.type_name()) + ", got '" + text + "'");
    }
}

std::string seed_derivation_note() {
    return "component seed = splitmix64(master ^ fnv1a64(name)); indexed components (per seed/width/trial) use "
           "splitmix64(component seed + splitmix64(index)); each component seeds its own mt19937_64";
}

namespace {

// ---- parameter access --------------------------------------------------

int get_int(const json& p, const char* key) { return p.at(key).get<int>(); }
double get_double(const json& p, const char* key) { return p.at(key).get<double>(); }
bool get_bool(const json& p, const char* key) { return p.at(key).get<bool>(); }
std::string get_string(const json& p, const char* key) { return p.at(key).get<std::string>(); }

std::vector<double> get_list(const json& p, const char* key) {
    std::vector<double> out;
    std::stringstream ss(get_string(p, key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            fail("invalid_argument", std::string("'") + key + "' must be a comma-separated list of numbers");
        }
    }
    require(!out.empty(), std::string("'") + key + "' is empty");
    return out;
}

std::vector<int> get_int_list(const json& p, const char* key) {
    std::vector<int> out;
    for (double v : get_list(p, key)) {
        require(v == std::floor(v) && v >= 1, std::string("'") + key + "' entries must be positive integers");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

InitSpec init_spec(const json& p, int m, std::uint64_t seed) {
    InitSpec s;
    s.L = get_int(p, "L");
    s.m = m;
    s.d = get_int(p, "d");
    s.activation = parse_activation(get_string(p, "activation"));
    s.std_a = get_double(p, "std_a");
    s.std_z = get_double(p, "std_z");
    s.std_W = get_double(p, "std_W");
    s.bias_enabled = p.contains("bias") && get_bool(p, "bias");
    s.std_b = p.contains("std_b") ? get_double(p, "std_b") : 0.0;
    s.seed = seed;
    return s;
}

GFConfig gf_config(const json& p, int record_every) {
    GFConfig g;
    g.dt = get_double(p, "dt");
    g.T = get_double(p, "T");
    g.integrator = parse_integrator(get_string(p, "integrator"));
    g.beta = p.contains("beta") ? get_double(p, "beta") : 0.0;
    g.record_every = record_every;
    g.keep_states = false;
    return g;
}

VectorXd unit_gaussian_vector(int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd v(d);
    for (int i = 0; i < d; ++i) v(i) = normal(rng);
    return v / v.norm();
}

// Relu/tanh teacher whose middle weights carry a common offset, so that
// hidden features stay O(1) as the width grows.
NetworkState offset_teacher(int L, int m, int d, Activation act, double mean_W, std::uint64_t seed) {
    InitSpec s;
    s.L = L;
    s.m = m;
    s.d = d;
    s.activation = act;
    s.seed = seed;
    NetworkState t = init_network(s);
    for (auto& w : t.params.W) w.array() += mean_W;
    return t;
}

TargetFn make_target(const json& p, std::uint64_t seed) {
    const std::string name = get_string(p, "target");
    const int d = get_int(p, "d");
    if (name == "sin2x") return [](const VectorXd& x) { return std::sin(2.0 * x(0)); };
    if (name == "linear") {
        const VectorXd v = unit_gaussian_vector(d, derive_seed(seed, "target.v_star"));
        return [v](const VectorXd& x) { return v.dot(x); };
    }
    if (name == "pyramid" || name == "radial_bump") {
        const DepthTarget kind = parse_depth_target(name);
        const double eps0 = get_double(p, "eps0");
        depth_sep_target(kind, VectorXd::Zero(d), eps0);  // validates eps0
        return [kind, eps0](const VectorXd& x) { return depth_sep_target(kind, x, eps0); };
    }
    if (name == "teacher") {
        auto t = std::make_shared<NetworkState>(
            offset_teacher(get_int(p, "L"), get_int(p, "teacher_m"), d, parse_activation(get_string(p, "activation")),
                           get_double(p, "teacher_mean_W"), derive_seed(seed, "target.teacher")));
        return [t](const VectorXd& x) { return forward(*t, x).f; };
    }
    fail("invalid_argument", "unknown target '" + name + "' (linear, sin2x, pyramid, radial_bump, teacher)");
}

InputSpec input_spec(const json& p) {
    InputSpec s;
    s.distribution = p.contains("distribution") ? parse_distribution(get_string(p, "distribution"))
                                                : InputDistribution::uniform_interval;
    s.d = get_int(p, "d");
    s.lo = p.contains("lo") ? get_double(p, "lo") : 0.0;
    s.hi = p.contains("hi") ? get_double(p, "hi") : 1.0;
    return s;
}

std::vector<std::string> numbered(const std::string& stem, int from, int to) {
    std::vector<std::string> out;
    for (int i = from; i <= to; ++i) out.push_back(stem + std::to_string(i));
    return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

fs::path artifact(const RunConfig& cfg, RunOutput& out, const std::string& name, std::vector<std::string> columns) {
    out.artifacts[name] = std::move(columns);
    return cfg.out_dir / name;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double population_std(const VectorXd& v) {
    const double mu = v.mean();
    return std::sqrt((v.array() - mu).square().mean());
}

}  // namespace

// ---- train -------------------------------------------------------------

RunOutput run_train(const RunConfig& cfg) {
    const json& p = cfg.params;
    RunOutput out;
    const MatrixXd inputs = sample_inputs(input_spec(p), get_int(p, "n"), derive_seed(cfg.seed, "inputs"));
    const Dataset data = make_dataset(inputs, make_target(p, cfg.seed));
    const NetworkState init = init_network(init_spec(p, get_int(p, "m"), derive_seed(cfg.seed, "init")));
    const Loss loss = parse_loss(get_string(p, "loss"));
    const int L = init.L;

    CsvWriter traj(artifact(cfg, out, "trajectory.csv",
                            concat(concat({"t", "risk"}, numbered("M_", 1, L)), {"complexity"})),
                   concat(concat({"t", "risk"}, numbered("M_", 1, L)), {"complexity"}));
    NetworkState last = init;
    integrate(init, data, loss, gf_config(p, get_int(p, "record_every")),
              [&](int, double t, const NetworkState& s, double risk) {
                  std::vector<double> row{t, risk};
                  for (int l = 1; l <= L; ++l) row.push_back(group_norm(s, l, 2.0));
                  row.push_back(complexity_upper_bound(s, 2.0));
                  traj.row(row);
                  last = s;
              });

    const auto pred_cols = concat(numbered("x_", 1, init.d), {"target", "prediction"});
    CsvWriter preds(artifact(cfg, out, "predictions.csv", pred_cols), pred_cols);
    const VectorXd f = predict(last, inputs);
    for (int k = 0; k < data.n(); ++k) {
        std::vector<double> row(inputs.col(k).data(), inputs.col(k).data() + init.d);
        row.push_back(data.targets(k));
        row.push_back(f(k));
        preds.row(row);
    }
    out.results = {{"initial_risk", empirical_risk(init, data, loss)}, {"final_risk", empirical_risk(last, data, loss)}};
    return out;
}

// ---- linear-mf ---------------------------------------------------------

namespace {

struct LinearProblem {
    MatrixXd inputs;
    VectorXd v_star;
    LinearMFConfig mf;
};

LinearProblem linear_problem(const json& p, std::uint64_t seed) {
    LinearProblem lp;
    const int d = get_int(p, "d");
    InputSpec spec;
    spec.distribution = InputDistribution::gaussian;
    spec.d = d;
    lp.inputs = sample_inputs(spec, get_int(p, "n"), derive_seed(seed, "inputs"));
    lp.v_star = unit_gaussian_vector(d, derive_seed(seed, "v_star"));
    lp.mf.d = d;
    lp.mf.L = get_int(p, "L");
    lp.mf.dt = get_double(p, "dt");
    lp.mf.T = get_double(p, "T");
    lp.mf.sweeps = get_int(p, "sweeps");
    lp.mf.Sigma = second_moment(lp.inputs);
    lp.mf.v_star = lp.v_star;
    const int stride = get_int(p, "mem_stride");
    require(stride >= 0, "mem_stride must be >= 0 (0 picks the smallest stride within the memory budget)");
    lp.mf.mem_stride = stride > 0 ? stride : stride_for_budget(lp.mf, kMemoryBudget);
    return lp;
}

std::vector<std::string> linear_columns(int d, int L) {
    return concat(concat(concat({"t"}, numbered("v_", 1, d)), numbered("c_", 1, L - 1)), {"risk"});
}

}  // namespace

RunOutput run_linear_mf(const RunConfig& cfg) {
    RunOutput out;
    const LinearProblem lp = linear_problem(cfg.params, cfg.seed);
    const LinearMFResult res = integrate_linear_mf(lp.mf);
    write_linear_trajectory_csv(res.trajectory, lp.mf.L,
                                artifact(cfg, out, "linear_mf.csv", linear_columns(lp.mf.d, lp.mf.L)));
    out.results = {{"mem_stride", lp.mf.mem_stride},
                   {"nodes", res.grid.nodes()},
                   {"final_risk", res.trajectory.risk.back()},
                   {"memory_bytes", linear_mf_memory_bytes(lp.mf)}};
    return out;
}

// ---- kernels -----------------------------------------------------------

RunOutput run_kernels(const RunConfig& cfg) {
    const json& p = cfg.params;
    RunOutput out;
    const MatrixXd inputs = sample_inputs(input_spec(p), get_int(p, "n"), derive_seed(cfg.seed, "inputs"));
    const Dataset data = make_dataset(inputs, make_target(p, cfg.seed));
    NetworkState state = init_network(init_spec(p, get_int(p, "m"), derive_seed(cfg.seed, "init")));
    const GFConfig g = gf_config(p, 1);
    if (g.T > 0.0)
        integrate(state, data, Loss::squared, g, [&](int, double, const NetworkState& s, double) { state = s; });

    const GramMatrix target = target_gram(data.targets);
    const double ridge = get_double(p, "ridge");
    const std::vector<std::string> cols{"label", "cka", "min_eig", "min_norm", "ridge", "fallback"};
    CsvWriter summary(artifact(cfg, out, "alignment.csv", cols), cols);
    const std::vector<std::string> gram_cols = numbered("col_", 1, data.n());

    auto report = [&](const GramMatrix& K) {
        write_gram_csv(K, artifact(cfg, out, "gram_" + K.label + ".csv", gram_cols));
        double align = std::nan("");
        try {
            align = cka(K, target);
        } catch (const Error& e) {
            if (e.code() != "degenerate_input") throw;
        }
        const MinNormResult mn = min_norm_with_fallback(K, data.targets, ridge);
        summary.raw_line(K.label + "," + format_double(align) + "," + format_double(min_eigenvalue(K)) + "," +
                         format_double(mn.value) + "," + format_double(mn.ridge) + "," + (mn.fallback ? "1" : "0"));
        out.results["cka_" + K.label] = std::isnan(align) ? json(nullptr) : json(align);
        if (mn.fallback) out.results["ridge_fallback_" + K.label] = mn.ridge;
    };
    for (int l = 0; l <= state.L - 1; ++l) report(layer_kernel_gram(state, inputs, l));
    for (int l = 1; l <= state.L; ++l) report(gamma_gram(state, inputs, l));
    report(tangent_gram(state, inputs, g.beta));
    return out;
}

// ---- compress ----------------------------------------------------------

RunOutput run_compress(const RunConfig& cfg) {
    const json& p = cfg.params;
    RunOutput out;
    const int d = get_int(p, "d");
    const NetworkState teacher =
        offset_teacher(get_int(p, "L"), get_int(p, "m_teacher"), d, parse_activation(get_string(p, "activation")),
                       get_double(p, "teacher_mean_W"), derive_seed(cfg.seed, "teacher"));
    InputSpec spec;
    spec.d = d;
    const MatrixXd eval = sample_inputs(spec, get_int(p, "n_eval"), derive_seed(cfg.seed, "eval_inputs"));
    const DecayTable table =
        mse_decay(teacher, get_int_list(p, "m_list"), get_int(p, "trials"), eval, derive_seed(cfg.seed, "sampler"));
    const double M_nu = mean_squared_norm(eval);
    write_decay_csv(table, teacher, M_nu,
                    artifact(cfg, out, "decay.csv", {"m_out", "trials", "mean_mse", "std_mse", "bound"}));
    bool below = true;
    for (const auto& r : table.rows) below = below && r.mean_mse <= sampling_error_bound(teacher, M_nu, r.m_out);
    out.results = {{"slope", table.slope ? json(*table.slope) : json(nullptr)},
                   {"intercept", table.intercept ? json(*table.intercept) : json(nullptr)},
                   {"M_nu", M_nu},
                   {"all_below_bound", below}};
    return out;
}

// ---- rademacher --------------------------------------------------------

RunOutput run_rademacher(const RunConfig& cfg) {
    const json& p = cfg.params;
    RunOutput out;
    const int L = get_int(p, "L");
    const int n = get_int(p, "n");
    const double M = get_double(p, "M");
    InputSpec spec;
    spec.distribution = InputDistribution::unit_ball;
    spec.d = get_int(p, "d");
    const MatrixXd inputs = sample_inputs(spec, n, derive_seed(cfg.seed, "inputs"));
    AscentConfig asc;
    asc.steps = get_int(p, "steps");
    asc.lr = get_double(p, "lr");
    asc.restarts = get_int(p, "restarts");
    const RadEstimate est =
        estimate_rademacher(L, get_int(p, "m"), inputs, M, get_int(p, "num_tau"), asc, derive_seed(cfg.seed, "rademacher"));
    append_rad_estimate_csv(artifact(cfg, out, "rademacher.csv",
                                     {"L", "n", "M", "seed", "m", "num_tau", "estimate", "stderr", "bound"}),
                            L, n, M, cfg.seed, get_int(p, "m"), est);
    out.results = {{"estimate", est.estimate}, {"stderr", est.stderr_}, {"bound", est.bound}};
    return out;
}

// ---- depth-sep ---------------------------------------------------------

namespace {

// (x, 1) / sqrt(2): the constant coordinate stands in for a first-layer bias
// while keeping the augmented inputs in the unit ball.
MatrixXd augment(const MatrixXd& x) {
    MatrixXd a(x.rows() + 1, x.cols());
    a.topRows(x.rows()) = x;
    a.row(x.rows()).setOnes();
    return a / std::sqrt(2.0);
}

}  // namespace

RunOutput run_depth_sep(const RunConfig& cfg) {
    const json& p = cfg.params;
    RunOutput out;
    const int d = get_int(p, "d");
    const int n = get_int(p, "n");
    const TargetFn target = make_target(p, cfg.seed);
    InputSpec spec;
    spec.distribution = InputDistribution::unit_ball;
    spec.d = d;
    const MatrixXd x_train = sample_inputs(spec, n, derive_seed(cfg.seed, "inputs"));
    const MatrixXd x_test = sample_inputs(spec, get_int(p, "n_test"), derive_seed(cfg.seed, "test_inputs"));
    Dataset train = make_dataset(x_train, target);
    Dataset test = make_dataset(x_test, target);
    train.inputs = augment(x_train);
    test.inputs = augment(x_test);

    const double dt = get_double(p, "dt");
    const long steps = std::lround(get_double(p, "T") / dt);
    require(dt > 0.0 && steps >= 1, "depth-sep needs dt > 0 and T >= dt");
    const std::vector<std::string> cols{"L", "budget", "train_risk", "test_risk", "complexity", "rademacher_bound"};
    CsvWriter csv(artifact(cfg, out, "depth_sep.csv", cols), cols);
    json rows = json::array();
    for (int L : {2, 3}) {
        for (double B : get_list(p, "budgets")) {
            require(B > 0.0, "budgets must be positive");
            InitSpec s;
            s.L = L;
            s.m = get_int(p, "m");
            s.d = d + 1;
            s.activation = Activation::relu;
            s.seed = derive_seed(cfg.seed, "init", static_cast<std::uint64_t>(L));
            // Projected gradient flow on {prod_l M^(l)_{m,2} <= B}.
            auto project = [B](const NetworkState& st) {
                return balance_layers(st, std::min(complexity_upper_bound(st, 2.0), B));
            };
            NetworkState net = project(init_network(s));
            for (long k = 0; k < steps; ++k) {
                net.params.add_scaled(gf_rhs(net, train, Loss::squared), dt);
                net = project(net);
                if (!net.params.all_finite())
                    fail("non_finite", "depth-sep training diverged at step " + std::to_string(k + 1));
            }
            const double tr = empirical_risk(net, train, Loss::squared);
            const double te = empirical_risk(net, test, Loss::squared);
            const double c = complexity_upper_bound(net, 2.0);
            const double rb = rademacher_bound(L, n, B);
            csv.row({static_cast<double>(L), B, tr, te, c, rb});
            rows.push_back({{"L", L}, {"budget", B}, {"train_risk", tr}, {"test_risk", te}});
        }
    }
    out.results = {{"rows", rows}};
    return out;
}

// ---- fig2 --------------------------------------------------------------

RunOutput run_fig2(const RunConfig& cfg) {
    const json& p = cfg.params;
    RunOutput out;
    json lp_params = {{"d", p.at("d")},   {"L", p.at("L")},   {"n", p.at("n")},
                      {"dt", p.at("dt")}, {"T", p.at("T")},   {"mem_stride", p.at("mem_stride")},
                      {"sweeps", p.at("sweeps")}};
    const LinearProblem lp = linear_problem(lp_params, cfg.seed);
    const int d = lp.mf.d;
    const int L = lp.mf.L;
    const int stride = lp.mf.mem_stride;
    const LinearMFResult mf = integrate_linear_mf(lp.mf);
    write_linear_trajectory_csv(mf.trajectory, L, artifact(cfg, out, "mf.csv", linear_columns(d, L)));

    const VectorXd v_star = lp.v_star;
    const Dataset data = make_dataset(lp.inputs, [&](const VectorXd& x) { return v_star.dot(x); });
    const auto& node_times = mf.trajectory.times;
    const std::vector<std::string> pcols = concat(concat({"t"}, numbered("v_", 1, d)), {"risk"});
    const std::vector<std::string> dcols{"m", "sup_rel_dev"};
    CsvWriter dev_csv(artifact(cfg, out, "deviation.csv", dcols), dcols);

    for (int m : get_int_list(p, "widths")) {
        InitSpec s;
        s.L = L;
        s.m = m;
        s.d = d;
        s.activation = Activation::identity;
        s.seed = derive_seed(cfg.seed, "init", static_cast<std::uint64_t>(m));
        GFConfig g;
        g.dt = lp.mf.dt;
        g.T = lp.mf.T;
        g.integrator = Integrator::euler;
        g.record_every = stride;
        g.keep_states = false;

        const std::string name = "particle_m" + std::to_string(m) + ".csv";
        CsvWriter csv(artifact(cfg, out, name, pcols), pcols);
        double sup = 0.0;
        std::size_t k = 0;
        integrate(init_network(s), data, Loss::squared, g, [&](int, double t, const NetworkState& st, double risk) {
            const VectorXd v = effective_linear_map(st);
            std::vector<double> row{t};
            for (int j = 0; j < d; ++j) row.push_back(v(j));
            row.push_back(risk);
            csv.row(row);
            while (k < node_times.size() && node_times[k] < t - 1e-9) ++k;
            if (k < node_times.size() && std::abs(node_times[k] - t) <= 1e-9)
                sup = std::max(sup, (v - mf.trajectory.v[k]).norm() / v_star.norm());
        });
        dev_csv.row({static_cast<double>(m), sup});
        out.results["sup_rel_dev_m" + std::to_string(m)] = sup;
    }
    out.results["mem_stride"] = stride;
    return out;
}

// ---- fig3 --------------------------------------------------------------

RunOutput run_fig3(const RunConfig& cfg) {
    const json& p = cfg.params;
    RunOutput out;
    const int seeds = get_int(p, "seeds");
    require(seeds >= 1, "seeds must be >= 1");
    require(get_int(p, "d") == 1, "fig3 is a one-dimensional experiment (d = 1)");
    require(get_int(p, "L") >= 3, "fig3 compares kappa^(1) and kappa^(2) and needs L >= 3");
    InputSpec spec;
    spec.distribution = InputDistribution::uniform_interval;
    spec.d = 1;
    spec.lo = get_double(p, "lo");
    spec.hi = get_double(p, "hi");
    auto f_star = [](const VectorXd& x) { return std::sin(2.0 * x(0)); };
    const GFConfig g = gf_config(p, get_int(p, "record_every"));

    struct Snapshot {
        double t, train_mse, test_mse, cka1, cka2;
    };
    std::vector<std::vector<Snapshot>> runs;

    const int G = get_int(p, "grid_points");
    require(G >= 2, "grid_points must be >= 2");
    MatrixXd grid(1, G);
    for (int i = 0; i < G; ++i) grid(0, i) = spec.lo + (spec.hi - spec.lo) * i / (G - 1);

    for (int s = 0; s < seeds; ++s) {
        const auto idx = static_cast<std::uint64_t>(s);
        const Dataset train =
            make_dataset(sample_inputs(spec, get_int(p, "n"), derive_seed(cfg.seed, "inputs", idx)), f_star);
        const Dataset test =
            make_dataset(sample_inputs(spec, get_int(p, "n_test"), derive_seed(cfg.seed, "test_inputs", idx)), f_star);
        const NetworkState init = init_network(init_spec(p, get_int(p, "m"), derive_seed(cfg.seed, "init", idx)));
        const GramMatrix target = target_gram(train.targets);
        NetworkState last = init;
        std::vector<Snapshot> snaps;
        integrate(init, train, Loss::squared, g, [&](int, double t, const NetworkState& st, double risk) {
            snaps.push_back({t, 2.0 * risk, 2.0 * empirical_risk(st, test, Loss::squared),
                             cka(layer_kernel_gram(st, train.inputs, 1), target),
                             cka(layer_kernel_gram(st, train.inputs, 2), target)});
            last = st;
        });
        runs.push_back(std::move(snaps));

        if (s == 0) {
            GramMatrix heat = layer_kernel_gram(last, grid, 2);
            heat.label = "kappa_2_final";
            write_gram_csv(heat, artifact(cfg, out, "kappa2_heatmap.csv", numbered("col_", 1, G)));
            const std::vector<std::string> lcols{"x", "target", "prediction_init", "prediction_final"};
            CsvWriter learned(artifact(cfg, out, "learned.csv", lcols), lcols);
            const VectorXd f0 = predict(init, grid);
            const VectorXd f1 = predict(last, grid);
            for (int i = 0; i < G; ++i) learned.row({grid(0, i), f_star(grid.col(i)), f0(i), f1(i)});

            const std::vector<std::string> pcols{"neuron", "h2_x1_init", "h2_x2_init", "h2_x1_final", "h2_x2_final"};
            CsvWriter pre(artifact(cfg, out, "preact.csv", pcols), pcols);
            const MatrixXd two = train.inputs.leftCols(std::min(2, train.n()));
            const MatrixXd h0 = forward_batch(init, two).pre[1];
            const MatrixXd h1 = forward_batch(last, two).pre[1];
            for (Eigen::Index i = 0; i < h0.rows(); ++i)
                pre.row({static_cast<double>(i), h0(i, 0), h0(i, two.cols() - 1), h1(i, 0), h1(i, two.cols() - 1)});
        }
    }

    const std::vector<std::string> ccols{"t", "train_mse", "test_mse", "cka_kappa1", "cka_kappa2"};
    CsvWriter curves(artifact(cfg, out, "curves.csv", ccols), ccols);
    const std::size_t K = runs.front().size();
    std::vector<double> last_row;
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> row{runs.front()[k].t, 0.0, 0.0, 0.0, 0.0};
        for (const auto& r : runs) {
            row[1] += r[k].train_mse / seeds;
            row[2] += r[k].test_mse / seeds;
            row[3] += r[k].cka1 / seeds;
            row[4] += r[k].cka2 / seeds;
        }
        curves.row(row);
        if (k == 0)
            out.results.update({{"cka_kappa1_initial", row[3]}, {"cka_kappa2_initial", row[4]},
                                {"train_mse_initial", row[1]}});
        last_row = row;
    }
    out.results.update({{"train_mse_final", last_row[1]},
                        {"test_mse_final", last_row[2]},
                        {"cka_kappa1_final", last_row[3]},
                        {"cka_kappa2_final", last_row[4]}});
    return out;
}

// ---- lln ---------------------------------------------------------------

RunOutput run_lln(const RunConfig& cfg) {
    const json& p = cfg.params;
    RunOutput out;
    json q = p;
    q["target"] = "sin2x";
    q["distribution"] = "gaussian";
    const MatrixXd inputs = sample_inputs(input_spec(q), get_int(p, "n"), derive_seed(cfg.seed, "inputs"));
    const Dataset data = make_dataset(inputs, make_target(q, cfg.seed));
    const MatrixXd eval = sample_inputs(input_spec(q), get_int(p, "n_eval"), derive_seed(cfg.seed, "eval_inputs"));
    const GFConfig g = gf_config(p, get_int(p, "record_every"));
    const int seeds = get_int(p, "seeds");
    require(seeds >= 1, "seeds must be >= 1");

    // Output on the eval inputs at every recorded time.
    auto outputs = [&](int m, std::uint64_t init_seed) {
        std::vector<VectorXd> f;
        integrate(init_network(init_spec(p, m, init_seed)), data, Loss::squared, g,
                  [&](int, double, const NetworkState& st, double) { f.push_back(predict(st, eval)); });
        return f;
    };

    const int ref_m = get_int(p, "reference_width");
    const std::vector<int> widths = get_int_list(p, "widths");
    const std::vector<std::string> cols{"m", "seed", "sup_dev"};
    CsvWriter csv(artifact(cfg, out, "lln.csv", cols), cols);
    std::vector<std::vector<double>> dev(widths.size());
    for (int s = 0; s < seeds; ++s) {
        const auto ref = outputs(ref_m, derive_seed(cfg.seed, "init.reference", static_cast<std::uint64_t>(s)));
        for (std::size_t w = 0; w < widths.size(); ++w) {
            const auto f = outputs(
                widths[w], derive_seed(cfg.seed, "init.m" + std::to_string(widths[w]), static_cast<std::uint64_t>(s)));
            double sup = 0.0;
            for (std::size_t k = 0; k < f.size(); ++k) sup = std::max(sup, (f[k] - ref[k]).cwiseAbs().maxCoeff());
            dev[w].push_back(sup);
            csv.row({static_cast<double>(widths[w]), static_cast<double>(s), sup});
        }
    }
    const std::vector<std::string> scols{"m", "mean_sup_dev"};
    CsvWriter summary(artifact(cfg, out, "lln_summary.csv", scols), scols);
    bool monotone = true;
    json means = json::object();
    for (std::size_t w = 0; w < widths.size(); ++w) {
        const double mu = mean_of(dev[w]);
        summary.row({static_cast<double>(widths[w]), mu});
        means[std::to_string(widths[w])] = mu;
        if (w > 0) monotone = monotone && mu < mean_of(dev[w - 1]);
    }
    out.results = {{"mean_sup_dev", means}, {"monotone", monotone}};
    return out;
}

// ---- degeneracy --------------------------------------------------------

RunOutput run_degeneracy(const RunConfig& cfg) {
    const json& p = cfg.params;
    RunOutput out;
    require(get_int(p, "L") >= 4, "degeneracy needs L >= 4");
    json q = p;
    q["target"] = "sin2x";
    q["distribution"] = "gaussian";
    const MatrixXd inputs = sample_inputs(input_spec(q), get_int(p, "n"), derive_seed(cfg.seed, "inputs"));
    const Dataset data = make_dataset(inputs, make_target(q, cfg.seed));
    const VectorXd x = inputs.col(0);
    GFConfig g = gf_config(p, 1);
    g.beta = 0.0;
    g.record_every = std::max(1L, std::lround(g.T / g.dt));

    const std::vector<std::string> cols{"m", "t", "std_h2"};
    CsvWriter csv(artifact(cfg, out, "degeneracy.csv", cols), cols);
    std::vector<double> final_std;
    const std::vector<int> widths = get_int_list(p, "widths");
    for (int m : widths) {
        double last = 0.0;
        integrate(init_network(init_spec(p, m, derive_seed(cfg.seed, "init", static_cast<std::uint64_t>(m)))), data,
                  Loss::squared, g, [&](int, double t, const NetworkState& st, double) {
                      last = population_std(forward(st, x).h[1]);
                      csv.row({static_cast<double>(m), t, last});
                  });
        final_std.push_back(last);
        out.results["std_h2_m" + std::to_string(m)] = last;
    }
    if (widths.size() >= 2 && final_std.back() > 0.0) out.results["ratio"] = final_std.front() / final_std.back();
    return out;
}

// ---- driver ------------------------------------------------------------

RunOutput run_experiment(const RunConfig& config) {
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    if (ec || !fs::is_directory(config.out_dir))
        fail("io_error", "cannot create output directory '" + config.out_dir.string() + "'");

    static const std::map<std::string, RunOutput (*)(const RunConfig&)> table{
        {"train", run_train},         {"linear-mf", run_linear_mf}, {"kernels", run_kernels},
        {"compress", run_compress},   {"rademacher", run_rademacher}, {"depth-sep", run_depth_sep},
        {"fig2", run_fig2},           {"fig3", run_fig3},           {"lln", run_lln},
        {"degeneracy", run_degeneracy}};
    const auto it = table.find(config.experiment);
    if (it == table.end()) fail("unknown_experiment", "unknown experiment '" + config.experiment + "'");

    RunOutput out;
    try {
        out = it->second(config);
    } catch (const Error& e) {
        throw Error(e.code(), config.experiment + ": " + e.what());
    }

    json artifacts = json::object();
    for (const auto& [name, cols] : out.artifacts) artifacts[name] = {{"columns", cols}, {"schema_version", kSchemaVersion}};
    const json manifest = {{"experiment", config.experiment},
                           {"seed", config.seed},
                           {"config", config.params},
                           {"schema_version", kSchemaVersion},
                           {"artifacts", artifacts},
                           {"seed_derivation", seed_derivation_note()},
                           {"results", out.results}};
    std::ofstream f(config.out_dir / "manifest.json");
    f << manifest.dump(2) << '\n';
    if (!f) fail("io_error", "cannot write manifest in '" + config.out_dir.string() + "'");
    return out;
}

}  // namespace nhl
