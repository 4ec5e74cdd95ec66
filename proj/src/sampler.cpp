#include "nhl/sampler.hpp"

#include <cmath>
#include <random>
#include <string>

#include "nhl/csv.hpp"
#include "nhl/error.hpp"
#include "nhl/seed.hpp"

namespace nhl {

LayerIndices draw_layer_indices(int L, int m_teacher, int m_out, std::uint64_t seed) {
    require(m_out >= 1, "m_out must be >= 1");
    require(m_teacher >= 1 && L >= 2, "invalid teacher shape");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, m_teacher - 1);
    LayerIndices idx(L - 1, std::vector<int>(m_out));
    for (auto& layer : idx)
        for (int& i : layer) i = pick(rng);
    return idx;
}

NetworkState subsample_with_indices(const NetworkState& teacher, const LayerIndices& indices) {
    teacher.validate();
    require(static_cast<int>(indices.size()) == teacher.L - 1, "need one index set per hidden layer");
    const int m_out = static_cast<int>(indices.front().size());
    require(m_out >= 1, "m_out must be >= 1");
    for (const auto& layer : indices) {
        require(static_cast<int>(layer.size()) == m_out, "index sets must share one size");
        for (int i : layer) require(i >= 0 && i < teacher.m, "index outside the teacher width");
    }

    NetworkState out = make_network(teacher.L, m_out, teacher.d, teacher.activation, teacher.has_bias());
    const Params& p = teacher.params;
    const auto& first = indices.front();
    const auto& last = indices.back();
    for (int i = 0; i < m_out; ++i) {
        out.params.z.row(i) = p.z.row(first[i]);
        out.params.a(i) = p.a(last[i]);
    }
    for (int l = 1; l <= teacher.L - 2; ++l) {
        const auto& rows = indices[l];
        const auto& cols = indices[l - 1];
        MatrixXd& W = out.params.W[l - 1];
        for (int i = 0; i < m_out; ++i)
            for (int j = 0; j < m_out; ++j) W(i, j) = p.W[l - 1](rows[i], cols[j]);
    }
    if (teacher.has_bias())
        for (int l = 0; l < teacher.L - 1; ++l)
            for (int i = 0; i < m_out; ++i) out.params.b[l](i) = p.b[l](indices[l][i]);
    return out;
}

NetworkState subsample_network(const NetworkState& teacher, int m_out, std::uint64_t seed) {
    require(m_out >= 1, "m_out must be >= 1");
    return subsample_with_indices(teacher, draw_layer_indices(teacher.L, teacher.m, m_out, seed));
}

DecayTable mse_decay(const NetworkState& teacher, const std::vector<int>& m_list, int trials,
                     const MatrixXd& eval_inputs, std::uint64_t seed) {
    require(!m_list.empty(), "m_list is empty");
    require(eval_inputs.cols() >= 1, "eval_inputs is empty");
    require(eval_inputs.rows() == teacher.d, "eval_inputs dimension mismatch");
    require(trials >= 2, "trials must be >= 2");
    for (std::size_t i = 0; i < m_list.size(); ++i) {
        require(m_list[i] >= 1, "widths must be >= 1");
        require(i == 0 || m_list[i] > m_list[i - 1], "m_list must be strictly increasing");
    }

    const VectorXd reference = predict(teacher, eval_inputs);
    DecayTable table;
    for (int m : m_list) {
        const std::string tag = "sampler.m" + std::to_string(m);
        std::vector<double> mse(trials);
        for (int t = 0; t < trials; ++t) {
            const NetworkState sub = subsample_network(teacher, m, derive_seed(seed, tag, t));
            mse[t] = (predict(sub, eval_inputs) - reference).squaredNorm() / static_cast<double>(eval_inputs.cols());
        }
        double mean = 0.0;
        for (double v : mse) mean += v;
        mean /= trials;
        double var = 0.0;
        for (double v : mse) var += (v - mean) * (v - mean);
        var /= trials - 1;
        table.rows.push_back({m, trials, mean, std::sqrt(var)});
    }

    if (table.rows.size() >= 2) {
        bool positive = true;
        for (const auto& r : table.rows) positive = positive && r.mean_mse > 0.0;
        if (positive) {
            const auto k = static_cast<Eigen::Index>(table.rows.size());
            MatrixXd A(k, 2);
            VectorXd y(k);
            for (Eigen::Index i = 0; i < k; ++i) {
                A(i, 0) = std::log(static_cast<double>(table.rows[i].m_out));
                A(i, 1) = 1.0;
                y(i) = std::log(table.rows[i].mean_mse);
            }
            const VectorXd fit = A.colPivHouseholderQr().solve(y);
            table.slope = fit(0);
            table.intercept = fit(1);
        }
    }
    return table;
}

double mean_squared_norm(const MatrixXd& inputs) {
    require(inputs.cols() >= 1, "empty input sample");
    return inputs.colwise().squaredNorm().mean();
}

double sampling_error_bound(const NetworkState& teacher, double M_nu, int m_out) {
    require(m_out >= 1, "m_out must be >= 1");
    require(M_nu >= 0.0, "M_nu must be >= 0");
    const double c = complexity_upper_bound(teacher, kInfNorm);
    const double depth = teacher.L - 1;
    return depth * depth * M_nu * c * c / m_out;
}

void write_decay_csv(const DecayTable& table, const NetworkState& teacher, double M_nu,
                     const std::filesystem::path& path) {
    CsvWriter out(path, {"m_out", "trials", "mean_mse", "std_mse", "bound"});
    for (const auto& r : table.rows)
        out.row({static_cast<double>(r.m_out), static_cast<double>(r.trials), r.mean_mse, r.std_mse,
                 sampling_error_bound(teacher, M_nu, r.m_out)});
}

}  // namespace nhl
