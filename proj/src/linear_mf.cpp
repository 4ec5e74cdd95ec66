#include "nhl/linear_mf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nhl/csv.hpp"
#include "nhl/error.hpp"

namespace nhl {

void LinearMFConfig::validate() const {
    require(d >= 1, "linear mean-field needs d >= 1");
    require(L >= 3, "linear mean-field needs L >= 3");
    require(dt > 0.0 && T > 0.0, "dt and T must be positive");
    require(mem_stride >= 1, "mem_stride must be >= 1");
    require(dt * mem_stride <= T * (1.0 + 1e-12), "dt * mem_stride must not exceed T");
    require(sweeps >= 1, "at least one corrector sweep is required");
    require(Sigma.rows() == d && Sigma.cols() == d, "Sigma must be d x d");
    require(v_star.size() == d, "v_star must have length d");
    require(Sigma.allFinite() && v_star.allFinite(), "Sigma and v_star must be finite");
    require((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + Sigma.cwiseAbs().maxCoeff()),
            "Sigma must be symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Sigma, Eigen::EigenvaluesOnly);
    require(eig.eigenvalues().minCoeff() >= -1e-10 * (1.0 + std::abs(Sigma.trace())),
            "Sigma must be positive semi-definite");
}

namespace {

int node_count(const LinearMFConfig& cfg) {
    const double spacing = cfg.dt * cfg.mem_stride;
    return static_cast<int>(std::lround(cfg.T / spacing)) + 1;
}

}  // namespace

std::size_t linear_mf_memory_bytes(const LinearMFConfig& cfg) {
    const std::size_t N = static_cast<std::size_t>(node_count(cfg));
    const std::size_t d = static_cast<std::size_t>(cfg.d);
    const std::size_t levels = static_cast<std::size_t>(cfg.L - 1);
    // K table, c table, the two d x N x N quadrature caches and the
    // triangular w/u row caches, per level.
    const std::size_t per_level = (d * N) * (d * N) + N * N + 3 * d * N * N;
    return levels * per_level * sizeof(double);
}

int stride_for_budget(LinearMFConfig cfg, std::size_t budget_bytes) {
    const int max_stride = std::max(1, static_cast<int>(std::floor(cfg.T / cfg.dt + 1e-9)));
    for (cfg.mem_stride = 1; cfg.mem_stride < max_stride; ++cfg.mem_stride)
        if (linear_mf_memory_bytes(cfg) <= budget_bytes) return cfg.mem_stride;
    return max_stride;
}

MemoryGrid::MemoryGrid(int d, int L, int nodes, double spacing) : d_(d), L_(L), nodes_(nodes), spacing_(spacing) {
    for (int l = 1; l <= L - 1; ++l) {
        K_.push_back(MatrixXd::Zero(static_cast<Eigen::Index>(d) * nodes, static_cast<Eigen::Index>(d) * nodes));
        c_.push_back(MatrixXd::Zero(nodes, nodes));
    }
}

MatrixXd MemoryGrid::K(int level, int t, int s) const {
    require(level >= 0 && level <= L_ - 1, "K level outside [0, L-1]");
    if (level == 0) return MatrixXd::Identity(d_, d_);
    return K_[level - 1].block(static_cast<Eigen::Index>(d_) * t, static_cast<Eigen::Index>(d_) * s, d_, d_);
}

double MemoryGrid::c(int level, int t, int s) const {
    require(level >= 1 && level <= L_, "c level outside [1, L]");
    if (level == L_) return 1.0;
    return c_[level - 1](t, s);
}

VectorXd residual(const VectorXd& v, const MatrixXd& Sigma, const VectorXd& v_star) {
    require(v.size() == v_star.size() && Sigma.rows() == v.size() && Sigma.cols() == v.size(),
            "residual: dimension mismatch");
    return Sigma * (v - v_star);
}

namespace {

// Trapezoid weights on nodes 0..k of a uniform grid with spacing h.
VectorXd trapezoid_weights(int k, double h) {
    VectorXd w = VectorXd::Constant(k + 1, h);
    if (k == 0) return VectorXd::Zero(1);
    w(0) = w(k) = 0.5 * h;
    return w;
}

// Per-level quadrature caches. Column-major d x N blocks so that the first
// k+1 columns form a contiguous stacked vector.
struct LevelCache {
    std::vector<MatrixXd> w_rows;  // w_rows[t].col(r) = K^(l-1)_{t,r} zeta_r
    std::vector<MatrixXd> u_rows;  // u_rows[t].col(r) = c^(l+1)_{t,r} zeta_r
    std::vector<MatrixXd> y_cols;  // y_cols[s].col(r) = int_0^s c^(l)_{r,p} w_{s,p} dp
    std::vector<MatrixXd> z_cols;  // z_cols[s].col(r) = int_0^s K^(l)_{r,p} u_{s,p} dp
    std::vector<VectorXd> g;       // g_r = E[U_0 Q_r]
    std::vector<MatrixXd> X;       // X_t = -int_0^t w_{t,r} g_r^T dr
    std::vector<VectorXd> e;       // e_r = E[U_r Q_0]
    std::vector<double> x;         // x_t = -int_0^t u_{t,r} . e_r dr
    MatrixXd K0;                   // E[U_0 U_0^T]
    double c0 = 0.0;               // E[Q_0^2]
};

class Solver {
public:
    explicit Solver(const LinearMFConfig& cfg)
        : cfg_(cfg),
          d_(cfg.d),
          L_(cfg.L),
          N_(node_count(cfg)),
          h_(cfg.dt * cfg.mem_stride),
          grid_(cfg.d, cfg.L, N_, h_),
          cache_(cfg.L) {
        for (int l = 1; l <= L_ - 1; ++l) {
            LevelCache& lc = cache_[l];
            lc.w_rows.resize(N_);
            lc.u_rows.resize(N_);
            lc.y_cols.assign(N_, MatrixXd::Zero(d_, N_));
            lc.z_cols.assign(N_, MatrixXd::Zero(d_, N_));
            lc.g.assign(N_, VectorXd::Zero(d_));
            lc.X.assign(N_, MatrixXd::Zero(d_, d_));
            lc.e.assign(N_, VectorXd::Zero(d_));
            lc.x.assign(N_, 0.0);
            lc.K0 = l == 1 ? MatrixXd(MatrixXd::Identity(d_, d_)) : MatrixXd(MatrixXd::Zero(d_, d_));
            lc.c0 = l == L_ - 1 ? 1.0 : 0.0;
        }
    }

    LinearMFResult run() {
        LinearTrajectory traj;
        VectorXd v = VectorXd::Zero(d_);
        for (int k = 0; k < N_; ++k) {
            const VectorXd zeta = residual(v, cfg_.Sigma, cfg_.v_star);
            grid_.zeta_history.push_back(zeta);
            fill_row(k);
            check_row(k);
            record(k, v, traj);
            if (k + 1 < N_) v = advance(v, equal_time_operator(k));
            if (!v.allFinite()) fail("non_finite", "linear mean-field state became non-finite at node " + std::to_string(k));
        }
        return {std::move(traj), std::move(grid_)};
    }

private:
    // Accessors valid for indices already filled (or the row being filled).
    auto Kblk(int l, int t, int s) {
        return grid_.K_table(l).block(static_cast<Eigen::Index>(d_) * t, static_cast<Eigen::Index>(d_) * s, d_, d_);
    }
    double c_at(int l, int t, int s) const { return l == L_ ? 1.0 : grid_.c_table(l)(t, s); }
    const VectorXd& zeta(int r) const { return grid_.zeta_history[r]; }

    void fill_row(int k) {
        if (k > 0) {
            // Start the fixed-point iteration from the previous row.
            for (int l = 1; l <= L_ - 1; ++l) {
                MatrixXd& ct = grid_.c_table(l);
                for (int s = 0; s < k; ++s) {
                    Kblk(l, k, s) = Kblk(l, k - 1, s);
                    Kblk(l, s, k) = Kblk(l, k - 1, s).transpose();
                    ct(k, s) = ct(s, k) = ct(k - 1, s);
                }
                Kblk(l, k, k) = Kblk(l, k - 1, k - 1);
                ct(k, k) = ct(k - 1, k - 1);
            }
        }
        const int sweeps = k == 0 ? 1 : cfg_.sweeps;
        for (int sweep = 0; sweep < sweeps; ++sweep) {
            for (int l = 1; l <= L_ - 1; ++l) fill_K_row(l, k);
            for (int l = L_ - 1; l >= 1; --l) fill_c_row(l, k);
        }
    }

    void fill_K_row(int l, int k) {
        LevelCache& lc = cache_[l];
        const VectorXd wk = trapezoid_weights(k, h_);

        // w_{k,r} = K^(l-1)_{k,r} zeta_r
        MatrixXd& W = lc.w_rows[k];
        W.resize(d_, k + 1);
        for (int r = 0; r <= k; ++r) W.col(r) = l == 1 ? zeta(r) : MatrixXd(Kblk(l - 1, k, r)) * zeta(r);

        const MatrixXd& ct = grid_.c_table(l);
        // New column s = k: y_{r,k} = sum_p w_k(p) c_{r,p} w_{k,p}, all r <= k.
        lc.y_cols[k].leftCols(k + 1).noalias() = W * wk.asDiagonal() * ct.topLeftCorner(k + 1, k + 1);
        // New row r = k for older columns s < k.
        for (int s = 0; s < k; ++s) {
            const VectorXd ws = trapezoid_weights(s, h_);
            lc.y_cols[s].col(k).noalias() =
                lc.w_rows[s] * (ws.array() * ct.row(k).head(s + 1).transpose().array()).matrix();
        }

        if (lc.K0.squaredNorm() > 0.0) {
            // g_k = -int_0^k c^(l+1)_{k,p} K^(l)_{0,p} zeta_p dp
            VectorXd gk = VectorXd::Zero(d_);
            for (int p = 0; p <= k; ++p)
                gk.noalias() -= wk(p) * c_at(l + 1, k, p) * (MatrixXd(Kblk(l, p, 0)).transpose() * zeta(p));
            lc.g[k] = gk;
            MatrixXd G(d_, k + 1);
            for (int r = 0; r <= k; ++r) G.col(r) = lc.g[r];
            lc.X[k].noalias() = -(W * wk.asDiagonal() * G.transpose());
        }

        const MatrixXd Ww = W * wk.asDiagonal();
        for (int s = 0; s <= k; ++s) {
            MatrixXd Kks = lc.K0 + lc.X[k] + lc.X[s].transpose();
            Kks.noalias() += Ww * lc.y_cols[s].leftCols(k + 1).transpose();
            if (s == k) Kks = (0.5 * (Kks + Kks.transpose())).eval();
            Kblk(l, k, s) = Kks;
            if (s != k) Kblk(l, s, k) = Kks.transpose();
        }
    }

    void fill_c_row(int l, int k) {
        LevelCache& lc = cache_[l];
        const VectorXd wk = trapezoid_weights(k, h_);

        // u_{k,r} = c^(l+1)_{k,r} zeta_r
        MatrixXd& U = lc.u_rows[k];
        U.resize(d_, k + 1);
        for (int r = 0; r <= k; ++r) U.col(r) = c_at(l + 1, k, r) * zeta(r);

        const MatrixXd& Kt = grid_.K_table(l);
        const Eigen::Index dk = static_cast<Eigen::Index>(d_) * (k + 1);
        // New column s = k: z_{r,k} = sum_p w_k(p) K_{r,p} u_{k,p}, all r <= k.
        {
            MatrixXd Uw = U * wk.asDiagonal();
            Eigen::Map<const VectorXd> stacked(Uw.data(), dk);
            Eigen::Map<VectorXd> out(lc.z_cols[k].data(), dk);
            out.noalias() = Kt.topLeftCorner(dk, dk) * stacked;
        }
        // New row r = k for older columns s < k.
        for (int s = 0; s < k; ++s) {
            const VectorXd ws = trapezoid_weights(s, h_);
            MatrixXd Uw = lc.u_rows[s] * ws.asDiagonal();
            const Eigen::Index ds = static_cast<Eigen::Index>(d_) * (s + 1);
            Eigen::Map<const VectorXd> stacked(Uw.data(), ds);
            lc.z_cols[s].col(k).noalias() = Kt.block(static_cast<Eigen::Index>(d_) * k, 0, d_, ds) * stacked;
        }

        if (lc.c0 != 0.0) {
            // e_k = -int_0^k w_{k,p} c^(l)_{p,0} dp
            const MatrixXd& W = lc.w_rows[k];
            const VectorXd col0 = grid_.c_table(l).col(0).head(k + 1);
            lc.e[k].noalias() = -(W * (wk.array() * col0.array()).matrix());
            double xk = 0.0;
            for (int r = 0; r <= k; ++r) xk -= wk(r) * U.col(r).dot(lc.e[r]);
            lc.x[k] = xk;
        }

        MatrixXd& ct = grid_.c_table(l);
        const MatrixXd Uw = U * wk.asDiagonal();
        for (int s = 0; s <= k; ++s) {
            const double quad = Uw.cwiseProduct(lc.z_cols[s].leftCols(k + 1)).sum();
            const double val = lc.c0 + lc.x[k] + lc.x[s] + quad;
            ct(k, s) = ct(s, k) = val;
        }
    }

    void check_row(int k) {
        for (int l = 1; l <= L_ - 1; ++l) {
            const Eigen::Index dd = d_;
            if (!grid_.K_table(l).block(dd * k, 0, dd, dd * (k + 1)).allFinite() ||
                !grid_.c_table(l).row(k).head(k + 1).allFinite())
                fail("non_finite", "memory grid became non-finite at node " + std::to_string(k) + " (level " +
                                       std::to_string(l) + ")");
        }
    }

    // sum_{l=1}^{L} c^(l)_{k,k} K^(l-1)_{k,k}
    MatrixXd equal_time_operator(int k) {
        MatrixXd G = c_at(1, k, k) * MatrixXd::Identity(d_, d_);
        for (int l = 2; l <= L_; ++l) G += c_at(l, k, k) * MatrixXd(Kblk(l - 1, k, k));
        return G;
    }

    VectorXd advance(VectorXd v, const MatrixXd& G) const {
        const MatrixXd A = G * cfg_.Sigma;
        const double dt = cfg_.dt;
        auto rhs = [&](const VectorXd& u) -> VectorXd { return -(A * (u - cfg_.v_star)); };
        for (int i = 0; i < cfg_.mem_stride; ++i) {
            const VectorXd k1 = rhs(v);
            const VectorXd k2 = rhs(v + 0.5 * dt * k1);
            const VectorXd k3 = rhs(v + 0.5 * dt * k2);
            const VectorXd k4 = rhs(v + dt * k3);
            v += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        return v;
    }

    void record(int k, const VectorXd& v, LinearTrajectory& traj) {
        traj.times.push_back(k * h_);
        traj.v.push_back(v);
        std::vector<double> cd, kt;
        for (int l = 1; l <= L_ - 1; ++l) {
            cd.push_back(c_at(l, k, k));
            kt.push_back(MatrixXd(Kblk(l, k, k)).trace() / d_);
        }
        traj.c_diag.push_back(std::move(cd));
        traj.K_trace.push_back(std::move(kt));
        const VectorXd diff = v - cfg_.v_star;
        traj.risk.push_back(0.5 * diff.dot(cfg_.Sigma * diff));
    }

    const LinearMFConfig& cfg_;
    int d_;
    int L_;
    int N_;
    double h_;
    MemoryGrid grid_;
    std::vector<LevelCache> cache_;  // indexed by level, entry 0 unused
};

}  // namespace

LinearMFResult integrate_linear_mf(const LinearMFConfig& cfg) {
    cfg.validate();
    Solver solver(cfg);
    return solver.run();
}

void write_linear_trajectory_csv(const LinearTrajectory& traj, int L, const std::filesystem::path& path) {
    std::vector<std::string> header{"t"};
    const int d = traj.v.empty() ? 0 : static_cast<int>(traj.v.front().size());
    for (int j = 1; j <= d; ++j) header.push_back("v_" + std::to_string(j));
    for (int l = 1; l <= L - 1; ++l) header.push_back("c_" + std::to_string(l));
    header.push_back("risk");
    CsvWriter out(path, header);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        std::vector<double> row{traj.times[k]};
        for (int j = 0; j < d; ++j) row.push_back(traj.v[k](j));
        for (double c : traj.c_diag[k]) row.push_back(c);
        row.push_back(traj.risk[k]);
        out.row(row);
    }
}

}  // namespace nhl
