#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "nhl/error.hpp"
#include "nhl/sampler.hpp"
#include "nhl/seed.hpp"
#include "support.hpp"

using namespace nhl;
using testing::ball_points;
using testing::gaussian_matrix;
using testing::random_net;

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

// Zero-mean middle weights make h^(2) vanish like m^(-1/2); shifting them
// gives a teacher whose subsampled output fluctuates at the 1/m rate.
NetworkState offset_relu_teacher(int m, int d, std::uint64_t seed) {
    NetworkState t = random_net(3, m, d, Activation::relu, false, seed);
    t.params.W[0].array() += 1.0;
    return t;
}

Moments output_moments(const NetworkState& teacher, int m_out, const VectorXd& x, int seeds, std::uint64_t base) {
    std::vector<double> f(seeds);
    for (int s = 0; s < seeds; ++s) f[s] = forward(subsample_network(teacher, m_out, derive_seed(base, "t", s)), x).f;
    Moments mo;
    mo.mean = std::accumulate(f.begin(), f.end(), 0.0) / seeds;
    for (double v : f) mo.var += (v - mo.mean) * (v - mo.mean);
    mo.var /= seeds - 1;
    return mo;
}

}  // namespace

TEST_SUITE("sampler") {

TEST_CASE("index sets: shape, range, determinism") {
    const LayerIndices a = draw_layer_indices(4, 10, 25, 7);
    REQUIRE(a.size() == 3);
    for (const auto& layer : a) {
        CHECK(layer.size() == 25);
        for (int i : layer) CHECK((i >= 0 && i < 10));
    }
    CHECK(a == draw_layer_indices(4, 10, 25, 7));
    CHECK(a != draw_layer_indices(4, 10, 25, 8));
    CHECK(a[0] != a[1]);  // layers are drawn independently
    CHECK_THROWS_AS(draw_layer_indices(3, 10, 0, 1), Error);
}

TEST_CASE("identity index map at full width reproduces the teacher") {
    for (bool bias : {false, true}) {
        const NetworkState teacher = random_net(4, 9, 3, Activation::relu, bias, 11);
        std::vector<int> id(9);
        std::iota(id.begin(), id.end(), 0);
        const NetworkState copy = subsample_with_indices(teacher, LayerIndices(3, id));
        const MatrixXd x = gaussian_matrix(3, 20, 2);
        CHECK(predict(copy, x) == predict(teacher, x));
        CHECK(copy.params.W[1] == teacher.params.W[1]);
    }
}

TEST_CASE("subsampled weights are the indexed teacher entries") {
    const NetworkState teacher = random_net(3, 6, 2, Activation::tanh, true, 3);
    const LayerIndices idx{{5, 0, 5}, {2, 2, 1}};
    const NetworkState s = subsample_with_indices(teacher, idx);
    CHECK(s.m == 3);
    CHECK(s.params.z.row(0) == teacher.params.z.row(5));
    CHECK(s.params.W[0](1, 2) == teacher.params.W[0](2, 5));
    CHECK(s.params.W[0](2, 1) == teacher.params.W[0](1, 0));
    CHECK(s.params.a(2) == teacher.params.a(1));
    CHECK(s.params.b[0](1) == teacher.params.b[0](0));
    CHECK(s.params.b[1](0) == teacher.params.b[1](2));
    CHECK_THROWS_AS(subsample_with_indices(teacher, LayerIndices{{6}, {0}}), Error);
    CHECK_THROWS_AS(subsample_with_indices(teacher, LayerIndices{{0}}), Error);
}

TEST_CASE("subsampling is unbiased where the output is linear in each layer's measure") {
    const VectorXd x = ball_points(3, 1, 4).col(0);
    SUBCASE("L = 2 relu") {
        const NetworkState teacher = random_net(2, 64, 3, Activation::relu, false, 21);
        const Moments mo = output_moments(teacher, 8, x, 2000, 1);
        CHECK(std::abs(mo.mean - forward(teacher, x).f) < 3.0 * std::sqrt(mo.var / 2000));
    }
    SUBCASE("L = 3 identity") {
        const NetworkState teacher = random_net(3, 64, 3, Activation::identity, false, 22);
        const Moments mo = output_moments(teacher, 8, x, 2000, 2);
        CHECK(std::abs(mo.mean - forward(teacher, x).f) < 3.0 * std::sqrt(mo.var / 2000));
    }
}

TEST_CASE("variance over seeds shrinks like 1/m") {
    const NetworkState teacher = offset_relu_teacher(512, 3, 31);
    const VectorXd x = ball_points(3, 1, 5).col(0);
    const double v16 = output_moments(teacher, 16, x, 600, 3).var;
    const double v64 = output_moments(teacher, 64, x, 600, 4).var;
    CHECK(v64 / v16 >= 0.15);
    CHECK(v64 / v16 <= 0.4);
}

TEST_CASE("zero output weights give zero MSE and no slope") {
    NetworkState teacher = random_net(3, 32, 2, Activation::relu, false, 1);
    teacher.params.a.setZero();
    const DecayTable t = mse_decay(teacher, {2, 4, 8}, 3, gaussian_matrix(2, 10, 1), 5);
    for (const DecayRow& r : t.rows) CHECK(r.mean_mse == 0.0);
    CHECK_FALSE(t.slope.has_value());
}

TEST_CASE("decay table properties") {
    const NetworkState teacher = offset_relu_teacher(512, 3, 41);
    const MatrixXd x = ball_points(3, 50, 42);
    const std::vector<int> widths{8, 16, 32, 64, 128};
    const DecayTable t = mse_decay(teacher, widths, 20, x, 43);
    REQUIRE(t.rows.size() == widths.size());
    REQUIRE(t.slope.has_value());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        CHECK(t.rows[i].m_out == widths[i]);
        CHECK(t.rows[i].trials == 20);
        CHECK(t.rows[i].mean_mse >= 0.0);
        CHECK(t.rows[i].std_mse >= 0.0);
        if (i > 0) {
            const double se = (t.rows[i].std_mse + t.rows[i - 1].std_mse) / std::sqrt(20.0);
            CHECK(t.rows[i].mean_mse <= t.rows[i - 1].mean_mse + 2.0 * se);
        }
        CHECK(t.rows[i].mean_mse <= sampling_error_bound(teacher, mean_squared_norm(x), widths[i]));
    }
    CHECK(*t.slope > -1.4);
    CHECK(*t.slope < -0.6);

    // doubling the trials stays within 3 combined standard errors
    const DecayTable t2 = mse_decay(teacher, {16}, 40, x, 44);
    const double se = std::sqrt(t.rows[1].std_mse * t.rows[1].std_mse / 20 + t2.rows[0].std_mse * t2.rows[0].std_mse / 40);
    CHECK(std::abs(t2.rows[0].mean_mse - t.rows[1].mean_mse) < 3.0 * se);
}

TEST_CASE("log-log fit agrees with the closed-form least-squares line") {
    const NetworkState teacher = random_net(2, 256, 2, Activation::relu, false, 51);
    const DecayTable t = mse_decay(teacher, {4, 16, 64}, 10, gaussian_matrix(2, 20, 3), 52);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const DecayRow& r : t.rows) {
        const double lx = std::log(r.m_out), ly = std::log(r.mean_mse);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double slope = (3 * sxy - sx * sy) / (3 * sxx - sx * sx);
    CHECK(*t.slope == doctest::Approx(slope).epsilon(1e-10));
    CHECK(*t.intercept == doctest::Approx((sy - slope * sx) / 3).epsilon(1e-10));
}

TEST_CASE("mse_decay rejects bad arguments") {
    const NetworkState teacher = random_net(3, 16, 2, Activation::relu, false, 1);
    const MatrixXd x = gaussian_matrix(2, 5, 1);
    CHECK_THROWS_AS(mse_decay(teacher, {}, 3, x, 1), Error);
    CHECK_THROWS_AS(mse_decay(teacher, {4}, 1, x, 1), Error);
    CHECK_THROWS_AS(mse_decay(teacher, {8, 4}, 3, x, 1), Error);
    CHECK_THROWS_AS(mse_decay(teacher, {4}, 3, MatrixXd(2, 0), 1), Error);
    CHECK_THROWS_AS(subsample_network(teacher, 0, 1), Error);
}

TEST_CASE("sampling bound formula") {
    NetworkState t = make_network(3, 2, 1, Activation::relu);
    t.params.z << 1.0, 2.0;                  // group norm inf: 2
    t.params.W[0] << 3.0, 4.0, 0.0, 0.0;     // row rms 5/sqrt(2)
    t.params.a << 1.0, 1.0;                  // 1
    const double C = 2.0 * 5.0 / std::sqrt(2.0);
    CHECK(sampling_error_bound(t, 0.5, 10) == doctest::Approx(4.0 * 0.5 * C * C / 10));
    CHECK(mean_squared_norm((MatrixXd(1, 2) << 1.0, 3.0).finished()) == doctest::Approx(5.0));
}

TEST_CASE("decay CSV") {
    const NetworkState teacher = random_net(2, 64, 2, Activation::relu, false, 1);
    const MatrixXd x = gaussian_matrix(2, 5, 1);
    const DecayTable t = mse_decay(teacher, {4, 8}, 3, x, 2);
    const auto path = std::filesystem::temp_directory_path() / "nhl_decay_test.csv";
    write_decay_csv(t, teacher, mean_squared_norm(x), path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "m_out,trials,mean_mse,std_mse,bound");
    std::filesystem::remove(path);
}

}
