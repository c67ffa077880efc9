#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "fbmlt/errors.hpp"
#include "fbmlt/fbm_engine.hpp"
#include "fbmlt/path_io.hpp"

using namespace fbmlt;

TEST(Covariance, Examples) {
    EXPECT_DOUBLE_EQ(cov(1, 1, Hurst(0.3)), 1.0);
    EXPECT_DOUBLE_EQ(cov(1, 1, Hurst(0.8)), 1.0);
    EXPECT_NEAR(cov(1, 2, Hurst(0.5)), 1.0, 1e-15);
    EXPECT_NEAR(cov(1, 2, Hurst(0.3)), 0.75785828325519904, 1e-14);
    EXPECT_THROW(cov(-1, 1, Hurst(0.3)), DomainError);
}

TEST(Covariance, SymmetricAndBrownian) {
    for (double s : {0.1, 0.7, 2.3}) {
        for (double t : {0.05, 1.0, 3.1}) {
            EXPECT_EQ(cov(s, t, Hurst(0.37)), cov(t, s, Hurst(0.37)));
            EXPECT_NEAR(cov(s, t, Hurst(0.5)), std::min(s, t), 1e-14);
        }
    }
}

TEST(Hurst, RejectsOutOfRange) {
    EXPECT_THROW(Hurst(0.0), DomainError);
    EXPECT_THROW(Hurst(1.0), DomainError);
    EXPECT_THROW(Hurst(std::nan("")), DomainError);
}

TEST(IncrementInnerProduct, Examples) {
    EXPECT_NEAR(increment_inner_product(0, 1, 1, 1, Hurst(0.5)), 0.0, 1e-15);
    EXPECT_NEAR(increment_inner_product(0, 1, 0, 1, Hurst(0.3)), 1.0, 1e-15);
    EXPECT_NEAR(increment_inner_product(0, 1, 0, 1, Hurst(0.9)), 1.0, 1e-15);
    const double ip = increment_inner_product(0, 0.5, 2, 0.5, Hurst(0.7));
    EXPECT_NEAR(ip, 0.046418327731733607, 1e-14);
    const double bound = std::pow(2.0, 2 - 1.4) * 0.7 * 0.4 * 0.25 * std::pow(2.0, 1.4 - 2);
    EXPECT_LE(std::abs(ip), bound);
    EXPECT_THROW(increment_inner_product(0, 0, 1, 1, Hurst(0.5)), DomainError);
}

TEST(TimeGrid, IndexFloor) {
    TimeGrid g(8, 1.0);
    EXPECT_EQ(g.node_count(), 9u);
    EXPECT_EQ(g.index_floor(0.3 * 10 / 10), 2u);
    EXPECT_EQ(g.index_floor(0.375), 3u);
    TimeGrid g3(3, 1.0);
    EXPECT_EQ(g3.index_floor(1.0 / 3.0 * 3.0), 3u);
}

TEST(Simulate, Deterministic) {
    TimeGrid g(64, 1.0);
    for (Method m : {Method::cholesky, Method::circulant}) {
        auto a = simulate(g, Hurst(0.3), 42, m);
        auto b = simulate(g, Hurst(0.3), 42, m);
        EXPECT_EQ(a.values(), b.values());
        EXPECT_EQ(a.values().front(), 0.0);
        auto c = simulate(g, Hurst(0.3), 43, m);
        EXPECT_NE(a.values(), c.values());
    }
}

TEST(Simulate, BrownianIncrementVariance) {
    TimeGrid g(4, 1.0);
    const int m = 4000;
    double sum = 0.0;
    for (int r = 0; r < m; ++r) {
        auto p = simulate(g, Hurst(0.5), replication_seed(7, r), Method::circulant);
        for (std::size_t i = 1; i < p.values().size(); ++i) {
            const double d = p.values()[i] - p.values()[i - 1];
            sum += d * d;
        }
    }
    EXPECT_NEAR(sum / (4.0 * m), 0.25, 0.02);
}

TEST(Simulate, CovarianceAtTwoNodes) {
    TimeGrid g(256, 1.0);
    const int m = 2000;
    for (Method method : {Method::circulant, Method::cholesky}) {
        double sum = 0.0;
        for (int r = 0; r < m; ++r) {
            auto p = simulate(g, Hurst(0.3), replication_seed(11, r), method);
            sum += p.values()[128] * p.values()[256];
        }
        EXPECT_NEAR(sum / m, cov(0.5, 1.0, Hurst(0.3)), 4.0 / std::sqrt(m)) << to_string(method);
    }
}

TEST(Subsample, Examples) {
    auto p = simulate(TimeGrid(8, 1.0), Hurst(0.4), 3, Method::circulant);
    EXPECT_EQ(subsample(p, 1).values(), p.values());
    auto q = subsample(p, 2);
    ASSERT_EQ(q.values().size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_EQ(q.values()[i], p.values()[2 * i]);
    }
    EXPECT_EQ(q.grid().n(), 4);
    EXPECT_THROW(subsample(p, 3), DomainError);
}

TEST(ReplicationSeed, DistinctAndStable) {
    EXPECT_EQ(replication_seed(1, 5), replication_seed(1, 5));
    EXPECT_NE(replication_seed(1, 5), replication_seed(1, 6));
    EXPECT_NE(replication_seed(1, 5), replication_seed(2, 5));
}

TEST(ConditionalVariance, Examples) {
    EXPECT_NEAR(conditional_variance({2.0, {1.0}, Hurst(0.5)}), 1.0, 1e-12);
    EXPECT_NEAR(conditional_variance({1.7, {}, Hurst(0.3)}), std::pow(1.7, 0.6), 1e-14);
    EXPECT_NEAR(conditional_variance({1.5, {1.0, 2.0}, Hurst(0.3)}), 0.40438481017331017, 1e-10);
}

TEST(ConditionalVariance, DecreasesWithInformation) {
    const Hurst h(0.35);
    std::vector<double> cond;
    double prev = conditional_variance({0.77, cond, h});
    for (double s : {0.3, 1.2, 0.6, 0.9, 0.1}) {
        cond.push_back(s);
        const double v = conditional_variance({0.77, cond, h});
        EXPECT_LE(v, prev * (1 + 1e-12));
        prev = v;
    }
}

TEST(DetDecomposition, Examples) {
    std::vector<double> one{1.0};
    auto d1 = det_decomposition(one, Hurst(0.3));
    EXPECT_NEAR(d1.det, 1.0, 1e-15);
    EXPECT_NEAR(d1.product_of_conditional_variances, 1.0, 1e-15);
    std::vector<double> two{1.0, 2.0};
    auto d2 = det_decomposition(two, Hurst(0.5));
    EXPECT_NEAR(d2.det, 1.0, 1e-12);
    EXPECT_NEAR(d2.product_of_conditional_variances, 1.0, 1e-12);
    std::vector<double> three{0.5, 1.0, 1.7};
    auto d3 = det_decomposition(three, Hurst(0.25));
    EXPECT_NEAR(d3.det, 0.34172721198862215, 1e-12);
    EXPECT_NEAR(d3.product_of_conditional_variances / d3.det, 1.0, 1e-8);
    std::vector<double> dup{1.0, 1.0};
    EXPECT_THROW(det_decomposition(dup, Hurst(0.3)), DomainError);
}

TEST(PathIo, RoundTripBothFormats) {
    auto p = simulate(TimeGrid(32, 2.0), Hurst(0.23), 99, Method::cholesky);
    for (PathFormat f : {PathFormat::csv, PathFormat::binary}) {
        std::stringstream ss;
        write_path(ss, p, f);
        auto q = read_path(ss, f);
        EXPECT_EQ(q.values(), p.values());
        EXPECT_EQ(q.hurst().value(), p.hurst().value());
        EXPECT_EQ(q.grid(), p.grid());
        EXPECT_EQ(q.seed(), p.seed());
        EXPECT_EQ(q.method(), p.method());
        EXPECT_EQ(q.generator(), p.generator());
    }
}

TEST(PathIo, RejectsGarbage) {
    std::stringstream ss("not a path\n1,2,3\n");
    EXPECT_THROW(read_path(ss, PathFormat::csv), ConfigError);
}
