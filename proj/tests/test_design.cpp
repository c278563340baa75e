#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "mfnn/design.hpp"
#include "mfnn/errors.hpp"
#include "mfnn/rng.hpp"

using namespace mfnn;
using namespace mfnn::design;

namespace {

const Box kOde{{-1.0}, {1.0}};
const Box kWave{{10.0, 4.0}, {11.0, 6.0}};

std::set<std::vector<double>> as_set(const PointSet& p) {
    std::set<std::vector<double>> s;
    for (std::size_t i = 0; i < p.size(); ++i) s.insert({p.point(i).begin(), p.point(i).end()});
    return s;
}

void expect_partition(const SampleDesign& d, std::size_t m) {
    EXPECT_EQ(d.m(), m);
    auto a = as_set(d.y_I), b = as_set(d.y_II);
    EXPECT_EQ(a.size(), d.m1());
    EXPECT_EQ(b.size(), d.m2());
    for (const auto& p : a) {
        EXPECT_FALSE(b.count(p));
        EXPECT_TRUE(d.domain.contains(p));
    }
    for (const auto& p : b) EXPECT_TRUE(d.domain.contains(p));
    std::vector<std::size_t> idx = d.grid_index_I;
    idx.insert(idx.end(), d.grid_index_II.begin(), d.grid_index_II.end());
    std::sort(idx.begin(), idx.end());
    for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_EQ(idx[i], i);
}

// Kolmogorov-Smirnov statistic against U[lo, hi]
double ks_uniform(std::vector<double> x, double lo, double hi) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = (x[i] - lo) / (hi - lo);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

}  // namespace

TEST(Design1d, PaperCounts) {
    const auto d = build_design_1d(241, kOde);
    EXPECT_EQ(d.m1(), 61u);
    EXPECT_EQ(d.m2(), 180u);
    expect_partition(d, 241);
    const auto d2 = build_design_1d(3201, kOde);
    EXPECT_EQ(d2.m1(), 801u);
    EXPECT_EQ(d2.m2(), 2400u);
}

TEST(Design1d, FivePointEnumeration) {
    const auto d = build_design_1d(5, Box{{0.0}, {1.0}});
    EXPECT_EQ(d.y_I.values, (std::vector<double>{0.0, 1.0}));
    EXPECT_EQ(d.y_II.values, (std::vector<double>{0.25, 0.5, 0.75}));
    EXPECT_EQ(d.grid_index_I, (std::vector<std::size_t>{0, 4}));
}

TEST(Design1d, EndpointsExactAndErrors) {
    const auto d = build_design_1d(241, kOde);
    EXPECT_EQ(d.y_I.values.front(), -1.0);
    EXPECT_EQ(d.y_I.values.back(), 1.0);
    EXPECT_THROW(build_design_1d(4, kOde), ConfigError);
    EXPECT_THROW(build_design_1d(10, kOde, 0), ConfigError);
}

TEST(Design2d, FourByFour) {
    const auto d = build_design_2d(4, 4, Box{{0.0, 0.0}, {1.0, 1.0}});
    EXPECT_EQ(d.m(), 16u);
    EXPECT_EQ(d.m1(), 4u);
    EXPECT_EQ(d.m2(), 12u);
    // grid index i * n2 + j for (0,0), (0,2), (2,0), (2,2)
    EXPECT_EQ(d.grid_index_I, (std::vector<std::size_t>{0, 2, 8, 10}));
    expect_partition(d, 16);
}

TEST(Design2d, SquareGridCount) {
    const auto d = build_design_2d(57, 57, kWave);
    EXPECT_EQ(d.m(), 3249u);
    EXPECT_EQ(d.m1(), 841u);
    EXPECT_NEAR(d.ratio(), 0.2588, 1e-4);
}

TEST(Design2d, TableFourGridsReproduceCountsExactly) {
    const std::vector<std::array<std::size_t, 4>> rows{{105, 31, 848, 2407}, {121, 41, 1281, 3680}, {151, 51, 1976, 5725}};
    for (const auto& r : rows) {
        const auto d = build_design_2d(r[0], r[1], kWave);
        EXPECT_EQ(d.m1(), r[2]);
        EXPECT_EQ(d.m2(), r[3]);
    }
}

TEST(Design2d, Errors) {
    EXPECT_THROW(build_design_2d(2, 5, kWave), ConfigError);
    EXPECT_THROW(build_design_2d(5, 5, kOde), ConfigError);
}

TEST(DesignProperties, PartitionAndRatioOverSizes) {
    for (std::size_t m = 5; m < 400; m += 7) {
        const auto d = build_design_1d(m, kOde);
        expect_partition(d, m);
        if (m >= 9) {
            EXPECT_GE(d.ratio(), 0.2) << m;
            EXPECT_LE(d.ratio(), 0.3) << m;
        }
    }
    for (std::size_t n1 = 11; n1 < 60; n1 += 6)
        for (std::size_t n2 = 11; n2 < 40; n2 += 5) {
            const auto d = build_design_2d(n1, n2, kWave);
            expect_partition(d, n1 * n2);
            EXPECT_EQ(d.m1(), ((n1 + 1) / 2) * ((n2 + 1) / 2));
            EXPECT_GE(d.ratio(), 0.2);
            EXPECT_LE(d.ratio(), 0.3);
        }
}

TEST(McDraws, MeanWithinClt) {
    const auto s = draw_mc_samples(1000000, kOde, 2024);
    double mean = 0;
    for (double v : s.values) mean += v;
    mean /= 1e6;
    EXPECT_LE(std::abs(mean), 0.004);
}

TEST(McDraws, DeterministicAndRangeConsistent) {
    const auto a = draw_mc_samples(1000, kWave, 5);
    EXPECT_TRUE(a == draw_mc_samples(1000, kWave, 5));
    EXPECT_FALSE(a == draw_mc_samples(1000, kWave, 6));
    const auto mid = draw_mc_range(300, 200, kWave, 5);
    for (std::size_t i = 0; i < 200; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(mid.point(i)[j], a.point(300 + i)[j]);
    EXPECT_THROW(draw_mc_samples(0, kWave, 5), InputError);
}

TEST(McDraws, KolmogorovSmirnovPerDimension) {
    const std::size_t n = 100000;
    const auto s = draw_mc_samples(n, kWave, 99);
    const double crit = 1.628 / std::sqrt(static_cast<double>(n));  // 1% level
    for (std::size_t j = 0; j < 2; ++j) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = s.point(i)[j];
        EXPECT_LT(ks_uniform(col, kWave.lower[j], kWave.upper[j]), crit) << "dim " << j;
    }
}

TEST(McDraws, PaperPdeSampleCount) {
    EXPECT_EQ(draw_mc_samples(150, kWave, 1).size(), 150u);
}

TEST(Scaling, CornersMidpointRoundTrip) {
    const auto t = ScalingTransform::unit(kWave);
    EXPECT_EQ(apply_scaling(t, std::vector<double>{10.0, 4.0}), (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(apply_scaling(t, std::vector<double>{11.0, 6.0}), (std::vector<double>{1.0, 1.0}));
    EXPECT_EQ(apply_scaling(t, std::vector<double>{10.5, 5.0}), (std::vector<double>{0.5, 0.5}));
    SplitMix64 rng(1);
    for (int k = 0; k < 100; ++k) {
        const std::vector<double> p{rng.uniform(10, 11), rng.uniform(4, 6)};
        const auto back = t.inverse(t.apply(p));
        // one ulp of numbers near 10 is 1.8e-15
        for (std::size_t j = 0; j < 2; ++j) EXPECT_LE(std::abs(back[j] - p[j]), 1e-15 * std::abs(p[j]));
    }
}

TEST(Scaling, SymmetricTargetAndValidation) {
    const ScalingTransform t{kOde, -1.0, 1.0};
    EXPECT_EQ(t.apply(std::vector<double>{0.25})[0], 0.25);
    ScalingTransform bad{kOde, 1.0, 1.0};
    EXPECT_THROW(bad.validate(), InputError);
    EXPECT_THROW(t.apply(std::vector<double>{0.1, 0.2}), InputError);
}

TEST(Scaling, MinMax) {
    const std::vector<double> v{3.0, -1.0, 7.0};
    const auto s = MinMaxScaler::fit(v);
    EXPECT_EQ(s.apply(-1.0), 0.0);
    EXPECT_EQ(s.apply(7.0), 1.0);
    EXPECT_EQ(s.inverse(0.5), 3.0);
    const std::vector<double> c{2.0, 2.0};
    EXPECT_EQ(MinMaxScaler::fit(c).apply(2.0), 0.0);
}

TEST(DesignCsv, ColumnsAndOrder) {
    const auto d = build_design_1d(5, Box{{0.0}, {1.0}});
    std::istringstream in(design_csv(d));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "index,y0,set");
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows[0], "0,0,I");
    EXPECT_EQ(rows[1], "1,0.25,II");
    EXPECT_EQ(rows[4], "4,1,I");
    const auto d2 = build_design_2d(3, 3, kWave);
    EXPECT_EQ(design_csv(d2).substr(0, 14), "index,y0,y1,se");
}
