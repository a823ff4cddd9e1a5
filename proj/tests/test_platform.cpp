#include <gtest/gtest.h>

#include <sstream>

#include "edgefit/platform.hpp"

using namespace edgefit;

namespace {

void expect_rel(double got, double want, double tol = 0.01) {
    EXPECT_LE(std::abs(got - want) / std::abs(want), tol) << got << " vs " << want;
}

}  // namespace

TEST(DeriveMetrics, UnitCase) {
    const DerivedMetrics d = derive_metrics({"unit", 1e6, 1.0, 1000.0, 1'000'000});
    EXPECT_DOUBLE_EQ(d.throughput_mmacs, 1.0);
    EXPECT_DOUBLE_EQ(d.mac_per_cycle, 1.0);
    EXPECT_DOUBLE_EQ(d.energy_mj, 1.0);
    EXPECT_DOUBLE_EQ(d.efficiency_gmacspw, 1.0);
}

TEST(DeriveMetrics, Gap8AndCortexM7AtMaxClock) {
    const auto p = builtin_profiles();
    const DerivedMetrics gap8 = derive_metrics(p[1]);
    expect_rel(gap8.throughput_mmacs, 953.7);
    expect_rel(gap8.mac_per_cycle, 5.45);
    expect_rel(gap8.energy_mj, 0.41);
    expect_rel(gap8.efficiency_gmacspw, 7.37);
    const DerivedMetrics m7 = derive_metrics(p[5]);
    expect_rel(m7.throughput_mmacs, 145.57);
    expect_rel(m7.mac_per_cycle, 0.67);
    expect_rel(m7.energy_mj, 8.07);
    expect_rel(m7.efficiency_gmacspw, 0.376);
}

TEST(DeriveMetrics, ScaleConsistencyAndEnergyIdentity) {
    for (const auto& p : builtin_profiles()) {
        PlatformProfile faster = p;
        faster.clock_hz *= 2;
        faster.time_per_inference_ms /= 2;
        EXPECT_NEAR(derive_metrics(faster).mac_per_cycle, derive_metrics(p).mac_per_cycle, 1e-12);
        const DerivedMetrics d = derive_metrics(p);
        EXPECT_NEAR(d.energy_mj, static_cast<double>(p.mac_count) * 1e-6 / d.efficiency_gmacspw, 1e-9);
    }
}

TEST(DeriveMetrics, RejectsNonPositive) {
    EXPECT_THROW(derive_metrics({"bad", 0.0, 1.0, 1.0, 1}), Error);
}

TEST(Speedup, PublishedRatios) {
    const auto p = builtin_profiles();
    const SpeedupReport r = speedup_table({p[1], p[3], p[5]});
    EXPECT_DOUBLE_EQ(r.rows[0].speedup, 1.0);
    expect_rel(r.rows[1].speedup, 18.9);
    expect_rel(r.rows[2].speedup, 6.5);
    expect_rel(r.rows[1].mac_per_cycle_ratio, 13.0);
    expect_rel(r.rows[2].mac_per_cycle_ratio, 8.1);
    try {
        speedup_table({p[0]});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::FewerThanTwoProfiles);
    }
}

TEST(Realtime, Budget) {
    const RealtimeCheck fast = realtime_check(3.2, 20, 20.0);
    EXPECT_TRUE(fast.feasible);
    EXPECT_DOUBLE_EQ(fast.budget_ms, 1000.0);
    EXPECT_DOUBLE_EQ(fast.margin, 312.5);
    EXPECT_TRUE(realtime_check(60.36, 20, 20.0).feasible);
    EXPECT_FALSE(realtime_check(1200.0, 20, 20.0).feasible);
}

TEST(HostBench, PositiveAndValidated) {
    volatile double sink = 0;
    const BenchResult r = host_bench([&] {
        for (int i = 0; i < 1000; ++i) sink = sink + i;
    }, 1000, 11);
    EXPECT_GT(r.throughput_mmacs, 0.0);
    EXPECT_LE(r.min_ms, r.median_ms);
    EXPECT_LE(r.median_ms, r.max_ms);
    EXPECT_THROW(host_bench([] {}, 1, 9), Error);
}

TEST(Profiles, ParseDelimitedText) {
    std::istringstream in("name,clock_hz,power_mw,time_ms,mac_count\n# comment\nA,1e6,1,1000,1000000\nB,2e6,2,500,1000000\n");
    const auto p = parse_profiles(in);
    ASSERT_EQ(p.size(), 2u);
    EXPECT_EQ(p[1].name, "B");
    EXPECT_DOUBLE_EQ(p[1].clock_hz, 2e6);
    std::istringstream bad("A,1,1,1\n");
    EXPECT_THROW(parse_profiles(bad), MalformedRowError);
    std::istringstream neg("A,1,-1,1,1\n");
    EXPECT_THROW(parse_profiles(neg), MalformedRowError);
}

TEST(Profiles, TableMirrorsRowLabels) {
    std::ostringstream os;
    print_platform_table(os, builtin_profiles());
    for (const char* label : {"Throughput [MMAC/s]", "MAC/cycle", "Energy/inference [mJ]", "En. eff. [GMAC/s/W]"})
        EXPECT_NE(os.str().find(label), std::string::npos) << label;
    EXPECT_NE(os.str().find("953.69"), std::string::npos);
}
