#include <gtest/gtest.h>

#include <cmath>

#include "gprice/cps.hpp"
#include "gprice/errors.hpp"
#include "gprice/fgbm.hpp"
#include "gprice/scenario.hpp"

using namespace gprice;

namespace {

SampledPath manual_path() {
    // eps = 0.1: up-crossing at index 2, down-crossing at index 4.
    return SampledPath({0, 1, 2, 3, 4, 5}, {100.0, 105.0, 111.0, 108.0, 99.0, 100.0}, true);
}

}  // namespace

TEST(StoppingTimes, HandBuiltPath) {
    const auto st = extract_stopping_times(manual_path(), 0.1);
    ASSERT_EQ(st.tau_indices, (std::vector<std::size_t>{2, 4, 5}));
    EXPECT_EQ(st.signs, (std::vector<int>{1, -1, 0}));
    EXPECT_NEAR(st.overshoot[0], std::log(1.11) - std::log(1.1), 1e-15);
    EXPECT_NEAR(st.overshoot[1], std::log(111.0 / 99.0) - std::log(1.1), 1e-15);
    EXPECT_EQ(st.overshoot[2], 0.0);
}

TEST(StoppingTimes, ThresholdHitExactly) {
    const SampledPath p({0, 1, 2}, {100.0, 110.0, 110.0}, true);
    const auto st = extract_stopping_times(p, 0.1);
    EXPECT_EQ(st.tau_indices, (std::vector<std::size_t>{1, 2}));
    EXPECT_THROW(extract_stopping_times(p, 0.0), InvalidArgument);
    EXPECT_THROW(extract_stopping_times(SampledPath({0, 1}, {1.0, -1.0}), 0.1), InvalidArgument);
}

TEST(RetirementWalk, ExactLevels) {
    const std::vector<int> signs{1, 1, -1, 1, 0, 0};
    const auto x = retirement_walk(signs, 100.0, 0.05);
    ASSERT_EQ(x.size(), signs.size());
    EXPECT_NEAR(x[0], 105.0, 1e-12);
    EXPECT_NEAR(x[1], 110.25, 1e-12);
    EXPECT_NEAR(x[2], 105.0, 1e-12);
    EXPECT_EQ(x[4], x[3]);
    EXPECT_EQ(x[5], x[3]);
    const std::vector<int> back{1, -1};
    EXPECT_EQ(retirement_walk(back, 100.0, 0.05)[1], 100.0);
    const std::vector<int> bad{1, 0, 1};
    EXPECT_THROW(retirement_walk(bad, 100.0, 0.05), InvalidArgument);
    const std::vector<int> two{2};
    EXPECT_THROW(retirement_walk(two, 100.0, 0.05), InvalidArgument);
}

TEST(ShadowPath, AnchorsAtLevels) {
    const auto cps = build_shadow_path(manual_path(), 0.1);
    const auto sh = cps.shadow().values();
    EXPECT_EQ(sh[0], 100.0);
    EXPECT_NEAR(sh[2], 110.0, 1e-12);
    EXPECT_NEAR(sh[4], 100.0, 1e-12);
    EXPECT_NEAR(sh[5], 100.0, 1e-12);
    EXPECT_TRUE(cps.sandwich_ok());
    const auto xs = cps.crossings();
    ASSERT_EQ(xs.size(), 3u);
    EXPECT_EQ(xs[1].sign, -1);
    EXPECT_EQ(xs[2].sign, 0);
}

TEST(ShadowPath, FrozenAfterHorizon) {
    // The crossing at the horizon index itself is a retirement, not a step.
    const auto cps = build_shadow_path(manual_path(), 0.1, 4.0);
    const auto sh = cps.shadow().values();
    EXPECT_NEAR(sh[4], 110.0, 1e-12);
    EXPECT_EQ(sh[5], sh[4]);
    const auto xs = cps.crossings();
    ASSERT_EQ(xs.size(), 2u);
    EXPECT_EQ(xs[1].index, 4u);
    EXPECT_EQ(xs[1].sign, 0);
}

TEST(ShadowPath, SandwichHoldsOnRandomPaths) {
    // Sampling must be fine relative to eps or overshoot accumulates across crossings.
    const UncertaintyBand band(0.0, 0.1, 0.1, 0.5);
    const auto grid = uniform_times(1.0, 4000);
    for (double eps : {0.05, 0.1, 0.2}) {
        const auto paths = simulate_asset_paths(ControlProcess::constant(0.3, 0.1), band, 10.0,
                                                grid, 31, 25);
        for (const auto& p : paths) {
            const auto cps = build_shadow_path(p, eps);
            ASSERT_TRUE(cps.sandwich_ok());
            const double k = std::log1p(eps);
            for (std::size_t n = 0; n < cps.levels().size(); ++n) {
                const double ratio = std::log(cps.levels()[n] / 10.0) / k;
                ASSERT_NEAR(ratio, std::round(ratio), 1e-9);
            }
        }
    }
}

TEST(Deltas, DefinitionsAndFlags) {
    const auto cps = build_shadow_path(manual_path(), 0.1, 4.0);
    const auto d = delta_processes(cps);
    EXPECT_NEAR(d.delta1.value(2), 111.0 / 110.0 - 1.0, 1e-12);
    EXPECT_EQ(d.flagged_steps, 1u);
    EXPECT_TRUE(std::isnan(d.delta2.back()));
    EXPECT_EQ(d.step_times.size(), 5u);
    EXPECT_GE(d.delta1_within, 5.0 / 6.0);
}

TEST(Deltas, FinePathKeepsDelta1Small) {
    const UncertaintyBand band = UncertaintyBand::volatility(0.1, 0.3);
    const FgbmSpec spec{0.7, band, uniform_times(1.0, 2048)};
    const auto p = simulate_fgbm_asset(spec, 0.3, [](double) { return 0.0; }, 100.0, 2, 1)[0];
    const auto d = delta_processes(build_shadow_path(p, 0.05));
    EXPECT_GE(d.delta1_within, 0.99);
}

TEST(CpsPrice, IntervalWidensWithEpsilon) {
    const UncertaintyBand band(0.0, 0.0, 0.1, 0.3);
    const PricingProblem prob{ScalarFunction::put(100.0), 1.0, 0.0, band, 0.0, 400.0, 100.0};
    const auto grid = uniform_times(1.0, 2000);
    const auto p = simulate_asset_paths(ControlProcess::constant(0.2, 0.0), band, 100.0, grid, 1,
                                        1)[0];
    double prev = 0.0;
    for (double eps : {0.05, 0.1, 0.2}) {
        const auto c = cps_price(p, prob, eps, GridSpec{200, 100});
        EXPECT_EQ(c.shadow_spot, 100.0);
        EXPECT_LE(c.ask.lower, c.ask.value);
        EXPECT_GE(c.ask.upper, c.ask.value);
        EXPECT_GE(c.ask.value, c.bid.value);
        EXPECT_GT(c.ask.upper - c.ask.lower, prev);
        prev = c.ask.upper - c.ask.lower;
    }
}
