#include <gtest/gtest.h>

#include <sstream>

#include "gprice/errors.hpp"
#include "gprice/io.hpp"

using namespace gprice;

TEST(PathCsv, RoundTripIsExact) {
    const SampledPath p({0.0, 0.1, 0.30000000000000004}, {1.0 / 3.0, 2.5e-17, -7.125});
    std::stringstream ss;
    write_path_csv(ss, p);
    EXPECT_EQ(ss.str().substr(0, 11), "time,value\n");
    EXPECT_EQ(read_path_csv(ss), p);
}

TEST(PathCsv, ErrorsNameTheLine) {
    std::stringstream ss("time,value\n0,1\n\n0.5,abc\n");
    try {
        read_path_csv(ss);
        FAIL();
    } catch (const InvalidArgument& e) {
        EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
    }
    std::stringstream extra("time,value\n0,1,2\n");
    EXPECT_THROW(read_path_csv(extra), InvalidArgument);
    std::stringstream decreasing("time,value\n0,1\n0,2\n");
    EXPECT_THROW(read_path_csv(decreasing), InvalidArgument);
    std::stringstream negative("time,value\n0,1\n1,-2\n");
    EXPECT_THROW(read_path_csv(negative, true), InvalidArgument);
    std::stringstream empty("");
    EXPECT_THROW(read_path_csv(empty), InvalidArgument);
}

TEST(PathCsv, ToleratesCrlf) {
    std::stringstream ss("time,value\r\n0,1\r\n1,2\r\n");
    EXPECT_EQ(read_path_csv(ss).value(1), 2.0);
}

TEST(EnsembleCsv, RoundTrip) {
    const std::vector<SampledPath> ps{SampledPath({0, 1}, {1, 2}), SampledPath({0, 1}, {3, 4})};
    std::stringstream ss;
    write_ensemble_csv(ss, ps);
    EXPECT_EQ(ss.str().substr(0, 19), "time,path_0,path_1\n");
    EXPECT_EQ(read_ensemble_csv(ss), ps);
    const std::vector<SampledPath> mixed{SampledPath({0, 1}, {1, 2}), SampledPath({0, 2}, {3, 4})};
    EXPECT_THROW(write_ensemble_csv(ss, mixed), InvalidArgument);
}

TEST(SurfaceMatrix, HeaderIsSpaceNodes) {
    const PricingProblem p{ScalarFunction::call(1.0), 1.0, 0.0, UncertaintyBand::volatility(0.2, 0.2),
                           0.0, 4.0, 1.0};
    const auto s = solve_bsb_ask(p, GridSpec{20, 20});
    std::stringstream ss;
    write_surface_matrix(ss, s);
    std::string header, line;
    std::getline(ss, header);
    EXPECT_EQ(header.rfind("time,", 0), 0u);
    std::size_t rows = 0;
    while (std::getline(ss, line)) ++rows;
    EXPECT_EQ(rows, s.times().size());
    EXPECT_EQ(static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')),
              s.space_nodes().size());
}
