#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gprice/cli.hpp"
#include "oracles.hpp"

using namespace gprice;
using namespace gprice::cli;

namespace {

const char* kMinimalPrice = R"({
  "command": "price",
  "band": {"sigma_lo": 0.2, "sigma_hi": 0.2},
  "problem": {"payoff": {"kind": "call", "strike": 100}, "maturity": 1, "rate": 0.05,
              "spot": 100}
})";

std::vector<std::string> errors_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.errors();
    }
    return {};
}

bool mentions(const std::vector<std::string>& errs, const std::string& needle) {
    for (const auto& e : errs) {
        if (e.find(needle) != std::string::npos) return true;
    }
    return false;
}

std::string slurp(const std::string& file) {
    std::ifstream is(file, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string source(const std::string& rel) { return std::string(GPRICE_SOURCE_DIR) + "/" + rel; }

}  // namespace

TEST(ParseConfig, DefaultsAreFilled) {
    const RunConfig c = parse_config(kMinimalPrice);
    EXPECT_EQ(c.command, Command::price);
    EXPECT_EQ(c.seed, 0u);
    EXPECT_EQ(c.grid.n_space, 400u);
    EXPECT_EQ(c.grid.n_time, 400u);
    EXPECT_EQ(c.format, Format::json);
    ASSERT_TRUE(c.problem.has_value());
    EXPECT_EQ(c.problem->x_min, 0.0);
    EXPECT_EQ(c.problem->x_max, 400.0);
    EXPECT_EQ(c.band->mu_lo(), 0.0);
}

TEST(ParseConfig, InvertedBandNamesBothFields) {
    const auto errs = errors_of(R"({"command": "price",
        "band": {"sigma_lo": 0.3, "sigma_hi": 0.1},
        "problem": {"payoff": {"kind": "call", "strike": 1}, "maturity": 1, "spot": 1}})");
    ASSERT_EQ(errs.size(), 1u);
    EXPECT_TRUE(mentions(errs, "band.sigma_lo"));
    EXPECT_TRUE(mentions(errs, "band.sigma_hi"));
}

TEST(ParseConfig, CollectsAllErrors) {
    const auto errs = errors_of(R"({"command": "price", "colour": 1,
        "band": {"sigma_lo": 0.1, "sigma_hi": 0.2, "sigma_mid": 0.15},
        "grid": {"n_space": 3},
        "problem": {"payoff": {"kind": "straddle"}, "maturity": -1, "spot": 1}})");
    EXPECT_TRUE(mentions(errs, "colour: unknown key"));
    EXPECT_TRUE(mentions(errs, "band.sigma_mid: unknown key"));
    EXPECT_TRUE(mentions(errs, "grid.n_space"));
    EXPECT_TRUE(mentions(errs, "problem.payoff.kind"));
    EXPECT_GE(errs.size(), 4u);
}

TEST(ParseConfig, CommandRequirements) {
    EXPECT_TRUE(mentions(errors_of(R"({"command": "price"})"), "band: required"));
    EXPECT_TRUE(mentions(errors_of(R"({"command": "cps", "cps": {"epsilon": 0.1}})"),
                         "files.input_path"));
    EXPECT_TRUE(mentions(errors_of(R"({"command": "simulate",
        "band": {"sigma_lo": 0.1, "sigma_hi": 0.2},
        "simulation": {"s0": 1, "horizon": 1,
                       "controls": [{"sigma": 0.5, "mu": 0}]}})"),
                         "simulation.controls[0].sigma[0]: outside band"));
    EXPECT_FALSE(errors_of("not json").empty());
    EXPECT_FALSE(errors_of("[1, 2]").empty());
}

TEST(ParseConfig, EmitRoundTrips) {
    const char* text = R"({"command": "hedge", "seed": 12345678901234,
        "band": {"mu_lo": 0.01, "mu_hi": 0.02, "sigma_lo": 0.1, "sigma_hi": 0.3},
        "problem": {"payoff": {"kind": "butterfly", "lo": 90, "mid": 100, "hi": 110, "scale": 2},
                    "maturity": 0.5, "rate": 0.015, "spot": 100, "spot_domain": [10, 300]},
        "grid": {"n_space": 300, "n_time": 200, "stretching": "uniform_price"},
        "simulation": {"n_paths": 10, "n_steps": 20,
                       "controls": [{"breakpoints": [0, 0.25], "sigma": [0.1, 0.3], "mu": [0.01, 0.02]}]},
        "fgbm": {"hurst": 0.3, "sigma": 0.2, "method": "cholesky"},
        "hedge": {"tolerance": 0.01},
        "files": {"ask_surface": "a.csv"}})";
    const RunConfig c = parse_config(text);
    const Json once = emit_config(c);
    const RunConfig again = parse_config(once.dump());
    EXPECT_EQ(again, c);
    EXPECT_EQ(emit_config(again).dump(), once.dump());
    for (const char* payoff : {R"({"kind": "put", "strike": 100})", R"({"kind": "identity"})",
                               R"({"kind": "power", "exponent": 2, "scale": 0.5})"}) {
        std::string t = kMinimalPrice;
        const std::string call = R"({"kind": "call", "strike": 100})";
        t.replace(t.find(call), call.size(), payoff);
        const RunConfig k = parse_config(t);
        EXPECT_EQ(parse_config(emit_config(k).dump()), k) << payoff;
    }
}

TEST(Run, PriceReducesToBlackScholes) {
    const Json r = run(parse_config(kMinimalPrice));
    EXPECT_NEAR(r["outputs"]["ask"].get<double>(), oracle::bs_call_020, 1e-3 * oracle::bs_call_020);
    EXPECT_NEAR(r["outputs"]["bid"].get<double>(), oracle::bs_call_020, 1e-3 * oracle::bs_call_020);
    EXPECT_EQ(r["provenance"]["seed"].get<std::uint64_t>(), 0u);
    EXPECT_EQ(r["inputs"], emit_config(parse_config(kMinimalPrice)));
    EXPECT_FALSE(r["timing"].contains("wall_clock_ms"));
}

TEST(Run, ReportsAreByteIdentical) {
    const RunConfig c = parse_config(R"({"command": "simulate", "seed": 4,
        "band": {"mu_lo": 0, "mu_hi": 0.1, "sigma_lo": 0.1, "sigma_hi": 0.3},
        "simulation": {"n_paths": 2, "n_steps": 100, "s0": 100, "horizon": 1,
                       "controls": [{"sigma": 0.2, "mu": 0.05}]}})");
    const std::string a = render_report(run(c), Format::json);
    const std::string b = render_report(run(c), Format::json);
    EXPECT_EQ(a, b);
    EXPECT_EQ(render_report(run(c), Format::csv), render_report(run(c), Format::csv));
}

TEST(Run, SimulateWritesIdenticalFiles) {
    const auto dir = std::filesystem::temp_directory_path();
    const std::string f1 = (dir / "gprice_sim_1.csv").string();
    const std::string f2 = (dir / "gprice_sim_2.csv").string();
    std::string base = R"({"command": "simulate", "seed": 9,
        "band": {"sigma_lo": 0.1, "sigma_hi": 0.3},
        "simulation": {"n_paths": 2, "n_steps": 50, "s0": 100, "horizon": 1,
                       "controls": [{"sigma": 0.3, "mu": 0}]},
        "files": {"output_paths": "FILE"}})";
    for (const auto& f : {f1, f2}) {
        std::string t = base;
        t.replace(t.find("FILE"), 4, f);
        run(parse_config(t));
    }
    EXPECT_FALSE(slurp(f1).empty());
    EXPECT_EQ(slurp(f1), slurp(f2));
    std::remove(f1.c_str());
    std::remove(f2.c_str());
}

TEST(Run, CpsOnBundledPath) {
    std::string t = R"({"command": "cps", "cps": {"epsilon": 0.1},
        "files": {"input_path": "PATH"}})";
    t.replace(t.find("PATH"), 4, source("data/example_path.csv"));
    const Json r = run(parse_config(t));
    EXPECT_TRUE(r["outputs"]["sandwich"]["ok"].get<bool>());
    const auto& table = r["outputs"]["crossings"];
    EXPECT_GE(table["index"].size(), 1u);
    EXPECT_EQ(table["sign"].back().get<int>(), 0);
}

TEST(Render, RoundsToTwelveDigits) {
    Json j = {{"x", 0.1 + 0.2}, {"y", {1.0 / 3.0, 7}}, {"z", "a,b"}};
    EXPECT_EQ(render_report(j, Format::json),
              "{\n  \"x\": 0.3,\n  \"y\": [\n    0.333333333333,\n    7\n  ],\n  \"z\": \"a,b\"\n}\n");
    EXPECT_EQ(render_report(j, Format::csv),
              "key,value\nx,0.3\ny[0],0.333333333333\ny[1],7\nz,\"a,b\"\n");
}

TEST(MainEntry, ExitCodes) {
    const auto dir = std::filesystem::temp_directory_path();
    const std::string cfg = (dir / "gprice_cli_cfg.json").string();
    const std::string out = (dir / "gprice_cli_out.csv").string();
    {
        std::ofstream os(cfg);
        os << kMinimalPrice;
    }
    std::vector<std::string> args{"gprice", "price", "--config", cfg, "--seed", "5",
                                  "--out", out, "--format", "csv"};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    EXPECT_EQ(main_entry(static_cast<int>(argv.size()), argv.data()), 0);
    const std::string text = slurp(out);
    EXPECT_NE(text.find("inputs.seed,5"), std::string::npos);
    EXPECT_NE(text.find("outputs.ask,10.44"), std::string::npos);

    args[1] = "fgbm";
    argv.clear();
    for (auto& a : args) argv.push_back(a.data());
    EXPECT_EQ(main_entry(static_cast<int>(argv.size()), argv.data()), 2);
    {
        std::ofstream os(cfg);
        os << R"({"command": "cps", "cps": {"epsilon": 0.1},
                  "files": {"input_path": "/nonexistent/path.csv"}})";
    }
    args[1] = "cps";
    argv.clear();
    for (auto& a : args) argv.push_back(a.data());
    EXPECT_EQ(main_entry(static_cast<int>(argv.size()), argv.data()), 1);
    std::remove(cfg.c_str());
    std::remove(out.c_str());
}
