#include <filesystem>

#include <gtest/gtest.h>

#include "oksim/config.hpp"

using namespace oksim;

namespace {

std::string key_of(const std::string& text)
{
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<no error>";
}

} // namespace

TEST(Config, DefaultsAreReferenceValues)
{
    const auto c = parse_config("{}");
    EXPECT_EQ(c.source.chirp_s_fs2, 10910.0);
    EXPECT_EQ(c.source.chirp_i_fs2, 344064.0);
    EXPECT_EQ(c.source.compressor_fs2.value(), -354974.0);
    EXPECT_EQ(c.gate_s.photon_nm, 714.0);
    EXPECT_EQ(c.gate_i.photon_nm, 847.0);
    EXPECT_EQ(c.gate_s.pump_fwhm_fs, 148.0);
    EXPECT_EQ(c.scan.rep_rate_hz, 80e6);
    EXPECT_EQ(c.scan.delay_s.count, 128u);
    EXPECT_EQ(c.analysis.systematic_lo, 0.9);
    EXPECT_EQ(c.analysis.systematic_hi, 1.1);
}

TEST(Config, DumpParseRoundTrip)
{
    auto c = default_config();
    c.seed = 99;
    c.scan.dwell_s = 2.5;
    c.analysis.spectral_resolution = 1e-4;
    c.analysis.weights = FitWeights::poisson;
    c.gate_i.fiber.overrides.push_back({847.0, 30.5, std::nullopt});
    c.source.phase_matching = PhaseMatching{10.0, -20.0};
    const auto text = dump_config(c);
    const auto d = parse_config(text);
    EXPECT_EQ(dump_config(d), text);
    EXPECT_EQ(d.scan.seed, 99u);
}

TEST(Config, UnknownKeysRejectedByPath)
{
    EXPECT_EQ(key_of(R"({"sead": 1})"), "sead");
    EXPECT_EQ(key_of(R"({"scan": {"pair_rat": 1}})"), "scan.pair_rat");
    EXPECT_EQ(key_of(R"({"gate_i": {"fiber": {"lenght_mm": 3}}})"), "gate_i.fiber.lenght_mm");
    EXPECT_EQ(key_of(R"({"scan": {"delay_s": {"count": 64, "stop": 1}}})"), "scan.delay_s.stop");
}

TEST(Config, ConstraintErrorsNameKey)
{
    EXPECT_EQ(key_of(R"({"scan": {"pair_rate": -1}})"), "scan.pair_rate");
    EXPECT_EQ(key_of(R"({"scan": {"transmission_i": 1.5}})"), "scan.transmission_i");
    EXPECT_EQ(key_of(R"({"scan": {"delay_i": {"count": 4}}})"), "scan.delay_i.count");
    EXPECT_EQ(key_of(R"({"gate_s": {"pump_fwhm_fs": 0}})"), "gate_s.pump_fwhm_fs");
    EXPECT_EQ(key_of(R"({"gate_s": {"pump_fwhm_fs": 150}})"), "gate_i.pump_fwhm_fs");
    EXPECT_EQ(key_of(R"({"source": {"pump_nm": "blue"}})"), "source.pump_nm");
    EXPECT_EQ(key_of(R"({"analysis": {"weights": "cauchy"}})"), "analysis.weights");
    EXPECT_EQ(key_of(R"({"analysis": {"systematic_range": [1.1, 0.9]}})"), "analysis.systematic_range[1]");
    EXPECT_EQ(key_of(R"({"output_dir": ""})"), "output_dir");
    EXPECT_EQ(key_of(R"({"seed": -3})"), "seed");
    try {
        parse_config(R"({"scan": {"pair_rate": -1}})");
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find(">= 0"), std::string::npos);
    }
}

TEST(Config, InvalidJsonAndMissingFile)
{
    EXPECT_THROW(parse_config("{ not json"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, TransportFiberGivesChirp)
{
    const auto c = parse_config(
        R"({"source": {"transport_s": {"length_mm": 500, "overrides": [{"wavelength_nm": 714, "gvd_fs2_per_mm": 21.82}]}}})");
    EXPECT_NEAR(c.source.chirp_s_fs2, 10910.0, 1e-9);
    EXPECT_EQ(key_of(R"({"source": {"chirp_s_fs2": 1, "transport_s": {"length_mm": 1}}})"), "source.transport_s");
}

TEST(Config, ShippedConfigsValidate)
{
    const std::filesystem::path dir = OKSIM_SOURCE_DIR "/configs";
    ASSERT_TRUE(std::filesystem::exists(dir / "default.json"));
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() == ".json") {
            EXPECT_NO_THROW(load_config(e.path())) << e.path();
        }
    }
    EXPECT_EQ(dump_config(load_config(dir / "default.json")), dump_config(default_config()));
}
