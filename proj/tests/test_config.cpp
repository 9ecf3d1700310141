#include <doctest.h>

#include "invtag/run_config.hpp"

using namespace invtag;

TEST_SUITE_BEGIN("config");

TEST_CASE("defaults parse from an empty document") {
    RunConfig cfg = parse_run_config("{}");
    CHECK(cfg.grid.nx == 48);
    CHECK(cfg.sequence.frames == 6);
    CHECK(cfg.prior.type == "gmm");
    CHECK(cfg.sampler_steps == 64);
    CHECK(cfg.adam.lr == doctest::Approx(5e-4));
    CHECK(cfg.de.population == 30);
    CHECK(cfg.solver.loops == 4);
    CHECK(cfg.solver.exp_steps == 7);
    CHECK(cfg.solver.motion.hidden == std::vector<int>{128, 128, 128});
}

TEST_CASE("unknown keys are rejected with their path") {
    CHECK_THROWS_WITH_AS(parse_run_config("{\"grid\": {\"nx\": 8, \"bogus\": 1}}"),
                         doctest::Contains("bogus"), Error);
    CHECK_THROWS_WITH_AS(parse_run_config("{\"nonsense\": {}}"), doctest::Contains("nonsense"),
                         Error);
    CHECK_THROWS_AS(parse_run_config("{ not json"), Error);
}

TEST_CASE("blur presets expand to the stated configurations") {
    RunConfig c1 = parse_run_config("{\"sequence\": {\"blur\": \"aniso-noise\"}}");
    CHECK(c1.sequence.blur.perp == doctest::Approx(0.4));
    CHECK(c1.sequence.blur.par == doctest::Approx(1.0));
    CHECK(c1.sequence.blur.thru == doctest::Approx(3.0));
    CHECK(c1.sequence.noise_sigma == doctest::Approx(0.01));

    RunConfig c2 = parse_run_config("{\"sequence\": {\"blur\": \"aniso-thru\"}}");
    CHECK(c2.sequence.blur.thru == doctest::Approx(4.0));
    CHECK(c2.sequence.noise_sigma == 0.0);

    CHECK_THROWS_AS(parse_run_config("{\"sequence\": {\"blur\": \"wat\"}}"), Error);
}

TEST_CASE("resolved config round-trips and hashes deterministically") {
    RunConfig cfg = parse_run_config("{\"seed\": 42, \"sampler\": {\"steps\": 32}}");
    const std::string text = resolved_config_json(cfg);
    RunConfig back = parse_run_config(text);
    CHECK(resolved_config_json(back) == text);
    CHECK(config_hash(back) == config_hash(cfg));

    RunConfig other = parse_run_config("{\"seed\": 43}");
    CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("validation catches bad values") {
    CHECK_THROWS_AS(parse_run_config("{\"grid\": {\"nx\": 2}}"), Error);
    CHECK_THROWS_AS(parse_run_config("{\"sampler\": {\"steps\": 1}}"), Error);
    CHECK_THROWS_AS(parse_run_config("{\"prior\": {\"type\": \"vae\"}}"), Error);
    CHECK_THROWS_AS(parse_run_config("{\"solver\": {\"motion\": {\"param\": \"spline\"}}}"), Error);
}

TEST_SUITE_END();
