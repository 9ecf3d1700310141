#pragma once

#include <memory>

#include "invtag/phantom.hpp"
#include "invtag/prior.hpp"
#include "invtag/run_config.hpp"

namespace invtag {

/// Test phantom of a run: derived from sequence.data_seed so solver-seed
/// sweeps keep the data fixed.
PhantomSpec test_phantom_spec(const RunConfig& cfg);

/// Full in-process simulation of the configured sequence.
SimulatedSequence simulate_run(const RunConfig& cfg);

/// Prior from the config: a GMM template bank whose first entry is a jittered
/// near-match of the test phantom (the rest are independent phantoms), or the
/// stationary GP built on the near-match mean.
std::shared_ptr<const ScoreModel> build_prior(const RunConfig& cfg);

}  // namespace invtag
