#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fhmc/random.hpp"

namespace fhmc {

using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Unnormalized log-density with its gradient. conditional_params, when set,
// returns the mean and standard deviation of coordinate i given the rest
// (Gaussian full conditionals only); it enables the Gibbs kernel.
struct TargetDensity {
  Index dim = 0;
  std::function<double(const Vector &)> log_density;
  std::function<Vector(const Vector &)> grad_log_density;
  std::function<std::pair<double, double>(Index, const Vector &)>
      conditional_params;
};

struct SamplerConfig {
  double step_size = 0.05;
  std::size_t leapfrog_steps = 20;
  std::size_t iterations = 2000;
  std::size_t burn_in = 1000;
  std::size_t thinning = 1;
  // Partial momentum refresh p <- a*p + sqrt(1-a^2)*z; 0 is a full refresh.
  double momentum_refresh = 0.0;
  // Random-walk proposal std for Metropolis-Hastings.
  double proposal_scale = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Kernel { hmc, mh, gibbs };

const char *kernel_name(Kernel kernel);
Kernel parse_kernel(const std::string &name);

// |Delta H| above this marks a divergent HMC transition.
inline constexpr double kDivergenceThreshold = 1000.0;

// Current position plus cached quantities carried between transitions.
struct SamplerState {
  Vector position;
  Vector momentum;
  double log_density = 0.0;
  Vector gradient;

  static SamplerState at(const Vector &q, const TargetDensity &target);
};

struct StepOutcome {
  bool accepted = false;
  bool divergent = false;
  std::size_t density_evals = 0;
  std::size_t gradient_evals = 0;
};

struct Chain {
  std::vector<Vector> states;
  std::size_t accept_count = 0;
  std::size_t proposal_count = 0;
  std::size_t divergences = 0;
  std::size_t density_evals = 0;
  std::size_t gradient_evals = 0;
};

struct LeapfrogResult {
  Vector position;
  Vector momentum;
};

// Unit-mass leapfrog: half momentum step, `steps` alternating full position
// and momentum steps, trailing half momentum step. Throws DivergenceError on
// a non-finite gradient.
LeapfrogResult leapfrog(const Vector &q, const Vector &p,
                        const TargetDensity &target, double step_size,
                        std::size_t steps);

double hamiltonian(double log_density, const Vector &momentum);

StepOutcome hmc_step(SamplerState &state, const TargetDensity &target,
                     const SamplerConfig &cfg, Rng &rng);
StepOutcome mh_step(SamplerState &state, const TargetDensity &target,
                    const SamplerConfig &cfg, Rng &rng);
// One systematic-scan sweep over all coordinates. Throws if the target has no
// conditional_params.
StepOutcome gibbs_gaussian_step(SamplerState &state,
                                const TargetDensity &target, Rng &rng);

StepOutcome kernel_step(Kernel kernel, SamplerState &state,
                        const TargetDensity &target, const SamplerConfig &cfg,
                        Rng &rng);

// Runs cfg.iterations transitions from `init` with a generator seeded from
// cfg.seed, keeping every `thinning`-th post-burn-in state.
Chain run_chain(Kernel kernel, const Vector &init, const TargetDensity &target,
                const SamplerConfig &cfg);

// Same, continuing from an existing state and generator (warm start).
Chain run_chain(Kernel kernel, SamplerState &state,
                const TargetDensity &target, const SamplerConfig &cfg,
                Rng &rng);

struct ChainDiagnostics {
  double acceptance_rate = 0.0;
  Vector ess;
  Vector mean;
  Vector std;
};

ChainDiagnostics chain_diagnostics(const Chain &chain);

// Effective sample size of a scalar series (Geyer initial positive sequence).
double effective_sample_size(const std::vector<double> &series);

} // namespace fhmc
