#include "fhmc/samplers.hpp"

#include <cmath>
#include <string>

#include "fhmc/error.hpp"

namespace fhmc {

namespace {

Vector standard_normal_vector(Index dim, Rng &rng) {
  std::normal_distribution<double> normal;
  Vector z(dim);
  for (Index i = 0; i < dim; ++i) {
    z(i) = normal(rng);
  }
  return z;
}

Vector checked_gradient(const TargetDensity &target, const Vector &q) {
  Vector g = target.grad_log_density(q);
  if (g.size() != target.dim) {
    throw ValidationError("gradient has length " + std::to_string(g.size()) +
                          ", expected " + std::to_string(target.dim));
  }
  if (!g.allFinite()) {
    throw DivergenceError("non-finite gradient during leapfrog", q);
  }
  return g;
}

struct Trajectory {
  Vector position;
  Vector momentum;
  Vector gradient;
  std::size_t gradient_evals = 0;
};

Trajectory integrate(const Vector &q0, const Vector &p0, const Vector &grad0,
                     const TargetDensity &target, double eps,
                     std::size_t steps) {
  Trajectory t{q0, p0, grad0, 0};
  t.momentum += 0.5 * eps * t.gradient;
  for (std::size_t s = 0; s < steps; ++s) {
    t.position += eps * t.momentum;
    t.gradient = checked_gradient(target, t.position);
    ++t.gradient_evals;
    t.momentum += (s + 1 < steps ? eps : 0.5 * eps) * t.gradient;
  }
  return t;
}

void ensure_gradient(SamplerState &state, const TargetDensity &target,
                     StepOutcome &out) {
  if (state.gradient.size() != target.dim) {
    state.gradient = checked_gradient(target, state.position);
    ++out.gradient_evals;
  }
}

} // namespace

void SamplerConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw ValidationError("step_size must be > 0");
  }
  if (leapfrog_steps < 1) {
    throw ValidationError("leapfrog_steps must be >= 1");
  }
  if (thinning < 1) {
    throw ValidationError("thinning must be >= 1");
  }
  if (burn_in >= iterations) {
    throw ValidationError("burn_in (" + std::to_string(burn_in) +
                          ") must be < iterations (" +
                          std::to_string(iterations) + ")");
  }
  if (!(momentum_refresh >= 0.0 && momentum_refresh <= 1.0)) {
    throw ValidationError("momentum_refresh must lie in [0, 1]");
  }
  if (!(proposal_scale > 0.0) || !std::isfinite(proposal_scale)) {
    throw ValidationError("proposal_scale must be > 0");
  }
}

const char *kernel_name(Kernel kernel) {
  switch (kernel) {
  case Kernel::hmc:
    return "hmc";
  case Kernel::mh:
    return "mh";
  case Kernel::gibbs:
    return "gibbs";
  }
  return "unknown";
}

Kernel parse_kernel(const std::string &name) {
  if (name == "hmc") {
    return Kernel::hmc;
  }
  if (name == "mh") {
    return Kernel::mh;
  }
  if (name == "gibbs") {
    return Kernel::gibbs;
  }
  throw ValidationError("unknown kernel '" + name + "'");
}

SamplerState SamplerState::at(const Vector &q, const TargetDensity &target) {
  if (q.size() != target.dim) {
    throw ValidationError("initial state has length " +
                          std::to_string(q.size()) + ", target dim is " +
                          std::to_string(target.dim));
  }
  if (!q.allFinite()) {
    throw ValidationError("initial state is not finite");
  }
  SamplerState s;
  s.position = q;
  s.momentum = Vector::Zero(target.dim);
  s.log_density = target.log_density(q);
  if (!std::isfinite(s.log_density)) {
    throw ValidationError("log-density is not finite at the initial state");
  }
  return s;
}

LeapfrogResult leapfrog(const Vector &q, const Vector &p,
                        const TargetDensity &target, double step_size,
                        std::size_t steps) {
  if (q.size() != target.dim || p.size() != target.dim) {
    throw ValidationError("leapfrog: state and momentum must have length dim");
  }
  if (!(step_size > 0.0)) {
    throw ValidationError("leapfrog: step_size must be > 0");
  }
  Trajectory t =
      integrate(q, p, checked_gradient(target, q), target, step_size, steps);
  return {std::move(t.position), std::move(t.momentum)};
}

double hamiltonian(double log_density, const Vector &momentum) {
  return -log_density + 0.5 * momentum.squaredNorm();
}

StepOutcome hmc_step(SamplerState &state, const TargetDensity &target,
                     const SamplerConfig &cfg, Rng &rng) {
  StepOutcome out;
  ensure_gradient(state, target, out);
  const double alpha = cfg.momentum_refresh;
  if (state.momentum.size() != target.dim) {
    state.momentum = Vector::Zero(target.dim);
  }
  const Vector p0 = alpha * state.momentum +
                    std::sqrt(1.0 - alpha * alpha) *
                        standard_normal_vector(target.dim, rng);
  const double h0 = hamiltonian(state.log_density, p0);

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  try {
    Trajectory t = integrate(state.position, p0, state.gradient, target,
                             cfg.step_size, cfg.leapfrog_steps);
    out.gradient_evals += t.gradient_evals;
    const double logp = target.log_density(t.position);
    ++out.density_evals;
    const double delta = hamiltonian(logp, t.momentum) - h0;
    if (!std::isfinite(delta) || std::abs(delta) > kDivergenceThreshold) {
      out.divergent = true;
    } else if (std::log(u) < -delta) {
      state.position = std::move(t.position);
      state.momentum = std::move(t.momentum);
      state.gradient = std::move(t.gradient);
      state.log_density = logp;
      out.accepted = true;
      return out;
    }
  } catch (const DivergenceError &) {
    out.gradient_evals += cfg.leapfrog_steps;
    out.divergent = true;
  }
  // Rejection flips the momentum, which keeps partial refresh reversible.
  state.momentum = -p0;
  return out;
}

StepOutcome mh_step(SamplerState &state, const TargetDensity &target,
                    const SamplerConfig &cfg, Rng &rng) {
  StepOutcome out;
  Vector proposal = state.position +
                    cfg.proposal_scale * standard_normal_vector(target.dim, rng);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  const double logp = target.log_density(proposal);
  ++out.density_evals;
  if (std::isfinite(logp) && std::log(u) < logp - state.log_density) {
    state.position = std::move(proposal);
    state.log_density = logp;
    state.gradient.resize(0);
    out.accepted = true;
  }
  return out;
}

StepOutcome gibbs_gaussian_step(SamplerState &state,
                                const TargetDensity &target, Rng &rng) {
  if (!target.conditional_params) {
    throw ValidationError("Gibbs kernel needs a target with analytic "
                          "conditionals");
  }
  StepOutcome out;
  std::normal_distribution<double> normal;
  for (Index i = 0; i < target.dim; ++i) {
    const auto [mean, sd] = target.conditional_params(i, state.position);
    state.position(i) = mean + sd * normal(rng);
  }
  out.density_evals = static_cast<std::size_t>(target.dim);
  state.log_density = target.log_density(state.position);
  state.gradient.resize(0);
  out.accepted = true;
  return out;
}

StepOutcome kernel_step(Kernel kernel, SamplerState &state,
                        const TargetDensity &target, const SamplerConfig &cfg,
                        Rng &rng) {
  switch (kernel) {
  case Kernel::hmc:
    return hmc_step(state, target, cfg, rng);
  case Kernel::mh:
    return mh_step(state, target, cfg, rng);
  case Kernel::gibbs:
    return gibbs_gaussian_step(state, target, rng);
  }
  throw ValidationError("unknown kernel");
}

Chain run_chain(Kernel kernel, const Vector &init, const TargetDensity &target,
                const SamplerConfig &cfg) {
  cfg.validate();
  SamplerState state = SamplerState::at(init, target);
  Rng rng(cfg.seed);
  return run_chain(kernel, state, target, cfg, rng);
}

Chain run_chain(Kernel kernel, SamplerState &state,
                const TargetDensity &target, const SamplerConfig &cfg,
                Rng &rng) {
  cfg.validate();
  if (kernel == Kernel::gibbs && !target.conditional_params) {
    throw ValidationError("Gibbs kernel needs a target with analytic "
                          "conditionals");
  }
  Chain chain;
  chain.states.reserve((cfg.iterations - cfg.burn_in) / cfg.thinning + 1);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const StepOutcome o = kernel_step(kernel, state, target, cfg, rng);
    ++chain.proposal_count;
    chain.accept_count += o.accepted ? 1 : 0;
    chain.divergences += o.divergent ? 1 : 0;
    chain.density_evals += o.density_evals;
    chain.gradient_evals += o.gradient_evals;
    if (it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thinning == 0) {
      chain.states.push_back(state.position);
    }
  }
  if (kernel == Kernel::hmc && 2 * chain.divergences > cfg.iterations) {
    throw TuningError(std::to_string(chain.divergences) + " of " +
                      std::to_string(cfg.iterations) +
                      " HMC transitions diverged; reduce step_size (currently " +
                      std::to_string(cfg.step_size) + ")");
  }
  return chain;
}

double effective_sample_size(const std::vector<double> &x) {
  const std::size_t n = x.size();
  if (n < 4) {
    return static_cast<double>(n);
  }
  double mean = 0.0;
  for (double v : x) {
    mean += v;
  }
  mean /= static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) {
      s += (x[i] - mean) * (x[i + lag] - mean);
    }
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) {
    return 1.0;
  }
  double sum = 0.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
    if (pair <= 0.0) {
      break;
    }
    sum += pair;
  }
  const double tau = std::max(-1.0 + 2.0 * sum, 1.0 / static_cast<double>(n));
  return static_cast<double>(n) / tau;
}

ChainDiagnostics chain_diagnostics(const Chain &chain) {
  if (chain.states.empty()) {
    throw ValidationError("chain_diagnostics: chain is empty");
  }
  const Index dim = chain.states.front().size();
  const std::size_t n = chain.states.size();
  ChainDiagnostics d;
  d.acceptance_rate =
      chain.proposal_count == 0
          ? 0.0
          : static_cast<double>(chain.accept_count) /
                static_cast<double>(chain.proposal_count);
  d.mean = Vector::Zero(dim);
  for (const auto &s : chain.states) {
    d.mean += s;
  }
  d.mean /= static_cast<double>(n);
  d.std = Vector::Zero(dim);
  for (const auto &s : chain.states) {
    d.std += (s - d.mean).cwiseAbs2();
  }
  d.std = (d.std / static_cast<double>(n)).cwiseSqrt();
  d.ess.resize(dim);
  std::vector<double> series(n);
  for (Index j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      series[i] = chain.states[i](j);
    }
    d.ess(j) = effective_sample_size(series);
  }
  return d;
}

} // namespace fhmc
