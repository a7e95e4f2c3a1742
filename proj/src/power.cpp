#include "abpower/power.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "abpower/errors.hpp"

namespace abpower {
namespace {

// Power comparisons tolerate rounding in the last bits of Phi(z_beta).
constexpr double kPowerSlack = 1e-12;
constexpr std::int64_t kMinN = 2;

void check_probability(double p, const char* name) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError(std::string(name) + " must lie in (0,1), got " +
                      std::to_string(p));
  }
}

void check_n(std::int64_t n) {
  if (n < kMinN) {
    throw DomainError("n must be at least 2, got " + std::to_string(n));
  }
}

void check_profile(const VarianceProfile& profile) {
  if (!(profile.residual_sd >= 0.0) || !std::isfinite(profile.residual_sd)) {
    throw DomainError("residual_sd must be finite and nonnegative");
  }
  if (!(profile.denom_mean > 0.0) || !std::isfinite(profile.denom_mean)) {
    throw DomainError("denom_mean must be finite and positive");
  }
}

double z_alpha(double alpha, NormalTail tail) {
  return normal_quantile(tail_probability(alpha, tail));
}

}  // namespace

std::string_view to_string(SolveTarget target) {
  switch (target) {
    case SolveTarget::kPower:
      return "power";
    case SolveTarget::kMde:
      return "mde";
    case SolveTarget::kN:
      return "n";
  }
  return "?";
}

VarianceProfile profile_from(const ArmEstimate& arm) {
  return {arm.residual_sd, arm.denom_mean, arm.metric_kind, arm.n_units};
}

double allocation_factor(double psi) {
  check_probability(psi, "psi");
  return std::sqrt(1.0 / (1.0 - psi) + 1.0 / psi);
}

double planning_se(const VarianceProfile& profile, std::int64_t n,
                   double psi) {
  check_profile(profile);
  check_n(n);
  return allocation_factor(psi) * profile.effective_sd() /
         std::sqrt(static_cast<double>(n));
}

double solve_mde(double alpha, double power, double se, NormalTail tail) {
  check_probability(power, "power");
  if (!(se >= 0.0) || !std::isfinite(se)) {
    throw DomainError("se must be finite and nonnegative");
  }
  return (z_alpha(alpha, tail) + normal_quantile(power)) * se;
}

double solve_power(double alpha, double mde, const VarianceProfile& profile,
                   std::int64_t n, double psi, NormalTail tail) {
  if (!(mde > 0.0)) throw DomainError("mde must be positive");
  const double se = planning_se(profile, n, psi);
  const double za = z_alpha(alpha, tail);
  if (se == 0.0) return 1.0;
  return normal_cdf(mde / se - za);
}

std::int64_t solve_n(double alpha, double power, double mde,
                     const VarianceProfile& profile, double psi,
                     NormalTail tail) {
  if (!(mde > 0.0)) throw DomainError("mde must be positive");
  check_probability(power, "power");
  check_profile(profile);
  const double z = z_alpha(alpha, tail) + normal_quantile(power);
  const double factor = allocation_factor(psi);
  const double ratio = profile.effective_sd() / mde;
  const double exact = z * z * factor * factor * ratio * ratio;
  if (!std::isfinite(exact) || exact > 9e15) {
    throw DomainError("required sample size is not representable");
  }

  auto reaches = [&](std::int64_t n) {
    return solve_power(alpha, mde, profile, n, psi, tail) >=
           power - kPowerSlack;
  };
  std::int64_t n = std::max<std::int64_t>(
      kMinN, static_cast<std::int64_t>(std::ceil(exact)));
  // Integer rounding must never under-power: walk up until power holds, then
  // back down while the smaller n still holds.
  while (!reaches(n)) ++n;
  while (n > kMinN && reaches(n - 1)) --n;
  return n;
}

PowerSolution solve(const PowerSpec& spec, const VarianceProfile& profile) {
  const int missing = !spec.power.has_value() + !spec.mde.has_value() +
                      !spec.n.has_value();
  if (missing == 0) {
    throw SpecError("power spec is overdetermined: leave one of power, mde, n "
                    "unset");
  }
  if (missing > 1) {
    throw SpecError("power spec is underdetermined: give two of power, mde, "
                    "n");
  }
  check_probability(spec.alpha, "alpha");
  check_probability(spec.psi, "psi");
  check_profile(profile);

  PowerSolution out;
  out.alpha = spec.alpha;
  out.psi = spec.psi;
  out.tail = spec.tail;
  out.effective_sd = profile.effective_sd();
  out.allocation_factor = allocation_factor(spec.psi);

  if (!spec.n) {
    out.solved_for = SolveTarget::kN;
    out.power = *spec.power;
    out.mde = *spec.mde;
    out.n = solve_n(spec.alpha, out.power, out.mde, profile, spec.psi,
                    spec.tail);
    out.achieved_power =
        solve_power(spec.alpha, out.mde, profile, out.n, spec.psi, spec.tail);
  } else if (!spec.mde) {
    out.solved_for = SolveTarget::kMde;
    out.power = *spec.power;
    out.n = *spec.n;
    out.mde = solve_mde(spec.alpha, out.power,
                        planning_se(profile, out.n, spec.psi), spec.tail);
    out.achieved_power = out.power;
  } else {
    out.solved_for = SolveTarget::kPower;
    out.mde = *spec.mde;
    out.n = *spec.n;
    out.power =
        solve_power(spec.alpha, out.mde, profile, out.n, spec.psi, spec.tail);
    out.achieved_power = out.power;
  }
  out.planning_se = planning_se(profile, out.n, spec.psi);
  return out;
}

}  // namespace abpower
