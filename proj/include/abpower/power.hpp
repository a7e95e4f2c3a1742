#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "abpower/core_stats.hpp"
#include "abpower/estimators.hpp"

namespace abpower {

// What historical data says about one arm's spread.
struct VarianceProfile {
  double residual_sd = 0.0;
  double denom_mean = 1.0;
  MetricKind metric_kind = MetricKind::kMean;
  std::size_t source_n = 0;

  // The quantity every solver consumes in place of s_y.
  double effective_sd() const { return residual_sd / denom_mean; }
};

VarianceProfile profile_from(const ArmEstimate& arm);

// {alpha, power, mde, n} with exactly one of power/mde/n left empty.
// n counts units across both arms; psi is the treatment fraction.
struct PowerSpec {
  double alpha = 0.05;
  std::optional<double> power;
  std::optional<double> mde;
  std::optional<std::int64_t> n;
  double psi = 0.5;
  NormalTail tail = NormalTail::kOneSided;
};

enum class SolveTarget { kPower, kMde, kN };
std::string_view to_string(SolveTarget target);

struct PowerSolution {
  SolveTarget solved_for = SolveTarget::kN;
  double alpha = 0.0;
  // Requested power when solving for n or mde; computed power otherwise.
  double power = 0.0;
  double mde = 0.0;
  std::int64_t n = 0;
  double psi = 0.5;
  NormalTail tail = NormalTail::kOneSided;
  double effective_sd = 0.0;
  double allocation_factor = 0.0;
  double planning_se = 0.0;
  // Power actually delivered at the integer n (equals `power` unless n was
  // rounded up).
  double achieved_power = 0.0;
};

// sqrt(1/(1-psi) + 1/psi); minimum 2 at psi = 0.5.
double allocation_factor(double psi);

// SE of the difference between arms for n total units split psi : 1-psi.
double planning_se(const VarianceProfile& profile, std::int64_t n, double psi);

// (z_alpha + z_beta) * se. z_beta is always the one-sided quantile.
double solve_mde(double alpha, double power, double se, NormalTail tail);

// Smallest n whose power reaches `power`; verified by re-solving power.
std::int64_t solve_n(double alpha, double power, double mde,
                     const VarianceProfile& profile, double psi,
                     NormalTail tail);

// Phi(mde / planning_se - z_alpha).
double solve_power(double alpha, double mde, const VarianceProfile& profile,
                   std::int64_t n, double psi, NormalTail tail);

PowerSolution solve(const PowerSpec& spec, const VarianceProfile& profile);

}  // namespace abpower
