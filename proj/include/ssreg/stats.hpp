#pragma once

namespace ssreg {

/// Standard normal CDF.
double normal_cdf(double z);

/// Standard normal quantile (Wichura's AS 241, double precision).
double normal_quantile(double prob);

/// Two-sided p-value for a standard normal z statistic.
double two_sided_p(double z);

}  // namespace ssreg
