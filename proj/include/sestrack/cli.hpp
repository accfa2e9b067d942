#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sestrack/process_model.hpp"
#include "sestrack/smoother.hpp"

namespace sestrack::cli {

enum ExitCode : int {
  kSuccess = 0,
  kDomainError = 1,
  kUsageError = 2,
  kBoundViolated = 3,
};

/// Malformed trend/noise spec string; reported as a usage error.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Human-readable grammar of the `name:key=value,...` spec strings.
std::string spec_grammar();

/// white:var=V | ma1:a=A[,var=V|,sigma=S] | ar1:theta=T[,var=V|,sigma=S]
/// | maq:b1=..,b2=..[,var=V|,sigma=S]
NoiseModel parse_noise_spec(std::string_view spec);

/// const:level=L | linear:start=S,slope=D | sin:amp=A,rate=R[,phase=P]
/// | table:file=PATH,column=NAME
TrendSpec parse_trend_spec(std::string_view spec);

/// Runs one command line; `args[0]` is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sestrack::cli
