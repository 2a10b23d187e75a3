#pragma once

#include <stdexcept>
#include <string>

namespace vmfflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define VMFFLOW_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

VMFFLOW_DEFINE_ERROR(DegenerateRetraction);
VMFFLOW_DEFINE_ERROR(AntipodalPoints);
VMFFLOW_DEFINE_ERROR(NoConvergence);
VMFFLOW_DEFINE_ERROR(TableBuildError);
VMFFLOW_DEFINE_ERROR(TimeSingularity);
VMFFLOW_DEFINE_ERROR(ScoreUnavailable);
VMFFLOW_DEFINE_ERROR(ProgressUnavailable);
VMFFLOW_DEFINE_ERROR(InstanceTooLarge);
VMFFLOW_DEFINE_ERROR(ZeroEmbedding);
VMFFLOW_DEFINE_ERROR(NonFiniteLoss);
VMFFLOW_DEFINE_ERROR(FormatError);

// Raised for configurations that can never run (e.g. a corrector on the
// geodesic path). The CLI maps it to exit code 2.
VMFFLOW_DEFINE_ERROR(InvalidConfig);

#undef VMFFLOW_DEFINE_ERROR

}  // namespace vmfflow
