#pragma once

#include <stdexcept>
#include <string>

namespace nsac {

#define NSAC_ERROR(Name)                                                   \
  struct Name : std::runtime_error {                                       \
    explicit Name(const std::string& what) : std::runtime_error(what) {}   \
  }

NSAC_ERROR(DegenerateCurve);
NSAC_ERROR(ProjectionAmbiguous);
NSAC_ERROR(OutsideTube);
NSAC_ERROR(InsufficientResolution);
NSAC_ERROR(NonconvergentBVP);
NSAC_ERROR(IncompatibleRHS);
NSAC_ERROR(NoDecay);
NSAC_ERROR(LayerUnresolved);
NSAC_ERROR(MultipleComponents);
NSAC_ERROR(NoCrossing);
NSAC_ERROR(NonConvergence);
NSAC_ERROR(CurvatureBlowup);
NSAC_ERROR(NonPositiveError);
NSAC_ERROR(ConfigError);
NSAC_ERROR(SolverFailure);

#undef NSAC_ERROR

// carries the dt the stepper would accept
struct StepRejected : std::runtime_error {
  double suggested_dt;
  StepRejected(const std::string& what, double dt)
      : std::runtime_error(what), suggested_dt(dt) {}
};

}  // namespace nsac
