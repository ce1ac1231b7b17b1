#pragma once

#include <stdexcept>
#include <string>

namespace wlmmse {

/// Broad classes used by the command-line front end to pick an exit code.
enum class ErrorClass { input, numerical, invariant };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
    ErrorClass error_class() const noexcept { return cls_; }

private:
    ErrorClass cls_;
};

#define WLMMSE_DEFINE_ERROR(Name, Class)                                                           \
    class Name : public Error {                                                                    \
    public:                                                                                        \
        explicit Name(const std::string& what) : Error(ErrorClass::Class, #Name ": " + what) {}    \
    };

WLMMSE_DEFINE_ERROR(InvalidSpec, input)
WLMMSE_DEFINE_ERROR(ShapeMismatch, input)
WLMMSE_DEFINE_ERROR(NotProper, input)
WLMMSE_DEFINE_ERROR(NonCommensurateRates, input)
WLMMSE_DEFINE_ERROR(NotPositiveDefinite, numerical)
WLMMSE_DEFINE_ERROR(NegativeIntegrand, numerical)
WLMMSE_DEFINE_ERROR(NoConvergence, numerical)
WLMMSE_DEFINE_ERROR(DegenerateProblem, numerical)
WLMMSE_DEFINE_ERROR(Infeasible, numerical)
WLMMSE_DEFINE_ERROR(TailEnergyExceeded, numerical)
WLMMSE_DEFINE_ERROR(InvariantViolation, invariant)

#undef WLMMSE_DEFINE_ERROR

} // namespace wlmmse
