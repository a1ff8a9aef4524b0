#pragma once

#include <stdexcept>
#include <string>

namespace saferl {

// Base of every error raised by the library. Subclasses name the failing
// contract so callers can branch on type instead of message text.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SAFERL_DEFINE_ERROR(Name)                                  \
    class Name : public Error {                                    \
    public:                                                        \
        explicit Name(const std::string& what) : Error(what) {}    \
    }

SAFERL_DEFINE_ERROR(ConfigError);
SAFERL_DEFINE_ERROR(InfeasibleStart);
SAFERL_DEFINE_ERROR(MissingKeypoint);
SAFERL_DEFINE_ERROR(OutOfJointLimits);
SAFERL_DEFINE_ERROR(ClockSkew);
SAFERL_DEFINE_ERROR(GoalSamplingExhausted);
SAFERL_DEFINE_ERROR(ResampleBudgetExhausted);
SAFERL_DEFINE_ERROR(EpisodeAlreadyDone);
SAFERL_DEFINE_ERROR(EmptyBuffer);
SAFERL_DEFINE_ERROR(ProtocolViolation);
SAFERL_DEFINE_ERROR(ProtocolTimeout);

#undef SAFERL_DEFINE_ERROR

}  // namespace saferl
