#include "kehsim/excitation.hpp"

#include "kehsim/errors.hpp"

#include <cmath>
#include <numbers>

namespace kehsim {

void VibrationProfile::validate() const {
    if (!(amplitude_mvpp >= 0.0) || !std::isfinite(amplitude_mvpp)) {
        throw ConfigError("must be a finite value >= 0", "profile.amplitude_mvpp");
    }
    if (!(frequency_hz > 0.0) || !std::isfinite(frequency_hz)) {
        throw ConfigError("must be > 0", "profile.frequency_hz");
    }
    if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
        throw ConfigError("must be > 0", "profile.duration_s");
    }
    if (!(force_gain > 0.0) || !std::isfinite(force_gain)) {
        throw ConfigError("must be > 0", "profile.force_gain");
    }
}

double VibrationProfile::omega() const { return 2.0 * std::numbers::pi * frequency_hz; }

double force_at(const VibrationProfile& profile, double t) {
    return profile.force_peak_n() * std::sin(profile.omega() * t);
}

}  // namespace kehsim
