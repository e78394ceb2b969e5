#pragma once

namespace kehsim {

/// Default drive-to-force calibration, newtons per volt of drive amplitude.
inline constexpr double kDefaultForceGain = 0.014;

/// Single-tone sinusoidal shaker drive.
///
/// The drive is specified the way a waveform generator is set up: amplitude
/// in millivolts peak-to-peak and frequency in hertz. `force_gain` maps the
/// drive voltage amplitude onto the base-excitation force acting on the
/// transducer's seismic mass.
struct VibrationProfile {
    double amplitude_mvpp = 1000.0;
    double frequency_hz = 25.0;
    double duration_s = 60.0;
    double force_gain = kDefaultForceGain;

    /// Throws ConfigError naming the first invalid field.
    void validate() const;

    [[nodiscard]] double omega() const;
    [[nodiscard]] double period_s() const { return 1.0 / frequency_hz; }
    [[nodiscard]] double force_peak_n() const { return force_gain * amplitude_mvpp / 2000.0; }
};

/// Drive force at time t, F(t) = gain * (A/2000) * sin(2 pi f t).
[[nodiscard]] double force_at(const VibrationProfile& profile, double t);

}  // namespace kehsim
