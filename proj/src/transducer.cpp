#include "kehsim/transducer.hpp"

#include "kehsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace kehsim {

namespace {

constexpr int kMaxEventsPerStep = 16;
constexpr int kMaxRootIterations = 80;

/// State augmented with the flow integrals.
struct Aug {
    double x, v, vp;
    double work, damping, leakage, electrical, charge;
};

struct Coeffs {
    double inv_mass, c, k, theta, inv_cp, inv_rp;

    explicit Coeffs(const PiezoModel& m)
        : inv_mass(1.0 / m.mass_kg),
          c(m.damping()),
          k(m.stiffness()),
          theta(m.coupling_n_per_v),
          inv_cp(1.0 / m.cp_farad),
          inv_rp(1.0 / m.rp_ohm) {}
};

enum class Drive { Prescribed, Blocked, Forward, Reverse };

Drive drive_of(Conduction mode) {
    switch (mode) {
        case Conduction::Forward: return Drive::Forward;
        case Conduction::Reverse: return Drive::Reverse;
        case Conduction::Blocked: break;
    }
    return Drive::Blocked;
}

inline Aug deriv(const Coeffs& co, Drive drive, double i_prescribed, const Aug& y, double force) {
    Aug d{};
    d.x = y.v;
    d.v = (force - co.c * y.v - co.k * y.x - co.theta * y.vp) * co.inv_mass;
    d.work = force * y.v;
    d.damping = co.c * y.v * y.v;
    d.leakage = y.vp * y.vp * co.inv_rp;
    const double source = co.theta * y.v - y.vp * co.inv_rp;
    switch (drive) {
        case Drive::Prescribed:
            d.vp = (source - i_prescribed) * co.inv_cp;
            d.electrical = y.vp * i_prescribed;
            d.charge = i_prescribed;
            break;
        case Drive::Blocked:
            d.vp = source * co.inv_cp;
            d.electrical = 0.0;
            d.charge = 0.0;
            break;
        case Drive::Forward:
            d.vp = 0.0;
            d.electrical = y.vp * source;
            d.charge = source;
            break;
        case Drive::Reverse:
            d.vp = 0.0;
            d.electrical = y.vp * source;
            d.charge = -source;
            break;
    }
    return d;
}

inline Aug axpy(const Aug& y, double h, const Aug& d) {
    return {y.x + h * d.x,          y.v + h * d.v,          y.vp + h * d.vp,
            y.work + h * d.work,    y.damping + h * d.damping, y.leakage + h * d.leakage,
            y.electrical + h * d.electrical, y.charge + h * d.charge};
}

Aug rk4(const Coeffs& co, Drive drive, double i_prescribed, const Aug& y0, const Forcing& forcing,
        double t, double h) {
    const double f0 = forcing.at(t);
    const double fh = forcing.at(t + 0.5 * h);
    const double f1 = forcing.at(t + h);
    const Aug k1 = deriv(co, drive, i_prescribed, y0, f0);
    const Aug k2 = deriv(co, drive, i_prescribed, axpy(y0, 0.5 * h, k1), fh);
    const Aug k3 = deriv(co, drive, i_prescribed, axpy(y0, 0.5 * h, k2), fh);
    const Aug k4 = deriv(co, drive, i_prescribed, axpy(y0, h, k3), f1);
    const double w = h / 6.0;
    auto comb = [w](double a, double b1, double b2, double b3, double b4) {
        return a + w * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    };
    return {comb(y0.x, k1.x, k2.x, k3.x, k4.x),
            comb(y0.v, k1.v, k2.v, k3.v, k4.v),
            comb(y0.vp, k1.vp, k2.vp, k3.vp, k4.vp),
            comb(y0.work, k1.work, k2.work, k3.work, k4.work),
            comb(y0.damping, k1.damping, k2.damping, k3.damping, k4.damping),
            comb(y0.leakage, k1.leakage, k2.leakage, k3.leakage, k4.leakage),
            comb(y0.electrical, k1.electrical, k2.electrical, k3.electrical, k4.electrical),
            comb(y0.charge, k1.charge, k2.charge, k3.charge, k4.charge)};
}

void check_step(const PiezoModel& model, double dt) {
    if (!(dt > 0.0) || dt > model.max_step() * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "step size dt=" << dt << " s outside (0, " << model.max_step()
           << "] (1/(200 f0))";
        throw ConfigError(os.str(), "sim.dt_s");
    }
}

Aug lift(const PiezoState& s) { return {s.x_m, s.v_mps, s.vp_v, 0, 0, 0, 0, 0}; }

void accumulate(TransducerFlows& flows, const Aug& y) {
    flows.work_in_j += y.work;
    flows.damping_j += y.damping;
    flows.leakage_j += y.leakage;
    flows.electrical_j += y.electrical;
    flows.charge_c += y.charge;
}

/// Positive once the current mode has been left.
double guard(const Coeffs& co, Conduction mode, const Aug& y, double v_clamp) {
    switch (mode) {
        case Conduction::Blocked: return std::abs(y.vp) - v_clamp;
        case Conduction::Forward: return -(co.theta * y.v - v_clamp * co.inv_rp);
        case Conduction::Reverse: return co.theta * y.v + v_clamp * co.inv_rp;
    }
    return 0.0;
}

Conduction select_mode(const Coeffs& co, const PiezoState& s, double v_clamp) {
    if (s.vp_v >= v_clamp && co.theta * s.v_mps - v_clamp * co.inv_rp > 0.0) {
        return Conduction::Forward;
    }
    if (s.vp_v <= -v_clamp && co.theta * s.v_mps + v_clamp * co.inv_rp < 0.0) {
        return Conduction::Reverse;
    }
    return Conduction::Blocked;
}

/// Moves v_p onto the clamp, passing the surplus capacitor charge through the bridge.
void snap_to_clamp(const PiezoModel& model, PiezoState& s, double v_clamp, TransducerFlows& flows) {
    const double mag = std::abs(s.vp_v);
    if (mag <= v_clamp) {
        return;
    }
    flows.charge_c += model.cp_farad * (mag - v_clamp);
    flows.electrical_j += 0.5 * model.cp_farad * (mag * mag - v_clamp * v_clamp);
    s.vp_v = std::copysign(v_clamp, s.vp_v);
}

}  // namespace

// -----------------------------------------------------------------------------

void PiezoModel::validate() const {
    auto positive = [](double v, const char* key) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError("must be > 0", key);
        }
    };
    positive(f0_hz, "model.f0_hz");
    positive(q_factor, "model.q_factor");
    positive(mass_kg, "model.mass_kg");
    positive(cp_farad, "model.cp_farad");
    positive(rp_ohm, "model.rp_ohm");
    if (!(coupling_n_per_v >= 0.0) || !std::isfinite(coupling_n_per_v)) {
        throw ConfigError("must be >= 0", "model.coupling_n_per_v");
    }
}

double PiezoModel::stiffness() const {
    const double w0 = 2.0 * std::numbers::pi * f0_hz;
    return mass_kg * w0 * w0;
}

double PiezoModel::damping() const { return 2.0 * std::numbers::pi * f0_hz * mass_kg / q_factor; }

TransducerFlows& TransducerFlows::operator+=(const TransducerFlows& o) {
    work_in_j += o.work_in_j;
    damping_j += o.damping_j;
    leakage_j += o.leakage_j;
    electrical_j += o.electrical_j;
    charge_c += o.charge_c;
    return *this;
}

double stored_energy(const PiezoModel& model, const PiezoState& s) {
    return 0.5 * model.mass_kg * s.v_mps * s.v_mps + 0.5 * model.stiffness() * s.x_m * s.x_m +
           0.5 * model.cp_farad * s.vp_v * s.vp_v;
}

double Forcing::at(double t) const {
    return amplitude_n == 0.0 ? offset_n : offset_n + amplitude_n * std::sin(omega * t);
}

PiezoState step(const PiezoModel& model, const PiezoState& state, double force_n, double i_out_a,
                double dt_s, TransducerFlows* flows) {
    return step(model, state, Forcing::constant(force_n), 0.0, i_out_a, dt_s, flows);
}

PiezoState step(const PiezoModel& model, const PiezoState& state, const Forcing& forcing, double t,
                double i_out_a, double dt_s, TransducerFlows* flows) {
    check_step(model, dt_s);
    const Coeffs co(model);
    const Aug y = rk4(co, Drive::Prescribed, i_out_a, lift(state), forcing, t, dt_s);
    if (flows != nullptr) {
        accumulate(*flows, y);
    }
    return {y.x, y.v, y.vp};
}

void bridge_step(const PiezoModel& model, BridgeState& bridge, const Forcing& forcing, double t,
                 double v_clamp, double dt_s, TransducerFlows& flows) {
    check_step(model, dt_s);
    const Coeffs co(model);

    // Reconcile with a clamp that moved since the previous step.
    if (bridge.mode != Conduction::Blocked && std::abs(bridge.piezo.vp_v) < v_clamp) {
        bridge.mode = Conduction::Blocked;
    }
    if (std::abs(bridge.piezo.vp_v) > v_clamp) {
        snap_to_clamp(model, bridge.piezo, v_clamp, flows);
        bridge.mode = select_mode(co, bridge.piezo, v_clamp);
    }

    double tt = t;
    double remaining = dt_s;
    const double time_tol = 1e-12 * dt_s;
    for (int events = 0;; ++events) {
        const Aug y0 = lift(bridge.piezo);
        const Drive drive = drive_of(bridge.mode);
        Aug yb = rk4(co, drive, 0.0, y0, forcing, tt, remaining);
        double gb = guard(co, bridge.mode, yb, v_clamp);
        if (gb <= 0.0 || events >= kMaxEventsPerStep) {
            accumulate(flows, yb);
            bridge.piezo = {yb.x, yb.v, yb.vp};
            if (bridge.mode != Conduction::Blocked) {
                bridge.piezo.vp_v = std::copysign(v_clamp, bridge.piezo.vp_v);
            }
            return;
        }

        // Illinois regula falsi on the event time in (0, remaining].
        double a = 0.0;
        double ga = std::min(guard(co, bridge.mode, y0, v_clamp), 0.0);
        double b = remaining;
        int side = 0;
        for (int it = 0; it < kMaxRootIterations && b - a > time_tol; ++it) {
            double c = (a * gb - b * ga) / (gb - ga);
            if (!(c > a && c < b)) {
                c = 0.5 * (a + b);
            }
            const Aug yc = rk4(co, drive, 0.0, y0, forcing, tt, c);
            const double gc = guard(co, bridge.mode, yc, v_clamp);
            if (gc > 0.0) {
                b = c;
                gb = gc;
                yb = yc;
                if (side == -1) {
                    ga *= 0.5;
                }
                side = -1;
            } else {
                a = c;
                ga = gc;
                if (side == 1) {
                    gb *= 0.5;
                }
                side = 1;
            }
        }

        accumulate(flows, yb);
        bridge.piezo = {yb.x, yb.v, yb.vp};
        if (bridge.mode == Conduction::Blocked) {
            snap_to_clamp(model, bridge.piezo, v_clamp, flows);
        } else {
            bridge.piezo.vp_v = std::copysign(v_clamp, bridge.piezo.vp_v);
        }
        bridge.mode = select_mode(co, bridge.piezo, v_clamp);
        tt += b;
        remaining -= b;
        if (remaining <= time_tol) {
            return;
        }
    }
}

double open_circuit_amplitude(const PiezoModel& model, const VibrationProfile& profile, double dt_s,
                              double tolerance) {
    model.validate();
    profile.validate();
    if (profile.amplitude_mvpp == 0.0) {
        return 0.0;
    }
    constexpr int kMaxCycles = 2000;
    constexpr int kStableCycles = 5;
    const Forcing forcing = Forcing::from(profile);
    const double inf = std::numeric_limits<double>::infinity();

    BridgeState bridge;
    TransducerFlows flows;
    long long n = 0;
    double previous_peak = -1.0;
    int stable = 0;
    for (int cycle = 0; cycle < kMaxCycles; ++cycle) {
        const double cycle_end = (cycle + 1) * profile.period_s();
        double peak = 0.0;
        while (static_cast<double>(n) * dt_s < cycle_end) {
            bridge_step(model, bridge, forcing, static_cast<double>(n) * dt_s, inf, dt_s, flows);
            ++n;
            peak = std::max(peak, std::abs(bridge.piezo.vp_v));
        }
        if (previous_peak > 0.0 && std::abs(peak - previous_peak) < tolerance * peak) {
            if (++stable >= kStableCycles) {
                return peak;
            }
        } else {
            stable = 0;
        }
        previous_peak = peak;
    }
    throw ConvergenceError("open-circuit amplitude did not settle within 2000 cycles");
}

std::vector<double> linear_grid(double v_max, int points) {
    if (points < 1) {
        throw ArgumentError("grid needs at least one point");
    }
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        grid[static_cast<std::size_t>(i)] = points == 1 ? 0.0 : v_max * i / (points - 1);
    }
    return grid;
}

IVCurve measure_iv_curve(const PiezoModel& model, const VibrationProfile& profile,
                         std::span<const double> v_grid, int settle_cycles,
                         const IVOptions& options) {
    model.validate();
    profile.validate();
    if (v_grid.empty()) {
        throw ArgumentError("IV sweep grid is empty");
    }
    if (v_grid.front() < 0.0) {
        throw ArgumentError("IV sweep grid must start at >= 0 V");
    }
    for (std::size_t i = 1; i < v_grid.size(); ++i) {
        if (!(v_grid[i] > v_grid[i - 1])) {
            throw ArgumentError("IV sweep grid must be strictly increasing");
        }
    }
    if (settle_cycles < 0 || options.average_cycles < 1) {
        throw ArgumentError("settle_cycles must be >= 0 and average_cycles >= 1");
    }

    const Forcing forcing = Forcing::from(profile);
    const double dt = options.dt_s;
    const auto steps_for = [&](int cycles) {
        return static_cast<long long>(std::llround(cycles * profile.period_s() / dt));
    };
    const long long settle_steps = steps_for(settle_cycles);
    const long long average_steps = std::max<long long>(1, steps_for(options.average_cycles));

    IVCurve curve;
    BridgeState bridge;
    long long n = 0;
    for (const double v_dc : v_grid) {
        const double clamp = v_dc + 2.0 * options.diode_drop_v;
        TransducerFlows flows;
        for (long long i = 0; i < settle_steps; ++i, ++n) {
            bridge_step(model, bridge, forcing, static_cast<double>(n) * dt, clamp, dt, flows);
        }
        flows = {};
        double x_peak = 0.0;
        for (long long i = 0; i < average_steps; ++i, ++n) {
            bridge_step(model, bridge, forcing, static_cast<double>(n) * dt, clamp, dt, flows);
            x_peak = std::max(x_peak, std::abs(bridge.piezo.x_m));
        }
        const double current = flows.charge_c / (static_cast<double>(average_steps) * dt);
        curve.samples.push_back({v_dc, std::max(current, 0.0), x_peak});
        if (current <= 0.0) {
            break;
        }
    }

    // Open-circuit voltage: extrapolate the last two conducting points to zero
    // current, bounded by the first non-conducting grid point.
    const auto& s = curve.samples;
    const bool reached_zero = s.back().current_a <= 0.0;
    if (reached_zero && s.size() >= 3) {
        const IVSample& p1 = s[s.size() - 3];
        const IVSample& p2 = s[s.size() - 2];
        double voc = p2.voltage_v;
        if (p1.current_a > p2.current_a) {
            voc = p2.voltage_v +
                  p2.current_a * (p2.voltage_v - p1.voltage_v) / (p1.current_a - p2.current_a);
        }
        curve.voc_v = std::clamp(voc, p2.voltage_v, s.back().voltage_v);
    } else if (reached_zero && s.size() == 2) {
        curve.voc_v = s.back().voltage_v;
    } else if (reached_zero) {
        curve.voc_v = 0.0;
    } else {
        const double peak = open_circuit_amplitude(model, profile, dt);
        curve.voc_v = std::max(0.0, peak - 2.0 * options.diode_drop_v);
    }
    return curve;
}

}  // namespace kehsim
