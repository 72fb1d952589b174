#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "formctrl/quadrature.hpp"

namespace formctrl {

enum class ScheduleClass { piecewise_constant, piecewise_c2, smooth_c2, smooth_cinf };

inline std::string to_string(ScheduleClass c) {
    switch (c) {
        case ScheduleClass::piecewise_constant: return "piecewise_constant";
        case ScheduleClass::piecewise_c2: return "piecewise_C2";
        case ScheduleClass::smooth_c2: return "smooth_C2";
        case ScheduleClass::smooth_cinf: return "smooth_Cinf";
    }
    return "unknown";
}

inline ScheduleClass schedule_class_from_string(const std::string& s) {
    if (s == "piecewise_constant") return ScheduleClass::piecewise_constant;
    if (s == "piecewise_C2") return ScheduleClass::piecewise_c2;
    if (s == "smooth_C2") return ScheduleClass::smooth_c2;
    if (s == "smooth_Cinf") return ScheduleClass::smooth_cinf;
    throw std::invalid_argument("unknown schedule class: " + s);
}

enum class RampKind { quintic, bump };

namespace ramps {

// Quintic smoothstep on [0,1]: C^2 junctions with the flat pieces.
inline double quintic(double x) { return ((6.0 * x - 15.0) * x + 10.0) * x * x * x; }
inline double quintic_d1(double x) { return 30.0 * x * x * (x - 1.0) * (x - 1.0); }
inline double quintic_d2(double x) { return 60.0 * x * (2.0 * x - 1.0) * (x - 1.0); }

inline double bump_density(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return std::exp(-1.0 / (x * (1.0 - x)));
}

// Cumulative integral of the bump density, precomputed once on 64 panels with
// 8-point Gauss-Legendre; evaluation integrates the partial panel on the fly.
class BumpTable {
public:
    static const BumpTable& instance() {
        static const BumpTable table;
        return table;
    }

    double cumulative(double x) const {
        if (x <= 0.0) return 0.0;
        if (x >= 1.0) return total_;
        const int panel = std::min(static_cast<int>(x * kPanels), kPanels - 1);
        const double a = static_cast<double>(panel) / kPanels;
        return edges_[panel] + gauss(a, x);
    }

    double total() const { return total_; }

private:
    static constexpr int kPanels = 64;

    BumpTable() {
        edges_[0] = 0.0;
        for (int i = 0; i < kPanels; ++i) {
            const double a = static_cast<double>(i) / kPanels;
            const double b = static_cast<double>(i + 1) / kPanels;
            edges_[i + 1] = edges_[i] + gauss(a, b);
        }
        total_ = edges_[kPanels];
    }

    static double gauss(double a, double b) {
        // 8-point Gauss-Legendre nodes/weights on [-1,1].
        static constexpr std::array<double, 8> x = {
            -0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
            -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
            0.7966664774136267,  0.9602898564975363};
        static constexpr std::array<double, 8> w = {
            0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
            0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        double sum = 0.0;
        for (int i = 0; i < 8; ++i) sum += w[i] * bump_density(mid + half * x[i]);
        return sum * half;
    }

    std::array<double, kPanels + 1> edges_{};
    double total_ = 0.0;
};

inline double bump(double x) {
    const auto& t = BumpTable::instance();
    return t.cumulative(x) / t.total();
}
inline double bump_d1(double x) { return bump_density(x) / BumpTable::instance().total(); }
inline double bump_d2(double x) {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    const double g = x * (1.0 - x);
    return bump_d1(x) * (1.0 - 2.0 * x) / (g * g);
}

inline double value(RampKind k, double x) { return k == RampKind::quintic ? quintic(x) : bump(x); }
inline double d1(RampKind k, double x) {
    return k == RampKind::quintic ? quintic_d1(x) : bump_d1(x);
}
inline double d2(RampKind k, double x) {
    return k == RampKind::quintic ? quintic_d2(x) : bump_d2(x);
}

}  // namespace ramps

inline std::string to_string(RampKind k) {
    return k == RampKind::quintic ? "quintic_smoothstep" : "bump";
}

inline RampKind ramp_kind_from_string(const std::string& s) {
    if (s == "quintic_smoothstep" || s == "quintic") return RampKind::quintic;
    if (s == "bump") return RampKind::bump;
    throw std::invalid_argument("unknown ramp kind: " + s);
}

/// Structured description of one segment; this is what serializes. Custom
/// segments carry opaque evaluators and cannot be written to disk.
struct SegmentSpec {
    enum class Kind { constant, linear, sinusoid, ramp, custom } kind = Kind::constant;
    std::vector<double> values;                     // constant
    std::vector<double> slope, intercept;           // linear: a*t + b in absolute time
    std::vector<double> amp, omega, phase, offset;  // sinusoid: amp*sin(omega*t+phase)+offset
    std::vector<double> from, to;                   // ramp endpoints per channel
    double ramp_t0 = 0.0, ramp_t1 = 0.0;            // ramp window in absolute time
    RampKind ramp_kind = RampKind::quintic;
};

struct ChannelFunction {
    std::function<double(double)> value;
    std::function<double(double)> deriv;
    std::function<double(double)> deriv2;
};

struct Segment {
    SegmentSpec spec;
    std::vector<ChannelFunction> fns;  // one per channel

    static Segment constant(std::vector<double> values) {
        Segment s;
        s.spec.kind = SegmentSpec::Kind::constant;
        s.spec.values = std::move(values);
        for (double v : s.spec.values)
            s.fns.push_back({[v](double) { return v; }, [](double) { return 0.0; },
                             [](double) { return 0.0; }});
        return s;
    }

    static Segment linear(std::vector<double> slope, std::vector<double> intercept) {
        if (slope.size() != intercept.size())
            throw std::invalid_argument("Segment::linear: size mismatch");
        Segment s;
        s.spec.kind = SegmentSpec::Kind::linear;
        s.spec.slope = std::move(slope);
        s.spec.intercept = std::move(intercept);
        for (std::size_t i = 0; i < s.spec.slope.size(); ++i) {
            const double a = s.spec.slope[i], b = s.spec.intercept[i];
            s.fns.push_back({[a, b](double t) { return a * t + b; },
                             [a](double) { return a; }, [](double) { return 0.0; }});
        }
        return s;
    }

    static Segment sinusoid(std::vector<double> amp, std::vector<double> omega,
                            std::vector<double> phase, std::vector<double> offset) {
        const std::size_t p = amp.size();
        if (omega.size() != p || phase.size() != p || offset.size() != p)
            throw std::invalid_argument("Segment::sinusoid: size mismatch");
        Segment s;
        s.spec.kind = SegmentSpec::Kind::sinusoid;
        s.spec.amp = std::move(amp);
        s.spec.omega = std::move(omega);
        s.spec.phase = std::move(phase);
        s.spec.offset = std::move(offset);
        for (std::size_t i = 0; i < p; ++i) {
            const double a = s.spec.amp[i], w = s.spec.omega[i], ph = s.spec.phase[i],
                         off = s.spec.offset[i];
            s.fns.push_back({[=](double t) { return a * std::sin(w * t + ph) + off; },
                             [=](double t) { return a * w * std::cos(w * t + ph); },
                             [=](double t) { return -a * w * w * std::sin(w * t + ph); }});
        }
        return s;
    }

    static Segment ramp(std::vector<double> from, std::vector<double> to, double t0, double t1,
                        RampKind kind) {
        if (from.size() != to.size()) throw std::invalid_argument("Segment::ramp: size mismatch");
        if (!(t1 > t0)) throw std::invalid_argument("Segment::ramp: empty window");
        Segment s;
        s.spec.kind = SegmentSpec::Kind::ramp;
        s.spec.from = std::move(from);
        s.spec.to = std::move(to);
        s.spec.ramp_t0 = t0;
        s.spec.ramp_t1 = t1;
        s.spec.ramp_kind = kind;
        const double width = t1 - t0;
        for (std::size_t i = 0; i < s.spec.from.size(); ++i) {
            const double lo = s.spec.from[i], jump = s.spec.to[i] - s.spec.from[i];
            auto x_of = [t0, width](double t) {
                return std::clamp((t - t0) / width, 0.0, 1.0);
            };
            s.fns.push_back(
                {[=](double t) { return lo + jump * ramps::value(kind, x_of(t)); },
                 [=](double t) { return jump * ramps::d1(kind, x_of(t)) / width; },
                 [=](double t) { return jump * ramps::d2(kind, x_of(t)) / (width * width); }});
        }
        return s;
    }

    static Segment custom(std::vector<ChannelFunction> fns) {
        Segment s;
        s.spec.kind = SegmentSpec::Kind::custom;
        s.fns = std::move(fns);
        return s;
    }

    int channels() const { return static_cast<int>(fns.size()); }
    bool is_constant() const { return spec.kind == SegmentSpec::Kind::constant; }
};

/// Vector-valued control on [0, T]: breakpoints t_1 < ... < t_{v+1} delimit
/// the segments, each segment evaluates per channel with two derivatives.
/// Evaluation at a breakpoint takes the right segment (the left one at T).
class ControlSchedule {
public:
    ControlSchedule(std::vector<double> breakpoints, std::vector<Segment> segments,
                    ScheduleClass cls)
        : breakpoints_(std::move(breakpoints)), segments_(std::move(segments)), class_(cls) {
        if (segments_.empty()) throw std::invalid_argument("ControlSchedule: no segments");
        if (breakpoints_.size() != segments_.size() + 1)
            throw std::invalid_argument("ControlSchedule: breakpoints must bracket segments");
        if (std::abs(breakpoints_.front()) > 1e-12)
            throw std::invalid_argument("ControlSchedule: horizon must start at 0");
        for (std::size_t i = 0; i + 1 < breakpoints_.size(); ++i)
            if (!(breakpoints_[i] < breakpoints_[i + 1]))
                throw std::invalid_argument("ControlSchedule: breakpoints must increase");
        channels_ = segments_.front().channels();
        for (const Segment& s : segments_)
            if (s.channels() != channels_)
                throw std::invalid_argument("ControlSchedule: inconsistent channel counts");
        if (class_ == ScheduleClass::piecewise_constant)
            for (const Segment& s : segments_)
                if (!s.is_constant())
                    throw std::invalid_argument(
                        "ControlSchedule: piecewise_constant requires constant segments");
    }

    static ControlSchedule constant(double horizon, std::vector<double> u) {
        return ControlSchedule({0.0, horizon}, {Segment::constant(std::move(u))},
                               ScheduleClass::piecewise_constant);
    }

    static ControlSchedule piecewise_constant(std::vector<double> breakpoints,
                                              std::vector<std::vector<double>> values) {
        std::vector<Segment> segs;
        segs.reserve(values.size());
        for (auto& v : values) segs.push_back(Segment::constant(std::move(v)));
        return ControlSchedule(std::move(breakpoints), std::move(segs),
                               ScheduleClass::piecewise_constant);
    }

    double horizon() const { return breakpoints_.back(); }
    int channels() const { return channels_; }
    ScheduleClass schedule_class() const { return class_; }
    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<Segment>& segments() const { return segments_; }
    int segment_count() const { return static_cast<int>(segments_.size()); }

    int segment_index(double t) const {
        check_inside(t);
        const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
        const int idx = static_cast<int>(it - breakpoints_.begin()) - 1;
        return std::clamp(idx, 0, segment_count() - 1);
    }

    Eigen::VectorXd evaluate(double t) const {
        const Segment& seg = segments_[segment_index(t)];
        Eigen::VectorXd u(channels_);
        for (int i = 0; i < channels_; ++i) u(i) = seg.fns[i].value(t);
        return u;
    }

    Eigen::VectorXd derivative(double t) const {
        const Segment& seg = segments_[segment_index(t)];
        Eigen::VectorXd du(channels_);
        for (int i = 0; i < channels_; ++i) du(i) = seg.fns[i].deriv(t);
        return du;
    }

    // Continuous extension of one segment to closed subintervals; quadrature
    // must use these instead of the right-continuous lookup, otherwise the
    // next segment's value leaks in at the right endpoint.
    Eigen::VectorXd evaluate_in(int segment, double t) const {
        const Segment& seg = segments_[static_cast<std::size_t>(segment)];
        Eigen::VectorXd u(channels_);
        for (int i = 0; i < channels_; ++i) u(i) = seg.fns[i].value(t);
        return u;
    }

    Eigen::VectorXd derivative_in(int segment, double t) const {
        const Segment& seg = segments_[static_cast<std::size_t>(segment)];
        Eigen::VectorXd du(channels_);
        for (int i = 0; i < channels_; ++i) du(i) = seg.fns[i].deriv(t);
        return du;
    }

    bool at_breakpoint(double t, double tol = 1e-12) const {
        for (double b : breakpoints_)
            if (std::abs(t - b) <= tol) return true;
        return false;
    }

private:
    void check_inside(double t) const {
        if (t < -1e-12 || t > horizon() + 1e-12) {
            std::ostringstream os;
            os << "ControlSchedule: t = " << t << " outside horizon [0, " << horizon() << "]";
            throw std::invalid_argument(os.str());
        }
    }

    std::vector<double> breakpoints_;
    std::vector<Segment> segments_;
    ScheduleClass class_;
    int channels_ = 0;
};

/// Sorted union of two breakpoint lists with 1e-12 coincidence tolerance.
inline std::vector<double> merge_breakpoints(const std::vector<double>& a,
                                             const std::vector<double>& b, double tol = 1e-12) {
    std::vector<double> merged;
    merged.reserve(a.size() + b.size());
    merged.insert(merged.end(), a.begin(), a.end());
    merged.insert(merged.end(), b.begin(), b.end());
    std::sort(merged.begin(), merged.end());
    std::vector<double> out;
    for (double t : merged)
        if (out.empty() || t - out.back() > tol) out.push_back(t);
    return out;
}

/// Per-channel L1 distance between two schedules on the common horizon,
/// adaptive quadrature split at the union of breakpoints.
inline Eigen::VectorXd l1_distance(const ControlSchedule& s1, const ControlSchedule& s2,
                                   double tol = 1e-9) {
    if (std::abs(s1.horizon() - s2.horizon()) > 1e-12)
        throw std::invalid_argument("l1_distance: mismatched horizons");
    if (s1.channels() != s2.channels())
        throw std::invalid_argument("l1_distance: mismatched channel counts");
    const std::vector<double> knots = merge_breakpoints(s1.breakpoints(), s2.breakpoints());
    Eigen::VectorXd out(s1.channels());
    const double tol_each = tol / static_cast<double>(knots.size());
    for (int ch = 0; ch < s1.channels(); ++ch) {
        double total = 0.0;
        for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
            const double mid = 0.5 * (knots[j] + knots[j + 1]);
            const int seg1 = s1.segment_index(mid), seg2 = s2.segment_index(mid);
            const auto f = [&, ch, seg1, seg2](double t) {
                return std::abs(s1.evaluate_in(seg1, t)(ch) - s2.evaluate_in(seg2, t)(ch));
            };
            total += adaptive_simpson(f, knots[j], knots[j + 1], tol_each);
        }
        out(ch) = total;
    }
    return out;
}

/// Per-channel sum over segments of the L1 norm of the derivative. Exactly
/// zero for piecewise-constant schedules.
inline Eigen::VectorXd derivative_l1(const ControlSchedule& s, double tol = 1e-9) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(s.channels());
    if (s.schedule_class() == ScheduleClass::piecewise_constant) return out;
    const auto& bp = s.breakpoints();
    const double tol_each = tol / static_cast<double>(bp.size());
    for (int ch = 0; ch < s.channels(); ++ch) {
        double total = 0.0;
        for (int j = 0; j + 1 < static_cast<int>(bp.size()); ++j) {
            const auto f = [&, ch, j](double t) { return std::abs(s.derivative_in(j, t)(ch)); };
            total += adaptive_simpson(f, bp[j], bp[j + 1], tol_each);
        }
        out(ch) = total;
    }
    return out;
}

/// Per-channel total variation of a piecewise-constant schedule: the summed
/// jump magnitudes across interior breakpoints.
inline Eigen::VectorXd total_variation(const ControlSchedule& pc) {
    if (pc.schedule_class() != ScheduleClass::piecewise_constant)
        throw std::invalid_argument("total_variation: schedule must be piecewise_constant");
    Eigen::VectorXd tv = Eigen::VectorXd::Zero(pc.channels());
    for (int j = 0; j + 1 < pc.segment_count(); ++j)
        for (int ch = 0; ch < pc.channels(); ++ch)
            tv(ch) += std::abs(pc.segments()[j + 1].spec.values[ch] -
                               pc.segments()[j].spec.values[ch]);
    return tv;
}

struct MollifierParams {
    double delta;
    RampKind kind = RampKind::quintic;
};

/// Replace every interior jump of a piecewise-constant schedule by a centered
/// monotone ramp spanning [t_j - delta, t_j + delta]. The result agrees with
/// the input outside those windows, its per-channel derivative L1 equals the
/// input's total variation, and the L1 distance to the input shrinks linearly
/// in delta.
inline ControlSchedule mollify(const ControlSchedule& pc, const MollifierParams& params) {
    if (pc.schedule_class() != ScheduleClass::piecewise_constant)
        throw std::invalid_argument("mollify: schedule must be piecewise_constant");
    if (!(params.delta > 0.0)) throw std::invalid_argument("mollify: delta must be positive");
    const auto& bp = pc.breakpoints();
    double min_len = bp.back();
    for (std::size_t j = 0; j + 1 < bp.size(); ++j) min_len = std::min(min_len, bp[j + 1] - bp[j]);
    if (!(params.delta < 0.5 * min_len)) {
        std::ostringstream os;
        os << "mollify: delta = " << params.delta
           << " too large; must be below half the minimum segment length " << min_len;
        throw std::invalid_argument(os.str());
    }
    if (pc.segment_count() == 1) return pc;

    std::vector<double> nbp{0.0};
    std::vector<Segment> nsegs;
    for (int j = 0; j < pc.segment_count(); ++j) {
        const double seg_end = bp[j + 1];
        const std::vector<double>& cur = pc.segments()[j].spec.values;
        const bool last = (j + 1 == pc.segment_count());
        const double flat_end = last ? seg_end : seg_end - params.delta;
        nbp.push_back(flat_end);
        nsegs.push_back(Segment::constant(cur));
        if (!last) {
            const std::vector<double>& next = pc.segments()[j + 1].spec.values;
            const double t0 = seg_end - params.delta, t1 = seg_end + params.delta;
            nbp.push_back(t1);
            nsegs.push_back(Segment::ramp(cur, next, t0, t1, params.kind));
            // the following flat segment starts at t1; its constant spec is pushed
            // on the next loop iteration
        }
    }
    const ScheduleClass cls =
        params.kind == RampKind::quintic ? ScheduleClass::smooth_c2 : ScheduleClass::smooth_cinf;
    return ControlSchedule(std::move(nbp), std::move(nsegs), cls);
}

}  // namespace formctrl
