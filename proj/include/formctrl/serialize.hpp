#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "formctrl/controls.hpp"
#include "formctrl/linops.hpp"
#include "formctrl/system.hpp"

namespace formctrl {

using json = nlohmann::json;

// --- matrices ---------------------------------------------------------------

inline json matrix_to_json(const HermitianMatrix& a) {
    const int dim = a.dim();
    json re = json::array(), im = json::array();
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            re.push_back(std::real(a.mat()(i, j)));
            im.push_back(std::imag(a.mat()(i, j)));
        }
    return json{{"dim", dim}, {"re", std::move(re)}, {"im", std::move(im)}};
}

inline HermitianMatrix matrix_from_json(const json& j) {
    const int dim = j.at("dim").get<int>();
    const auto& re = j.at("re");
    const auto& im = j.at("im");
    if (static_cast<int>(re.size()) != dim * dim || static_cast<int>(im.size()) != dim * dim)
        throw std::invalid_argument("matrix: re/im must hold dim*dim row-major entries");
    Matrix m(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k) {
            const int flat = i * dim + k;
            m(i, k) = Complex(re[flat].get<double>(), im[flat].get<double>());
        }
    return HermitianMatrix(std::move(m));
}

// --- systems -----------------------------------------------------------------

inline json system_to_json(const FormLinearSystem& system, json model = json()) {
    json interactions = json::array();
    for (const HermitianMatrix& h : system.interactions())
        interactions.push_back(matrix_to_json(h));
    json box = json::array();
    for (const auto& [lo, hi] : system.control_box()) box.push_back(json::array({lo, hi}));
    json out{{"dim", system.dim()},
             {"h0", matrix_to_json(system.h0())},
             {"interactions", std::move(interactions)},
             {"control_box", std::move(box)},
             {"m", system.m()}};
    if (!model.is_null()) out["model"] = std::move(model);
    return out;
}

inline FormLinearSystem system_from_json(const json& j) {
    HermitianMatrix h0 = matrix_from_json(j.at("h0"));
    std::vector<HermitianMatrix> interactions;
    for (const json& h : j.at("interactions")) interactions.push_back(matrix_from_json(h));
    ControlBox box;
    for (const json& pair : j.at("control_box")) {
        if (pair.size() != 2) throw std::invalid_argument("control_box entries must be [lo, hi]");
        box.emplace_back(pair[0].get<double>(), pair[1].get<double>());
    }
    if (j.contains("dim") && j.at("dim").get<int>() != h0.dim())
        throw std::invalid_argument("system: dim field disagrees with h0");
    if (j.contains("m"))
        return FormLinearSystem::with_bound(std::move(h0), std::move(interactions),
                                            std::move(box), j.at("m").get<double>());
    return FormLinearSystem::create(std::move(h0), std::move(interactions), std::move(box));
}

// --- schedules ---------------------------------------------------------------

inline json segment_to_json(const Segment& seg) {
    const SegmentSpec& spec = seg.spec;
    switch (spec.kind) {
        case SegmentSpec::Kind::constant:
            return json{{"const", spec.values}};
        case SegmentSpec::Kind::linear:
            return json{{"kind", "linear"}, {"slope", spec.slope}, {"intercept", spec.intercept}};
        case SegmentSpec::Kind::sinusoid:
            return json{{"kind", "sin"},
                        {"amp", spec.amp},
                        {"omega", spec.omega},
                        {"phase", spec.phase},
                        {"offset", spec.offset}};
        case SegmentSpec::Kind::ramp:
            return json{{"kind", "ramp"},       {"ramp", to_string(spec.ramp_kind)},
                        {"from", spec.from},    {"to", spec.to},
                        {"t0", spec.ramp_t0},   {"t1", spec.ramp_t1}};
        case SegmentSpec::Kind::custom:
            throw std::invalid_argument("custom segments cannot be serialized");
    }
    throw std::logic_error("unreachable");
}

inline Segment segment_from_json(const json& j) {
    if (j.contains("const")) return Segment::constant(j.at("const").get<std::vector<double>>());
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "linear")
        return Segment::linear(j.at("slope").get<std::vector<double>>(),
                               j.at("intercept").get<std::vector<double>>());
    if (kind == "sin")
        return Segment::sinusoid(
            j.at("amp").get<std::vector<double>>(), j.at("omega").get<std::vector<double>>(),
            j.at("phase").get<std::vector<double>>(), j.at("offset").get<std::vector<double>>());
    if (kind == "ramp")
        return Segment::ramp(j.at("from").get<std::vector<double>>(),
                             j.at("to").get<std::vector<double>>(), j.at("t0").get<double>(),
                             j.at("t1").get<double>(),
                             ramp_kind_from_string(j.at("ramp").get<std::string>()));
    throw std::invalid_argument("unknown segment kind: " + kind);
}

inline json schedule_to_json(const ControlSchedule& s) {
    json segments = json::array();
    for (const Segment& seg : s.segments()) segments.push_back(segment_to_json(seg));
    return json{{"T", s.horizon()},
                {"channels", s.channels()},
                {"class", to_string(s.schedule_class())},
                {"breakpoints", s.breakpoints()},
                {"segments", std::move(segments)}};
}

inline ControlSchedule schedule_from_json(const json& j) {
    std::vector<Segment> segments;
    for (const json& seg : j.at("segments")) segments.push_back(segment_from_json(seg));
    ControlSchedule out(j.at("breakpoints").get<std::vector<double>>(), std::move(segments),
                        schedule_class_from_string(j.at("class").get<std::string>()));
    if (j.contains("T") && std::abs(j.at("T").get<double>() - out.horizon()) > 1e-12)
        throw std::invalid_argument("schedule: T field disagrees with the last breakpoint");
    if (j.contains("channels") && j.at("channels").get<int>() != out.channels())
        throw std::invalid_argument("schedule: channels field disagrees with the segments");
    return out;
}

// --- constants ---------------------------------------------------------------

inline json constants_to_json(const SystemConstants& k) {
    return json{{"m", k.m}, {"c", k.c}, {"M", k.M}, {"L", k.L}, {"L_c2", k.L_c2}};
}

inline SystemConstants constants_from_json(const json& j) {
    SystemConstants k = SystemConstants::make(j.at("m").get<double>(), j.at("c").get<double>(),
                                              j.at("M").get<double>());
    const double stored_L = j.at("L").get<double>();
    if (std::abs(stored_L - k.L) > 1e-12 * std::max(1.0, std::abs(k.L)))
        throw std::invalid_argument("constants: stored L does not equal c^11 exp(4 c^2 M)");
    return k;
}

// --- files -------------------------------------------------------------------

/// Parse a JSON file, turning byte offsets of parse errors into line numbers.
inline json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        const std::size_t limit = std::min(e.byte, text.size());
        for (std::size_t i = 0; i < limit; ++i)
            if (text[i] == '\n') ++line;
        std::ostringstream os;
        os << path << ":" << line << ": " << e.what();
        throw std::runtime_error(os.str());
    }
}

/// Write-then-rename so readers never observe a half-written report.
inline void atomic_write_json(const std::string& path, const json& payload, int indent = 2) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << payload.dump(indent) << "\n";
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

}  // namespace formctrl
