// Command-line front end: builds model systems, simulates schedules, runs the
// certificate sweeps, the mollification study and the truncation-transfer
// experiment, and writes machine-readable JSON reports (CSV for sweep tables).
//
// Exit codes: 0 on success (all certificates pass), 1 when a certificate or a
// bound check fails, 2 for configuration errors.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "formctrl/certify.hpp"
#include "formctrl/controls.hpp"
#include "formctrl/galerkin.hpp"
#include "formctrl/models.hpp"
#include "formctrl/parallel.hpp"
#include "formctrl/propagate.hpp"
#include "formctrl/serialize.hpp"
#include "formctrl/system.hpp"
#include "formctrl/version.hpp"

using namespace formctrl;

namespace {

class Stopwatch {
public:
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

json report_envelope(const std::string& command, json config) {
    return json{{"schema_version", report_schema_version()},
                {"tool_version", kToolVersion},
                {"command", command},
                {"config", std::move(config)},
                {"rng", {{"algorithm", "splitmix64"},
                         {"derivation", "child_k = splitmix64(seed xor 0x9E3779B97F4A7C15 * (k+1))"}}}};
}

void finish_report(json& report, const Stopwatch& watch, const std::string& out_path,
                   bool json_only) {
    report["timing"] = json{{"wall_ms", watch.ms()}};
    if (!out_path.empty()) atomic_write_json(out_path, report);
    if (json_only)
        std::cout << report.dump(2) << "\n";
    else if (!out_path.empty())
        std::cout << "report written to " << out_path << "\n";
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    if (out.empty()) throw CLI::ValidationError("expected a comma-separated list of numbers");
    return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    for (double v : parse_double_list(csv)) out.push_back(static_cast<int>(v));
    return out;
}

Vector basis_state(int dim, int k) {
    if (k < 0 || k >= dim) throw std::invalid_argument("basis state index out of range");
    Vector v = Vector::Zero(dim);
    v(k) = 1.0;
    return v;
}

ControlSchedule random_pc(Rng& rng, double horizon, int segments, const ControlBox& box) {
    std::vector<double> gaps;
    double total = 0.0;
    for (int j = 0; j < segments; ++j) {
        gaps.push_back(rng.uniform(0.35, 1.0));
        total += gaps.back();
    }
    std::vector<double> bp{0.0};
    for (int j = 0; j < segments; ++j) bp.push_back(bp.back() + gaps[j] * horizon / total);
    bp.back() = horizon;
    std::vector<std::vector<double>> vals;
    for (int j = 0; j < segments; ++j) {
        std::vector<double> u;
        for (const auto& [lo, hi] : box) u.push_back(rng.uniform(lo, hi));
        vals.push_back(std::move(u));
    }
    return ControlSchedule::piecewise_constant(std::move(bp), std::move(vals));
}

// ---- model -----------------------------------------------------------------

int run_model(const std::string& kind, int dim, double coupling, int channels,
              std::uint64_t seed, const std::string& out, bool json_only) {
    Stopwatch watch;
    json model_info{{"kind", kind}, {"dim", dim}};
    std::optional<FormLinearSystem> system;
    if (kind == "oscillator") {
        system = models::harmonic_oscillator(dim, coupling, channels);
        model_info["coupling"] = coupling;
        model_info["channels"] = channels;
    } else if (kind == "box") {
        system = models::particle_in_box(dim, coupling);
        model_info["coupling"] = coupling;
    } else if (kind == "random") {
        system = models::random_system(dim, channels, seed);
        model_info["channels"] = channels;
        model_info["seed"] = seed;
    } else {
        throw std::invalid_argument("unknown model kind: " + kind);
    }
    const json payload = system_to_json(*system, model_info);
    atomic_write_json(out, payload);
    if (json_only)
        std::cout << payload.dump(2) << "\n";
    else
        std::cout << "system (" << kind << ", dim " << dim << ") written to " << out << " in "
                  << watch.ms() << " ms\n";
    return 0;
}

// ---- simulate ----------------------------------------------------------------

int run_simulate(const std::string& system_path, const std::string& schedule_path, double from,
                 double to, int initial, int target, int grid, double tol,
                 const std::string& out, const std::string& unitary_csv, bool json_only) {
    Stopwatch watch;
    const FormLinearSystem system = system_from_json(load_json_file(system_path));
    const ControlSchedule schedule = schedule_from_json(load_json_file(schedule_path));
    if (to < 0.0) to = schedule.horizon();
    if (grid < 2) throw std::invalid_argument("--grid must be at least 2");

    ExpCache cache;
    Vector state = basis_state(system.dim(), initial);
    json t_grid = json::array(), norms = json::array(), populations = json::array();
    double t_prev = from;
    Matrix u_total = Matrix::Identity(system.dim(), system.dim());
    for (int k = 0; k < grid; ++k) {
        const double t = from + (to - from) * k / (grid - 1);
        if (k > 0) {
            const Propagator step = propagate(system, schedule, t, t_prev, tol, &cache);
            state = step.u * state;
            u_total = step.u * u_total;
        }
        t_prev = t;
        t_grid.push_back(t);
        norms.push_back(state.norm());
        json pops = json::array();
        for (int i = 0; i < system.dim(); ++i) pops.push_back(std::norm(state(i)));
        populations.push_back(std::move(pops));
    }

    json report = report_envelope("simulate", json{{"system", system_path},
                                                   {"schedule", schedule_path},
                                                   {"from", from},
                                                   {"to", to},
                                                   {"initial", initial},
                                                   {"target", target},
                                                   {"grid", grid},
                                                   {"tol", tol}});
    report["t_grid"] = std::move(t_grid);
    report["state_norms"] = std::move(norms);
    report["populations"] = std::move(populations);
    if (target >= 0) {
        const Vector psi = basis_state(system.dim(), target);
        report["fidelity_to_target"] = std::norm(psi.dot(state));
    }
    if (!unitary_csv.empty()) {
        std::ofstream csv(unitary_csv, std::ios::trunc);
        if (!csv) throw std::runtime_error("cannot write " + unitary_csv);
        csv << "row,col,re,im\n";
        for (int i = 0; i < system.dim(); ++i)
            for (int j = 0; j < system.dim(); ++j)
                csv << i << "," << j << "," << std::real(u_total(i, j)) << ","
                    << std::imag(u_total(i, j)) << "\n";
    }
    finish_report(report, watch, out, json_only);
    return 0;
}

// ---- certify ------------------------------------------------------------------

int run_certify(const std::string& kind, const std::string& system_path,
                std::vector<std::string> schedule_paths, int trials, std::uint64_t seed,
                bool seed_given, double horizon, int segments, const std::string& deltas_csv,
                const std::string& out, bool json_only) {
    Stopwatch watch;
    const FormLinearSystem system = system_from_json(load_json_file(system_path));
    std::vector<ControlSchedule> schedules;
    for (const std::string& path : schedule_paths)
        schedules.push_back(schedule_from_json(load_json_file(path)));

    json config{{"kind", kind},          {"system", system_path},
                {"schedules", schedule_paths}, {"trials", trials},
                {"horizon", horizon},    {"segments", segments}};
    if (seed_given) config["seed"] = seed;
    json report = report_envelope("certify", std::move(config));
    json certs = json::array();
    bool all_pass = true;

    const bool randomized = trials > 0;
    if (randomized && !seed_given)
        throw std::invalid_argument("--seed is mandatory for randomized certify runs");

    if (kind == "resolvent_lipschitz") {
        if (!randomized) throw std::invalid_argument("resolvent_lipschitz needs --trials");
        std::vector<StabilityCertificate> results(static_cast<std::size_t>(trials),
                                                  StabilityCertificate{});
        parallel_for(trials, [&](int k) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
            Eigen::VectorXd u1(system.channels()), u2(system.channels());
            for (int i = 0; i < system.channels(); ++i) {
                const auto& [lo, hi] = system.control_box()[static_cast<std::size_t>(i)];
                u1(i) = rng.uniform(lo, hi);
                u2(i) = rng.uniform(lo, hi);
            }
            std::vector<Eigen::VectorXd> pair{u1, u2};
            const double c = equivalence_constant(system, pair);
            results[static_cast<std::size_t>(k)] = check_resolvent_lipschitz(system, u1, u2, c);
        });
        for (const StabilityCertificate& cert : results) {
            certs.push_back(certificate_to_json(cert));
            all_pass = all_pass && cert.pass;
        }
    } else if (kind == "propagator_growth") {
        if (schedules.size() != 1)
            throw std::invalid_argument("propagator_growth needs exactly one schedule");
        if (!randomized) throw std::invalid_argument("propagator_growth needs --trials");
        const ControlSchedule& schedule = schedules[0];
        const SystemConstants constants = compute_constants(system, {&schedule});
        report["constants"] = constants_to_json(constants);
        std::vector<std::pair<StabilityCertificate, StabilityCertificate>> results(
            static_cast<std::size_t>(trials));
        parallel_for(trials, [&](int k) {
            Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
            Vector phi(system.dim());
            for (int i = 0; i < system.dim(); ++i) phi(i) = Complex(rng.normal(), rng.normal());
            results[static_cast<std::size_t>(k)] = check_propagator_growth(
                system, schedule, phi, schedule.horizon(), 0.0, constants);
        });
        for (const auto& [plus, minus] : results) {
            certs.push_back(certificate_to_json(plus));
            certs.push_back(certificate_to_json(minus));
            all_pass = all_pass && plus.pass && minus.pass;
        }
    } else if (kind == "stability" || kind == "stability_formlinear") {
        const bool formlinear = (kind == "stability_formlinear");
        if (schedules.size() == 2) {
            const SystemConstants constants =
                compute_constants(system, {&schedules[0], &schedules[1]});
            report["constants"] = constants_to_json(constants);
            StabilityCertificate cert =
                certify_stability(system, schedules[0], schedules[1], constants);
            if (formlinear) cert = as_formlinear_certificate(cert);
            certs.push_back(certificate_to_json(cert));
            all_pass = cert.pass;
        } else if (randomized) {
            ExpCache cache;
            std::vector<StabilityCertificate> results(static_cast<std::size_t>(trials),
                                                      StabilityCertificate{});
            parallel_for(trials, [&](int k) {
                Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
                const ControlSchedule a = random_pc(rng, horizon, segments, system.control_box());
                const ControlSchedule b = random_pc(rng, horizon, segments, system.control_box());
                const SystemConstants constants = compute_constants(system, {&a, &b});
                StabilityCertificate cert =
                    certify_stability(system, a, b, constants, 1e-10, &cache);
                if (formlinear) cert = as_formlinear_certificate(cert);
                results[static_cast<std::size_t>(k)] = std::move(cert);
            });
            double max_ratio = 0.0;
            for (const StabilityCertificate& cert : results) {
                certs.push_back(certificate_to_json(cert));
                all_pass = all_pass && cert.pass;
                if (cert.rhs > 0.0) max_ratio = std::max(max_ratio, cert.lhs / cert.rhs);
            }
            report["empirical_max_ratio"] = max_ratio;
        } else {
            throw std::invalid_argument("stability needs two schedules or --trials");
        }
    } else if (kind == "strong_convergence") {
        if (schedules.size() != 1)
            throw std::invalid_argument("strong_convergence needs one piecewise-constant schedule");
        if (deltas_csv.empty()) throw std::invalid_argument("strong_convergence needs --deltas");
        if (!seed_given)
            throw std::invalid_argument("--seed is mandatory for randomized certify runs");
        const ControlSchedule& pc = schedules[0];
        const Propagator u_ref = propagate_pc(system, pc, pc.horizon(), 0.0);
        std::vector<Propagator> seq;
        json rhs_list = json::array();
        for (double delta : parse_double_list(deltas_csv)) {
            const ControlSchedule m = mollify(pc, {delta, RampKind::quintic});
            seq.push_back(propagate_smooth(system, m, pc.horizon(), 0.0, 1e-11));
            const SystemConstants constants = compute_constants(system, {&pc, &m});
            rhs_list.push_back(certify_stability(system, pc, m, constants)
                                   .provenance.at("rhs_formlinear")
                                   .get<double>());
        }
        Rng rng(derive_seed(seed, 0));
        std::vector<Vector> probes;
        for (int k = 0; k < 4; ++k) {
            Vector phi(system.dim());
            for (int i = 0; i < system.dim(); ++i) phi(i) = Complex(rng.normal(), rng.normal());
            probes.push_back(std::move(phi));
        }
        json gap_report =
            strong_convergence_gap(u_ref, seq, probes, system.frame(), derive_seed(seed, 1));
        gap_report["certified_rhs"] = std::move(rhs_list);
        all_pass = gap_report.at("pairing_violations").get<int>() == 0;
        certs.push_back(std::move(gap_report));
    } else {
        throw std::invalid_argument("unknown certificate kind: " + kind);
    }

    report["certificates"] = std::move(certs);
    report["all_pass"] = all_pass;
    finish_report(report, watch, out, json_only);
    if (!json_only)
        std::cout << (all_pass ? "all certificates pass\n" : "certificate FAILURES present\n");
    return all_pass ? 0 : 1;
}

// ---- mollify-study ---------------------------------------------------------------

int run_mollify_study(const std::string& schedule_path, const std::string& deltas_csv,
                      const std::string& ramp, const std::string& out, bool json_only) {
    Stopwatch watch;
    const ControlSchedule pc = schedule_from_json(load_json_file(schedule_path));
    const RampKind kind = ramp_kind_from_string(ramp);
    const Eigen::VectorXd tv = total_variation(pc);

    json rows = json::array();
    for (double delta : parse_double_list(deltas_csv)) {
        const ControlSchedule m = mollify(pc, {delta, kind});
        const Eigen::VectorXd l1 = l1_distance(pc, m);
        const Eigen::VectorXd dl1 = derivative_l1(m);
        rows.push_back(json{{"delta", delta},
                            {"l1_distance", std::vector<double>(l1.data(), l1.data() + l1.size())},
                            {"derivative_l1",
                             std::vector<double>(dl1.data(), dl1.data() + dl1.size())}});
    }
    json report = report_envelope(
        "mollify-study",
        json{{"schedule", schedule_path}, {"deltas", deltas_csv}, {"ramp", ramp}});
    report["total_variation"] = std::vector<double>(tv.data(), tv.data() + tv.size());
    report["rows"] = std::move(rows);
    finish_report(report, watch, out, json_only);
    return 0;
}

// ---- synthesize -------------------------------------------------------------------

json synthesis_to_json(const SynthesisResult& res) {
    json out{{"success", res.success},
             {"infidelity", res.infidelity},
             {"objective", res.objective},
             {"horizon", res.horizon},
             {"restarts", res.restarts_used},
             {"achieved_l1", std::vector<double>(res.achieved_l1.data(),
                                                 res.achieved_l1.data() + res.achieved_l1.size())}};
    if (res.schedule) out["schedule"] = schedule_to_json(*res.schedule);
    return out;
}

int run_synthesize(const std::string& system_path, int rank, int phi_idx, int psi_idx,
                   const SynthesisParams& params, const std::string& out,
                   const std::string& schedule_out, bool json_only) {
    Stopwatch watch;
    const FormLinearSystem system = system_from_json(load_json_file(system_path));
    const TruncatedSystem trunc = truncate(system, rank);
    const SynthesisResult res = synthesize_pc(trunc, basis_state(rank, phi_idx),
                                              basis_state(rank, psi_idx), params);
    json report = report_envelope("synthesize", json{{"system", system_path},
                                                     {"rank", rank},
                                                     {"phi", phi_idx},
                                                     {"psi", psi_idx},
                                                     {"epsilon", params.epsilon},
                                                     {"budget", params.l1_budget},
                                                     {"segments", params.segments},
                                                     {"tmax", params.t_max},
                                                     {"seed", params.seed},
                                                     {"restarts", params.restarts},
                                                     {"sweeps", params.max_sweeps}});
    report["result"] = synthesis_to_json(res);
    if (!schedule_out.empty() && res.schedule)
        atomic_write_json(schedule_out, schedule_to_json(*res.schedule));
    finish_report(report, watch, out, json_only);
    if (!json_only)
        std::cout << (res.success ? "synthesis succeeded" : "synthesis failed") << " (infidelity "
                  << res.infidelity << ")\n";
    return 0;
}

// ---- galerkin-sweep ------------------------------------------------------------------

int run_galerkin_sweep(const std::string& system_path, int phi_idx, int psi_idx,
                       const std::string& ranks_csv, int ambient, double epsilon,
                       SynthesisParams params, const std::string& out, const std::string& csv,
                       bool json_only) {
    Stopwatch watch;
    FormLinearSystem system = system_from_json(load_json_file(system_path));
    if (ambient > 0 && ambient < system.dim()) system = truncate(system, ambient).reduced;
    const int dim = system.dim();

    const std::vector<int> ranks = parse_int_list(ranks_csv);
    json reports = json::array();
    bool bounds_ok = true;
    std::ostringstream table;
    table << "rank,success,infidelity,horizon,l1_total,finite_dim_residual,state_gap,"
             "measured_gap_norm,chain_bound_total,ambient_final_error,gap_bound_holds,"
             "chain_holds\n";
    for (std::size_t idx = 0; idx < ranks.size(); ++idx) {
        const int rank = ranks[idx];
        SynthesisParams per_rank = params;
        per_rank.seed = derive_seed(params.seed, idx);
        const TransferReport rep =
            transfer_experiment(system, std::min(std::max(phi_idx, psi_idx) + 1, rank), rank,
                                basis_state(dim, phi_idx), basis_state(dim, psi_idx), epsilon,
                                per_rank);
        bounds_ok = bounds_ok && rep.gap_bound_holds && rep.chain_holds;
        reports.push_back(transfer_report_to_json(rep));
        table << rank << "," << rep.synthesis.success << "," << rep.synthesis.infidelity << ","
              << rep.synthesis.horizon << "," << rep.synthesis.achieved_l1.sum() << ","
              << rep.finite_dim_residual << "," << rep.state_gap << "," << rep.measured_gap_norm
              << "," << rep.chain_bound_total << "," << rep.ambient_final_error << ","
              << rep.gap_bound_holds << "," << rep.chain_holds << "\n";
    }
    json report = report_envelope("galerkin-sweep", json{{"system", system_path},
                                                         {"phi", phi_idx},
                                                         {"psi", psi_idx},
                                                         {"ranks", ranks_csv},
                                                         {"ambient", ambient},
                                                         {"epsilon", epsilon},
                                                         {"budget", params.l1_budget},
                                                         {"segments", params.segments},
                                                         {"tmax", params.t_max},
                                                         {"seed", params.seed},
                                                         {"restarts", params.restarts},
                                                         {"sweeps", params.max_sweeps}});
    report["reports"] = std::move(reports);
    report["bounds_hold"] = bounds_ok;
    if (!csv.empty()) {
        const std::string tmp = csv + ".tmp";
        {
            std::ofstream f(tmp, std::ios::trunc);
            if (!f) throw std::runtime_error("cannot write " + tmp);
            f << table.str();
        }
        if (std::rename(tmp.c_str(), csv.c_str()) != 0)
            throw std::runtime_error("cannot rename " + tmp);
    }
    finish_report(report, watch, out, json_only);
    if (!json_only) std::cout << table.str();
    return bounds_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"form-linear quantum control: simulation, certificates, truncation transfer"};
    app.require_subcommand(1);
    app.fallthrough();
    bool json_only = false;
    app.add_flag("--json", json_only, "machine-only output: print the full report JSON");

    // model
    auto* model = app.add_subcommand("model", "generate a model system file");
    std::string model_kind, model_out;
    int model_dim = 16, model_channels = 1;
    double model_coupling = 1.0;
    std::uint64_t model_seed = 0;
    model->add_option("--kind", model_kind, "oscillator | box | random")->required();
    model->add_option("--dim", model_dim, "truncation dimension")->required();
    model->add_option("--coupling", model_coupling, "interaction scale (default 1)");
    model->add_option("--channels", model_channels, "number of control channels");
    model->add_option("--seed", model_seed, "seed (random model)");
    model->add_option("--out", model_out, "output system JSON")->required();

    // simulate
    auto* simulate = app.add_subcommand("simulate", "propagate a schedule and record populations");
    std::string sim_system, sim_schedule, sim_out, sim_csv;
    double sim_from = 0.0, sim_to = -1.0, sim_tol = 1e-10;
    int sim_initial = 0, sim_target = -1, sim_grid = 101;
    simulate->add_option("--system", sim_system)->required();
    simulate->add_option("--schedule", sim_schedule)->required();
    simulate->add_option("--from", sim_from, "start time (default 0)");
    simulate->add_option("--to", sim_to, "end time (default: horizon)");
    simulate->add_option("--initial", sim_initial, "initial basis state index");
    simulate->add_option("--target", sim_target, "target index for fidelity");
    simulate->add_option("--grid", sim_grid, "number of sample times");
    simulate->add_option("--tol", sim_tol, "integrator tolerance");
    simulate->add_option("--out", sim_out, "report JSON path");
    simulate->add_option("--unitary-csv", sim_csv, "write the final unitary as CSV");

    // certify
    auto* certify = app.add_subcommand("certify", "emit stability certificates");
    std::string cert_kind, cert_system, cert_deltas, cert_out;
    std::vector<std::string> cert_schedules;
    int cert_trials = 0, cert_segments = 4;
    double cert_horizon = 2.0;
    std::uint64_t cert_seed = 0;
    bool cert_seed_given = false;
    certify->add_option("--kind", cert_kind,
                        "resolvent_lipschitz | propagator_growth | stability | "
                        "stability_formlinear | strong_convergence")
        ->required();
    certify->add_option("--system", cert_system)->required();
    certify->add_option("--schedules", cert_schedules, "schedule files (up to two)");
    certify->add_option("--trials", cert_trials, "randomized trial count");
    certify->add_option("--seed", cert_seed, "master seed (mandatory when randomized)")
        ->each([&](const std::string&) { cert_seed_given = true; });
    certify->add_option("--horizon", cert_horizon, "horizon of generated random schedules");
    certify->add_option("--segments", cert_segments, "segments of generated random schedules");
    certify->add_option("--deltas", cert_deltas, "mollification widths (strong_convergence)");
    certify->add_option("--out", cert_out, "report JSON path");

    // mollify-study
    auto* mollify_cmd = app.add_subcommand("mollify-study", "l1 and derivative budgets vs delta");
    std::string mol_schedule, mol_deltas, mol_ramp = "quintic", mol_out;
    mollify_cmd->add_option("--schedule", mol_schedule)->required();
    mollify_cmd->add_option("--deltas", mol_deltas)->required();
    mollify_cmd->add_option("--ramp", mol_ramp, "quintic | bump");
    mollify_cmd->add_option("--out", mol_out, "report JSON path");

    // synthesize
    auto* synth = app.add_subcommand("synthesize", "search for a transfer pulse at one rank");
    std::string syn_system, syn_out, syn_schedule_out;
    int syn_rank = 4, syn_phi = 0, syn_psi = 1;
    SynthesisParams syn_params;
    synth->add_option("--system", syn_system)->required();
    synth->add_option("--rank", syn_rank)->required();
    synth->add_option("--phi", syn_phi, "initial basis index (in the truncated space)");
    synth->add_option("--psi", syn_psi, "target basis index");
    synth->add_option("--epsilon", syn_params.epsilon, "success threshold");
    synth->add_option("--budget", syn_params.l1_budget, "per-channel L1 budget");
    synth->add_option("--segments", syn_params.segments);
    synth->add_option("--tmax", syn_params.t_max);
    synth->add_option("--seed", syn_params.seed)->required();
    synth->add_option("--restarts", syn_params.restarts);
    synth->add_option("--sweeps", syn_params.max_sweeps);
    synth->add_option("--out", syn_out, "report JSON path");
    synth->add_option("--schedule-out", syn_schedule_out, "write the found schedule JSON");

    // galerkin-sweep
    auto* sweep = app.add_subcommand("galerkin-sweep",
                                     "transfer experiment across truncation ranks");
    std::string sw_system, sw_ranks, sw_out, sw_csv;
    int sw_phi = 0, sw_psi = 1, sw_ambient = 0;
    double sw_epsilon = 1e-2;
    SynthesisParams sw_params;
    sweep->add_option("--system", sw_system)->required();
    sweep->add_option("--phi", sw_phi);
    sweep->add_option("--psi", sw_psi);
    sweep->add_option("--ranks", sw_ranks, "comma-separated truncation ranks")->required();
    sweep->add_option("--ambient", sw_ambient, "ambient dimension (default: system dim)");
    sweep->add_option("--epsilon", sw_epsilon);
    sweep->add_option("--budget", sw_params.l1_budget);
    sweep->add_option("--segments", sw_params.segments);
    sweep->add_option("--tmax", sw_params.t_max);
    sweep->add_option("--seed", sw_params.seed)->required();
    sweep->add_option("--restarts", sw_params.restarts);
    sweep->add_option("--sweeps", sw_params.max_sweeps);
    sweep->add_option("--out", sw_out, "report JSON path");
    sweep->add_option("--csv", sw_csv, "summary table CSV path");

    // version
    auto* version = app.add_subcommand("version", "print tool and report schema versions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        if (model->parsed())
            return run_model(model_kind, model_dim, model_coupling, model_channels, model_seed,
                             model_out, json_only);
        if (simulate->parsed())
            return run_simulate(sim_system, sim_schedule, sim_from, sim_to, sim_initial,
                                sim_target, sim_grid, sim_tol, sim_out, sim_csv, json_only);
        if (certify->parsed())
            return run_certify(cert_kind, cert_system, cert_schedules, cert_trials, cert_seed,
                               cert_seed_given, cert_horizon, cert_segments, cert_deltas,
                               cert_out, json_only);
        if (mollify_cmd->parsed())
            return run_mollify_study(mol_schedule, mol_deltas, mol_ramp, mol_out, json_only);
        if (synth->parsed())
            return run_synthesize(syn_system, syn_rank, syn_phi, syn_psi, syn_params, syn_out,
                                  syn_schedule_out, json_only);
        if (sweep->parsed()) {
            sw_params.epsilon = sw_epsilon;
            return run_galerkin_sweep(sw_system, sw_phi, sw_psi, sw_ranks, sw_ambient, sw_epsilon,
                                      sw_params, sw_out, sw_csv, json_only);
        }
        if (version->parsed()) {
            std::cout << "formctrl " << kToolVersion << " (report schema "
                      << report_schema_version() << ")\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
