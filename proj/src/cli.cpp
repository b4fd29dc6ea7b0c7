#include "fluidhit/cli.hpp"

#include "fluidhit/bounds.hpp"
#include "fluidhit/fluid.hpp"
#include "fluidhit/json_io.hpp"
#include "fluidhit/named_examples.hpp"
#include "fluidhit/simulator.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fluidhit {

namespace {

struct Config {
    std::string command;
    std::string chain;
    std::uint64_t n = 0;
    bool n_given = false;
    std::uint64_t runs = 1000;
    std::uint64_t seed = 1;
    double tol = num::kDefaultExpmTolerance;
    std::string format;
    std::string out;
    std::string n_list;
    std::uint64_t samples = 1;
    std::string grid;
    bool no_skip = false;
    std::optional<std::size_t> k_override;
    std::optional<double> nu_override;
    bool estimate_gamma = false;
};

/// Raised for usage problems that are not CLI11 parse errors.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double x) {
    if (std::isnan(x)) {
        return "";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

std::string fmt(const std::optional<double> &x) { return x ? fmt(*x) : std::string(); }

struct Instance {
    std::string id;
    AbsorbingChain chain;
    InitialDistribution alpha;
    std::optional<NamedExample> example;
};

Instance load_instance(const std::string &source) {
    if (source.empty()) {
        throw UsageError("--chain is required");
    }
    Instance inst;
    if (is_example_name(source)) {
        auto ex = parse_example_name(source);
        inst.id = ex.name;
        inst.chain = ex.chain;
        inst.alpha = ex.default_alpha();
        inst.example = std::move(ex);
        return inst;
    }
    auto file = load_chain_file(source);
    inst.id = source;
    inst.chain = std::move(file.chain);
    inst.alpha = file.alpha ? *file.alpha : InitialDistribution::uniform(inst.chain.transient_count());
    return inst;
}

std::uint64_t population(const Config &cfg, const Instance &inst) {
    if (cfg.n_given) {
        if (cfg.n < 1) {
            throw UsageError("--N must be at least 1");
        }
        return cfg.n;
    }
    if (inst.example && inst.example->pinned_n) {
        return *inst.example->pinned_n;
    }
    return 100;
}

/// Named examples start all chains in their start state; file chains round N alpha.
OccupancyState initial_occupancy(const Instance &inst, std::uint64_t n) {
    if (inst.example) {
        return inst.example->default_occupancy(n);
    }
    return OccupancyState::from_distribution(inst.alpha, n);
}

/// Bounds describe the realized initial occupancy of the simulated system.
InitialDistribution realized_alpha(const Instance &inst, std::uint64_t n) {
    if (inst.example) {
        return inst.alpha;
    }
    return InitialDistribution::from_occupancy(initial_occupancy(inst, n).counts);
}

ReportOptions report_options(const Config &cfg, const Instance &inst, std::uint64_t n) {
    ReportOptions opts;
    opts.tol = cfg.tol;
    opts.spectral.estimate_gamma = cfg.estimate_gamma;
    opts.spectral.k_override = cfg.k_override;
    opts.spectral.nu_override = cfg.nu_override;
    if (inst.example) {
        opts.references = inst.example->references(n);
    }
    return opts;
}

SimulationOptions simulation_options(const Config &cfg) {
    SimulationOptions opts;
    opts.geometric_skip = !cfg.no_skip;
    return opts;
}

std::vector<std::uint64_t> parse_n_list(const std::string &text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc{} || ptr != item.data() + item.size() || v < 1) {
            throw UsageError("bad --N-list entry '" + item + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw UsageError("--N-list is empty");
    }
    return out;
}

std::vector<double> parse_grid(const std::string &text, double default_tmax) {
    double tmax = default_tmax;
    std::uint64_t steps = 200;
    if (!text.empty()) {
        const auto colon = text.find(':');
        if (colon == std::string::npos) {
            throw UsageError("--grid expects tmax:steps");
        }
        try {
            std::size_t used = 0;
            tmax = std::stod(text.substr(0, colon), &used);
            if (used != colon) {
                throw UsageError("bad tmax in --grid");
            }
            const auto tail = text.substr(colon + 1);
            steps = std::stoull(tail, &used);
            if (used != tail.size()) {
                throw UsageError("bad steps in --grid");
            }
        } catch (const std::logic_error &) {
            throw UsageError("--grid expects tmax:steps");
        }
    }
    if (!(tmax >= 0.0) || steps < 1) {
        throw UsageError("--grid needs tmax >= 0 and steps >= 1");
    }
    std::vector<double> grid(steps + 1);
    for (std::uint64_t i = 0; i <= steps; ++i) {
        grid[i] = tmax * static_cast<double>(i) / static_cast<double>(steps);
    }
    return grid;
}

void emit(const Config &cfg, std::ostream &out, const std::string &text) {
    if (cfg.out.empty()) {
        out << text;
        return;
    }
    std::ofstream file(cfg.out, std::ios::binary);
    if (!file) {
        throw ChainIoError(ChainIoError::Kind::FileNotFound, "cannot write '" + cfg.out + "'");
    }
    file << text;
}

std::string dump(const nlohmann::json &doc) { return doc.dump(2) + "\n"; }

int cmd_validate(const Config &cfg, std::ostream &out) {
    try {
        const auto inst = load_instance(cfg.chain);
        out << "OK: " << inst.chain.size() << " states, absorbing state 0\n";
        return kExitOk;
    } catch (const ChainError &e) {
        out << "FAIL: " << e.what() << "\n";
        return kExitDomain;
    }
}

int cmd_analyze(const Config &cfg, std::ostream &out, std::ostream &err) {
    const auto inst = load_instance(cfg.chain);
    const auto n = population(cfg, inst);
    const auto report =
        assemble_report(inst.id, inst.chain, realized_alpha(inst, n), n, report_options(cfg, inst, n));
    if (cfg.format == "csv") {
        std::ostringstream csv;
        csv << "name,role,value,formula\n";
        for (const auto &e : report.entries) {
            csv << e.name << ',' << role_name(e.role) << ',' << fmt(e.value) << ",\"" << e.formula << "\"\n";
        }
        for (const auto &[k, v] : report.quantities) {
            csv << k << ",quantity," << fmt(v) << ",\n";
        }
        emit(cfg, out, csv.str());
    } else {
        emit(cfg, out, dump(report_to_json(report)));
    }
    if (!report.consistent) {
        err << "error: " << report.notes.at("consistency") << "\n";
        return kExitDomain;
    }
    return kExitOk;
}

std::optional<double> exact_reference(const Instance &inst, std::uint64_t n) {
    if (!inst.example) {
        return std::nullopt;
    }
    for (const auto &e : inst.example->references(n)) {
        if (e.role == EntryRole::Exact) {
            return e.value;
        }
    }
    return std::nullopt;
}

int cmd_simulate(const Config &cfg, std::ostream &out, std::ostream &err) {
    const auto inst = load_instance(cfg.chain);
    const auto n = population(cfg, inst);
    if (cfg.runs < 1) {
        throw UsageError("--runs must be at least 1");
    }
    const auto result =
        estimate_hitting_time(inst.chain, initial_occupancy(inst, n), cfg.runs, cfg.seed, simulation_options(cfg));
    const auto exact = exact_reference(inst, n);
    if (cfg.format == "csv") {
        std::ostringstream csv;
        csv << "N,runs,seed,mean,stderr,ci95_low,ci95_high,failures,exact\n";
        csv << n << ',' << result.runs << ',' << result.seed << ',' << fmt(result.mean) << ','
            << fmt(result.stderr_mean) << ',' << (result.ci95 ? fmt(result.ci95->first) : "") << ','
            << (result.ci95 ? fmt(result.ci95->second) : "") << ',' << result.failures << ',' << fmt(exact) << "\n";
        emit(cfg, out, csv.str());
    } else {
        auto doc = simulation_to_json(result);
        doc["chain"] = inst.id;
        doc["N"] = n;
        if (exact) {
            doc["exact"] = *exact;
            doc["relative_error"] = (result.mean - *exact) / *exact;
        }
        emit(cfg, out, dump(doc));
    }
    if (result.failures > 0) {
        err << "warning: " << result.failures << " of " << result.runs
            << " replications hit the step cap and were excluded\n";
    }
    return result.samples.empty() ? kExitDomain : kExitOk;
}

int cmd_compare(const Config &cfg, std::ostream &out, std::ostream &err) {
    const auto base = load_instance(cfg.chain);
    const auto ns = parse_n_list(cfg.n_list.empty() ? std::to_string(population(cfg, base)) : cfg.n_list);
    std::ostringstream csv;
    csv << "N,runs,mean,stderr,ci95_low,ci95_high,mean_over_NlnN,fluid_crossing_bound,spectral_leading_terms,"
           "hitting_sum_bound,uniform_hitting_bound,exact,lower_bound,bands_ok\n";
    bool all_ok = true;
    for (const auto n : ns) {
        Instance inst = base;
        if (inst.example && inst.example->kind == ExampleKind::CountdownTrap) {
            // the trap chain is tied to N; rebuild it for each population
            auto ex = gen_countdown_trap(n, static_cast<std::uint64_t>(inst.example->t));
            inst.id = ex.name;
            inst.chain = ex.chain;
            inst.alpha = ex.default_alpha();
            inst.example = std::move(ex);
        }
        const auto report =
            assemble_report(inst.id, inst.chain, realized_alpha(inst, n), n, report_options(cfg, inst, n));
        const auto sim = estimate_hitting_time(inst.chain, initial_occupancy(inst, n), cfg.runs, cfg.seed,
                                               simulation_options(cfg));
        const double se = sim.stderr_mean.value_or(0.0);
        bool ok = true;
        std::optional<double> exact;
        std::optional<double> lower;
        for (const auto &e : report.entries) {
            if (e.role == EntryRole::Upper && sim.mean - 3.0 * se > e.value) {
                ok = false;
            }
            if ((e.role == EntryRole::Lower || e.role == EntryRole::Exact) && sim.mean + 3.0 * se < e.value) {
                ok = false;
            }
            if (e.role == EntryRole::Exact) {
                exact = e.value;
                if (sim.mean - 3.0 * se > e.value) {
                    ok = false;
                }
            }
            if (e.role == EntryRole::Lower) {
                lower = e.value;
            }
        }
        all_ok = all_ok && ok;
        const double nd = static_cast<double>(n);
        const double ratio = n > 1 ? sim.mean / (nd * std::log(nd)) : std::nan("");
        csv << n << ',' << sim.samples.size() << ',' << fmt(sim.mean) << ',' << fmt(sim.stderr_mean) << ','
            << (sim.ci95 ? fmt(sim.ci95->first) : "") << ',' << (sim.ci95 ? fmt(sim.ci95->second) : "") << ','
            << fmt(ratio) << ',' << fmt(report.value("fluid_crossing_bound")) << ','
            << fmt(report.value("spectral_leading_terms")) << ',' << fmt(report.value("hitting_sum_bound")) << ','
            << fmt(report.value("uniform_hitting_bound")) << ',' << fmt(exact) << ',' << fmt(lower) << ','
            << (ok ? "true" : "false") << "\n";
    }
    emit(cfg, out, csv.str());
    if (!all_ok) {
        err << "error: simulated mean outside the 3-sigma band of a bound\n";
        return kExitDomain;
    }
    return kExitOk;
}

int cmd_trajectory(const Config &cfg, std::ostream &out) {
    const auto inst = load_instance(cfg.chain);
    const auto n = population(cfg, inst);
    const auto alpha = realized_alpha(inst, n);
    const SubGenerator sub = decompose(inst.chain);
    const double t_n = n > 1 ? crossing_time(alpha, sub, 1.0 / static_cast<double>(n)).time : 0.0;
    const auto grid = parse_grid(cfg.grid, t_n + 2.0);
    const auto fluid = fluid_trajectory(alpha, sub, grid, cfg.tol);
    std::ostringstream csv;
    csv << "series,t,fraction_absorbed\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        csv << "fluid," << fmt(grid[i]) << ',' << fmt(fluid.m0_values[i]) << "\n";
    }
    const double level = 1.0 - 1.0 / static_cast<double>(n);
    for (double t : grid) {
        csv << "level," << fmt(t) << ',' << fmt(level) << "\n";
    }
    const auto initial = initial_occupancy(inst, n);
    for (std::uint64_t s = 0; s < cfg.samples; ++s) {
        Rng rng(cfg.seed, s);
        const auto traj = simulate_trajectory(inst.chain, initial, grid, rng, simulation_options(cfg));
        for (std::size_t i = 0; i < grid.size(); ++i) {
            csv << "sim" << s << ',' << fmt(traj.rescaled_times[i]) << ',' << fmt(traj.m0_fractions[i]) << "\n";
        }
    }
    emit(cfg, out, csv.str());
    return kExitOk;
}

int cmd_gen(const Config &cfg, std::ostream &out) {
    if (!is_example_name(cfg.chain)) {
        throw UsageError("gen needs a named example for --chain");
    }
    const auto ex = parse_example_name(cfg.chain);
    emit(cfg, out, dump(chain_to_json(ex.chain, ex.default_alpha())));
    return kExitOk;
}

void add_common(CLI::App *sub, Config &cfg) {
    sub->add_option("--chain", cfg.chain, "chain file or example name (classical, tstage:T, fig3a:N,T, fig3b:T)");
    sub->add_option("--format", cfg.format, "output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--out", cfg.out, "write output to this path");
    sub->add_option("--tol", cfg.tol, "uniformization tolerance");
}

void add_population(CLI::App *sub, Config &cfg) {
    sub->add_option_function<std::uint64_t>(
        "--N", [&cfg](const std::uint64_t &v) {
            cfg.n = v;
            cfg.n_given = true;
        },
        "number of chains");
}

void add_spectral(CLI::App *sub, Config &cfg) {
    sub->add_option_function<std::size_t>(
        "--k-override", [&cfg](const std::size_t &v) { cfg.k_override = v; }, "multiplicity parameter k");
    sub->add_option_function<double>(
        "--nu-override", [&cfg](const double &v) { cfg.nu_override = v; }, "decay rate nu");
    sub->add_flag("--estimate-gamma", cfg.estimate_gamma, "fit the tail prefactor gamma");
}

void add_simulation(CLI::App *sub, Config &cfg) {
    sub->add_option("--runs", cfg.runs, "replications");
    sub->add_option("--seed", cfg.seed, "base seed");
    sub->add_flag("--no-skip", cfg.no_skip, "step through selections of absorbed chains one by one");
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    Config cfg;
    CLI::App app{"Hitting times of N absorbing Markov chains under random scheduling", "fluidhit"};
    app.require_subcommand(1);

    auto *validate = app.add_subcommand("validate", "check a chain file");
    add_common(validate, cfg);

    auto *analyze = app.add_subcommand("analyze", "bound report for (chain, alpha, N)");
    add_common(analyze, cfg);
    add_population(analyze, cfg);
    add_spectral(analyze, cfg);

    auto *simulate = app.add_subcommand("simulate", "Monte Carlo estimate of E[T_N]");
    add_common(simulate, cfg);
    add_population(simulate, cfg);
    add_simulation(simulate, cfg);

    auto *compare = app.add_subcommand("compare", "simulation against bounds over several N");
    add_common(compare, cfg);
    add_population(compare, cfg);
    add_simulation(compare, cfg);
    add_spectral(compare, cfg);
    compare->add_option("--N-list", cfg.n_list, "comma-separated populations");

    auto *trajectory = app.add_subcommand("trajectory", "fluid curve and simulated absorbed fraction");
    add_common(trajectory, cfg);
    add_population(trajectory, cfg);
    trajectory->add_option("--seed", cfg.seed, "base seed");
    trajectory->add_option("--samples", cfg.samples, "number of simulated trajectories");
    trajectory->add_option("--grid", cfg.grid, "rescaled time grid tmax:steps");
    trajectory->add_flag("--no-skip", cfg.no_skip, "step through selections of absorbed chains one by one");

    auto *gen = app.add_subcommand("gen", "write a named example as a chain file");
    add_common(gen, cfg);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    }

    try {
        if (*validate) {
            return cmd_validate(cfg, out);
        }
        if (*analyze) {
            return cmd_analyze(cfg, out, err);
        }
        if (*simulate) {
            return cmd_simulate(cfg, out, err);
        }
        if (*compare) {
            return cmd_compare(cfg, out, err);
        }
        if (*trajectory) {
            return cmd_trajectory(cfg, out);
        }
        return cmd_gen(cfg, out);
    } catch (const ChainIoError &e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const UsageError &e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ExampleError &e) {
        err << "error: " << e.what() << "\n";
        return e.kind() == ExampleError::Kind::BadName ? kExitIo : kExitDomain;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitDomain;
    }
}

} // namespace fluidhit
