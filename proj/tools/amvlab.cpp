// amvlab: command-line front end for the asymptotic mean value laboratory.
//
// Subcommands:
//   eval       run the r -> 0 study from a JSON experiment config
//   verify     run a named verification suite and write its report
//   green      assemble an atom cloud and check the Green-type identity
//   poisson    solve Delta_r u = f with boundary data on an atom cloud
//   constants  generate the frozen Heisenberg unit-ball constants file
//
// Exit codes: 0 success / all cases pass, 1 configuration error,
// 2 numerical or evaluation failure.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "amvlab/config.hpp"

namespace {

amv::json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw amv::input_error("config: cannot read '" + path + "'");
    try {
        return amv::json::parse(in);
    } catch (const std::exception& e) {
        throw amv::input_error("config: bad JSON in '" + path + "': " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"amvlab: asymptotic mean value Laplacian laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_path, format, suite_name, constants_path;
    std::uint64_t seed = 0;
    bool seed_set = false, gen_constants = false;
    double budget_scale = 1.0;
    std::int64_t samples = 20000000;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", out_path, "output file path (overrides config)");
        cmd->add_option("--format", format, "output format: csv or json")
            ->check(CLI::IsMember({"csv", "json"}));
    };

    CLI::App* eval = app.add_subcommand("eval", "run the r -> 0 study from a config file");
    eval->add_option("--config", config_path, "experiment config JSON")->required();
    eval->add_option("--seed", seed, "override the config seed")->each([&](const std::string&) { seed_set = true; });
    add_common(eval);

    CLI::App* verify = app.add_subcommand("verify", "run a verification suite");
    verify->add_option("--suite", suite_name, "suite name")->required();
    verify->add_option("--seed", seed, "suite seed")->each([&](const std::string&) { seed_set = true; });
    verify->add_option("--scale", budget_scale, "Monte Carlo budget scale factor");
    verify->add_option("--constants", constants_path, "Heisenberg constants file");
    verify->add_flag("--gen-constants", gen_constants,
                     "generate the constants file first if it is missing");
    add_common(verify);

    CLI::App* green = app.add_subcommand("green", "Green-type identity check on an atom cloud");
    green->add_option("--config", config_path, "cloud config JSON")->required();
    add_common(green);

    CLI::App* poisson = app.add_subcommand("poisson", "discrete Poisson solve on an atom cloud");
    poisson->add_option("--config", config_path, "cloud config JSON")->required();
    add_common(poisson);

    CLI::App* constants = app.add_subcommand("constants", "freeze the Heisenberg unit-ball constant");
    constants->add_option("--out", out_path, "constants file path")->required();
    constants->add_option("--samples", samples, "Monte Carlo samples");
    constants->add_option("--seed", seed, "Monte Carlo seed")->each([&](const std::string&) { seed_set = true; });

    CLI11_PARSE(app, argc, argv);

    try {
        if (*eval) {
            amv::json config = load_config(config_path);
            if (seed_set) config["seed"] = seed;
            amv::EvalOutcome outcome = amv::run_eval(config, format, out_path);
            if (out_path.empty() && !config.value("output", amv::json::object()).contains("path"))
                std::cout << outcome.report;
            for (const auto& pr : outcome.points)
                if (!pr.error.empty()) std::cerr << "point " << pr.x.str() << ": " << pr.error << "\n";
            return outcome.exit_code;
        }
        if (*verify) {
            amv::SuiteOptions opts;
            if (seed_set) opts.seed = seed;
            opts.budget_scale = budget_scale;
            if (suite_name == "heisenberg") {
                std::string path = constants_path.empty() ? "heisenberg_constants.json" : constants_path;
                std::ifstream probe(path);
                if (!probe && gen_constants) {
                    std::cerr << "generating constants file " << path << " ("
                              << samples << " samples)\n";
                    amv::save_heisenberg_constants(
                        amv::estimate_heisenberg_constants(samples, seed_set ? seed : 0xC0117u), path);
                }
                opts.constants_path = path;
            }
            amv::SuiteReport rep = amv::run_suite(suite_name, opts);
            std::string body = (format == "csv") ? amv::suite_report_csv(rep) : rep.to_json().dump(2) + "\n";
            if (!out_path.empty())
                amv::detail::write_text(out_path, body);
            else
                std::cout << body;
            std::cerr << "suite " << rep.suite << ": " << rep.cases.size() << " cases, "
                      << (rep.all_pass() ? "all pass" : "FAILURES") << " (" << rep.duration_seconds
                      << " s)\n";
            for (const auto& c : rep.cases)
                if (!c.pass)
                    std::cerr << "  FAIL " << c.case_id << " expected "
                              << (c.is_verdict_case ? c.expected_verdict : std::to_string(c.expected))
                              << " measured "
                              << (c.is_verdict_case ? c.measured_verdict : std::to_string(c.measured))
                              << "\n";
            return rep.all_pass() ? 0 : 2;
        }
        if (*green) {
            amv::json rep = amv::run_green(load_config(config_path));
            std::string body = rep.dump(2) + "\n";
            if (!out_path.empty())
                amv::detail::write_text(out_path, body);
            else
                std::cout << body;
            return 0;
        }
        if (*poisson) {
            std::string csv;
            amv::json rep = amv::run_poisson(load_config(config_path), &csv);
            std::string body = (format == "csv") ? csv : rep.dump(2) + "\n";
            if (!out_path.empty())
                amv::detail::write_text(out_path, body);
            else
                std::cout << body;
            return 0;
        }
        if (*constants) {
            amv::HeisenbergConstants hc =
                amv::estimate_heisenberg_constants(samples, seed_set ? seed : 0xC0117u);
            amv::save_heisenberg_constants(hc, out_path);
            std::cerr << "c = " << hc.c_estimate << " +- " << hc.std_error << " (1 sigma, "
                      << hc.samples << " samples)\n";
            return 0;
        }
    } catch (const amv::input_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const amv::error& e) {
        std::cerr << "evaluation error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
