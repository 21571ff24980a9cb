// affmem-eval: scripted two-condition runs, blind judging, lift report.
//
//   affmem-eval run      --scenarios data/scenarios --persona data/persona.json --seed 7 --out out
//   affmem-eval judge    --out out --seed 7
//   affmem-eval report   --out out
//   affmem-eval validate --scenarios data/scenarios --persona data/persona.json

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "affmem/error.hpp"
#include "affmem/eval.hpp"

using namespace affmem;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::string backend;
    std::uint64_t seed = 0;
    std::string out = "out";
    unsigned threads = 0;
};

EngineConfig engine_config(const Common& c) {
    EngineConfig cfg;
    if (!c.config.empty()) {
        cfg = load_engine_config(c.config);
    } else {
        apply_env_overrides(cfg);
    }
    if (c.backend == "stub") cfg.gateway.backend = Backend::stub;
    if (c.backend == "http") cfg.gateway.backend = Backend::http;
    return cfg;
}

GatewayFactory factory(const EngineConfig& cfg) {
    return [gw = cfg.gateway](std::uint64_t seed) {
        GatewayConfig g = gw;
        g.seed = seed;
        return make_gateway(g);
    };
}

std::vector<Condition> parse_conditions(const std::string& list) {
    std::vector<Condition> out;
    std::stringstream ss(list);
    for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) out.push_back(parse_condition(item));
    }
    if (out.empty()) throw Error(ErrorCode::invalid_argument, "no conditions given");
    return out;
}

int print_violations(const std::string& what, const Violations& vs) {
    for (const auto& v : vs) std::cerr << what << ": " << v << "\n";
    return vs.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-condition evaluation harness"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "engine config JSON");
        sub->add_option("--backend", common.backend, "stub or http (overrides config)")
            ->check(CLI::IsMember({"stub", "http"}));
        sub->add_option("--seed", common.seed, "base seed");
        sub->add_option("--out", common.out, "output directory");
        sub->add_option("--threads", common.threads, "worker threads (0 = all cores)");
    };

    std::string scenarios_dir, persona_file, conditions = "baseline,enriched", runs_dir, judge_dir;

    auto* run = app.add_subcommand("run", "run every scenario under each condition");
    add_common(run);
    run->add_option("--scenarios", scenarios_dir, "scenario directory")->required();
    run->add_option("--persona", persona_file, "persona JSON")->required();
    run->add_option("--conditions", conditions, "comma-separated: baseline,enriched");

    auto* judge = app.add_subcommand("judge", "blind pairwise judging of run records");
    add_common(judge);
    judge->add_option("--runs", runs_dir, "run records (default <out>/runs)");

    auto* rep = app.add_subcommand("report", "aggregate judgments into tables and plot data");
    add_common(rep);
    rep->add_option("--judgments", judge_dir, "judge directory (default <out>/judge)");
    rep->add_option("--scenarios", scenarios_dir, "scenario directory; unjudged ids are reported missing");

    auto* val = app.add_subcommand("validate", "schema-check scenario and persona files");
    val->add_option("--scenarios", scenarios_dir, "scenario directory");
    val->add_option("--persona", persona_file, "persona JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path out = common.out;
        if (*val) {
            int rc = 0;
            if (!scenarios_dir.empty()) {
                const auto sc = load_scenarios(scenarios_dir);
                for (const auto& s : sc) rc |= print_violations(s.id, validate(s));
                rc |= print_violations("scenario set", validate_scenario_set(sc));
                std::cout << sc.size() << " scenarios checked\n";
            }
            if (!persona_file.empty()) {
                rc |= print_violations("persona", validate(load_persona(persona_file)));
                std::cout << "persona checked\n";
            }
            return rc;
        }

        const EngineConfig cfg = engine_config(common);

        if (*run) {
            const auto sc = load_scenarios(scenarios_dir);
            const auto persona = load_persona(persona_file);
            if (print_violations("persona", validate(persona))) return 2;
            RunOptions opts;
            opts.conditions = parse_conditions(conditions);
            opts.seed = common.seed;
            opts.engine = cfg;
            opts.threads = common.threads;
            const auto records = run_all(sc, persona, opts, factory(cfg));
            write_run_records(out / "runs", records);
            int failed = 0;
            for (const auto& r : records) {
                if (!r.ok) {
                    ++failed;
                    std::cerr << r.scenario_id << " " << to_string(r.condition) << ": " << r.error << "\n";
                }
            }
            std::cout << records.size() << " runs written to " << (out / "runs").string() << ", " << failed
                      << " failed\n";
            return failed ? 1 : 0;
        }

        if (*judge) {
            GatewayConfig g = cfg.gateway;
            g.seed = common.seed;
            auto gateway = make_gateway(g);
            const fs::path runs = runs_dir.empty() ? out / "runs" : fs::path(runs_dir);
            const auto s = judge_runs(runs, out / "judge", common.seed, *gateway, default_rubric(), common.threads);
            for (const auto& f : s.failures) std::cerr << f << "\n";
            std::cout << s.judged << " judged, " << s.failures.size() << " failed\n";
            return s.failures.empty() ? 0 : 1;
        }

        if (*rep) {
            std::vector<std::string> expected;
            if (!scenarios_dir.empty()) {
                for (const auto& s : load_scenarios(scenarios_dir)) expected.push_back(s.id);
            }
            const fs::path jd = judge_dir.empty() ? out / "judge" : fs::path(judge_dir);
            const auto r = report(jd, out / "report", expected);
            for (const auto& m : r.missing) std::cerr << "missing " << m << "\n";
            std::cout << r.scenario_count << " scenarios aggregated; enriched wins "
                      << r.win_count.at(Condition::enriched) << ", baseline wins " << r.win_count.at(Condition::baseline)
                      << "\n";
            return r.missing.empty() ? 0 : 1;
        }
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
