#include "affmem/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "affmem/error.hpp"
#include "affmem/hashing.hpp"

namespace fs = std::filesystem;

namespace affmem {

std::string_view to_string(Condition c) noexcept { return c == Condition::baseline ? "baseline" : "enriched"; }

Condition parse_condition(std::string_view s) {
    if (s == "baseline") return Condition::baseline;
    if (s == "enriched") return Condition::enriched;
    throw Error(ErrorCode::invalid_argument, "unknown condition '" + std::string(s) + "'");
}

namespace {

// Runs fn(0..n-1) on up to `threads` workers. The first exception escaping fn
// is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mu);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

json read_json_file(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw Error(ErrorCode::not_found, "cannot open " + p.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, p.string() + ": " + e.what());
    }
}

std::vector<fs::path> json_files(const fs::path& dir) {
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string fmt4(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", x);
    return buf;
}

double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double mean_of(const CriterionScores& s) {
    return mean(std::vector<double>(s.begin(), s.end()));
}

}  // namespace

void write_json_file(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorCode::storage_unavailable, "cannot write " + path.string());
}

// --- RunRecord -----------------------------------------------------------------------------

Violations validate(const RunRecord& r) {
    Violations out;
    if (r.scenario_id.empty()) out.emplace_back("empty scenario_id");
    if (r.condition == Condition::baseline && r.context_trace) out.emplace_back("baseline record carries a context_trace");
    if (r.condition == Condition::enriched && !r.context_trace) out.emplace_back("enriched record lacks a context_trace");
    if (r.ok && !r.error.empty()) out.emplace_back("ok record with an error");
    if (!r.ok && r.error.empty()) out.emplace_back("failed record without an error");
    if (r.context_trace) {
        const auto user_turns = std::count_if(r.transcript.begin(), r.transcript.end(),
                                              [](const TranscriptLine& l) { return l.speaker == Speaker::assistant; });
        if (static_cast<std::size_t>(user_turns) != r.context_trace->size()) {
            out.emplace_back("context_trace length differs from answered turns");
        }
    }
    return out;
}

void to_json(json& j, const RunRecord& r) {
    j = json{{"scenario_id", r.scenario_id},
             {"category", to_string(r.category)},
             {"condition", to_string(r.condition)},
             {"seed", r.seed},
             {"status", r.ok ? "ok" : "failed"}};
    if (!r.ok) j["error"] = r.error;
    j["transcript"] = r.transcript;
    if (r.context_trace) j["context_trace"] = *r.context_trace;
}

void from_json(const json& j, RunRecord& r) {
    r = RunRecord{};
    r.scenario_id = j.at("scenario_id").get<std::string>();
    r.category = parse_scenario_category(j.at("category").get<std::string>());
    r.condition = parse_condition(j.at("condition").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.ok = j.at("status").get<std::string>() == "ok";
    r.error = j.value("error", std::string{});
    r.transcript = j.at("transcript").get<Transcript>();
    if (auto it = j.find("context_trace"); it != j.end()) r.context_trace = it->get<std::vector<DynamicContextObject>>();
}

std::string persona_user_id(const std::string& scenario_id) { return "persona-" + scenario_id; }

// --- run -------------------------------------------------------------------------------------

RunRecord run_scenario(const Scenario& scenario, const Persona& persona, Condition condition, std::uint64_t seed,
                       ModelGateway& gateway, MemoryStore& store, const EngineConfig& engine_cfg) {
    RunRecord rec;
    rec.scenario_id = scenario.id;
    rec.category = scenario.category;
    rec.condition = condition;
    rec.seed = seed;
    const bool enriched = condition == Condition::enriched;
    if (enriched) rec.context_trace.emplace();

    try {
        std::optional<Engine> engine;
        Session session;
        if (enriched) {
            EngineConfig cfg = engine_cfg;
            // Only the persona may appear in context.
            cfg.auto_memorize = false;
            const std::string uid = persona_user_id(scenario.id);
            for (std::size_t i = 0; i < persona.facts.size(); ++i) {
                const EmotionVector e = i < persona.seed_emotions.size() ? persona.seed_emotions[i] : EmotionVector{};
                store.add_memory(uid, persona.facts[i], e, kEvalBaseTime + static_cast<Timestamp>(i));
            }
            engine.emplace(cfg, gateway, store);
            session = engine->create_session(uid, kEvalBaseTime);
        }

        for (int turn = 0; turn < scenario.max_turns; ++turn) {
            const SimulatedTurn sim = gateway.simulate_user(persona, rec.transcript, scenario);
            if (sim.utterance.empty() && sim.done) break;
            rec.transcript.push_back({Speaker::user, sim.utterance});
            std::string reply;
            if (enriched) {
                const Timestamp now = kEvalBaseTime + 60'000 * static_cast<Timestamp>(turn + 1);
                TurnResult r = engine->process_turn(session, sim.utterance, std::nullopt, now);
                reply = std::move(r.response);
                rec.context_trace->push_back(std::move(r.context));
            } else {
                reply = gateway.generate(bare_generation_input(rec.transcript));
            }
            rec.transcript.push_back({Speaker::assistant, std::move(reply)});
            if (sim.done) break;
        }
    } catch (const Error& e) {
        rec.ok = false;
        rec.error = std::string(to_string(e.code())) + ": " + e.what();
        // Drop a dangling user line so the transcript stays paired.
        if (!rec.transcript.empty() && rec.transcript.back().speaker == Speaker::user) rec.transcript.pop_back();
    }
    return rec;
}

std::vector<RunRecord> run_all(const std::vector<Scenario>& scenarios, const Persona& persona, const RunOptions& opts,
                               const GatewayFactory& make) {
    const std::size_t nc = opts.conditions.size();
    std::vector<RunRecord> out(scenarios.size() * nc);
    parallel_for(out.size(), opts.threads, [&](std::size_t idx) {
        const Scenario& sc = scenarios[idx / nc];
        const Condition cond = opts.conditions[idx % nc];
        const std::uint64_t seed = derive_seed(opts.seed, sc.id);
        auto gateway = make(seed);
        StoreConfig store_cfg = opts.engine.store;
        store_cfg.embedding_dim = gateway->embedding_dim();
        store_cfg.persistence_path.clear();
        MemoryStore store(store_cfg, *gateway);
        out[idx] = run_scenario(sc, persona, cond, seed, *gateway, store, opts.engine);
    });
    return out;
}

fs::path run_record_path(const fs::path& runs_dir, const std::string& scenario_id, Condition c) {
    return runs_dir / (scenario_id + "." + std::string(to_string(c)) + ".json");
}

void write_run_records(const fs::path& runs_dir, const std::vector<RunRecord>& records) {
    for (const auto& r : records) write_json_file(run_record_path(runs_dir, r.scenario_id, r.condition), r);
}

std::vector<RunRecord> load_run_records(const fs::path& runs_dir) {
    std::vector<RunRecord> out;
    for (const auto& p : json_files(runs_dir)) {
        try {
            out.push_back(read_json_file(p).get<RunRecord>());
        } catch (const json::exception& e) {
            throw Error(ErrorCode::invalid_argument, p.string() + ": " + e.what());
        }
    }
    return out;
}

// --- judging ---------------------------------------------------------------------------------

Condition assign_slot_one(std::uint64_t seed, const std::string& scenario_id) {
    return (derive_seed(seed, "slot:" + scenario_id) & 1U) ? Condition::baseline : Condition::enriched;
}

Condition Assignment::condition_of(Slot s) const noexcept {
    if (s == Slot::one) return one;
    return one == Condition::baseline ? Condition::enriched : Condition::baseline;
}

void to_json(json& j, const Assignment& a) {
    j = json{{"scenario_id", a.scenario_id},
             {"category", to_string(a.category)},
             {"one", to_string(a.one)},
             {"two", to_string(a.condition_of(Slot::two))}};
}

void from_json(const json& j, Assignment& a) {
    a.scenario_id = j.at("scenario_id").get<std::string>();
    a.category = parse_scenario_category(j.at("category").get<std::string>());
    a.one = parse_condition(j.at("one").get<std::string>());
}

json judge_input(const std::string& scenario_id, const Transcript& one, const Transcript& two, const std::string& rubric) {
    return json{{"scenario_id", scenario_id},
                {"transcript_one", render_transcript(one)},
                {"transcript_two", render_transcript(two)},
                {"rubric", rubric}};
}

JudgeSummary judge_runs(const fs::path& runs_dir, const fs::path& judge_dir, std::uint64_t seed, ModelGateway& gateway,
                        const std::string& rubric, unsigned threads) {
    struct Pair {
        const RunRecord* baseline = nullptr;
        const RunRecord* enriched = nullptr;
    };
    const auto records = load_run_records(runs_dir);
    std::map<std::string, Pair> by_scenario;
    for (const auto& r : records) {
        auto& p = by_scenario[r.scenario_id];
        (r.condition == Condition::baseline ? p.baseline : p.enriched) = &r;
    }
    std::vector<std::string> ids;
    for (const auto& [id, _] : by_scenario) ids.push_back(id);

    const fs::path inputs = judge_dir / "inputs";
    const fs::path assignments = judge_dir / "assignments";
    const fs::path judgments = judge_dir / "judgments";
    for (const auto& d : {inputs, assignments, judgments}) fs::create_directories(d);

    std::vector<std::optional<std::string>> failure(ids.size());
    parallel_for(ids.size(), threads, [&](std::size_t i) {
        const std::string& sid = ids[i];
        const Pair& p = by_scenario.at(sid);
        const fs::path ok_path = judgments / (sid + ".json");
        const fs::path fail_path = judgments / (sid + ".failure.json");
        auto fail = [&](const std::string& kind, const std::string& detail) {
            fs::remove(ok_path);
            write_json_file(fail_path, json{{"scenario_id", sid}, {"error", kind}, {"detail", detail}});
            failure[i] = sid + ": " + kind + ": " + detail;
        };

        for (auto [rec, cond] : {std::pair{p.baseline, Condition::baseline}, std::pair{p.enriched, Condition::enriched}}) {
            if (!rec) return fail("missing-run", std::string(to_string(cond)) + " record absent");
            if (!rec->ok) return fail("failed-run", std::string(to_string(cond)) + " run failed: " + rec->error);
        }

        const Assignment a{sid, p.baseline->category, assign_slot_one(seed, sid)};
        const RunRecord& one = a.one == Condition::baseline ? *p.baseline : *p.enriched;
        const RunRecord& two = a.one == Condition::baseline ? *p.enriched : *p.baseline;
        const json input = judge_input(sid, one.transcript, two.transcript, rubric);
        write_json_file(inputs / (sid + ".json"), input);
        write_json_file(assignments / (sid + ".json"), a);

        try {
            JudgeRecord r = gateway.judge(sid, input.at("transcript_one").get<std::string>(),
                                          input.at("transcript_two").get<std::string>(), rubric);
            r.scenario_id = sid;
            fs::remove(fail_path);
            write_json_file(ok_path, r);
        } catch (const Error& e) {
            fail(std::string(to_string(e.code())), e.what());
        }
    });

    JudgeSummary s;
    for (const auto& f : failure) {
        if (f) {
            s.failures.push_back(*f);
        } else {
            ++s.judged;
        }
    }
    return s;
}

// --- aggregation -----------------------------------------------------------------------------

int compute_lift(double baseline_mean, double enriched_mean) {
    if (!(baseline_mean > 0.0)) throw Error(ErrorCode::zero_baseline, "lift undefined for a non-positive baseline mean");
    return static_cast<int>(std::round((enriched_mean - baseline_mean) / baseline_mean * 100.0));
}

MetricSummary summarize_metric(double baseline_mean, double enriched_mean) {
    MetricSummary m{baseline_mean, enriched_mean, enriched_mean - baseline_mean, std::nullopt};
    if (baseline_mean > 0.0) m.pct_lift = compute_lift(baseline_mean, enriched_mean);
    return m;
}

CategorySummary summarize_category(double baseline_mean, double enriched_mean) {
    return {baseline_mean, enriched_mean, enriched_mean - baseline_mean};
}

ScenarioOutcome join(const JudgeRecord& record, const Assignment& assignment) {
    if (record.scenario_id != assignment.scenario_id) {
        throw Error(ErrorCode::invalid_argument, "judgment " + record.scenario_id + " joined with assignment " +
                                                     assignment.scenario_id);
    }
    ScenarioOutcome o;
    o.scenario_id = record.scenario_id;
    o.category = assignment.category;
    o.winner = assignment.condition_of(record.preferred);
    o.confidence = record.confidence;
    const bool baseline_is_one = assignment.one == Condition::baseline;
    o.baseline = baseline_is_one ? record.scores_one : record.scores_two;
    o.enriched = baseline_is_one ? record.scores_two : record.scores_one;
    return o;
}

AggregateReport aggregate(std::vector<ScenarioOutcome> outcomes, std::vector<std::string> missing) {
    std::sort(outcomes.begin(), outcomes.end(),
              [](const ScenarioOutcome& a, const ScenarioOutcome& b) { return a.scenario_id < b.scenario_id; });
    std::sort(missing.begin(), missing.end());

    AggregateReport r;
    r.scenario_count = outcomes.size();
    r.win_count[Condition::baseline] = 0;
    r.win_count[Condition::enriched] = 0;

    if (!outcomes.empty()) {
        for (std::size_t c = 0; c < kAllCriteria.size(); ++c) {
            std::vector<double> b, e;
            for (const auto& o : outcomes) {
                b.push_back(o.baseline[c]);
                e.push_back(o.enriched[c]);
            }
            r.per_metric[kAllCriteria[c]] = summarize_metric(mean(b), mean(e));
        }
    }
    for (auto cat : kAllScenarioCategories) {
        std::vector<double> b, e;
        for (const auto& o : outcomes) {
            if (o.category != cat) continue;
            b.push_back(mean_of(o.baseline));
            e.push_back(mean_of(o.enriched));
        }
        if (!b.empty()) r.per_category[cat] = summarize_category(mean(b), mean(e));
    }
    for (const auto& o : outcomes) {
        ++r.win_count[o.winner];
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.2f", o.confidence);
        ++r.confidence_histogram[buf];
    }
    r.per_scenario = std::move(outcomes);
    r.missing = std::move(missing);
    return r;
}

void to_json(json& j, const MetricSummary& m) {
    j = json{{"baseline_mean", m.baseline_mean},
             {"enriched_mean", m.enriched_mean},
             {"abs_lift", m.abs_lift},
             {"pct_lift", m.pct_lift ? json(*m.pct_lift) : json(nullptr)}};
}

void to_json(json& j, const CategorySummary& c) {
    j = json{{"baseline_mean", c.baseline_mean}, {"enriched_mean", c.enriched_mean}, {"lift", c.lift}};
}

void to_json(json& j, const ScenarioOutcome& o) {
    json criteria = json::object();
    for (std::size_t c = 0; c < kAllCriteria.size(); ++c) {
        criteria[std::string(to_string(kAllCriteria[c]))] = {{"baseline", o.baseline[c]}, {"enriched", o.enriched[c]}};
    }
    j = json{{"scenario_id", o.scenario_id},
             {"category", to_string(o.category)},
             {"winner", to_string(o.winner)},
             {"confidence", o.confidence},
             {"criteria", std::move(criteria)}};
}

void to_json(json& j, const AggregateReport& r) {
    json metrics = json::object();
    for (const auto& [c, m] : r.per_metric) metrics[std::string(to_string(c))] = m;
    json categories = json::object();
    for (const auto& [c, s] : r.per_category) categories[std::string(to_string(c))] = s;
    json wins = json::object();
    for (const auto& [c, n] : r.win_count) wins[std::string(to_string(c))] = n;
    j = json{{"scenario_count", r.scenario_count},
             {"per_metric", std::move(metrics)},
             {"per_category", std::move(categories)},
             {"per_scenario", r.per_scenario},
             {"win_count", std::move(wins)},
             {"confidence_histogram", r.confidence_histogram},
             {"missing", r.missing}};
}

std::string tables_csv(const AggregateReport& r) {
    std::string out = "table,key,baseline_mean,enriched_mean,abs_lift,pct_lift,winner,confidence\n";
    for (const auto& [c, m] : r.per_metric) {
        out += "metric," + std::string(to_string(c)) + "," + fmt4(m.baseline_mean) + "," + fmt4(m.enriched_mean) + "," +
               fmt4(m.abs_lift) + "," + (m.pct_lift ? std::to_string(*m.pct_lift) : "") + ",,\n";
    }
    for (const auto& [c, s] : r.per_category) {
        out += "category," + std::string(to_string(c)) + "," + fmt4(s.baseline_mean) + "," + fmt4(s.enriched_mean) + "," +
               fmt4(s.lift) + ",,,\n";
    }
    for (const auto& o : r.per_scenario) {
        const double b = mean_of(o.baseline), e = mean_of(o.enriched);
        out += "scenario," + o.scenario_id + "," + fmt4(b) + "," + fmt4(e) + "," + fmt4(e - b) + ",," +
               std::string(to_string(o.winner)) + "," + fmt4(o.confidence) + "\n";
    }
    return out;
}

namespace {

json two_series(const json& axes, const std::vector<double>& b, const std::vector<double>& e) {
    return json{{"axes", axes},
                {"series", json::array({json{{"name", "baseline"}, {"values", b}},
                                        json{{"name", "enriched"}, {"values", e}}})}};
}

}  // namespace

json radar_data(const AggregateReport& r) {
    json axes = json::array();
    std::vector<double> b, e;
    for (auto c : kAllCriteria) {
        axes.push_back(to_string(c));
        auto it = r.per_metric.find(c);
        b.push_back(it == r.per_metric.end() ? 0.0 : it->second.baseline_mean);
        e.push_back(it == r.per_metric.end() ? 0.0 : it->second.enriched_mean);
    }
    return two_series(axes, b, e);
}

json bars_data(const AggregateReport& r) {
    json axes = json::array();
    std::vector<double> b, e;
    for (auto c : kAllScenarioCategories) {
        axes.push_back(to_string(c));
        auto it = r.per_category.find(c);
        b.push_back(it == r.per_category.end() ? 0.0 : it->second.baseline_mean);
        e.push_back(it == r.per_category.end() ? 0.0 : it->second.enriched_mean);
    }
    return two_series(axes, b, e);
}

AggregateReport report(const fs::path& judge_dir, const fs::path& out_dir, const std::vector<std::string>& expected) {
    const fs::path assignments = judge_dir / "assignments";
    const fs::path judgments = judge_dir / "judgments";

    std::set<std::string> ids(expected.begin(), expected.end());
    for (const auto& p : json_files(assignments)) ids.insert(p.stem().string());
    for (const auto& p : json_files(judgments)) {
        std::string stem = p.stem().string();
        if (stem.ends_with(".failure")) stem.resize(stem.size() - 8);
        ids.insert(stem);
    }

    std::vector<ScenarioOutcome> outcomes;
    std::vector<std::string> missing;
    for (const auto& sid : ids) {
        const fs::path a_path = assignments / (sid + ".json");
        const fs::path j_path = judgments / (sid + ".json");
        const fs::path f_path = judgments / (sid + ".failure.json");
        if (fs::exists(f_path)) {
            const json f = read_json_file(f_path);
            missing.push_back(sid + ": " + f.value("error", std::string("failure")) + ": " + f.value("detail", std::string{}));
            continue;
        }
        if (!fs::exists(j_path) || !fs::exists(a_path)) {
            missing.push_back(sid + ": no judgment");
            continue;
        }
        try {
            const JudgeRecord rec = parse_judge_record(read_json_file(j_path));
            outcomes.push_back(join(rec, read_json_file(a_path).get<Assignment>()));
        } catch (const Error& e) {
            missing.push_back(sid + ": " + std::string(to_string(e.code())) + ": " + e.what());
        } catch (const json::exception& e) {
            missing.push_back(sid + ": bad assignment: " + e.what());
        }
    }

    AggregateReport r = aggregate(std::move(outcomes), std::move(missing));
    write_json_file(out_dir / "report.json", r);
    {
        std::ofstream csv(out_dir / "tables.csv", std::ios::trunc);
        csv << tables_csv(r);
        if (!csv) throw Error(ErrorCode::storage_unavailable, "cannot write tables.csv");
    }
    write_json_file(out_dir / "radar.json", radar_data(r));
    write_json_file(out_dir / "bars.json", bars_data(r));
    return r;
}

}  // namespace affmem
