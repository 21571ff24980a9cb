#pragma once
// Two-condition evaluation: scripted conversations under a stateless baseline
// and under the full pipeline, blind pairwise judging, aggregate lift tables.
//
// On-disk layout under an output directory:
//   runs/<sid>.<condition>.json
//   judge/inputs/<sid>.json         what the judge sees (no condition labels)
//   judge/assignments/<sid>.json    which condition sat in slot "one"
//   judge/judgments/<sid>.json      JudgeRecord, or <sid>.failure.json
//   report/{report.json,tables.csv,radar.json,bars.json}

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "affmem/domain.hpp"
#include "affmem/engine.hpp"
#include "affmem/gateway.hpp"
#include "affmem/memory_store.hpp"
#include "affmem/scenario.hpp"

namespace affmem {

enum class Condition { baseline, enriched };
inline constexpr std::array<Condition, 2> kAllConditions = {Condition::baseline, Condition::enriched};
std::string_view to_string(Condition c) noexcept;
Condition parse_condition(std::string_view s);

struct RunRecord {
    std::string scenario_id;
    ScenarioCategory category = ScenarioCategory::meaningful;
    Condition condition = Condition::baseline;
    std::uint64_t seed = 0;
    bool ok = true;
    std::string error;  // set when !ok
    Transcript transcript;
    std::optional<std::vector<DynamicContextObject>> context_trace;  // enriched only

    friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

Violations validate(const RunRecord& r);
void to_json(json& j, const RunRecord& r);
void from_json(const json& j, RunRecord& r);

// Fixed clock for scripted runs so records do not depend on wall time.
inline constexpr Timestamp kEvalBaseTime = 1'700'000'000'000;
std::string persona_user_id(const std::string& scenario_id);

// One conversation. The baseline never touches `store`; the enriched
// condition seeds the persona into it first. Gateway errors end the
// conversation and are recorded in the returned record.
RunRecord run_scenario(const Scenario& scenario, const Persona& persona, Condition condition, std::uint64_t seed,
                       ModelGateway& gateway, MemoryStore& store, const EngineConfig& engine_cfg);

using GatewayFactory = std::function<std::unique_ptr<ModelGateway>(std::uint64_t seed)>;

struct RunOptions {
    std::vector<Condition> conditions{kAllConditions.begin(), kAllConditions.end()};
    std::uint64_t seed = 0;
    EngineConfig engine;
    unsigned threads = 0;  // 0 = hardware concurrency
};

// Every scenario x condition, each with a fresh in-memory store and a gateway
// built from the per-scenario derived seed. Output order is scenario order,
// then condition order, whatever the thread count.
std::vector<RunRecord> run_all(const std::vector<Scenario>& scenarios, const Persona& persona,
                               const RunOptions& opts, const GatewayFactory& make);

std::filesystem::path run_record_path(const std::filesystem::path& runs_dir, const std::string& scenario_id,
                                      Condition c);
void write_run_records(const std::filesystem::path& runs_dir, const std::vector<RunRecord>& records);
std::vector<RunRecord> load_run_records(const std::filesystem::path& runs_dir);

// --- judging ---------------------------------------------------------------------------------

// Seeded coin: which condition is shown to the judge as transcript "one".
Condition assign_slot_one(std::uint64_t seed, const std::string& scenario_id);

struct Assignment {
    std::string scenario_id;
    ScenarioCategory category = ScenarioCategory::meaningful;
    Condition one = Condition::baseline;

    Condition condition_of(Slot s) const noexcept;
    friend bool operator==(const Assignment&, const Assignment&) = default;
};

void to_json(json& j, const Assignment& a);
void from_json(const json& j, Assignment& a);

// Judge input for one scenario: depends only on the transcripts and the coin.
json judge_input(const std::string& scenario_id, const Transcript& one, const Transcript& two, const std::string& rubric);

struct JudgeSummary {
    std::size_t judged = 0;
    std::vector<std::string> failures;  // "<sid>: reason"
};

JudgeSummary judge_runs(const std::filesystem::path& runs_dir, const std::filesystem::path& judge_dir,
                        std::uint64_t seed, ModelGateway& gateway, const std::string& rubric = default_rubric(),
                        unsigned threads = 0);

// --- aggregation -----------------------------------------------------------------------------

// Percent lift rounded half away from zero. Throws Error{zero_baseline} when
// baseline_mean <= 0.
int compute_lift(double baseline_mean, double enriched_mean);

struct MetricSummary {
    double baseline_mean = 0.0;
    double enriched_mean = 0.0;
    double abs_lift = 0.0;
    std::optional<int> pct_lift;  // absent when the baseline mean is zero
};

struct CategorySummary {
    double baseline_mean = 0.0;
    double enriched_mean = 0.0;
    double lift = 0.0;
};

MetricSummary summarize_metric(double baseline_mean, double enriched_mean);
CategorySummary summarize_category(double baseline_mean, double enriched_mean);

struct ScenarioOutcome {
    std::string scenario_id;
    ScenarioCategory category = ScenarioCategory::meaningful;
    Condition winner = Condition::enriched;
    double confidence = 0.0;
    CriterionScores baseline{};
    CriterionScores enriched{};
};

// De-anonymises a judgment through its assignment.
ScenarioOutcome join(const JudgeRecord& record, const Assignment& assignment);

struct AggregateReport {
    std::size_t scenario_count = 0;
    std::map<Criterion, MetricSummary> per_metric;
    std::map<ScenarioCategory, CategorySummary> per_category;
    std::vector<ScenarioOutcome> per_scenario;
    std::map<Condition, int> win_count;
    std::map<std::string, int> confidence_histogram;  // "%.2f" buckets
    std::vector<std::string> missing;                 // "<sid>: reason"
};

AggregateReport aggregate(std::vector<ScenarioOutcome> outcomes, std::vector<std::string> missing);

void to_json(json& j, const MetricSummary& m);
void to_json(json& j, const CategorySummary& c);
void to_json(json& j, const ScenarioOutcome& o);
void to_json(json& j, const AggregateReport& r);

std::string tables_csv(const AggregateReport& r);
json radar_data(const AggregateReport& r);
json bars_data(const AggregateReport& r);

// Reads judge_dir, writes the four report files into out_dir. `expected`
// scenario ids without a judgment are listed as missing.
AggregateReport report(const std::filesystem::path& judge_dir, const std::filesystem::path& out_dir,
                       const std::vector<std::string>& expected = {});

// Canonical file writer used for every artifact: 2-space JSON plus newline.
void write_json_file(const std::filesystem::path& path, const json& j);

}  // namespace affmem
