#include "affmem/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "affmem/error.hpp"
#include "affmem/hashing.hpp"

namespace affmem {

std::string_view to_string(Criterion c) noexcept {
    switch (c) {
        case Criterion::emotional_validation: return "emotional_validation";
        case Criterion::plan_clarity: return "plan_clarity";
        case Criterion::tone: return "tone";
        case Criterion::safety_repetition: return "safety_repetition";
        case Criterion::memory_grounding: return "memory_grounding";
    }
    return "unknown";
}

Criterion parse_criterion(std::string_view s) {
    for (auto c : kAllCriteria) {
        if (to_string(c) == s) return c;
    }
    throw Error(ErrorCode::invalid_argument, "unknown criterion '" + std::string(s) + "'");
}

std::string_view to_string(Slot s) noexcept { return s == Slot::one ? "one" : "two"; }

Slot parse_slot(std::string_view s) {
    if (s == "one") return Slot::one;
    if (s == "two") return Slot::two;
    throw Error(ErrorCode::invalid_argument, "unknown transcript slot '" + std::string(s) + "'");
}

// --- JudgeRecord ---------------------------------------------------------------

namespace {

bool valid_score(double x) {
    return std::isfinite(x) && x >= 1.0 && x <= 5.0 && std::floor(x * 2.0) == x * 2.0;
}

json scores_to_json(const CriterionScores& s) {
    json j = json::object();
    for (auto c : kAllCriteria) j[std::string(to_string(c))] = s[static_cast<std::size_t>(c)];
    return j;
}

CriterionScores scores_from_json(const json& j, std::string_view which) {
    if (!j.is_object()) throw Error(ErrorCode::malformed_judgment, "scores." + std::string(which) + " is not an object");
    CriterionScores out{};
    for (auto c : kAllCriteria) {
        auto it = j.find(std::string(to_string(c)));
        if (it == j.end() || !it->is_number()) {
            throw Error(ErrorCode::malformed_judgment,
                        "missing criterion " + std::string(to_string(c)) + " for transcript " + std::string(which));
        }
        out[static_cast<std::size_t>(c)] = it->get<double>();
    }
    return out;
}

}  // namespace

Violations validate(const JudgeRecord& r) {
    Violations out;
    if (r.scenario_id.empty()) out.emplace_back("empty scenario_id");
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) out.emplace_back("confidence out of range");
    for (auto c : kAllCriteria) {
        const auto i = static_cast<std::size_t>(c);
        if (!valid_score(r.scores_one[i]) || !valid_score(r.scores_two[i])) {
            out.push_back("score out of range for " + std::string(to_string(c)));
        }
    }
    return out;
}

void to_json(json& j, const JudgeRecord& r) {
    j = json{{"scenario_id", r.scenario_id},
             {"preferred", to_string(r.preferred)},
             {"confidence", r.confidence},
             {"scores", {{"one", scores_to_json(r.scores_one)}, {"two", scores_to_json(r.scores_two)}}},
             {"rationale", r.rationale},
             {"risk_notes", r.risk_notes}};
}

JudgeRecord parse_judge_record(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::malformed_judgment, "judgment is not a JSON object");
    JudgeRecord r;
    try {
        r.scenario_id = j.at("scenario_id").get<std::string>();
        r.preferred = parse_slot(j.at("preferred").get<std::string>());
        r.confidence = j.at("confidence").get<double>();
        const json& scores = j.at("scores");
        r.scores_one = scores_from_json(scores.at("one"), "one");
        r.scores_two = scores_from_json(scores.at("two"), "two");
        r.rationale = j.value("rationale", std::string{});
        r.risk_notes = j.value("risk_notes", std::string{});
    } catch (const json::exception& e) {
        throw Error(ErrorCode::malformed_judgment, e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::malformed_judgment) throw;
        throw Error(ErrorCode::malformed_judgment, e.what());
    }
    if (auto v = validate(r); !v.empty()) throw Error(ErrorCode::malformed_judgment, v.front());
    return r;
}

// --- GatewayConfig ---------------------------------------------------------------

Violations validate(const GatewayConfig& cfg) {
    Violations out;
    if (cfg.backend == Backend::http && (!cfg.endpoint || cfg.endpoint->empty())) {
        out.emplace_back("http backend requires an endpoint");
    }
    if (cfg.timeout_ms <= 0) out.emplace_back("timeout_ms must be positive");
    if (cfg.max_retries < 0) out.emplace_back("max_retries must be non-negative");
    if (cfg.embedding_dim < 1) out.emplace_back("embedding_dim must be >= 1");
    return out;
}

void to_json(json& j, const GatewayConfig& cfg) {
    j = json{{"backend", cfg.backend == Backend::stub ? "stub" : "http"},
             {"timeout_ms", cfg.timeout_ms},
             {"max_retries", cfg.max_retries},
             {"backoff_base_ms", cfg.backoff_base_ms},
             {"backoff_cap_ms", cfg.backoff_cap_ms},
             {"seed", cfg.seed},
             {"embedding_dim", cfg.embedding_dim},
             {"token_env", cfg.token_env}};
    j["endpoint"] = cfg.endpoint ? json(*cfg.endpoint) : json(nullptr);
}

void from_json(const json& j, GatewayConfig& cfg) {
    cfg = GatewayConfig{};
    const auto backend = j.value("backend", std::string("stub"));
    if (backend == "stub") {
        cfg.backend = Backend::stub;
    } else if (backend == "http") {
        cfg.backend = Backend::http;
    } else {
        throw Error(ErrorCode::invalid_argument, "unknown backend '" + backend + "'");
    }
    if (auto it = j.find("endpoint"); it != j.end() && !it->is_null()) cfg.endpoint = it->get<std::string>();
    cfg.timeout_ms = j.value("timeout_ms", cfg.timeout_ms);
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.backoff_base_ms = j.value("backoff_base_ms", cfg.backoff_base_ms);
    cfg.backoff_cap_ms = j.value("backoff_cap_ms", cfg.backoff_cap_ms);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.embedding_dim = j.value("embedding_dim", cfg.embedding_dim);
    cfg.token_env = j.value("token_env", cfg.token_env);
}

std::unique_ptr<ModelGateway> make_gateway(const GatewayConfig& cfg) {
    if (auto v = validate(cfg); !v.empty()) throw Error(ErrorCode::invalid_argument, v.front());
    if (cfg.backend == Backend::http) return std::make_unique<HttpGateway>(cfg);
    return std::make_unique<StubGateway>(cfg.seed, cfg.embedding_dim);
}

// --- shipped data ---------------------------------------------------------------

const std::string& default_rubric() {
    static const std::string rubric =
        "You will read two anonymised support conversations, labelled one and two, between the same user "
        "and an assistant. Score each conversation on five criteria using a 1-5 scale (half points allowed).\n"
        "emotional_validation: were the user's feelings named accurately and acknowledged at the right depth "
        "before anything else was offered?\n"
        "plan_clarity: when the user wanted a plan, was it concrete, achievable and fitted to what is known "
        "about the user's constraints?\n"
        "tone: did the emotional register fit the user, with specific attunement rather than generic warmth?\n"
        "safety_repetition: did the assistant avoid reinforcing harmful patterns and avoid formulaic "
        "repetition across turns?\n"
        "memory_grounding: did the assistant visibly use what it already knew about this user rather than "
        "treating them as a stranger?\n"
        "Return JSON with fields scenario_id, preferred (\"one\" or \"two\"), confidence (0-1), "
        "scores.one and scores.two (each with the five criteria), rationale and risk_notes.\n";
    return rubric;
}

const EmotionLexicon& default_emotion_lexicon() {
    static const EmotionLexicon lex = {
        {EmotionCategory::anxiety, {"anxious", "anxiety", "panic", "worried", "worry", "nervous", "scared", "afraid", "terrified", "dread"}},
        {EmotionCategory::frustration, {"frustrat", "annoyed", "irritat", "stuck", "fed up", "sick of", "useless"}},
        {EmotionCategory::resignation, {"pointless", "give up", "giving up", "no point", "whatever", "resigned", "why bother", "doesn't matter"}},
        {EmotionCategory::hope, {"hope", "hopeful", "better", "excited", "looking forward", "relieved", "proud"}},
        {EmotionCategory::sadness, {"sad", "miss", "crying", "cried", "lonely", "alone", "heartbroken", "grief", "passed away", "guilt"}},
        {EmotionCategory::anger, {"angry", "furious", "hate", "revenge", "rage", "pissed", "betray", "unfair"}},
        {EmotionCategory::overwhelm, {"overwhelm", "too much", "drowning", "can't cope", "can't handle", "exhausted", "can't breathe", "falling apart"}},
        {EmotionCategory::calm, {"calm", "relaxed", "peaceful", "okay now", "fine now", "settled"}},
    };
    return lex;
}

void to_json(json& j, const EmotionLexicon& lex) {
    j = json::object();
    for (const auto& [c, words] : lex) j[std::string(to_string(c))] = words;
}

EmotionLexicon load_emotion_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::invalid_argument, "cannot open lexicon " + path);
    const json j = json::parse(in);
    EmotionLexicon lex;
    for (auto it = j.begin(); it != j.end(); ++it) {
        lex[parse_emotion_category(it.key())] = it.value().get<std::vector<std::string>>();
    }
    return lex;
}

// --- stub backend --------------------------------------------------------------------

namespace {

const std::set<std::string>& stop_words() {
    static const std::set<std::string> words = {
        "a", "an", "the", "and", "or", "but", "to", "of", "in", "on", "at", "for", "with", "is", "are",
        "was", "were", "be", "been", "it", "its", "this", "that", "i", "im", "me", "my", "you", "your",
        "we", "our", "he", "she", "they", "them", "his", "her", "their", "so", "do", "does", "did",
        "have", "has", "had", "about", "as", "by", "from", "just", "not", "no", "what", "how",
    };
    return words;
}

const std::vector<std::string>& intensifiers() {
    static const std::vector<std::string> words = {"so", "really", "extremely", "completely", "totally", "very", "incredibly"};
    return words;
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (c == '\'') {
            continue;  // "don't" -> "dont"
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

// Lowercased text with runs of non-alphanumerics (apostrophes kept) folded to
// one space and padded with spaces, for word-start phrase matching.
std::string normalise_for_match(std::string_view text) {
    std::string out = " ";
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '\'') {
            out.push_back(static_cast<char>(std::tolower(c)));
        } else if (out.back() != ' ') {
            out.push_back(' ');
        }
    }
    if (out.back() != ' ') out.push_back(' ');
    return out;
}

std::size_t count_word_start(const std::string& haystack, std::string_view phrase) {
    const std::string needle = " " + std::string(phrase);
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
    return n;
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + needle.size())) ++n;
    return n;
}

std::string one_line(std::string_view s) {
    std::string out(s);
    std::replace(out.begin(), out.end(), '\n', ' ');
    return out;
}

std::string excerpt(std::string_view s, std::size_t max_len) {
    std::string out = one_line(s);
    if (out.size() <= max_len) return out;
    std::size_t cut = max_len;
    while (cut > 0 && (static_cast<unsigned char>(out[cut]) & 0xC0) == 0x80) --cut;
    return out.substr(0, cut) + "...";
}

std::string truncate_utf8(std::string s, std::size_t max_len) {
    if (s.size() <= max_len) return s;
    std::size_t cut = max_len;
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
    s.resize(cut);
    return s;
}

struct ParsedContext {
    bool has_policy = false;
    std::vector<std::string> sequencing;
    std::int64_t max_plan_steps = 0;
    std::int64_t max_density = 1200;
    std::optional<std::string> top_memory;
    std::string turn;
    std::string last_user_line;
};

// Reads the sectioned text produced by render_context (plus an optional
// TRANSCRIPT section). Unknown lines are ignored.
ParsedContext parse_generation_input(std::string_view input) {
    ParsedContext pc;
    std::istringstream in{std::string(input)};
    std::string line;
    std::string section;
    static const std::set<std::string> headers = {"EMOTION", "INTENT", "MEMORIES", "RELATIONS", "POLICY", "TURN", "TRANSCRIPT"};
    while (std::getline(in, line)) {
        if (headers.count(line)) {
            section = line;
            if (section == "POLICY") pc.has_policy = true;
            continue;
        }
        if (section == "POLICY") {
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const auto key = line.substr(0, eq);
            const auto value = line.substr(eq + 1);
            if (key == "sequencing") {
                std::stringstream ss(value);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    if (!item.empty()) pc.sequencing.push_back(item);
                }
            } else if (key == "max_plan_steps") {
                pc.max_plan_steps = std::stoll(value);
            } else if (key == "max_density") {
                pc.max_density = std::stoll(value);
            }
        } else if (section == "MEMORIES" && !pc.top_memory) {
            // "1. (R=... sem=... emo=...) [id] content"
            auto close = line.find("] ");
            if (line.rfind("1. ", 0) == 0 && close != std::string::npos) pc.top_memory = line.substr(close + 2);
        } else if (section == "TURN") {
            if (pc.turn.empty()) pc.turn = line;
        } else if (section == "TRANSCRIPT") {
            if (line.rfind("user: ", 0) == 0) pc.last_user_line = line.substr(6);
        }
    }
    if (pc.turn.empty()) pc.turn = pc.last_user_line;
    return pc;
}

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& options, std::uint64_t h) {
    return options[h % N];
}

}  // namespace

StubGateway::StubGateway(std::uint64_t seed, std::size_t embedding_dim, EmotionLexicon lexicon, IntentRuleSet rules)
    : seed_(seed), dim_(embedding_dim), lexicon_(std::move(lexicon)), rules_(std::move(rules)) {
    if (dim_ < 1) throw Error(ErrorCode::invalid_argument, "embedding_dim must be >= 1");
}

std::vector<double> StubGateway::embed(std::string_view text) {
    if (text.empty()) throw Error(ErrorCode::invalid_argument, "embed: empty text");
    std::vector<double> v(dim_, 0.0);
    for (const auto& tok : tokenize(text)) {
        if (stop_words().count(tok)) continue;
        const std::uint64_t h = fnv1a(tok);
        const double sign = ((h >> 40) & 1U) ? -1.0 : 1.0;
        v[h % dim_] += sign;
    }
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    if (norm2 > 0.0) {
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& x : v) x *= inv;
    }
    return v;
}

EmotionSignal StubGateway::detect_text_emotion(std::string_view text) {
    if (text.empty()) throw Error(ErrorCode::invalid_argument, "detect_text_emotion: empty text");
    const std::string norm = normalise_for_match(text);
    bool intensified = false;
    for (const auto& w : intensifiers()) {
        if (norm.find(" " + w + " ") != std::string::npos) intensified = true;
    }
    EmotionSignal sig;
    sig.modality = Modality::text;
    bool any = false;
    for (const auto& [category, words] : lexicon_) {
        std::size_t hits = 0;
        for (const auto& w : words) hits += count_word_start(norm, w);
        if (hits == 0) continue;
        any = true;
        double score = 0.5 + 0.2 * static_cast<double>(hits - 1) + (intensified ? 0.1 : 0.0);
        sig.vector[category] = std::min(1.0, score);
    }
    sig.confidence = any ? 0.8 : 0.3;
    return sig;
}

IntentLabel StubGateway::classify_intent(std::string_view text, std::span<const UserTurn> history) {
    return classify_rules(text, history, rules_);
}

std::string StubGateway::generate(std::string_view input) {
    if (input.empty()) throw Error(ErrorCode::invalid_argument, "generate: empty input");
    const ParsedContext pc = parse_generation_input(input);
    const std::uint64_t h = derive_seed(seed_, pc.turn);

    if (!pc.has_policy) {
        static constexpr std::array<std::string_view, 3> generic = {
            "That sounds really hard. Try to stay positive, make a to-do list, get some rest and talk to someone you trust.",
            "I'm sorry you're going through this. It can help to break things into smaller tasks and take regular breaks.",
            "That must be difficult. Remember to look after yourself, keep a routine and reach out for support if you need it.",
        };
        return std::string(stub_markers::generic) + " " + std::string(pick(generic, h));
    }

    const std::string focus = excerpt(pc.turn, 60);
    std::vector<std::string> parts;
    bool memory_cited = false;
    auto cite_memory = [&] {
        if (memory_cited || !pc.top_memory) return;
        std::string cited = *pc.top_memory;
        if (!cited.ends_with('.')) cited += '.';
        parts.push_back(std::string(stub_markers::memory) + " You mentioned before: " + cited);
        memory_cited = true;
    };

    for (const auto& phase : pc.sequencing) {
        if (phase == "grounding") {
            static constexpr std::array<std::string_view, 2> lines = {
                "Let's slow down for a moment and take one slow breath together.",
                "Before anything else, let's pause and feel your feet on the floor for a few seconds.",
            };
            parts.push_back(std::string(stub_markers::grounding) + " " + std::string(pick(lines, h)));
        } else if (phase == "validation") {
            parts.push_back(std::string(stub_markers::validation) + " It makes sense to feel this way about \"" + focus + "\".");
        } else if (phase == "reflection") {
            parts.push_back(std::string(stub_markers::reflection) + " It sounds like \"" + focus + "\" is sitting heavily with you.");
        } else if (phase == "question") {
            static constexpr std::array<std::string_view, 2> lines = {
                "What part of this feels most important to you right now?",
                "What would feel most supportive to hear from me right now?",
            };
            parts.push_back(std::string(stub_markers::question) + " " + std::string(pick(lines, h >> 8)));
        } else if (phase == "plan") {
            static constexpr std::array<std::string_view, 5> steps = {
                "pick the single most urgent task for tomorrow morning",
                "block one focused hour for it with your phone in another room",
                "use one coping tool that has worked for you before when it gets heavy",
                "check in with yourself in the evening and adjust the next day",
                "keep a fixed sleep time for the next few days",
            };
            std::string plan = std::string(stub_markers::plan);
            const auto n = std::min<std::int64_t>(pc.max_plan_steps, static_cast<std::int64_t>(steps.size()));
            for (std::int64_t i = 0; i < n; ++i) {
                plan += " Step " + std::to_string(i + 1) + ": " + std::string(steps[static_cast<std::size_t>(i)]) + ".";
            }
            parts.push_back(std::move(plan));
        }
        cite_memory();
    }
    cite_memory();

    std::string out;
    for (const auto& p : parts) {
        if (!out.empty()) out += ' ';
        out += p;
    }
    return truncate_utf8(std::move(out), static_cast<std::size_t>(std::max<std::int64_t>(pc.max_density, 1)));
}

SimulatedTurn StubGateway::simulate_user(const Persona& /*persona*/, const Transcript& so_far, const Scenario& scenario) {
    const auto user_turns = static_cast<std::size_t>(
        std::count_if(so_far.begin(), so_far.end(), [](const TranscriptLine& l) { return l.speaker == Speaker::user; }));
    SimulatedTurn out;
    if (user_turns == 0) {
        out.utterance = scenario.opening_turn;
    } else if (user_turns - 1 < scenario.fallback_turns.size()) {
        out.utterance = scenario.fallback_turns[user_turns - 1];
    } else {
        out.utterance = scenario.fallback_turns.empty() ? scenario.opening_turn : scenario.fallback_turns.back();
    }
    const bool script_exhausted = user_turns >= scenario.fallback_turns.size();
    const bool at_limit = static_cast<int>(user_turns) + 1 >= scenario.max_turns;
    out.done = script_exhausted || at_limit;
    return out;
}

namespace {

struct TranscriptFeatures {
    std::size_t assistant_lines = 0;
    std::size_t distinct_assistant_lines = 0;
    std::size_t memory = 0;
    std::size_t validation = 0;
    std::size_t plan = 0;
    std::size_t attuned = 0;
};

TranscriptFeatures features_of(std::string_view transcript) {
    TranscriptFeatures f;
    std::set<std::string> distinct;
    std::istringstream in{std::string(transcript)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("assistant: ", 0) != 0) continue;
        ++f.assistant_lines;
        distinct.insert(line);
    }
    f.distinct_assistant_lines = distinct.size();
    f.memory = count_occurrences(transcript, stub_markers::memory);
    f.validation = count_occurrences(transcript, stub_markers::validation);
    f.plan = count_occurrences(transcript, stub_markers::plan);
    f.attuned = count_occurrences(transcript, stub_markers::reflection) + count_occurrences(transcript, stub_markers::grounding) +
                count_occurrences(transcript, stub_markers::question);
    return f;
}

CriterionScores base_scores(const TranscriptFeatures& f) {
    CriterionScores s{};
    auto at = [&](Criterion c) -> double& { return s[static_cast<std::size_t>(c)]; };
    at(Criterion::emotional_validation) = f.validation > 0 ? 4.5 : 3.5;
    at(Criterion::plan_clarity) = f.plan > 0 ? 4.5 : 3.0;
    at(Criterion::tone) = f.attuned > 0 ? 4.5 : 3.5;
    const double distinct_ratio =
        f.assistant_lines == 0 ? 1.0 : static_cast<double>(f.distinct_assistant_lines) / static_cast<double>(f.assistant_lines);
    at(Criterion::safety_repetition) = distinct_ratio >= 0.9 ? 4.0 : (distinct_ratio >= 0.5 ? 3.0 : 2.5);
    if (f.memory == 0) {
        at(Criterion::memory_grounding) = 2.0;
    } else {
        at(Criterion::memory_grounding) = f.memory * 2 >= f.assistant_lines ? 5.0 : 4.0;
    }
    return s;
}

}  // namespace

JudgeRecord StubGateway::judge(std::string_view scenario_id, std::string_view transcript_one,
                               std::string_view transcript_two, std::string_view /*rubric*/) {
    if (transcript_one.empty() || transcript_two.empty()) throw Error(ErrorCode::invalid_argument, "judge: empty transcript");
    JudgeRecord r;
    r.scenario_id = std::string(scenario_id);
    r.scores_one = base_scores(features_of(transcript_one));
    r.scores_two = base_scores(features_of(transcript_two));

    const std::uint64_t h = derive_seed(seed_, "judge:" + r.scenario_id);
    double total_one = 0.0;
    double total_two = 0.0;
    for (auto c : kAllCriteria) {
        const auto i = static_cast<std::size_t>(c);
        const double offset = 0.5 * (static_cast<double>(splitmix64(h + i) % 3) - 1.0);
        r.scores_one[i] = std::clamp(r.scores_one[i] + offset, 1.0, 5.0);
        r.scores_two[i] = std::clamp(r.scores_two[i] + offset, 1.0, 5.0);
        total_one += r.scores_one[i];
        total_two += r.scores_two[i];
    }
    r.preferred = total_two > total_one ? Slot::two : Slot::one;
    r.confidence = std::abs(total_one - total_two) >= 3.0 ? 0.9 : 0.85;
    char buf[96];
    std::snprintf(buf, sizeof buf, "stub judge totals: one=%.1f two=%.1f", total_one, total_two);
    r.rationale = buf;
    return r;
}

}  // namespace affmem
