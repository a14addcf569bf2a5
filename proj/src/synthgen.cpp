#include "citefix/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "citefix/errors.hpp"
#include "citefix/strsim.hpp"
#include "citefix/text.hpp"

namespace citefix::synthgen {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Deterministic pseudo-word vocabulary

const std::array<std::string, 100>& syllables() {
    static const std::array<std::string, 100> table = [] {
        std::array<std::string, 100> t;
        const char* cons = "bcdfghjklmnprstvwxyz";
        const char* vowels = "aeiou";
        for (int c = 0; c < 20; ++c) {
            for (int v = 0; v < 5; ++v) {
                t[c * 5 + v] = std::string(1, cons[c]) + vowels[v];
            }
        }
        return t;
    }();
    return table;
}

std::string pseudo_word(std::uint32_t i) {
    const auto& syl = syllables();
    return syl[(i / 10000) % 100] + syl[(i / 100) % 100] + syl[i % 100];
}

std::string capitalize(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

const std::vector<std::pair<std::string, Gender>>& given_names() {
    static const std::vector<std::pair<std::string, Gender>> names = [] {
        std::vector<std::pair<std::string, Gender>> v;
        for (const char* n : {"James", "John", "Robert", "Michael", "William", "David", "Richard",
                              "Joseph", "Thomas", "Charles", "Daniel", "Matthew", "Anthony", "Mark",
                              "Steven", "Paul", "Andrew", "Joshua", "Kevin", "Brian"}) {
            v.emplace_back(n, Gender::Male);
        }
        for (const char* n : {"Mary", "Patricia", "Jennifer", "Linda", "Elizabeth", "Barbara",
                              "Susan", "Jessica", "Sarah", "Karen", "Lisa", "Nancy", "Betty",
                              "Margaret", "Sandra", "Ashley", "Kimberly", "Emily", "Donna",
                              "Michelle"}) {
            v.emplace_back(n, Gender::Female);
        }
        return v;
    }();
    return names;
}

// ---------------------------------------------------------------------------
// Samplers

double uniform01(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

std::uint32_t uniform_u32(std::mt19937_64& rng, std::uint32_t lo, std::uint32_t hi) {
    return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
}

// Zipf-Mandelbrot over ranks 0..n-1: weight (rank + 1 + offset)^-s.
struct ZipfSampler {
    std::vector<double> cdf;

    ZipfSampler(std::size_t n, double s, double offset) {
        cdf.resize(n);
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            acc += std::pow(static_cast<double>(r) + 1.0 + offset, -s);
            cdf[r] = acc;
        }
        for (auto& c : cdf) c /= acc;
    }

    std::size_t sample(std::mt19937_64& rng) const {
        const double u = uniform01(rng);
        return static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    }
};

// Cumulative-weight sampler for author draws.
struct WeightedSampler {
    std::vector<double> cdf;

    explicit WeightedSampler(const std::vector<double>& weights) {
        cdf.resize(weights.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            cdf[i] = acc;
        }
        if (acc > 0) {
            for (auto& c : cdf) c /= acc;
        }
    }

    std::size_t sample(std::mt19937_64& rng) const {
        const double u = uniform01(rng);
        return static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    }
};

// Weighted sampling without replacement; linear scan per draw (draw counts
// are quota-sized, so this stays cheap).
std::vector<std::size_t> weighted_sample_without_replacement(std::vector<double> weights,
                                                             std::size_t n,
                                                             std::mt19937_64& rng) {
    std::vector<std::size_t> picked;
    picked.reserve(n);
    double total = 0.0;
    for (double w : weights) total += w;
    for (std::size_t draw = 0; draw < n && total > 1e-12; ++draw) {
        double u = uniform01(rng) * total;
        std::size_t idx = weights.size() - 1;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0) continue;
            if (u < weights[i]) {
                idx = i;
                break;
            }
            u -= weights[i];
        }
        picked.push_back(idx);
        total -= weights[idx];
        weights[idx] = 0.0;
    }
    return picked;
}

std::size_t teamsize_bucket(std::uint32_t team) {
    if (team <= 1) return 0;
    if (team == 2) return 1;
    if (team <= 4) return 2;
    if (team <= 9) return 3;
    return 4;
}

}  // namespace

std::vector<double> SynthConfig::ramp_schedule(std::uint32_t n_pre, std::uint32_t n_ramp,
                                               double peak) {
    std::vector<double> out(n_pre, 0.0);
    for (std::uint32_t r = 0; r < n_ramp; ++r) {
        out.push_back(peak * static_cast<double>(r + 1) / static_cast<double>(n_ramp));
    }
    return out;
}

SynthConfig SynthConfig::recovery_default() {
    SynthConfig cfg;
    cfg.first_month = {2021, 12};
    cfg.n_months = 48;
    cfg.hallucination_schedule = ramp_schedule(12, 36, 0.02);
    return cfg;
}

const char* to_string(RefLabel label) {
    switch (label) {
        case RefLabel::Real: return "REAL";
        case RefLabel::BaselineNoise: return "BASELINE_NOISE";
        case RefLabel::Fabricated: return "FABRICATED";
    }
    return "REAL";
}

// ---------------------------------------------------------------------------
// Catalog generation

SynthCatalog gen_catalog(const SynthConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    SynthCatalog out;
    if (cfg.n_catalog_records == 0) return out;
    if (cfg.n_authors == 0) throw ConfigError("catalog generation needs authors");

    const std::uint32_t held_out = cfg.vocab_size / 10;
    const std::uint32_t main_vocab = cfg.vocab_size - held_out;
    const ZipfSampler zipf(main_vocab, cfg.zipf_exponent, cfg.zipf_offset);

    // Authors: lognormal productivity targets, per-author vocabulary tilt.
    out.profiles.resize(cfg.n_authors);
    out.productivity_weights.resize(cfg.n_authors);
    std::vector<std::vector<std::uint32_t>> tilts(cfg.n_authors);
    std::lognormal_distribution<double> lognorm(cfg.lognormal_mu, cfg.lognormal_sigma);
    const auto& givens = given_names();
    for (std::uint32_t a = 0; a < cfg.n_authors; ++a) {
        AuthorProfile& p = out.profiles[a];
        char buf[16];
        std::snprintf(buf, sizeof(buf), "a%06u", a);
        p.author_id = buf;
        const auto& [given, gender] = givens[uniform_u32(rng, 0, givens.size() - 1)];
        p.name = given + " " + capitalize(pseudo_word(200000 + a));
        p.gender_label = uniform01(rng) < 0.1 ? Gender::Unknown : gender;
        out.productivity_weights[a] = lognorm(rng);
        tilts[a].reserve(30);
        for (int t = 0; t < 30; ++t) tilts[a].push_back(static_cast<std::uint32_t>(zipf.sample(rng)));
    }
    // Same-name pairs with distinct vocabularies (disambiguation suite).
    for (std::uint32_t k = 0; k + 1 < cfg.n_authors && k / 2 < cfg.n_same_name_pairs; k += 2) {
        out.profiles[k + 1].name = out.profiles[k].name;
    }

    const WeightedSampler author_pick(out.productivity_weights);

    static const std::array<std::uint32_t, 10> kTeamSizes{1, 2, 3, 4, 5, 6, 7, 8, 10, 12};
    static const std::array<double, 10> kTeamWeights{15, 15, 15, 12, 10, 8, 7, 7, 6, 5};
    const WeightedSampler team_pick(std::vector<double>(kTeamWeights.begin(), kTeamWeights.end()));

    std::lognormal_distribution<double> cite_dist(1.5, 1.5);

    out.records.resize(cfg.n_catalog_records);
    for (std::uint32_t r = 0; r < cfg.n_catalog_records; ++r) {
        CatalogRecord& rec = out.records[r];
        char buf[16];
        std::snprintf(buf, sizeof(buf), "r%07u", r);
        rec.record_id = buf;
        rec.year = static_cast<int>(
            uniform_u32(rng, static_cast<std::uint32_t>(cfg.catalog_year_lo),
                        static_cast<std::uint32_t>(cfg.catalog_year_hi)));
        rec.venue = "Journal of " + capitalize(pseudo_word(300000 + r % 200));
        rec.n_citations = static_cast<std::uint64_t>(cite_dist(rng));

        const std::uint32_t team =
            std::min<std::uint32_t>(kTeamSizes[team_pick.sample(rng)], cfg.n_authors);
        std::set<std::uint32_t> members;
        while (members.size() < team) {
            members.insert(static_cast<std::uint32_t>(author_pick.sample(rng)));
        }
        const std::uint32_t lead = *members.begin();

        const std::uint32_t n_tokens = uniform_u32(rng, 4, 10);
        std::string title;
        for (std::uint32_t t = 0; t < n_tokens; ++t) {
            const std::uint32_t word =
                (uniform01(rng) < 0.5 && !tilts[lead].empty())
                    ? tilts[lead][uniform_u32(rng, 0, tilts[lead].size() - 1)]
                    : static_cast<std::uint32_t>(zipf.sample(rng));
            if (!title.empty()) title += ' ';
            title += pseudo_word(word);
        }
        rec.title_norm = title;  // already normalized by construction

        for (const std::uint32_t a : members) {
            rec.author_ids.push_back(out.profiles[a].author_id);
            AuthorProfile& p = out.profiles[a];
            ++p.n_pubs_total;
            if (*rec.year <= cfg.cutoff_year) ++p.n_pubs_pre_cutoff;
            p.n_citations += rec.n_citations;
            for (const auto& tok : text::tokens(title)) p.term_profile[tok] += 1.0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpus generation

namespace {

struct CatalogView {
    std::vector<std::u32string> runes;
    std::vector<std::vector<std::string>> tokens;  // sorted unique
    const std::vector<CatalogRecord>* records = nullptr;

    explicit CatalogView(const std::vector<CatalogRecord>& recs) : records(&recs) {
        runes.reserve(recs.size());
        tokens.reserve(recs.size());
        for (const auto& r : recs) {
            runes.push_back(text::decode_utf8(r.title_norm));
            tokens.push_back(strsim::unique_tokens(r.title_norm));
        }
    }

    // Max similarity of the candidate against any catalog title; early exit
    // once the cap is exceeded (caller regenerates).
    double max_similarity(const std::string& title, double cap) const {
        const std::u32string q = text::decode_utf8(title);
        const auto qtok = strsim::unique_tokens(title);
        double best = 0.0;
        for (std::size_t i = 0; i < runes.size(); ++i) {
            const double len_bound = strsim::length_similarity_bound(q.size(), runes[i].size());
            const double jac_bound =
                static_cast<double>(std::min(qtok.size(), tokens[i].size())) /
                static_cast<double>(std::max(qtok.size(), tokens[i].size()));
            if (len_bound <= best && jac_bound <= best) continue;
            double sim = 0.0;
            if (jac_bound > best) sim = strsim::token_jaccard_sorted(qtok, tokens[i]);
            if (len_bound > std::max(sim, best)) {
                const std::size_t maxlen = std::max(q.size(), runes[i].size());
                const std::size_t d = strsim::levenshtein_distance(
                    std::u32string_view(q), std::u32string_view(runes[i]));
                sim = std::max(sim, 1.0 - static_cast<double>(d) / static_cast<double>(maxlen));
            }
            if (sim > best) {
                best = sim;
                if (best > cap) return best;
            }
        }
        return best;
    }
};

struct NamePools {
    const std::vector<AuthorProfile>* profiles = nullptr;
    WeightedSampler biased_pick{std::vector<double>{}};
    std::uint32_t invented_counter = 0;

    std::string invented_name(std::mt19937_64& rng) {
        const auto& givens = given_names();
        const auto& [given, gender] = givens[uniform_u32(rng, 0, givens.size() - 1)];
        return given + " " + capitalize(pseudo_word(700000 + invented_counter++));
    }
};

std::string initialized_name(const std::string& full_name) {
    const auto toks = text::tokens(full_name);
    if (toks.size() < 2) return full_name;
    std::string out;
    for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
        out += toks[i].substr(0, 1) + ". ";
    }
    out += toks.back();
    return out;
}

std::string title_case(const std::string& normalized) {
    std::string out;
    bool start = true;
    for (char c : normalized) {
        if (c == ' ') {
            start = true;
            out += c;
        } else {
            out += start ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c;
            start = false;
        }
    }
    return out;
}

// Per-character substitutions capped so normalized similarity stays >= 0.97.
std::string apply_typos(std::string title, double rate, std::mt19937_64& rng) {
    if (rate <= 0) return title;
    std::vector<std::size_t> letter_pos;
    for (std::size_t i = 0; i < title.size(); ++i) {
        if (std::isalpha(static_cast<unsigned char>(title[i]))) letter_pos.push_back(i);
    }
    const auto cap = static_cast<std::size_t>(0.03 * static_cast<double>(title.size()));
    std::size_t subs = 0;
    for (const std::size_t pos : letter_pos) {
        if (subs >= cap) break;
        if (uniform01(rng) >= rate) continue;
        const char repl = static_cast<char>('a' + uniform_u32(rng, 0, 25));
        if (std::tolower(static_cast<unsigned char>(title[pos])) ==
            static_cast<unsigned char>(repl)) {
            continue;
        }
        title[pos] = repl;
        ++subs;
    }
    return title;
}

std::string render_reference(const std::vector<std::string>& author_names,
                             const std::string& title_display, const std::string& venue, int year,
                             bool quoted) {
    std::string out;
    for (std::size_t i = 0; i < author_names.size(); ++i) {
        if (i > 0) out += ", ";
        out += author_names[i];
    }
    if (quoted) {
        if (!out.empty()) out += ", ";
        out += "\"" + title_display + ",\" " + venue + ", " + std::to_string(year) + ".";
    } else {
        if (!out.empty()) out += ". ";
        out += title_display + ". " + venue + ", " + std::to_string(year) + ".";
    }
    return out;
}

struct TitleFactory {
    const SynthConfig* cfg = nullptr;
    const CatalogView* view = nullptr;
    std::uint32_t held_out_start = 0;
    std::uint32_t held_out_size = 0;
    std::uint32_t main_vocab = 0;
    std::unordered_set<std::string> used;

    // Fabricated titles come from the held-out vocabulary, so they share no
    // token with any catalog title; the similarity margin is still verified
    // by brute force against the whole catalog.
    std::string fabricated(std::mt19937_64& rng) {
        for (int attempt = 0; attempt < 64; ++attempt) {
            const std::uint32_t n_tokens = uniform_u32(rng, 4, 10);
            std::string title;
            for (std::uint32_t t = 0; t < n_tokens; ++t) {
                if (!title.empty()) title += ' ';
                title += pseudo_word(held_out_start + uniform_u32(rng, 0, held_out_size - 1));
            }
            if (!used.insert(title).second) continue;
            if (view->max_similarity(title, cfg->margin_max_similarity) <=
                cfg->margin_max_similarity) {
                return title;
            }
        }
        throw ConfigError("cannot achieve fabrication similarity margin; vocabulary too small");
    }

    // Plausible in-vocabulary titles verified to stay clear of the catalog.
    std::string noise(std::mt19937_64& rng, const ZipfSampler& zipf) {
        for (int attempt = 0; attempt < 64; ++attempt) {
            const std::uint32_t n_tokens = uniform_u32(rng, 4, 10);
            std::string title;
            for (std::uint32_t t = 0; t < n_tokens; ++t) {
                if (!title.empty()) title += ' ';
                title += pseudo_word(static_cast<std::uint32_t>(zipf.sample(rng)));
            }
            if (!used.insert(title).second) continue;
            if (view->max_similarity(title, cfg->noise_margin_max_similarity) <=
                cfg->noise_margin_max_similarity) {
                return title;
            }
        }
        throw ConfigError("cannot achieve noise similarity margin; vocabulary too small");
    }
};

}  // namespace

SynthCorpus gen_corpus(const SynthConfig& cfg, const SynthCatalog& catalog) {
    if (catalog.records.empty()) throw ConfigError("corpus generation needs a catalog");
    std::vector<double> schedule = cfg.hallucination_schedule;
    if (schedule.empty()) schedule.assign(cfg.n_months, 0.0);
    if (schedule.size() != cfg.n_months) {
        throw ConfigError("hallucination schedule length " + std::to_string(schedule.size()) +
                          " != n_months " + std::to_string(cfg.n_months));
    }
    const double max_h = *std::max_element(schedule.begin(), schedule.end());
    const double max_mult =
        cfg.moderation_accepted_volume >= 0 ? std::max(1.0, cfg.moderation_rejected_ratio) : 1.0;
    if ((cfg.baseline_noise_rate + max_h) * max_mult >= 1.0) {
        throw ConfigError("baseline + hallucination rates exceed 1 after moderation scaling");
    }

    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    const std::uint32_t held_out = cfg.vocab_size / 10;
    if (held_out == 0) throw ConfigError("vocabulary too small for a held-out partition");
    const std::uint32_t main_vocab = cfg.vocab_size - held_out;
    const ZipfSampler zipf(main_vocab, cfg.zipf_exponent, cfg.zipf_offset);

    const CatalogView view(catalog.records);
    TitleFactory titles;
    titles.cfg = &cfg;
    titles.view = &view;
    titles.held_out_start = main_vocab;
    titles.held_out_size = held_out;
    titles.main_vocab = main_vocab;
    for (const auto& r : catalog.records) titles.used.insert(r.title_norm);

    // Creditee sampler for fabricated references: weight = pubs^bias.
    std::vector<double> creditee_weights(catalog.profiles.size(), 0.0);
    for (std::size_t i = 0; i < catalog.profiles.size(); ++i) {
        creditee_weights[i] =
            std::pow(std::max<double>(1.0, catalog.profiles[i].n_pubs_pre_cutoff),
                     cfg.beneficiary_bias);
    }
    NamePools names;
    names.profiles = &catalog.profiles;
    names.biased_pick = WeightedSampler(creditee_weights);

    static const std::array<std::uint32_t, 10> kTeamSizes{1, 2, 3, 4, 5, 6, 7, 8, 10, 12};
    static const std::array<double, 10> kTeamWeights{15, 15, 15, 12, 10, 8, 7, 7, 6, 5};
    const WeightedSampler team_pick(std::vector<double>(kTeamWeights.begin(), kTeamWeights.end()));

    std::poisson_distribution<std::uint32_t> refs_dist(cfg.refs_per_paper_mean);
    std::normal_distribution<double> llm_noise(0.0, cfg.llm_use_noise);

    // Shared fabricated titles for citation-only plants.
    std::vector<std::string> co_pool;
    std::size_t co_cursor = 0;
    if (cfg.citation_only_share > 0) {
        double expected_fabs = 0;
        for (std::size_t m = 0; m < schedule.size(); ++m) {
            expected_fabs += schedule[m] * cfg.refs_per_month * max_mult;
        }
        const auto pool_size = static_cast<std::size_t>(
            std::max(1.0, cfg.citation_only_share * expected_fabs / 3.0));
        for (std::size_t i = 0; i < pool_size; ++i) co_pool.push_back(titles.fabricated(rng));
    }

    SynthCorpus out;
    std::map<YearMonth, GroundTruth::MonthTruth> month_truth;

    struct PaperDraft {
        PaperRecord meta;
        std::uint32_t n_refs = 0;
        std::vector<RefLabel> labels;
    };

    auto render_real = [&](std::mt19937_64& r) -> std::pair<std::string, std::string> {
        const std::uint32_t rec_idx = uniform_u32(r, 0, catalog.records.size() - 1);
        const CatalogRecord& rec = catalog.records[rec_idx];
        std::vector<std::string> cited;
        for (std::size_t i = 0; i < rec.author_ids.size() && i < 4; ++i) {
            // author_ids are "aNNNNNN" -> profile index
            const std::uint32_t idx =
                static_cast<std::uint32_t>(std::stoul(rec.author_ids[i].substr(1)));
            cited.push_back(initialized_name(catalog.profiles[idx].name));
        }
        std::string display = apply_typos(title_case(rec.title_norm), cfg.typo_rate, r);
        const bool quoted = uniform01(r) < cfg.quoted_render_share;
        return {render_reference(cited, display, rec.venue.value_or("Unknown Venue"),
                                 rec.year.value_or(2015), quoted),
                rec.record_id};
    };

    auto render_noise = [&](std::mt19937_64& r) -> std::string {
        const std::string title = titles.noise(r, zipf);
        std::vector<std::string> cited;
        const std::uint32_t n = uniform_u32(r, 1, 3);
        for (std::uint32_t i = 0; i < n; ++i) cited.push_back(initialized_name(names.invented_name(r)));
        const bool quoted = uniform01(r) < cfg.quoted_render_share;
        return render_reference(cited, title_case(title),
                                "Journal of " + capitalize(pseudo_word(310000 + uniform_u32(r, 0, 199))),
                                static_cast<int>(uniform_u32(r, 1995, 2022)), quoted);
    };

    auto render_fabricated = [&](std::mt19937_64& r, YearMonth month) -> std::string {
        std::string title;
        if (!co_pool.empty() && uniform01(r) < cfg.citation_only_share) {
            title = co_pool[co_cursor++ % co_pool.size()];
        } else {
            title = titles.fabricated(r);
        }
        static const std::array<double, 3> kCitedSizes{0.40, 0.35, 0.25};
        const WeightedSampler size_pick(std::vector<double>(kCitedSizes.begin(), kCitedSizes.end()));
        const std::uint32_t n = static_cast<std::uint32_t>(size_pick.sample(r)) + 1;
        std::vector<std::string> cited;
        for (std::uint32_t i = 0; i < n; ++i) {
            if (uniform01(r) < cfg.fabricated_invented_name_share || catalog.profiles.empty()) {
                cited.push_back(initialized_name(names.invented_name(r)));
            } else {
                const std::size_t idx = names.biased_pick.sample(r);
                cited.push_back(initialized_name(catalog.profiles[idx].name));
            }
        }
        const bool quoted = uniform01(r) < cfg.quoted_render_share;
        return render_reference(cited, title_case(title),
                                "Journal of " + capitalize(pseudo_word(320000 + uniform_u32(r, 0, 199))),
                                std::max(2019, month.year - 2), quoted);
    };

    auto generate_paper_set = [&](YearMonth month, std::uint32_t month_index,
                                  std::uint32_t total_refs, double h_rate,
                                  const std::string& id_prefix) -> std::vector<PaperDraft> {
        std::vector<PaperDraft> papers;
        std::uint32_t assigned = 0;
        std::uint32_t seq = 0;
        while (assigned < total_refs) {
            PaperDraft d;
            std::uint32_t n_refs = std::max<std::uint32_t>(4, refs_dist(rng));
            if (assigned + n_refs > total_refs) n_refs = total_refs - assigned;
            d.n_refs = n_refs;
            assigned += n_refs;
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%s%03u-%05u", id_prefix.c_str(), month_index, seq++);
            d.meta.paper_id = buf;
            d.meta.corpus = "synth";
            d.meta.month = month;
            d.meta.field = cfg.fields[uniform_u32(rng, 0, cfg.fields.size() - 1)];
            d.meta.subfield = d.meta.field + "-" + std::to_string(1 + uniform_u32(rng, 0, 2));
            const std::uint32_t team = kTeamSizes[team_pick.sample(rng)];
            d.meta.team_size = team;
            std::set<std::uint32_t> members;
            while (members.size() < std::min<std::uint32_t>(team, catalog.profiles.size())) {
                members.insert(uniform_u32(rng, 0, catalog.profiles.size() - 1));
            }
            for (const std::uint32_t a : members) {
                d.meta.author_ids.push_back(catalog.profiles[a].author_id);
            }
            d.meta.team_size = static_cast<std::uint32_t>(d.meta.author_ids.size());
            d.meta.journal_id = "j" + std::to_string(uniform_u32(rng, 0, 39));
            d.labels.assign(n_refs, RefLabel::Real);
            papers.push_back(std::move(d));
        }

        // Moderation labels (quota-exact accepted volume).
        if (cfg.moderation_accepted_volume >= 0 && !papers.empty()) {
            std::vector<std::size_t> order(papers.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::shuffle(order.begin(), order.end(), rng);
            const auto n_accepted = static_cast<std::size_t>(
                std::lround(cfg.moderation_accepted_volume * static_cast<double>(papers.size())));
            for (std::size_t i = 0; i < order.size(); ++i) {
                papers[order[i]].meta.moderation_label =
                    i < n_accepted ? ModerationLabel::Accepted : ModerationLabel::Rejected;
            }
        }

        // Slot planting: per moderation group, quota-exact noise/fabrication
        // counts; the team-size gradient reweights which papers absorb them.
        struct Slot {
            std::size_t paper;
            std::uint32_t pos;
        };
        std::map<int, std::vector<Slot>> groups;  // 0 = unlabeled/accepted, 1 = rejected
        for (std::size_t p = 0; p < papers.size(); ++p) {
            const int g = papers[p].meta.moderation_label &&
                                  *papers[p].meta.moderation_label == ModerationLabel::Rejected
                              ? 1
                              : 0;
            for (std::uint32_t i = 0; i < papers[p].n_refs; ++i) groups[g].push_back({p, i});
        }
        for (auto& [g, slots] : groups) {
            const double mult = g == 1 ? cfg.moderation_rejected_ratio : 1.0;
            const auto n_fab = static_cast<std::size_t>(
                std::lround(h_rate * mult * static_cast<double>(slots.size())));
            const auto n_noise = static_cast<std::size_t>(
                std::lround(cfg.baseline_noise_rate * mult * static_cast<double>(slots.size())));
            std::vector<double> weights(slots.size());
            for (std::size_t i = 0; i < slots.size(); ++i) {
                weights[i] =
                    cfg.teamsize_gradient[teamsize_bucket(papers[slots[i].paper].meta.team_size)];
            }
            const auto fab_picks = weighted_sample_without_replacement(weights, n_fab, rng);
            std::vector<bool> taken(slots.size(), false);
            for (const std::size_t i : fab_picks) {
                papers[slots[i].paper].labels[slots[i].pos] = RefLabel::Fabricated;
                taken[i] = true;
            }
            std::vector<std::size_t> free_slots;
            for (std::size_t i = 0; i < slots.size(); ++i) {
                if (!taken[i]) free_slots.push_back(i);
            }
            std::shuffle(free_slots.begin(), free_slots.end(), rng);
            for (std::size_t i = 0; i < n_noise && i < free_slots.size(); ++i) {
                const Slot& s = slots[free_slots[i]];
                papers[s.paper].labels[s.pos] = RefLabel::BaselineNoise;
            }
        }
        return papers;
    };

    auto materialize = [&](std::vector<PaperDraft>& drafts) {
        for (auto& d : drafts) {
            io::RawCorpusPaper paper;
            std::uint32_t n_fab = 0;
            for (std::uint32_t i = 0; i < d.n_refs; ++i) {
                GroundTruth::Entry entry;
                entry.paper_id = d.meta.paper_id;
                entry.ref_index = i;
                entry.month = d.meta.month;
                entry.label = d.labels[i];
                std::string text;
                switch (d.labels[i]) {
                    case RefLabel::Real: {
                        auto [t, rid] = render_real(rng);
                        text = std::move(t);
                        entry.record_id = rid;
                        break;
                    }
                    case RefLabel::BaselineNoise:
                        text = render_noise(rng);
                        break;
                    case RefLabel::Fabricated:
                        text = render_fabricated(rng, d.meta.month);
                        ++n_fab;
                        break;
                }
                paper.reference_texts.push_back(std::move(text));
                GroundTruth::MonthTruth& mt = month_truth[d.meta.month];
                mt.month = d.meta.month;
                ++mt.n_total;
                if (entry.label == RefLabel::BaselineNoise) ++mt.n_noise;
                if (entry.label == RefLabel::Fabricated) ++mt.n_fabricated;
                out.truth.entries.push_back(std::move(entry));
            }
            const double fab_share =
                d.n_refs > 0 ? static_cast<double>(n_fab) / static_cast<double>(d.n_refs) : 0.0;
            d.meta.llm_use_score = std::clamp(
                cfg.llm_use_base + cfg.llm_use_gain * fab_share + llm_noise(rng), 0.0, 1.0);
            paper.meta = std::move(d.meta);
            out.papers.push_back(std::move(paper));
        }
    };

    for (std::uint32_t m = 0; m < cfg.n_months; ++m) {
        const YearMonth month = YearMonth::from_index(cfg.first_month.index() + static_cast<int>(m));
        auto drafts = generate_paper_set(month, m, cfg.refs_per_month, schedule[m], "p");
        materialize(drafts);
    }

    // Preprint/published pairs with a planted persistence share.
    if (cfg.n_linked_pairs > 0) {
        const YearMonth pre_month =
            YearMonth::from_index(cfg.first_month.index() + static_cast<int>(cfg.n_months) - 6);
        const YearMonth pub_month = YearMonth::from_index(pre_month.index() + 6);
        struct PendingUnmatched {
            std::size_t paper;  // index into out.papers
            std::uint32_t pos;
        };
        std::vector<PendingUnmatched> planted;
        const std::size_t first_pair_paper = out.papers.size();
        for (std::uint32_t k = 0; k < cfg.n_linked_pairs; ++k) {
            PaperDraft d;
            d.n_refs = 20;
            char buf[32];
            std::snprintf(buf, sizeof(buf), "pre-%05u", k);
            d.meta.paper_id = buf;
            d.meta.corpus = "synth";
            d.meta.month = pre_month;
            d.meta.field = cfg.fields[uniform_u32(rng, 0, cfg.fields.size() - 1)];
            d.meta.team_size = 2;
            d.meta.published_link = "pub-" + std::string(buf + 4);
            d.labels.assign(d.n_refs, RefLabel::Real);
            d.labels[3] = RefLabel::Fabricated;
            d.labels[9] = RefLabel::Fabricated;
            d.labels[14] = RefLabel::BaselineNoise;
            std::vector<PaperDraft> one{std::move(d)};
            materialize(one);
            for (std::uint32_t pos : {3u, 9u, 14u}) {
                planted.push_back({out.papers.size() - 1, pos});
            }
        }
        // Retain a quota-exact share of the planted unmatched references.
        std::vector<std::size_t> order(planted.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);
        const auto n_retain = static_cast<std::size_t>(
            std::lround(cfg.persistence_share * static_cast<double>(planted.size())));
        std::vector<bool> retain(planted.size(), false);
        for (std::size_t i = 0; i < n_retain; ++i) retain[order[i]] = true;

        for (std::uint32_t k = 0; k < cfg.n_linked_pairs; ++k) {
            const std::size_t pre_idx = first_pair_paper + k;
            const io::RawCorpusPaper& pre = out.papers[pre_idx];
            io::RawCorpusPaper pub;
            pub.meta = pre.meta;
            pub.meta.paper_id = *pre.meta.published_link;
            pub.meta.corpus = "published";
            pub.meta.month = pub_month;
            pub.meta.published_link.reset();
            out.links.emplace_back(pre.meta.paper_id, pub.meta.paper_id);
            std::uint32_t pub_pos = 0;
            for (std::uint32_t pos = 0; pos < pre.reference_texts.size(); ++pos) {
                const std::size_t planted_idx = k * 3;
                bool is_planted = pos == 3 || pos == 9 || pos == 14;
                bool keep = true;
                RefLabel label = RefLabel::Real;
                if (is_planted) {
                    const std::size_t which = pos == 3 ? 0 : pos == 9 ? 1 : 2;
                    keep = retain[planted_idx + which];
                    label = pos == 14 ? RefLabel::BaselineNoise : RefLabel::Fabricated;
                }
                GroundTruth::Entry entry;
                entry.paper_id = pub.meta.paper_id;
                entry.month = pub_month;
                GroundTruth::MonthTruth& mt = month_truth[pub_month];
                mt.month = pub_month;
                if (keep && is_planted) {
                    entry.ref_index = pub_pos;
                    entry.label = label;
                    pub.reference_texts.push_back(pre.reference_texts[pos]);
                    ++mt.n_total;
                    if (label == RefLabel::BaselineNoise) ++mt.n_noise;
                    if (label == RefLabel::Fabricated) ++mt.n_fabricated;
                    out.truth.entries.push_back(std::move(entry));
                    ++pub_pos;
                } else if (!is_planted) {
                    auto [t, rid] = render_real(rng);
                    entry.ref_index = pub_pos;
                    entry.label = RefLabel::Real;
                    entry.record_id = rid;
                    pub.reference_texts.push_back(std::move(t));
                    ++mt.n_total;
                    out.truth.entries.push_back(std::move(entry));
                    ++pub_pos;
                }
            }
            out.papers.push_back(std::move(pub));
        }
    }

    for (auto& [month, mt] : month_truth) {
        if (mt.n_total > 0) {
            mt.noise_rate = static_cast<double>(mt.n_noise) / static_cast<double>(mt.n_total);
            mt.fabricated_rate =
                static_cast<double>(mt.n_fabricated) / static_cast<double>(mt.n_total);
        }
        out.truth.months.push_back(mt);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dumps

void save_catalog_dump(const std::string& path, const std::vector<CatalogRecord>& records) {
    std::string buf = R"({"schema":"citefix-catalog-1"})";
    buf += '\n';
    for (const auto& r : records) {
        json j;
        j["record_id"] = r.record_id;
        j["title"] = r.title_norm;
        j["year"] = r.year ? json(*r.year) : json(nullptr);
        j["venue"] = r.venue ? json(*r.venue) : json(nullptr);
        j["author_ids"] = r.author_ids;
        j["n_citations"] = r.n_citations;
        buf += j.dump();
        buf += '\n';
    }
    io::atomic_write(path, buf);
}

void save_author_dump(const std::string& path, const std::vector<AuthorProfile>& profiles) {
    std::string buf = R"({"schema":"citefix-authors-1"})";
    buf += '\n';
    for (const auto& p : profiles) {
        json j;
        j["author_id"] = p.author_id;
        j["name"] = p.name;
        j["n_pubs_pre_cutoff"] = p.n_pubs_pre_cutoff;
        j["n_pubs_total"] = p.n_pubs_total;
        j["n_citations"] = p.n_citations;
        j["gender_label"] = p.gender_label == Gender::Male     ? json("M")
                            : p.gender_label == Gender::Female ? json("F")
                                                               : json(nullptr);
        // term_profile is reconstructed from titles at ingest; emit the terms
        // as pseudo-titles to keep the dump in the documented schema.
        json titles = json::array();
        std::string current;
        int tokens_in_line = 0;
        for (const auto& [term, count] : p.term_profile) {
            for (int c = 0; c < static_cast<int>(count); ++c) {
                if (!current.empty()) current += ' ';
                current += term;
                if (++tokens_in_line == 8) {
                    titles.push_back(current);
                    current.clear();
                    tokens_in_line = 0;
                }
            }
        }
        if (!current.empty()) titles.push_back(current);
        j["paper_titles"] = std::move(titles);
        buf += j.dump();
        buf += '\n';
    }
    io::atomic_write(path, buf);
}

void save_ground_truth(const std::string& path, const GroundTruth& truth) {
    std::string buf;
    for (const auto& e : truth.entries) {
        json j;
        j["paper_id"] = e.paper_id;
        j["ref_index"] = e.ref_index;
        j["month"] = e.month.str();
        j["label"] = to_string(e.label);
        if (!e.record_id.empty()) j["record_id"] = e.record_id;
        buf += j.dump();
        buf += '\n';
    }
    io::atomic_write(path, buf);
}

GroundTruth load_ground_truth(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open ground truth: " + path);
    GroundTruth out;
    std::map<YearMonth, GroundTruth::MonthTruth> months;
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw DataError("malformed ground-truth line in " + path);
        GroundTruth::Entry e;
        e.paper_id = j.at("paper_id").get<std::string>();
        e.ref_index = j.at("ref_index").get<std::uint32_t>();
        e.month = YearMonth::parse(j.at("month").get<std::string>());
        const auto label = j.at("label").get<std::string>();
        if (label == "REAL") {
            e.label = RefLabel::Real;
        } else if (label == "BASELINE_NOISE") {
            e.label = RefLabel::BaselineNoise;
        } else if (label == "FABRICATED") {
            e.label = RefLabel::Fabricated;
        } else {
            throw DataError("unknown ground-truth label \"" + label + "\"");
        }
        e.record_id = j.value("record_id", std::string());
        GroundTruth::MonthTruth& mt = months[e.month];
        mt.month = e.month;
        ++mt.n_total;
        if (e.label == RefLabel::BaselineNoise) ++mt.n_noise;
        if (e.label == RefLabel::Fabricated) ++mt.n_fabricated;
        out.entries.push_back(std::move(e));
    }
    for (auto& [month, mt] : months) {
        if (mt.n_total > 0) {
            mt.noise_rate = static_cast<double>(mt.n_noise) / static_cast<double>(mt.n_total);
            mt.fabricated_rate =
                static_cast<double>(mt.n_fabricated) / static_cast<double>(mt.n_total);
        }
        out.months.push_back(mt);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Recovery scoring

RecoveryReport evaluate_recovery(const GroundTruth& truth,
                                 const std::vector<MonthlySeries>& series, double baseline,
                                 YearMonth baseline_end, const std::vector<Verdict>& verdicts,
                                 const RecoveryTolerances& tol) {
    RecoveryReport out;

    std::map<YearMonth, const GroundTruth::MonthTruth*> truth_months;
    for (const auto& mt : truth.months) truth_months[mt.month] = &mt;
    std::map<YearMonth, const MonthlySeries*> series_months;
    for (const auto& s : series) series_months[s.month] = &s;
    if (truth_months.size() != series_months.size()) {
        throw DataError("month mismatch between ground truth and estimates");
    }
    for (const auto& [month, mt] : truth_months) {
        if (series_months.find(month) == series_months.end()) {
            throw DataError("estimates missing month " + month.str());
        }
    }

    // Baseline error vs the pooled realized noise rate over the window.
    std::uint64_t base_n = 0;
    std::uint64_t base_noise = 0;
    for (const auto& [month, mt] : truth_months) {
        if (month > baseline_end) continue;
        base_n += mt->n_total;
        base_noise += mt->n_noise;
    }
    const double truth_baseline =
        base_n > 0 ? static_cast<double>(base_noise) / static_cast<double>(base_n) : 0.0;
    out.baseline_error = std::fabs(baseline - truth_baseline);

    for (const auto& [month, mt] : truth_months) {
        const double err = std::fabs(series_months[month]->excess_rate - mt->fabricated_rate);
        out.max_monthly_excess_error = std::max(out.max_monthly_excess_error, err);
    }

    // Verdict confusion vs labels.
    std::unordered_map<std::string, RefLabel> labels;
    labels.reserve(truth.entries.size());
    for (const auto& e : truth.entries) {
        labels[e.paper_id + "\x1f" + std::to_string(e.ref_index)] = e.label;
    }
    if (labels.size() != verdicts.size()) {
        throw DataError("verdict count " + std::to_string(verdicts.size()) +
                        " disagrees with ground truth " + std::to_string(labels.size()));
    }
    std::array<std::uint64_t, 3> label_totals{};
    for (const auto& v : verdicts) {
        auto it = labels.find(v.paper_id + "\x1f" + std::to_string(v.ref_index));
        if (it == labels.end()) {
            throw DataError("verdict for unknown reference " + v.paper_id + "/" +
                            std::to_string(v.ref_index));
        }
        const int li = static_cast<int>(it->second);
        ++label_totals[li];
        ++out.confusion[li][static_cast<int>(v.status)];
    }
    const auto& real_row = out.confusion[static_cast<int>(RefLabel::Real)];
    const auto& fab_row = out.confusion[static_cast<int>(RefLabel::Fabricated)];
    const std::uint64_t real_total = label_totals[static_cast<int>(RefLabel::Real)];
    const std::uint64_t fab_total = label_totals[static_cast<int>(RefLabel::Fabricated)];
    if (real_total > 0) {
        out.real_matched_share =
            static_cast<double>(real_row[static_cast<int>(VerdictStatus::Matched)] +
                                real_row[static_cast<int>(VerdictStatus::MatchedAfterRetitle)]) /
            static_cast<double>(real_total);
    }
    if (fab_total > 0) {
        out.fabricated_unmatched_share =
            static_cast<double>(fab_row[static_cast<int>(VerdictStatus::Unmatched)] +
                                fab_row[static_cast<int>(VerdictStatus::CitationOnly)]) /
            static_cast<double>(fab_total);
    }
    out.fabricated_matched = fab_row[static_cast<int>(VerdictStatus::Matched)] +
                             fab_row[static_cast<int>(VerdictStatus::MatchedAfterRetitle)];

    auto fail = [&out](const std::string& msg) { out.failures.push_back(msg); };
    if (out.baseline_error > tol.baseline_abs) {
        fail("baseline error " + std::to_string(out.baseline_error) + " > " +
             std::to_string(tol.baseline_abs));
    }
    if (out.max_monthly_excess_error > tol.excess_abs) {
        fail("max monthly excess error " + std::to_string(out.max_monthly_excess_error) + " > " +
             std::to_string(tol.excess_abs));
    }
    if (real_total > 0 && out.real_matched_share < tol.real_matched_min) {
        fail("real matched share " + std::to_string(out.real_matched_share) + " < " +
             std::to_string(tol.real_matched_min));
    }
    if (fab_total > 0 && out.fabricated_unmatched_share < tol.fabricated_unmatched_min) {
        fail("fabricated unmatched share " + std::to_string(out.fabricated_unmatched_share) +
             " < " + std::to_string(tol.fabricated_unmatched_min));
    }
    if (out.fabricated_matched > tol.fabricated_matched_max) {
        fail("fabricated matched count " + std::to_string(out.fabricated_matched) + " > " +
             std::to_string(tol.fabricated_matched_max));
    }
    out.pass = out.failures.empty();
    return out;
}

void save_recovery_report(const std::string& path, const RecoveryReport& report) {
    json j;
    j["pass"] = report.pass;
    j["baseline_error"] = report.baseline_error;
    j["max_monthly_excess_error"] = report.max_monthly_excess_error;
    j["real_matched_share"] = report.real_matched_share;
    j["fabricated_unmatched_share"] = report.fabricated_unmatched_share;
    j["fabricated_matched"] = report.fabricated_matched;
    j["failures"] = report.failures;
    json confusion;
    static const char* kLabels[3] = {"REAL", "BASELINE_NOISE", "FABRICATED"};
    for (int l = 0; l < 3; ++l) {
        json row;
        for (int s = 0; s < kNumVerdictStatuses; ++s) {
            row[citefix::to_string(static_cast<VerdictStatus>(s))] = report.confusion[l][s];
        }
        confusion[kLabels[l]] = std::move(row);
    }
    j["confusion"] = std::move(confusion);
    io::atomic_write(path, j.dump(2) + "\n");
}

}  // namespace citefix::synthgen
