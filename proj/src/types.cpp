#include "citefix/types.hpp"

#include <cctype>
#include <cstdio>

#include "citefix/errors.hpp"

namespace citefix {

YearMonth YearMonth::parse(const std::string& s) {
    if (s.size() != 7 || s[4] != '-') throw ConfigError("malformed year-month: \"" + s + "\"");
    for (int i : {0, 1, 2, 3, 5, 6}) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
            throw ConfigError("malformed year-month: \"" + s + "\"");
        }
    }
    YearMonth ym;
    ym.year = std::stoi(s.substr(0, 4));
    ym.month = std::stoi(s.substr(5, 2));
    if (ym.month < 1 || ym.month > 12) throw ConfigError("month out of range: \"" + s + "\"");
    return ym;
}

std::string YearMonth::str() const {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", year, month);
    return buf;
}

const char* to_string(VerdictStatus s) {
    switch (s) {
        case VerdictStatus::Matched: return "MATCHED";
        case VerdictStatus::NonAcademic: return "NON_ACADEMIC";
        case VerdictStatus::MatchedAfterRetitle: return "MATCHED_AFTER_RETITLE";
        case VerdictStatus::ExternallyVerified: return "EXTERNALLY_VERIFIED";
        case VerdictStatus::CitationOnly: return "CITATION_ONLY";
        case VerdictStatus::Unmatched: return "UNMATCHED";
    }
    return "UNMATCHED";
}

std::optional<VerdictStatus> verdict_status_from_string(const std::string& s) {
    if (s == "MATCHED") return VerdictStatus::Matched;
    if (s == "NON_ACADEMIC") return VerdictStatus::NonAcademic;
    if (s == "MATCHED_AFTER_RETITLE") return VerdictStatus::MatchedAfterRetitle;
    if (s == "EXTERNALLY_VERIFIED") return VerdictStatus::ExternallyVerified;
    if (s == "CITATION_ONLY") return VerdictStatus::CitationOnly;
    if (s == "UNMATCHED") return VerdictStatus::Unmatched;
    return std::nullopt;
}

}  // namespace citefix
