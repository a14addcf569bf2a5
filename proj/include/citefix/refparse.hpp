#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "citefix/text.hpp"
#include "citefix/types.hpp"

namespace citefix::refparse {

using text::normalize_title;
using text::normalize_title_or_empty;

// Splits a bibliography document into raw reference strings, in document
// order, index_in_paper consecutive from 0. Supported formats: Plain (one
// reference per line), LatexBbl (\bibitem lists, with or without the
// thebibliography environment), JatsXml (<ref-list> of <ref> elements).
// Malformed containers raise StructuralParseError with a byte offset;
// individually unparseable items are emitted as Plain text, never dropped.
std::vector<RawReference> extract_bibliography(std::string_view document, SourceFormat format,
                                               const std::string& paper_id);

// Best-effort field extraction from one reference string. Missing fields are
// absent, never empty strings. parse_confidence = found fields among
// {title, year, authors} / 3.
ParsedReference parse_reference(const RawReference& raw);

struct RetitleResult {
    ParsedReference ref;
    bool changed = false;
};

// Re-parse under alternative title-span hypotheses (next-longest quoted span,
// span before a mis-captured venue, span after the year). Returns the input
// unchanged with changed=false when no alternative exists. Raw provenance
// fields are never touched.
RetitleResult retitle(const ParsedReference& parsed);

// Publication-year scan: first standalone 4-digit token in [1500, now+1],
// scanning right to left. Returns 0 when absent.
int find_year(std::string_view s);

}  // namespace citefix::refparse
