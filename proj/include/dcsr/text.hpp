#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dcsr {

/// NFC, lowercase, whitespace runs collapsed to a single space, trimmed.
/// This is the one normalization used for answer matching, passage identity
/// and encoder features.
std::string normalize_text(std::string_view text);

/// Collapse whitespace runs and trim without touching case or composition.
std::string collapse_whitespace(std::string_view text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// Stable passage id derived from the normalized passage text.
std::string passage_id_for(std::string_view text);

}  // namespace dcsr
