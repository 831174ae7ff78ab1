#pragma once

#include <string>
#include <string_view>

namespace mgtd {

// Unicode NFC normalization of a UTF-8 string (ICU-backed).
std::string nfc_normalize(std::string_view utf8);

// Strips leading/trailing ASCII whitespace (" \t\r\n\f\v").
std::string_view trim_whitespace(std::string_view s);

// Duplicate key used by merge_and_dedup and holdout matching:
// NFC-normalize, then trim. Two texts are duplicates iff their keys are
// byte-equal.
std::string dedup_key(std::string_view text);

}  // namespace mgtd
