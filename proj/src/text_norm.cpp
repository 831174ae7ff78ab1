#include "mgtd/text_norm.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "mgtd/error.hpp"

namespace mgtd {

std::string nfc_normalize(std::string_view utf8) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) {
        throw error(std::string("ICU NFC instance unavailable: ") + u_errorName(status));
    }
    icu::UnicodeString in = icu::UnicodeString::fromUTF8(
        icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    icu::UnicodeString normalized = nfc->normalize(in, status);
    if (U_FAILURE(status)) {
        throw error(std::string("NFC normalization failed: ") + u_errorName(status));
    }
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

std::string_view trim_whitespace(std::string_view s) {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

std::string dedup_key(std::string_view text) {
    return std::string(trim_whitespace(nfc_normalize(text)));
}

}  // namespace mgtd
