#include "dcsr/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cstdio>

#include "dcsr/errors.hpp"

namespace dcsr {

namespace {

bool is_ascii(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string collapse_ascii(std::string_view text, bool lower) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_ascii_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    if (lower && c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
  }
  return out;
}

icu::UnicodeString collapse_unicode(const icu::UnicodeString& text) {
  icu::UnicodeString out;
  bool pending_space = false;
  for (int32_t i = 0; i < text.length();) {
    const UChar32 c = text.char32At(i);
    i = text.moveIndex32(i, 1);
    if (u_isUWhiteSpace(c)) {
      pending_space = !out.isEmpty();
      continue;
    }
    if (pending_space) {
      out.append(static_cast<UChar>(' '));
      pending_space = false;
    }
    out.append(c);
  }
  return out;
}

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* instance = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || instance == nullptr) {
    fail(ErrorKind::IoError, "ICU NFC normalizer unavailable");
  }
  return *instance;
}

}  // namespace

std::string normalize_text(std::string_view text) {
  if (is_ascii(text)) return collapse_ascii(text, true);

  const auto& normalizer = nfc();
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString unicode = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  unicode = normalizer.normalize(unicode, status);
  unicode.toLower(icu::Locale::getRoot());
  unicode = normalizer.normalize(collapse_unicode(unicode), status);
  if (U_FAILURE(status)) fail(ErrorKind::ParseError, "text normalization failed");
  std::string out;
  unicode.toUTF8String(out);
  return out;
}

std::string collapse_whitespace(std::string_view text) {
  if (is_ascii(text)) return collapse_ascii(text, false);
  icu::UnicodeString unicode = icu::UnicodeString::fromUTF8(
      icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  std::string out;
  collapse_unicode(unicode).toUTF8String(out);
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string passage_id_for(std::string_view text) {
  char buffer[18];
  std::snprintf(buffer, sizeof buffer, "p%016llx",
                static_cast<unsigned long long>(fnv1a64(normalize_text(text))));
  return buffer;
}

}  // namespace dcsr
