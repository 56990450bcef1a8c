/* SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <string>
#include <string_view>

namespace nseen::utf8 {

/// Decodes UTF-8 into Unicode scalar values. Invalid sequences decode to
/// U+FFFD one byte at a time, so decoding never fails.
std::u32string decode(std::string_view bytes);

std::string encode(std::u32string_view text);

bool is_space(char32_t c);

/// Letters and digits. ASCII exactly; beyond ASCII, Latin-1/Greek/Cyrillic
/// letters and other non-punctuation scalars count as alphanumeric.
bool is_alnum(char32_t c);

char32_t to_upper(char32_t c);
char32_t to_lower(char32_t c);

std::string trim(std::string_view s);

}  // namespace nseen::utf8
