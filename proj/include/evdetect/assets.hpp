#pragma once

#include <string_view>

// Text assets compiled from data/ at configure time.
namespace evdetect::assets {

std::string_view stopwords_en();
std::string_view iptc_taxonomy();
std::string_view iptc_aliases();
std::string_view prompt_refine_keywords();
std::string_view prompt_summarize();
std::string_view prompt_iptc();

}  // namespace evdetect::assets
