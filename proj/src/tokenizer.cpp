#include "mcqdiff/tokenizer.hpp"

namespace mcqdiff {

namespace {

bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char raw : text) {
        char c = raw;
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (is_word_char(c)) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            if (cur.size() >= 2) tokens.push_back(cur);
            cur.clear();
        }
    }
    if (cur.size() >= 2) tokens.push_back(cur);
    return tokens;
}

std::vector<std::string> bigrams(const std::vector<std::string>& tokens) {
    std::vector<std::string> out;
    if (tokens.size() < 2) return out;
    out.reserve(tokens.size() - 1);
    for (size_t i = 0; i + 1 < tokens.size(); ++i)
        out.push_back(tokens[i] + " " + tokens[i + 1]);
    return out;
}

}  // namespace mcqdiff
