#include "mcqdiff/linguistic.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "mcqdiff/errors.hpp"
#include "mcqdiff/util.hpp"

namespace mcqdiff {

const std::array<std::string, kLinguisticFeatureCount>& linguistic_feature_names() {
    static const std::array<std::string, kLinguisticFeatureCount> names = {
        "word_count",
        "sentence_count",
        "mean_words_per_sentence",
        "mean_word_length_chars",
        "type_token_ratio",
        "long_word_count",
        "digit_token_count",
        "mean_syllables_per_word",
        "negation_count",
        "additive_connective_count",
        "causal_connective_count",
        "temporal_connective_count",
        "adversative_connective_count",
        "wh_word_count",
        "n_choices",
        "mean_choice_length_chars",
        "stem_length_chars",
    };
    return names;
}

const Wordlists& Wordlists::builtin() {
    static const Wordlists lists = {
        // negation
        {"no", "not", "never", "none", "nobody", "nothing", "neither", "nor", "nowhere",
         "cannot", "without"},
        // additive
        {"also", "and", "furthermore", "moreover", "besides", "additionally", "plus", "or",
         "in addition"},
        // causal
        {"because", "since", "therefore", "thus", "hence", "consequently", "so",
         "accordingly", "as a result"},
        // temporal
        {"when", "while", "before", "after", "then", "until", "during", "once", "meanwhile",
         "whenever"},
        // adversative
        {"but", "however", "although", "though", "yet", "whereas", "nevertheless",
         "nonetheless", "instead", "despite", "even though"},
        // wh
        {"what", "which", "who", "whom", "whose", "when", "where", "why", "how"},
    };
    return lists;
}

namespace {

std::vector<std::string> load_wordlist_file(const std::string& path) {
    std::vector<std::string> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        out.push_back(lowercase_ascii(line));
    }
    return out;
}

// maximal runs of letters/digits/underscore, any length, lowercased
std::vector<std::string> words_of(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (char raw : text) {
        char c = raw;
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        bool word_char = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
        if (word_char) {
            cur.push_back(c);
        } else if (!cur.empty()) {
            words.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
}

size_t sentence_count_of(const std::string& text) {
    size_t count = 0;
    bool segment_has_word = false;
    for (char c : text) {
        if (c == '.' || c == '!' || c == '?') {
            if (segment_has_word) ++count;
            segment_has_word = false;
        } else if ((c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                   (c >= '0' && c <= '9')) {
            segment_has_word = true;
        }
    }
    if (segment_has_word) ++count;
    return count;
}

size_t syllables_of(const std::string& word) {
    auto is_vowel = [](char c) {
        return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
    };
    size_t groups = 0;
    bool in_group = false;
    bool has_letter = false;
    for (char c : word) {
        if (c >= 'a' && c <= 'z') has_letter = true;
        if (is_vowel(c)) {
            if (!in_group) ++groups;
            in_group = true;
        } else {
            in_group = false;
        }
    }
    if (groups == 0 && has_letter) groups = 1;
    return groups;
}

size_t count_entries(const std::vector<std::string>& words,
                     const std::vector<std::string>& entries) {
    size_t count = 0;
    for (const auto& entry : entries) {
        auto parts = words_of(entry);
        if (parts.empty()) continue;
        if (parts.size() == 1) {
            for (const auto& w : words)
                if (w == parts[0]) ++count;
        } else {
            for (size_t i = 0; i + parts.size() <= words.size(); ++i) {
                bool match = true;
                for (size_t k = 0; k < parts.size(); ++k) {
                    if (words[i + k] != parts[k]) {
                        match = false;
                        break;
                    }
                }
                if (match) ++count;
            }
        }
    }
    return count;
}

}  // namespace

Wordlists Wordlists::from_dir(const std::string& dir) {
    Wordlists lists;
    lists.negation = load_wordlist_file(dir + "/negation.txt");
    lists.additive = load_wordlist_file(dir + "/additive.txt");
    lists.causal = load_wordlist_file(dir + "/causal.txt");
    lists.temporal = load_wordlist_file(dir + "/temporal.txt");
    lists.adversative = load_wordlist_file(dir + "/adversative.txt");
    lists.wh = load_wordlist_file(dir + "/wh.txt");
    return lists;
}

std::array<double, kLinguisticFeatureCount> linguistic_features(
    const std::string& stem, const std::vector<std::string>& choices,
    const Wordlists& lists) {
    std::string text = stem;
    for (const auto& c : choices) {
        if (!text.empty()) text += ' ';
        text += c;
    }

    const auto words = words_of(text);
    const double n_words = static_cast<double>(words.size());
    const size_t sentences = sentence_count_of(text);

    size_t total_word_chars = 0;
    size_t long_words = 0;
    size_t digit_tokens = 0;
    size_t total_syllables = 0;
    std::set<std::string> types;
    for (const auto& w : words) {
        total_word_chars += w.size();
        if (w.size() > 6) ++long_words;
        if (std::all_of(w.begin(), w.end(), [](char c) { return c >= '0' && c <= '9'; }))
            ++digit_tokens;
        total_syllables += syllables_of(w);
        types.insert(w);
    }

    double total_choice_chars = 0.0;
    for (const auto& c : choices) total_choice_chars += static_cast<double>(c.size());

    std::array<double, kLinguisticFeatureCount> f{};
    f[0] = n_words;
    f[1] = static_cast<double>(sentences);
    f[2] = sentences > 0 ? n_words / static_cast<double>(sentences) : 0.0;
    f[3] = n_words > 0 ? static_cast<double>(total_word_chars) / n_words : 0.0;
    f[4] = n_words > 0 ? static_cast<double>(types.size()) / n_words : 0.0;
    f[5] = static_cast<double>(long_words);
    f[6] = static_cast<double>(digit_tokens);
    f[7] = n_words > 0 ? static_cast<double>(total_syllables) / n_words : 0.0;
    f[8] = static_cast<double>(count_entries(words, lists.negation));
    f[9] = static_cast<double>(count_entries(words, lists.additive));
    f[10] = static_cast<double>(count_entries(words, lists.causal));
    f[11] = static_cast<double>(count_entries(words, lists.temporal));
    f[12] = static_cast<double>(count_entries(words, lists.adversative));
    f[13] = static_cast<double>(count_entries(words, lists.wh));
    f[14] = static_cast<double>(choices.size());
    f[15] = choices.empty() ? 0.0 : total_choice_chars / static_cast<double>(choices.size());
    f[16] = static_cast<double>(stem.size());
    return f;
}

std::array<double, kLinguisticFeatureCount> linguistic_features(const MCQItem& item,
                                                                const Wordlists& lists) {
    return linguistic_features(item.stem, item.choices, lists);
}

}  // namespace mcqdiff
