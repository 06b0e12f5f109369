#include <algorithm>
#include <iterator>
#include <string_view>
#include <vector>

#include "mmv/evidence.hpp"

namespace mmv {

namespace {

// English function words. Bump kStopwordsVersion whenever this list changes.
constexpr std::string_view kStopwords[] = {
    "a",        "about",   "above",   "after",      "again",   "against", "ain",      "all",     "am",
    "an",       "and",     "any",     "are",        "aren",    "as",      "at",       "be",      "because",
    "been",     "before",  "being",   "below",      "between", "both",    "but",      "by",      "can",
    "could",    "couldn",  "d",       "did",        "didn",    "do",      "does",     "doesn",   "doing",
    "don",      "down",    "during",  "each",       "few",     "for",     "from",     "further", "had",
    "hadn",     "has",     "hasn",    "have",       "haven",   "having",  "he",       "her",     "here",
    "hers",     "herself", "him",     "himself",    "his",     "how",     "i",        "if",      "in",
    "into",     "is",      "isn",     "it",         "its",     "itself",  "just",     "ll",      "m",
    "ma",       "may",     "me",      "might",      "mightn",  "more",    "most",     "must",    "mustn",
    "my",       "myself",  "needn",   "no",         "nor",     "not",     "now",      "o",       "of",
    "off",      "on",      "once",    "only",       "or",      "other",   "our",      "ours",    "ourselves",
    "out",      "over",    "own",     "re",         "s",       "same",    "shall",    "shan",    "she",
    "should",   "shouldn", "so",      "some",       "such",    "t",       "than",     "that",    "the",
    "their",    "theirs",  "them",    "themselves", "then",    "there",   "these",    "they",    "this",
    "those",    "through", "to",      "too",        "under",   "until",   "up",       "upon",    "us",
    "ve",       "very",    "via",     "was",        "wasn",    "we",      "were",     "weren",   "what",
    "when",     "where",   "which",   "while",      "who",     "whom",    "why",      "will",    "with",
    "within",   "without", "won",     "would",      "wouldn",  "y",       "yet",      "you",     "your",
    "yours",    "yourself", "yourselves", "also",   "although", "among",  "another",  "around",  "became",
    "become",   "even",    "ever",    "every",      "however", "many",    "much",     "often",   "per",
    "since",    "still",   "though",  "thus",
};

}  // namespace

bool is_stopword(std::string_view lowercase_word) {
  static const auto sorted = [] {
    std::vector<std::string_view> words(std::begin(kStopwords), std::end(kStopwords));
    std::sort(words.begin(), words.end());
    return words;
  }();
  return std::binary_search(sorted.begin(), sorted.end(), lowercase_word);
}

}  // namespace mmv
