#include "hygrpo/vocab.hpp"

#include <array>

#include "hygrpo/error.hpp"

namespace hygrpo {

namespace {

constexpr std::array<std::string_view, 16> kDescriptors = {
    "arms", "legs",    "raised", "bent",  "left",  "right", "forward", "back",
    "up",   "down",    "wide",   "crossed", "kneel", "twist", "lean",  "reach"};
constexpr std::array<std::string_view, 8> kQuestions = {
    "doing",  "holding", "wearing", "facing",
    "touching", "watching", "carrying", "near"};
constexpr std::array<std::string_view, 8> kAnswers = {
    "running", "sitting", "jumping", "walking",
    "waving",  "dancing", "reading", "resting"};

std::vector<std::string> standard_words() {
  std::vector<std::string> w = {"<END>", "<POSE>", ".",      "The",
                                "SMPL",  "pose",   "of",     "this",
                                "person", "is",    "generate", "estimate",
                                "image", "question"};
  for (auto d : kDescriptors) w.emplace_back(d);
  for (auto q : kQuestions) w.emplace_back(q);
  for (auto a : kAnswers) w.emplace_back(a);
  return w;
}

}  // namespace

std::span<const std::string_view> descriptor_words() { return kDescriptors; }
std::span<const std::string_view> question_words() { return kQuestions; }
std::span<const std::string_view> answer_words() { return kAnswers; }

Vocabulary::Vocabulary(std::vector<std::string> words, TokenId end_token,
                       std::optional<TokenId> pose_token)
    : words_(std::move(words)), end_(end_token), pose_(pose_token) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], static_cast<TokenId>(i)).second) {
      throw ContractViolation("duplicate vocabulary word '" + words_[i] + "'");
    }
  }
  if (end_ < 0 || static_cast<std::size_t>(end_) >= words_.size()) {
    throw ContractViolation("END token outside vocabulary");
  }
  if (pose_ && (*pose_ < 0 || static_cast<std::size_t>(*pose_) >= words_.size())) {
    throw ContractViolation("POSE token outside vocabulary");
  }
}

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab(standard_words(), 0, 1);
  return vocab;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw ContractViolation("token id " + std::to_string(id) + " outside vocabulary");
  }
  return words_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) {
    throw ContractViolation("word '" + std::string(word) + "' not in vocabulary");
  }
  return it->second;
}

std::string Vocabulary::detokenize(std::span<const TokenId> tokens) const {
  std::string out;
  for (TokenId t : tokens) {
    if (t == end_) continue;
    const std::string& w = word(t);
    if (!out.empty() && w != ".") out += ' ';
    out += w;
  }
  return out;
}

Tokens Vocabulary::tokenize(std::string_view text) const {
  Tokens out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    std::size_t end = text.find(' ', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view w = text.substr(pos, end - pos);
    pos = end;
    if (w.empty()) continue;
    const bool has_period = w.size() > 1 && w.back() == '.';
    if (has_period) w.remove_suffix(1);
    out.push_back(id(w));
    if (has_period) out.push_back(id("."));
  }
  return out;
}

}  // namespace hygrpo
