#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hygrpo/types.hpp"

namespace hygrpo {

inline constexpr std::string_view kPoseTemplate =
    "The SMPL pose of this person is <POSE>.";
inline constexpr std::string_view kPoseTriggerWord = "<POSE>";
inline constexpr std::string_view kEndWord = "<END>";

// Word-level vocabulary. END is never rendered; "." attaches to the
// preceding word.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> words, TokenId end_token,
             std::optional<TokenId> pose_token);

  // 46-word vocabulary shared by all synthetic tasks.
  static const Vocabulary& standard();

  std::size_t size() const { return words_.size(); }
  TokenId end_token() const { return end_; }
  std::optional<TokenId> pose_token() const { return pose_; }

  const std::string& word(TokenId id) const;
  // Throws ContractViolation for words outside the vocabulary.
  TokenId id(std::string_view word) const;

  std::string detokenize(std::span<const TokenId> tokens) const;
  // Splits on spaces and peels a trailing "." off each word. No END appended.
  Tokens tokenize(std::string_view text) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId end_;
  std::optional<TokenId> pose_;
};

// Word groups of the standard vocabulary.
std::span<const std::string_view> descriptor_words();
std::span<const std::string_view> question_words();
std::span<const std::string_view> answer_words();

}  // namespace hygrpo
