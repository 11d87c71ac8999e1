#pragma once

#include <initializer_list>
#include <string>
#include <utility>
#include <string_view>

#include "drift/error.hpp"

namespace drift {

// Verbatim instruction templates. Placeholders use {name} syntax.
namespace templates {

inline constexpr std::string_view kStatic =
    "Given a text passage, condense its core concepts into a set of words. The number of these compressed words "
    "is {num}. The placeholder of compressed word is `{COMPRESSION_TOKEN}`. The text you need to condense is: "
    "<context>{context}</context>  The compressed words are: ";

inline constexpr std::string_view kReconstruct =
    "Background: <background> {compressed_information} </background>. Please restate the background information "
    "above in your own words to convey the same meaning:  ";

inline constexpr std::string_view kDynamic =
    "Given several documents and a question, you need to extract the information from the Documents that is "
    "relevant to the Question, and condense the core concepts of this knowledge into a set of words. Please note "
    "that you are only responsible for extracting information relevant to answering the question. You are not "
    "required to reason out the answer yourself. You are not allowed to fabricate information. You may only "
    "extract and compress relevant information contained in the documents. Please ensure the completeness and "
    "understandability of the compressed knowledge. The number of these compressed words is {num}."
    "The placeholder of compressed word is `{COMPRESSION_TOKEN}` The documents are: <Documents> {document}"
    "</Documents> The question is: <Question>{question}</Question>The compressed words of useful information "
    "are: .  ";

inline constexpr std::string_view kAnswer =
    "You will be provided with a background consisting of {num} different paragraphs. Background: <background> "
    "{compressed_information} </background>. Please answer the following question based on the background. "
    "<Question>{question}</Question>{answer_prefix}  ";

inline constexpr std::string_view kAnswerPrefix = "Answer:";

inline constexpr std::string_view kGenerateQa =
    "Please generate a question that can be answered based on the provided context. The question should be highly "
    "relevant to the context, and the answer must be directly inferable from the given information. Avoid asking "
    "questions that cannot be answered using the context. The question should be of the type: {question_type}.\n\n"
    "Your response should consist of three parts:\n\n"
    "1. Question – the generated question. (a string)\n\n"
    "2. Answer – the answer, including how it is reasoned out from the relevant information in the context.  "
    "(a string)\n\n"
    "3. Evidence – the specific part(s) of the original text that support the answer.  (a string)\n\n"
    "Attention: Evidence must be quoted directly from the original text and must include all the information "
    "needed to answer the question. If some parts of the evidence involve unclear references (e.g., ambiguous "
    "subjects), include the related sentences that clarify them, so that the evidence alone is sufficient for "
    "answering the question. Ensure that every sentence remains complete, without the use of ellipses.\n\n"
    "Your output format should be:\n\njson\n\n{{\n"
    "    \"question\": \"<the generated question (include options if the question type is multiple choice)>\",\n"
    "    \"answer\": \"<the corresponding answer, including how it is inferred from the relevant information in the "
    "context>\",\n"
    "    \"evidence\": \"<the specific part(s) taken directly from the original text that support the answer>\"\n"
    "}}\n\nContext: {context}\n\nYour output: ";

inline constexpr std::string_view kJudge =
    "You are a judge evaluating the quality of question-answer pairs. Your task is to determine whether the given "
    "answer can be reasonably inferred from the provided evidence.\n\n"
    "Please evaluate based on the following criteria:\n\n"
    "1. Can the answer be directly supported by the evidence?\n\n"
    "2. Is the evidence sufficient to answer the question?\n\n"
    "3. Is the answer logically consistent with the evidence?\n\n"
    "4. Are there any contradictions between the answer and evidence?\n\n"
    "Question: {question}\n\nEvidence: {evidence}\n\nAnswer: {answer}\n\n"
    "Please respond with only \"true\" if the answer can be reasonably inferred from the evidence, or \"false\" "
    "if it cannot.\n\nYour judgment:";

}  // namespace templates

/// Replaces every `{key}` with `value`.
inline std::string fill(std::string_view tmpl, std::string_view key, std::string_view value) {
  const std::string needle = "{" + std::string(key) + "}";
  std::string out;
  std::size_t i = 0;
  for (auto at = tmpl.find(needle); at != std::string_view::npos; at = tmpl.find(needle, i)) {
    out.append(tmpl.substr(i, at - i));
    out.append(value);
    i = at + needle.size();
  }
  out.append(tmpl.substr(i));
  return out;
}

/// Single-pass substitution of several slots; inserted values are never
/// rescanned, so user text containing `{...}` is left as is.
inline std::string format(std::string_view tmpl,
                          std::initializer_list<std::pair<std::string_view, std::string_view>> slots) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool hit = false;
    if (tmpl[i] == '{') {
      for (const auto& [key, value] : slots) {
        if (tmpl.compare(i + 1, key.size(), key) == 0 && i + 1 + key.size() < tmpl.size() &&
            tmpl[i + 1 + key.size()] == '}') {
          out.append(value);
          i += key.size() + 2;
          hit = true;
          break;
        }
      }
    }
    if (!hit) out.push_back(tmpl[i++]);
  }
  return out;
}

/// Collapses the doubled braces used in the data-generation prompt.
inline std::string unescape_braces(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.push_back(s[i]);
    if ((s[i] == '{' || s[i] == '}') && i + 1 < s.size() && s[i + 1] == s[i]) ++i;
  }
  return out;
}

/// A template cut at one slot: text before and after it.
struct SplitTemplate {
  std::string prefix;
  std::string suffix;
};

inline SplitTemplate split_at(std::string_view filled, std::string_view key) {
  const std::string needle = "{" + std::string(key) + "}";
  const auto at = filled.find(needle);
  require(at != std::string_view::npos, ErrorKind::InvalidArgument, "template has no slot " + needle);
  return {std::string(filled.substr(0, at)), std::string(filled.substr(at + needle.size()))};
}

inline std::string repeat(std::string_view s, std::size_t n) {
  std::string out;
  out.reserve(s.size() * n);
  for (std::size_t i = 0; i < n; ++i) out.append(s);
  return out;
}

}  // namespace drift
