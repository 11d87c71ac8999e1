#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "drift/bucketing.hpp"
#include "drift/error.hpp"

namespace drift {

enum class QuestionType { MultipleChoice, TrueFalse, ShortAnswer };

inline std::string to_string(QuestionType t) {
  switch (t) {
    case QuestionType::MultipleChoice: return "multiple_choice";
    case QuestionType::TrueFalse: return "true_false";
    case QuestionType::ShortAnswer: return "short_answer";
  }
  return "?";
}

inline QuestionType question_type_from_string(std::string_view s) {
  if (s == "multiple_choice") return QuestionType::MultipleChoice;
  if (s == "true_false") return QuestionType::TrueFalse;
  if (s == "short_answer") return QuestionType::ShortAnswer;
  throw Error(ErrorKind::ParseError, "unknown question type '" + std::string(s) + "'");
}

/// Human-readable form used inside the generation prompt.
inline std::string prompt_name(QuestionType t) {
  switch (t) {
    case QuestionType::MultipleChoice: return "multiple choice";
    case QuestionType::TrueFalse: return "true/false";
    case QuestionType::ShortAnswer: return "short answer";
  }
  return "?";
}

enum class Split { Train, Val, Test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

inline Split split_from_string(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error(ErrorKind::ParseError, "unknown split '" + std::string(s) + "'");
}

/// Supervision unit shared by data generation and training. Reconstruction
/// records leave question, answer and evidence empty.
struct QARecord {
  std::string doc_id;
  std::string document;
  std::string question;
  std::string answer;
  std::string evidence;
  QuestionType question_type = QuestionType::ShortAnswer;
  Bucket bucket{0, 0};
  Split split = Split::Train;
  TokenCount token_count = 0;

  nlohmann::json to_json() const {
    return {{"doc_id", doc_id},
            {"document", document},
            {"question", question},
            {"answer", answer},
            {"evidence", evidence},
            {"question_type", to_string(question_type)},
            {"bucket", {bucket.lower, bucket.upper}},
            {"split", to_string(split)}};
  }

  static QARecord from_json(const nlohmann::json& j) {
    QARecord r;
    try {
      r.doc_id = j.at("doc_id").get<std::string>();
      r.document = j.at("document").get<std::string>();
      r.question = j.value("question", "");
      r.answer = j.value("answer", "");
      r.evidence = j.value("evidence", "");
      r.question_type = question_type_from_string(j.value("question_type", "short_answer"));
      const auto& b = j.at("bucket");
      r.bucket = {b.at(0).get<TokenCount>(), b.at(1).get<TokenCount>()};
      r.split = split_from_string(j.value("split", "train"));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, std::string("bad record: ") + e.what());
    }
    return r;
  }
};

}  // namespace drift
