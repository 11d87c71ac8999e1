#pragma once

#include <string>
#include <utility>
#include <vector>

#include "drift/records.hpp"
#include "drift/synth.hpp"

namespace fixtures {

/// Records built from generated articles; `good` says whether a correct
/// filter should keep them.
struct Labeled {
  drift::QARecord record;
  bool good;
  std::string corruption;
};

inline drift::QARecord from_fact(const drift::synth::Article& a, const drift::synth::Fact& f) {
  drift::QARecord r;
  r.doc_id = a.id;
  r.document = a.text;
  r.question = drift::synth::question_for(f);
  r.answer = f.value;
  r.evidence = f.sentence;
  return r;
}

/// Ten clean records and ten corrupted ones: three with evidence absent
/// from the document, two with an empty field, three with an answer the
/// evidence does not support and two with an unrelated question.
inline std::vector<Labeled> adversarial(std::uint64_t seed = 2024) {
  drift::synth::Generator g(seed);
  std::vector<Labeled> out;
  for (int i = 0; i < 20; ++i) {
    const auto a = g.article("adv-" + std::to_string(i));
    const auto& f = a.facts[static_cast<std::size_t>(i) % a.facts.size()];
    auto r = from_fact(a, f);
    switch (i) {
      case 10:
      case 11:
      case 12: {
        // Evidence reworded so it no longer occurs in the document.
        r.evidence = "According to records, " + r.evidence;
        out.push_back({r, false, "fidelity"});
        break;
      }
      case 13:
        r.evidence = "";
        out.push_back({r, false, "empty evidence"});
        break;
      case 14:
        r.answer = "   ";
        out.push_back({r, false, "empty answer"});
        break;
      case 15:
      case 16:
      case 17: {
        // An answer taken from another sentence of the same article.
        const auto& other = a.facts[(static_cast<std::size_t>(i) + 1) % a.facts.size()];
        r.answer = f.sentence.find(other.value) != std::string::npos ? "Quorvath" : other.value;
        out.push_back({r, false, "unsupported answer"});
        break;
      }
      case 18:
      case 19:
        r.question = "What colour is the sky above the harbour?";
        out.push_back({r, false, "irrelevant question"});
        break;
      default:
        out.push_back({r, true, ""});
    }
  }
  return out;
}

}  // namespace fixtures
