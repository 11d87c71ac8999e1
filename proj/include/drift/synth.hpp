#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace drift::synth {

/// One atomic statement in a generated article; `sentence` appears verbatim
/// in the article text.
struct Fact {
  std::string subject;
  std::string relation;  // e.g. "founded_year"
  std::string value;
  std::string sentence;
};

struct Article {
  std::string id;
  std::string title;
  std::string text;
  std::vector<Fact> facts;
};

namespace detail {

inline constexpr std::array<std::string_view, 48> kPlaces = {
    "Marlow",   "Edria",    "Castor",  "Velden",  "Ostrava", "Brinmoor", "Calder",  "Dunmore",
    "Elsworth", "Farrow",   "Galen",   "Halvard", "Ingram",  "Jorvik",   "Kestrel", "Lindqvist",
    "Morwen",   "Norland",  "Orrin",   "Pellam",  "Quarry",  "Rosten",   "Selwyn",  "Tarrant",
    "Ulmer",    "Varden",   "Wexley",  "Yarrow",  "Zenner",  "Ashby",    "Belford", "Corwin",
    "Delmar",   "Easton",   "Fenwick", "Glenrow", "Harlow",  "Islay",    "Jessop",  "Kirkby",
    "Lowell",   "Merton",   "Newbury", "Oakham",  "Prescot", "Radley",   "Stanton", "Thorne"};
inline constexpr std::array<std::string_view, 32> kFirstNames = {
    "Anna",  "Bruno", "Clara", "David", "Elena", "Felix", "Greta", "Hugo",  "Ines",  "Jonas", "Karin",
    "Lukas", "Marta", "Nils",  "Olga",  "Peter", "Rosa",  "Simon", "Tessa", "Ulrich", "Vera", "Walter",
    "Xenia", "Yusuf", "Zora",  "Arne",  "Berta", "Carl",  "Dora",  "Emil",  "Frida", "Gustav"};
inline constexpr std::array<std::string_view, 24> kSurnames = {
    "Kessler", "Brandt", "Holm",   "Vogel",  "Lindgren", "Moreau", "Sandoval", "Petrov",
    "Novak",   "Berger", "Castel", "Dahl",   "Engel",    "Falk",   "Graf",     "Hartmann",
    "Iversen", "Janssen", "Koch",  "Larsen", "Meyer",    "Nilsen", "Ortega",   "Pohl"};
inline constexpr std::array<std::string_view, 8> kDirections = {"northern", "southern", "eastern", "western",
                                                                "central",  "coastal",  "upper",   "lower"};
inline constexpr std::array<std::string_view, 12> kGoods = {"wool",   "salt",  "timber", "glass",
                                                            "copper", "grain", "cheese", "paper",
                                                            "silver", "wine",  "linen",  "iron"};
inline constexpr std::array<std::string_view, 10> kOccupations = {"painter", "engineer", "botanist", "poet",
                                                                  "architect", "composer", "chemist",
                                                                  "surveyor", "historian", "sculptor"};
inline constexpr std::array<std::string_view, 8> kInstitutions = {"academy", "museum", "library", "observatory",
                                                                  "university", "theatre", "hospital",
                                                                  "conservatory"};
inline constexpr std::array<std::string_view, 6> kKinds = {"town", "city", "village", "port", "river", "valley"};

template <typename Arr>
std::string pick(const Arr& a, std::mt19937_64& rng) {
  return std::string(a[std::uniform_int_distribution<std::size_t>(0, a.size() - 1)(rng)]);
}

inline int uniform(int lo, int hi, std::mt19937_64& rng) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

}  // namespace detail

/// Deterministic generator of short encyclopedia-style articles about
/// fictional places and people. Every article is a sequence of fact
/// sentences so question/answer/evidence triples can be derived exactly.
class Generator {
 public:
  explicit Generator(std::uint64_t seed) : rng_(seed) {}

  Article article(std::string id) {
    using namespace detail;
    auto& r = rng_;
    const bool is_place = uniform(0, 3, r) != 0;
    Article a;
    a.id = std::move(id);
    std::vector<Fact> facts;
    if (is_place) {
      const std::string name = pick(kPlaces, r);
      const std::string kind = pick(kKinds, r);
      const bool water = kind == "river" || kind == "valley";
      a.title = name;
      const std::string region = pick(kPlaces, r);
      const std::string dir = pick(kDirections, r);
      facts.push_back({name, "kind", kind, name + " is a " + kind + " in the " + dir + " province of " + region + "."});
      std::vector<Fact> pool;
      const std::string founder = pick(kFirstNames, r) + " " + pick(kSurnames, r);
      const std::string year = std::to_string(uniform(1200, 1899, r));
      if (!water) {
        pool.push_back({name, "founded_year", year,
                        "It was founded in " + year + " by " + founder + "."});
        pool.push_back({name, "known_for", pick(kGoods, r), ""});
        pool.back().sentence = "The " + kind + " is known for its " + pool.back().value + " markets.";
        const std::string pop = std::to_string(uniform(2, 95, r) * 1000 + uniform(0, 9, r) * 100);
        pool.push_back({name, "population", pop, "The population of " + name + " is " + pop + "."});
        const std::string inst = pick(kInstitutions, r);
        const std::string iy = std::to_string(uniform(1700, 1990, r));
        pool.push_back({name, "institution", inst, "A " + inst + " was opened there in " + iy + "."});
        const std::string rail = std::to_string(uniform(1830, 1950, r));
        pool.push_back({name, "railway_year", rail, "In " + rail + " a railway reached " + name + "."});
        const std::string twin = pick(kPlaces, r);
        pool.push_back({name, "twin", twin, name + " is twinned with " + twin + "."});
      } else {
        const std::string len = std::to_string(uniform(12, 480, r));
        pool.push_back({name, "length", len, "The " + kind + " is " + len + " kilometres long."});
        const std::string mouth = pick(kPlaces, r);
        pool.push_back({name, "joins", mouth, "It joins the sea near " + mouth + "."});
        pool.push_back({name, "surveyed_by", founder, "It was first surveyed by " + founder + " in " + year + "."});
        const std::string good = pick(kGoods, r);
        pool.push_back({name, "trade", good, "Boats once carried " + good + " along its banks."});
        const std::string bridges = std::to_string(uniform(2, 40, r));
        pool.push_back({name, "bridges", bridges, "There are " + bridges + " bridges across the " + kind + "."});
      }
      shuffle_into(pool, facts);
    } else {
      const std::string first = pick(kFirstNames, r);
      const std::string last = pick(kSurnames, r);
      const std::string name = first + " " + last;
      a.title = name;
      const std::string occ = pick(kOccupations, r);
      const std::string born = std::to_string(uniform(1700, 1960, r));
      const std::string place = pick(kPlaces, r);
      facts.push_back({name, "occupation", occ, name + " was a " + occ + " born in " + place + " in " + born + "."});
      std::vector<Fact> pool;
      const std::string inst = pick(kInstitutions, r);
      const std::string city = pick(kPlaces, r);
      pool.push_back({name, "studied_at", inst, first + " studied at the " + inst + " of " + city + "."});
      const std::string died = std::to_string(std::stoi(born) + uniform(40, 90, r));
      pool.push_back({name, "died", died, last + " died in " + died + "."});
      const std::string works = std::to_string(uniform(3, 120, r));
      pool.push_back({name, "works", works, "Over a long career " + last + " completed " + works + " works."});
      const std::string mentor = pick(kFirstNames, r) + " " + pick(kSurnames, r);
      pool.push_back({name, "mentor", mentor, "Their teacher was " + mentor + "."});
      const std::string prize = std::to_string(std::stoi(born) + uniform(25, 39, r));
      pool.push_back({name, "award_year", prize, "In " + prize + " " + last + " received the " + city + " medal."});
      shuffle_into(pool, facts);
    }
    a.facts = facts;
    for (std::size_t i = 0; i < facts.size(); ++i) {
      if (i) a.text += ' ';
      a.text += facts[i].sentence;
    }
    return a;
  }

  /// Long document of several articles separated by blank lines.
  std::string document(std::size_t n_articles, const std::string& id_prefix = "doc") {
    std::string out;
    for (std::size_t i = 0; i < n_articles; ++i) {
      if (i) out += "\n\n";
      out += article(id_prefix + "-" + std::to_string(i)).text;
    }
    return out;
  }

  std::mt19937_64& rng() noexcept { return rng_; }

 private:
  void shuffle_into(std::vector<Fact>& pool, std::vector<Fact>& facts) {
    std::shuffle(pool.begin(), pool.end(), rng_);
    const int keep = detail::uniform(static_cast<int>(pool.size()) - 2, static_cast<int>(pool.size()), rng_);
    for (int i = 0; i < keep; ++i) facts.push_back(std::move(pool[static_cast<std::size_t>(i)]));
  }

  std::mt19937_64 rng_;
};

/// A natural question whose answer is `f.value` and whose evidence is
/// `f.sentence`.
inline std::string question_for(const Fact& f) {
  const auto& s = f.subject;
  const auto& r = f.relation;
  if (r == "kind") return "What kind of place is " + s + "?";
  if (r == "founded_year") return "When was " + s + " founded?";
  if (r == "known_for") return "What markets is " + s + " known for?";
  if (r == "population") return "What is the population of " + s + "?";
  if (r == "institution") return "What was opened in " + s + "?";
  if (r == "railway_year") return "When did a railway reach " + s + "?";
  if (r == "twin") return "Which place is " + s + " twinned with?";
  if (r == "length") return "How many kilometres long is " + s + "?";
  if (r == "joins") return "Near which place does " + s + " join the sea?";
  if (r == "surveyed_by") return "Who first surveyed " + s + "?";
  if (r == "trade") return "What did boats carry along " + s + "?";
  if (r == "bridges") return "How many bridges cross " + s + "?";
  if (r == "occupation") return "What was the profession of " + s + "?";
  if (r == "studied_at") return "Where did " + s + " study?";
  if (r == "died") return "When did " + s + " die?";
  if (r == "works") return "How many works did " + s + " complete?";
  if (r == "mentor") return "Who was the teacher of " + s + "?";
  if (r == "award_year") return "In which year did " + s + " receive a medal?";
  return "What is the " + r + " of " + s + "?";
}

}  // namespace drift::synth
