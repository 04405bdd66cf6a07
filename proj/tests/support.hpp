#pragma once

#include <algorithm>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "declhier/analysis.hpp"
#include "declhier/dsl.hpp"
#include "oracle.hpp"

namespace support {

namespace fs = std::filesystem;

inline const fs::path kFixtures = DECLHIER_FIXTURE_DIR;

inline declhier::Document load_document(const fs::path& path) {
  auto r = declhier::parse_model(declhier::SourceDocument::from_file(path));
  if (!r.ok()) throw std::runtime_error("fixture does not parse: " + path.string());
  return r.document;
}

inline declhier::Document fixture(const std::string& name) { return load_document(kFixtures / name); }

inline std::vector<fs::path> well_formed_fixtures() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(kFixtures)) {
    if (e.path().extension() != ".dpm") continue;
    if (declhier::parse_model(declhier::SourceDocument::from_file(e.path())).ok()) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct ConsistencyTally {
  std::size_t members = 0;
  std::size_t members_rejected = 0;
  std::size_t non_members = 0;
  std::size_t non_members_accepted = 0;
  std::string first_problem;

  bool ok() const { return members_rejected == 0 && non_members_accepted == 0; }
};

// Replays every enumerated trace through the engine, then replays up to
// `samples` random non-members drawn without replacement from all leaf
// traces within the bound.
inline ConsistencyTally check_enumeration(const declhier::Document& doc,
                                          const declhier::EnumerationLimits& limits,
                                          std::size_t samples, unsigned seed) {
  using namespace declhier;
  ConsistencyTally tally;
  auto compiled = CompiledDocument::compile(doc);
  const BoundedLanguage lang = enumerate_language(doc, limits);
  auto show = [](const LeafTrace& t) {
    std::string s = "<";
    for (std::size_t i = 0; i < t.size(); ++i) s += (i ? " " : "") + t[i];
    return s + ">";
  };
  for (const auto& t : lang.traces) {
    ++tally.members;
    auto schedule = find_schedule(compiled, t, limits.max_activations);
    if (!schedule || !replay(compiled, *schedule).accepted()) {
      if (tally.members_rejected++ == 0) tally.first_problem = "member rejected " + show(t);
    }
  }
  std::vector<LeafTrace> universe;
  oracle::for_each_sequence(leaf_alphabet(doc), limits.max_leaf_len,
                            [&](const oracle::Seq& s) { universe.push_back(s); });
  std::mt19937 rng(seed);
  std::shuffle(universe.begin(), universe.end(), rng);
  for (const auto& t : universe) {
    if (tally.non_members == samples) break;
    if (lang.traces.count(t)) continue;
    ++tally.non_members;
    if (accepts_leaf_trace(compiled, t, limits.max_activations)) {
      if (tally.non_members_accepted++ == 0 && tally.first_problem.empty()) {
        tally.first_problem = "non-member accepted " + show(t);
      }
    }
  }
  return tally;
}

}  // namespace support
