#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "declhier/engine.hpp"
#include "declhier/model.hpp"

namespace declhier {

using LeafTrace = std::vector<std::string>;

// Shortest first, then lexicographic by label.
struct ShortLex {
  bool operator()(const LeafTrace& a, const LeafTrace& b) const {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  }
};

using LeafLanguage = std::set<LeafTrace, ShortLex>;

class bound_exceeded : public std::runtime_error {
 public:
  explicit bound_exceeded(std::size_t explored)
      : std::runtime_error("state-space bound exceeded after " + std::to_string(explored) +
                           " configurations"),
        explored_(explored) {}
  std::size_t explored() const { return explored_; }

 private:
  std::size_t explored_;
};

enum class SearchOrder { breadth_first, depth_first };

struct EnumerationLimits {
  std::size_t max_leaf_len = 4;
  // Cap on complex-activity starts per run.
  std::size_t max_activations = 2;
  // Explored configurations before giving up with bound_exceeded.
  std::size_t max_states = 2'000'000;
  SearchOrder order = SearchOrder::breadth_first;
};

struct BoundedLanguage {
  std::size_t max_leaf_len = 0;
  std::size_t max_activations = 0;
  LeafLanguage traces;
  std::size_t explored_states = 0;
};

// All leaf projections (atomic completions, complex events erased) of runs
// that end in a successful terminate, within the given bounds. Atomic
// executions are explored as merged start+complete moves.
BoundedLanguage enumerate_language(const Document& model, const EnumerationLimits& limits);

// Engine-driven search for a schedule whose leaf projection is `leaf`; the
// returned trace ends with terminate and replays to accepted.
std::optional<Trace> find_schedule(std::shared_ptr<const CompiledDocument> doc,
                                   const LeafTrace& leaf, std::size_t max_activations);

// Replay-based membership: some schedule within the activation bound
// accepts `leaf`.
bool accepts_leaf_trace(std::shared_ptr<const CompiledDocument> doc, const LeafTrace& leaf,
                        std::size_t max_activations);

struct EquivalenceResult {
  bool equivalent_up_to_k = true;
  std::optional<LeafTrace> counterexample;
  // Which side accepts the counterexample.
  bool accepted_by_first = false;
  std::size_t first_language_size = 0;
  std::size_t second_language_size = 0;
};

EquivalenceResult bounded_equivalent(const Document& first, const Document& second,
                                     const EnumerationLimits& limits);

struct AggregatedConstraint {
  Template tmpl = Template::response;
  std::string outside;
  // Orientation: members occupy the first operand position.
  bool members_first = false;
  std::vector<ConstraintInstance> sources;

  // The single constraint that replaces `sources`, attached to `complex_label`.
  ConstraintInstance aggregate(const std::string& complex_label) const;
};

struct ExtractionReport {
  std::string model;
  bool feasible = true;
  std::vector<AggregatedConstraint> aggregated_constraints;
  std::vector<ConstraintInstance> blocking_constraints;
  std::vector<ConstraintInstance> internal_constraints;
};

class extraction_error : public std::runtime_error {
 public:
  extraction_error(const std::string& what, ExtractionReport report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const ExtractionReport& report() const { return report_; }

 private:
  ExtractionReport report_;
};

// Classifies the constraints touching `members` (activities of one model).
// Throws extraction_error on unknown labels or members spread over models.
ExtractionReport check_extraction(const Document& doc, const std::vector<std::string>& members);

// Moves `members` into a new sub-model `name`, referenced by a new complex
// activity of the same name, aggregating shared boundary constraints.
Document extract_subprocess(const Document& doc, const std::vector<std::string>& members,
                            const std::string& name);

struct InlineResult {
  Document flat;
  EquivalenceResult verification;
  std::vector<std::string> warnings;
};

class inline_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Syntactic rewrite only: hoists the sub-model of `complex_label` into its
// parent, duplicating boundary constraints per member.
Document inline_rewrite(const Document& doc, const std::string& complex_label,
                        std::vector<std::string>* warnings = nullptr);

// inline_rewrite followed by bounded_equivalent(original, rewritten).
InlineResult inline_subprocess(const Document& doc, const std::string& complex_label,
                               const EnumerationLimits& limits);

}  // namespace declhier
