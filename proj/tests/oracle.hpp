#pragma once

// Reference predicates over finite completion sequences, written directly
// from the template definitions and independent of the automaton compiler.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "declhier/automaton.hpp"
#include "declhier/model.hpp"

namespace oracle {

using Seq = std::vector<std::string>;

inline std::size_t count(const Seq& s, const std::string& x) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), x));
}

inline bool holds(const declhier::ConstraintInstance& c, const Seq& s) {
  using declhier::Template;
  const std::string& a = c.operands.at(0);
  const std::string& b = c.operands.size() > 1 ? c.operands[1] : a;
  const std::size_t n = c.cardinality;
  switch (c.tmpl) {
    case Template::existence: return count(s, a) >= n;
    case Template::absence: return count(s, a) <= n;
    case Template::exactly: return count(s, a) == n;
    // The empty trace is accepted: init constrains the first event only once
    // there is one.
    case Template::init: return s.empty() || s[0] == a;
    case Template::responded_existence: return count(s, a) == 0 || count(s, b) > 0;
    case Template::response:
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != a) continue;
        if (std::find(s.begin() + static_cast<long>(i) + 1, s.end(), b) == s.end()) return false;
      }
      return true;
    case Template::precedence:
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != b) continue;
        if (std::find(s.begin(), s.begin() + static_cast<long>(i), a) == s.begin() + static_cast<long>(i)) {
          return false;
        }
      }
      return true;
    case Template::succession:
      return holds({Template::response, 0, {a, b}}, s) && holds({Template::precedence, 0, {a, b}}, s);
    case Template::chain_response:
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == a && (i + 1 >= s.size() || s[i + 1] != b)) return false;
      }
      return true;
    case Template::chain_precedence:
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == b && (i == 0 || s[i - 1] != a)) return false;
      }
      return true;
    case Template::neg_response:
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != a) continue;
        if (std::find(s.begin() + static_cast<long>(i) + 1, s.end(), b) != s.end()) return false;
      }
      return true;
  }
  return false;
}

// Calls `fn` on every sequence over `alphabet` of length 0..max_len.
inline void for_each_sequence(const Seq& alphabet, std::size_t max_len,
                              const std::function<void(const Seq&)>& fn) {
  Seq cur;
  std::function<void()> rec = [&] {
    fn(cur);
    if (cur.size() == max_len) return;
    for (const auto& x : alphabet) {
      cur.push_back(x);
      rec();
      cur.pop_back();
    }
  };
  rec();
}

// Some extension of `prefix` by at most `max_ext` symbols satisfies `c`.
inline bool satisfiable_extension(const declhier::ConstraintInstance& c, const Seq& alphabet,
                                  const Seq& prefix, std::size_t max_ext) {
  bool found = false;
  for_each_sequence(alphabet, max_ext, [&](const Seq& ext) {
    if (found) return;
    Seq full = prefix;
    full.insert(full.end(), ext.begin(), ext.end());
    if (holds(c, full)) found = true;
  });
  return found;
}

// Constraint instances exercising every template over {A, B, C}, including
// zero and non-trivial cardinalities and a reflexive binary operand pair.
inline std::vector<declhier::ConstraintInstance> catalogue() {
  using declhier::Template;
  std::vector<declhier::ConstraintInstance> out;
  for (Template t : declhier::all_templates()) {
    if (declhier::has_cardinality(t)) {
      for (std::uint32_t n : {0u, 1u, 2u}) out.push_back({t, n, {"A"}});
    } else if (declhier::is_unary(t)) {
      out.push_back({t, 0, {"A"}});
    } else {
      out.push_back({t, 0, {"A", "B"}});
      out.push_back({t, 0, {"A", "A"}});
    }
  }
  return out;
}

struct OracleTally {
  std::size_t checked = 0;
  std::size_t disagreements = 0;
  std::string first_disagreement;
};

// Compares every catalogue constraint against the predicates on all traces
// of length <= max_len over {A, B, C}.
inline OracleTally run_oracle_suite(std::size_t max_len) {
  const Seq alphabet = {"A", "B", "C"};
  OracleTally tally;
  for (const auto& c : catalogue()) {
    const auto automaton = declhier::compile_constraint(c, alphabet);
    // A satisfying extension, when one exists, is no longer than the
    // number of automaton states.
    const std::size_t ext_bound = automaton.state_count();
    for_each_sequence(alphabet, max_len, [&](const Seq& s) {
      ++tally.checked;
      const auto status = declhier::evaluate_trace(automaton, s);
      const bool accept_ok = (status == declhier::ConstraintStatus::accepting) == holds(c, s);
      const bool dead_ok = (status == declhier::ConstraintStatus::violated) ==
                           !satisfiable_extension(c, alphabet, s, ext_bound);
      if (!accept_ok || !dead_ok) {
        if (tally.disagreements++ == 0) {
          std::string t;
          for (const auto& x : s) t += x;
          tally.first_disagreement = declhier::to_string(c) + " on <" + t + ">";
        }
      }
    });
  }
  return tally;
}

}  // namespace oracle
