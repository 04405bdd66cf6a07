#include <doctest.h>

#include <map>

#include "declhier/automaton.hpp"
#include "oracle.hpp"

using namespace declhier;

namespace {

const std::vector<std::string> kABC = {"A", "B", "C"};

ConstraintStatus eval(const ConstraintInstance& c, std::vector<std::string> alphabet,
                      std::vector<std::string> trace) {
  return evaluate_trace(c, alphabet, trace);
}

}  // namespace

TEST_CASE("existence tracks the termination status of the first model") {
  const ConstraintInstance c{Template::existence, 1, {"A"}};
  const std::vector<std::string> sigma = {"A", "B", "C", "D", "E", "F"};
  CHECK(eval(c, sigma, {"B"}) == ConstraintStatus::pending);
  CHECK(eval(c, sigma, {"B", "A"}) == ConstraintStatus::accepting);
  CHECK(eval(c, sigma, {"B", "A", "C", "E"}) == ConstraintStatus::accepting);
}

TEST_CASE("precedence violated by a premature target") {
  const ConstraintInstance c{Template::precedence, 0, {"C", "E"}};
  const std::vector<std::string> sigma = {"A", "B", "C", "D", "E", "F"};
  CHECK(eval(c, sigma, {"E"}) == ConstraintStatus::violated);
  CHECK(eval(c, sigma, {"C", "E"}) == ConstraintStatus::accepting);
  CHECK(eval(c, sigma, {}) == ConstraintStatus::accepting);
}

TEST_CASE("zero cardinality existence accepts the empty trace") {
  CHECK(eval({Template::existence, 0, {"A"}}, kABC, {}) == ConstraintStatus::accepting);
}

TEST_CASE("neg_response violated once the target follows the source") {
  CHECK(eval({Template::neg_response, 0, {"G", "R"}}, {"G", "R"}, {"G", "R"}) ==
        ConstraintStatus::violated);
  CHECK(eval({Template::neg_response, 0, {"G", "R"}}, {"G", "R"}, {"R", "G"}) ==
        ConstraintStatus::accepting);
}

TEST_CASE("chain_precedence accepted set matches the predicate up to length 4") {
  const ConstraintInstance c{Template::chain_precedence, 0, {"C", "D"}};
  const std::vector<std::string> sigma = {"C", "D"};
  const auto automaton = compile_constraint(c, sigma);
  std::size_t accepted = 0;
  oracle::for_each_sequence(sigma, 4, [&](const oracle::Seq& s) {
    const bool by_automaton = automaton.accepting(automaton.run(s));
    CHECK(by_automaton == oracle::holds(c, s));
    if (by_automaton) ++accepted;
  });
  // <>, C, CC, CD, CCC, CCD, CDC, CCCC, CCCD, CCDC, CDCC, CDCD
  CHECK(accepted == 12);
}

TEST_CASE("cardinality counters saturate") {
  const auto a = compile_constraint({Template::exactly, 2, {"A"}}, kABC);
  // 0, 1, 2 and the exceeded sink.
  CHECK(a.state_count() == 4);
  const auto e = compile_constraint({Template::existence, 3, {"A"}}, kABC);
  CHECK(e.state_count() == 4);
}

TEST_CASE("minimal automata are canonical") {
  const auto a = compile_constraint({Template::response, 0, {"A", "B"}}, kABC);
  const auto b = compile_constraint({Template::response, 0, {"A", "B"}}, kABC);
  CHECK(a.state_count() == 2);
  for (StateId s = 0; s < a.state_count(); ++s) {
    for (std::size_t x = 0; x < kABC.size(); ++x) CHECK(a.step(s, x) == b.step(s, x));
  }
}

TEST_CASE("labels outside the alphabet are input errors") {
  const auto a = compile_constraint({Template::response, 0, {"A", "B"}}, kABC);
  std::vector<std::string> trace = {"Z"};
  CHECK_THROWS_AS(a.run(trace), input_error);
  CHECK_THROWS_AS(compile_constraint({Template::response, 0, {"A", "Z"}}, kABC), compile_error);
}

TEST_CASE("reflexive operands") {
  // response(A, A): every A needs a later A, so any A is fatal.
  CHECK(eval({Template::response, 0, {"A", "A"}}, kABC, {"A"}) == ConstraintStatus::violated);
  // precedence(A, A): the first A has no earlier A.
  CHECK(eval({Template::precedence, 0, {"A", "A"}}, kABC, {"A"}) == ConstraintStatus::violated);
  CHECK(eval({Template::responded_existence, 0, {"A", "A"}}, kABC, {"A"}) ==
        ConstraintStatus::accepting);
}

TEST_CASE("init accepts the empty trace and violates on a wrong first event") {
  const ConstraintInstance c{Template::init, 0, {"A"}};
  CHECK(eval(c, kABC, {}) == ConstraintStatus::accepting);
  CHECK(eval(c, kABC, {"A", "B"}) == ConstraintStatus::accepting);
  CHECK(eval(c, kABC, {"B"}) == ConstraintStatus::violated);
}

TEST_CASE("oracle agreement on all traces up to length 6") {
  const auto tally = oracle::run_oracle_suite(6);
  INFO(tally.first_disagreement);
  CHECK(tally.disagreements == 0);
  CHECK(tally.checked > 20'000);
}

TEST_CASE("dead states are closed under extension") {
  for (const auto& c : oracle::catalogue()) {
    const auto a = compile_constraint(c, kABC);
    for (StateId s = 0; s < a.state_count(); ++s) {
      if (!a.dead(s)) continue;
      CHECK_FALSE(a.accepting(s));
      for (std::size_t x = 0; x < kABC.size(); ++x) CHECK(a.dead(a.step(s, x)));
    }
  }
}

TEST_CASE("classification table") {
  using C = TemplateClassification;
  const std::map<Template, C> expected = {
      {Template::existence, C{false, true}},
      {Template::responded_existence, C{false, true}},
      {Template::response, C{false, true}},
      {Template::absence, C{true, false}},
      {Template::precedence, C{true, false}},
      {Template::chain_precedence, C{true, false}},
      {Template::neg_response, C{true, false}},
      {Template::init, C{true, false}},
      {Template::exactly, C{true, true}},
      {Template::succession, C{true, true}},
      {Template::chain_response, C{true, true}},
  };
  for (Template t : all_templates()) {
    ConstraintInstance c{t, has_cardinality(t) ? 1u : 0u, {"A"}};
    if (!is_unary(t)) c.operands.push_back("B");
    CAPTURE(template_name(t));
    CHECK(classify_template(compile_constraint(c, kABC)) == expected.at(t));
  }
}
