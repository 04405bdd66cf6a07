#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

#include "declhier/gateway.hpp"
#include "support.hpp"

using namespace declhier;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args, const std::string& input = "") {
  for (auto& a : args) {
    if (a.size() > 4 && (a.ends_with(".dpm") || a.ends_with(".dpt"))) a = (support::kFixtures / a).string();
  }
  std::ostringstream out, err;
  std::istringstream in(input);
  Run r;
  r.code = run_cli(args, out, err, in);
  r.out = out.str();
  r.err = err.str();
  return r;
}

int binary_exit(const std::string& args) {
  const std::string cmd = std::string("\"") + DECLHIER_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("validate exit codes") {
  CHECK(cli({"validate", "basic.dpm"}).code == 0);
  const auto cyclic = cli({"validate", "cyclic.dpm"});
  CHECK(cyclic.code == 1);
  CHECK(cyclic.err.find("cyclic.dpm:8:3: error:") != std::string::npos);
  CHECK(cli({"validate", "dangling.dpm"}).code == 1);
  const auto syntax = cli({"validate", "syntax_error.dpm"});
  CHECK(syntax.code == 2);
  CHECK(syntax.err.find("syntax_error.dpm:3:24: error:") != std::string::npos);
  CHECK(cli({"validate", "missing.dpm"}).code == 2);
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
}

TEST_CASE("format prints the canonical text") {
  const auto r = cli({"format", "writing_flat.dpm"});
  CHECK(r.code == 0);
  CHECK(r.out == SourceDocument::from_file(support::kFixtures / "writing_flat.dpm").text);
}

TEST_CASE("replay verdicts") {
  CHECK(cli({"replay", "basic.dpm", "basic.dpt"}).out == "accepted\n");
  const auto rejected = cli({"replay", "basic.dpm", "basic_reject.dpt"});
  CHECK(rejected.code == 1);
  CHECK(rejected.out == "rejected at step 0: activity 'E' is not enabled [precedence(C, E)]\n");
  CHECK(cli({"replay", "basic.dpm", "basic_expected_rejections.dpt"}).code == 0);
  CHECK(cli({"replay", "basic.dpm", "syntax_error.dpm"}).code == 2);
}

TEST_CASE("enumerate, equiv and inline") {
  const auto e = cli({"enumerate", "chained.dpm", "--max-leaf", "3"});
  CHECK(e.code == 0);
  CHECK(e.out.rfind("<>\nA B B\nB A B\nB B A\n4 trace(s)", 0) == 0);

  const auto same = cli({"equiv", "basic.dpm", "basic.dpm"});
  CHECK(same.code == 0);
  const auto diff = cli({"equiv", "chained.dpm", "chained_inlined.dpm"});
  CHECK(diff.code == 1);
  CHECK(diff.out.find("counterexample <>") != std::string::npos);

  const auto in = cli({"inline", "chained.dpm", "--complex", "C"});
  CHECK(in.code == 1);
  CHECK(in.out.find("constraint chain_precedence(B, D)") != std::string::npos);

  const auto capped = cli({"enumerate", "writing_flat.dpm", "--max-states", "3"});
  CHECK(capped.code == 1);
  CHECK(capped.err.find("bound exceeded") != std::string::npos);
}

TEST_CASE("extract") {
  const auto ok = cli({"extract", "writing_flat.dpm", "--members",
                       "Read reviews for revising paper,Write response letter,Work on revision", "--name",
                       "Revise paper"});
  CHECK(ok.code == 0);
  CHECK(ok.out == SourceDocument::from_file(support::kFixtures / "writing_hierarchical.dpm").text);
  CHECK(ok.err.find("aggregated 3 constraint(s)") != std::string::npos);
  const auto blocked = cli({"extract", "basic.dpm", "--members", "C,D", "--name", "S"});
  CHECK(blocked.code == 1);
  CHECK(blocked.err.find("blocking: precedence(C, E)") != std::string::npos);
}

TEST_CASE("simulate reads commands from stdin") {
  const auto r = cli({"simulate", "basic.dpm"}, "do E\ndo A\nexplain E\nterminate\n");
  CHECK(r.code == 0);
  CHECK(r.out.find("rejected: activity 'E' is not enabled [precedence(C, E)]") != std::string::npos);
  CHECK(r.out.find("precedence(C, E): accepting (blocking)") != std::string::npos);
  CHECK(r.out.find("instance terminated") != std::string::npos);
  CHECK(cli({"simulate", "basic.dpm"}, "do B\nquit\n").code == 1);
}

TEST_CASE("installed binary exit codes") {
  const std::string dir = support::kFixtures.string() + "/";
  CHECK(binary_exit("validate \"" + dir + "subprocess.dpm\"") == 0);
  CHECK(binary_exit("validate \"" + dir + "cyclic.dpm\"") == 1);
  CHECK(binary_exit("validate \"" + dir + "syntax_error.dpm\"") == 2);
  CHECK(binary_exit("--help") == 0);
}
