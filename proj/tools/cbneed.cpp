// cbneed: evaluate, trace, cross-check and benchmark the call-by-need
// evaluators from the command line.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cbneed/cbneed.hpp"

namespace {

using namespace cbneed;
using harness::json;

enum Exit : int { kOk = 0, kInput = 1, kBudget = 2, kFailure = 3 };

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Settings {
  std::string source;
  std::string machine;
  std::uint64_t budget = 10000;
  std::uint64_t max_steps = 100000;
  std::string compact = "manual";
  std::string syntax = "debruijn";
  std::string format;
  std::string mutation = "none";
  bool phi = false;
  bool verify = false;
  std::uint64_t seed = 42;
  std::size_t max_size = 12;
  std::size_t count = 10000;
  std::size_t exhaustive = 0;
  bool no_regressions = false;
  bool check_simulation = false;
  unsigned jobs = 0;
  std::vector<std::size_t> depths{10, 10000};
  std::size_t reps = 100000;
  bool linear_scan = false;

  Syntax parsed_syntax() const { return syntax == "named" ? Syntax::named : Syntax::debruijn; }
  bool json_out() const { return format == "json"; }

  MachineOptions machine_options() const {
    MachineOptions m;
    if (mutation == "swap-assoc-l") m.mutation = Mutation::swap_assoc_l;
    return m;
  }

  CompactionPolicy policy() const {
    try {
      return CompactionPolicy::parse(compact);
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  }
};

std::string read_source(const std::string& source) {
  if (source == "-") {
    return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  }
  if (!source.empty() && source.front() == '@') {
    std::ifstream in(source.substr(1), std::ios::binary);
    if (!in) throw InputError("cannot read " + source.substr(1));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  return source;
}

// Ω abbreviates the usual divergent term.
std::string expand(std::string text, Syntax syntax) {
  static const std::string sym = "\xCE\xA9";
  const std::string with = syntax == Syntax::named ? "((\\w. w w) (\\w. w w))" : "((\\. 0 0) (\\. 0 0))";
  for (auto at = text.find(sym); at != std::string::npos; at = text.find(sym, at + with.size())) {
    text.replace(at, sym.size(), with);
  }
  return text;
}

Term parse_closed(const std::string& text, Syntax syntax) {
  Term t = [&] {
    try {
      return parse(expand(text, syntax), syntax);
    } catch (const SyntaxError& e) {
      throw InputError(std::string("syntax error at ") + e.what());
    } catch (const UnboundVariable& e) {
      throw InputError(e.what());
    }
  }();
  if (!free_indices(t).empty()) throw InputError("program is not closed");
  return t;
}

Term read_term(const Settings& s) {
  if (s.source.empty()) throw InputError("no program given");
  return parse_closed(read_source(s.source), s.parsed_syntax());
}

std::string shown(const Term& t, const Settings& s) { return print(t, s.parsed_syntax()); }

// ---------------------------------------------------------------------------

int cmd_eval(Settings s) {
  if (s.machine.empty()) s.machine = "need";
  const Term t = read_term(s);
  const auto policy = s.policy();
  EvalResult r;
  CompactingResult c;
  if (s.machine == "need") {
    if (policy.trigger != CompactionPolicy::Trigger::off &&
        policy.trigger != CompactionPolicy::Trigger::manual) {
      throw InputError("--compact applies to --machine=ckplus only");
    }
    r = eval_need(t, s.budget);
  } else {
    c = eval_ckplus_compacting(t, MachineBudget{s.max_steps, s.budget}, policy,
                               s.machine_options());
    r = c;
  }
  if (s.json_out()) {
    json out{{"status", r.answer ? "answer" : "budget"},
             {"answer", r.answer ? json(shown(*r.answer, s)) : json(nullptr)},
             {"reductions", r.reductions},
             {"steps", r.steps}};
    if (s.machine == "ckplus") {
      out["compactions"] = c.compactions;
      out["max_binds"] = c.max_bind_count;
    }
    std::cout << out.dump() << '\n';
  } else {
    std::cout << (r.answer ? shown(*r.answer, s) : std::string("BUDGET")) << '\n';
  }
  return r.answer ? kOk : kBudget;
}

// ---------------------------------------------------------------------------

class TraceWriter {
 public:
  explicit TraceWriter(const Settings& s) : s_(s) {}

  void emit(const json& j) {
    if (s_.json_out()) {
      std::cout << j.dump() << '\n';
      return;
    }
    if (j.contains("trace")) {
      std::cout << "# " << j.dump() << '\n';
      return;
    }
    std::cout << j.value("step", 0) << '\t' << j.value("rule", std::string());
    if (j.contains("control")) {
      std::cout << '\t' << j["control"].get<std::string>() << '\t' << j["env"].dump()
                << "\tdepth=" << j.value("stack_depth", 0) << " binds=" << j.value("binds", 0);
    }
    if (j.contains("term")) std::cout << '\t' << j["term"].get<std::string>();
    if (j.contains("answer")) std::cout << '\t' << j["answer"].get<std::string>();
    if (j.contains("phi")) std::cout << "\tphi=" << j["phi"].get<std::string>();
    if (j.contains("check")) std::cout << "\tcheck=" << j["check"].get<std::string>();
    std::cout << '\n';
  }

 private:
  const Settings& s_;
};

int trace_need(const Settings& s, const Term& t, TraceWriter& out) {
  std::uint64_t n = 0;
  Term now = t;
  out.emit({{"step", n}, {"rule", "inject"}, {"term", shown(now, s)}});
  while (n < s.budget) {
    auto next = step_need(now);
    if (!next) break;
    now = std::move(*next);
    out.emit({{"step", ++n}, {"rule", "reduce"}, {"term", shown(now, s)}});
  }
  if (is_answer(now)) {
    out.emit({{"step", n + 1}, {"rule", "final"}, {"answer", shown(now, s)}});
    return kOk;
  }
  out.emit({{"step", n + 1}, {"rule", "budget"}});
  std::cout.flush();
  std::cerr << "BUDGET\n";
  return kBudget;
}

int trace_ckplus(const Settings& s, const Term& t, TraceWriter& out) {
  const harness::TraceOptions opts{s.phi, s.parsed_syntax()};
  std::uint64_t n = 0;
  bool failed = false;
  const MachineState first = inject(t);
  Term phi = unload(first);
  out.emit(harness::state_record(n, "inject", first, opts));

  auto checked = [&](json rec, bool ok) {
    if (opts.phi) rec["check"] = ok ? "ok" : "violation";
    failed = failed || !ok;
    return rec;
  };
  auto result = eval_ckplus_compacting(
      t, MachineBudget{s.max_steps, s.budget}, s.policy(),
      [&](const StepInfo& info, const MachineState& state) {
        json rec = harness::state_record(++n, rule_name(info.rule), state, opts);
        bool ok = true;
        if (opts.phi) {
          Term now = unload(state);
          const auto c = harness::check_simulation(phi, now);
          ok = c != harness::SimulationCheck::violation &&
               (c == harness::SimulationCheck::reduction) == is_reduction(info.rule);
          rec["branch"] = harness::to_string(c);
          phi = std::move(now);
        }
        out.emit(checked(std::move(rec), ok));
      },
      [&](const MachineState& before, const MachineState& after) {
        json rec = harness::state_record(++n, "sc", after, opts);
        bool ok = true;
        if (opts.phi) {
          Term now = unload(after);
          ok = harness::normalize(now) == harness::normalize(unload(before));
          phi = std::move(now);
        }
        out.emit(checked(std::move(rec), ok));
      },
      s.machine_options());
  if (result.answer) {
    out.emit({{"step", ++n}, {"rule", "final"}, {"answer", shown(*result.answer, s)}});
  } else {
    out.emit({{"step", ++n}, {"rule", "budget"}});
  }
  if (failed) return kFailure;
  if (!result.answer) {
    std::cout.flush();
    std::cerr << "BUDGET\n";
    return kBudget;
  }
  return kOk;
}

int verify(const Settings& s) {
  std::istringstream in(read_source(s.source));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  try {
    const auto n = harness::verify_trace(lines);
    std::cout << "verified " << n << " records\n";
    return kOk;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed trace: ") + e.what());
  } catch (const std::runtime_error& e) {
    std::cout << "FAIL " << e.what() << '\n';
    return kFailure;
  }
}

int cmd_trace(Settings s) {
  if (s.verify) return verify(s);
  if (s.machine.empty()) s.machine = "ckplus";
  if (s.format.empty()) s.format = "json";
  const Term t = read_term(s);
  TraceWriter out(s);
  out.emit(harness::trace_header(t, s.machine, {s.phi, s.parsed_syntax()}, s.policy().to_string()));
  return s.machine == "need" ? trace_need(s, t, out) : trace_ckplus(s, t, out);
}

// ---------------------------------------------------------------------------

std::vector<harness::CorpusEntry> read_corpus(const Settings& s) {
  std::istringstream in(read_source(s.source));
  std::vector<harness::CorpusEntry> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line.front() == '#') continue;
    std::string name = "line-" + std::to_string(line_no);
    if (const auto tab = line.find('\t'); tab != std::string::npos) {
      name = line.substr(0, tab);
      line = line.substr(tab + 1);
    }
    try {
      out.push_back({name, parse_closed(line, s.parsed_syntax())});
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

json result_json(const EvalResult& r, const Settings& s) {
  return r.answer ? json(shown(*r.answer, s)) : json("BUDGET");
}

int cmd_diff(const Settings& s) {
  std::vector<harness::CorpusEntry> corpus;
  if (!s.source.empty()) {
    corpus = read_corpus(s);
  } else if (s.exhaustive > 0) {
    corpus = harness::exhaustive_corpus(s.exhaustive);
  } else {
    corpus = harness::gen_corpus({s.seed, s.max_size, s.count}, !s.no_regressions).entries;
  }
  harness::DiffOptions opts;
  opts.budget = s.budget;
  opts.check_simulation = s.check_simulation;
  opts.machine = s.machine_options();
  opts.jobs = s.jobs;
  const auto report = harness::run_diff(corpus, opts);

  for (const auto& e : report.entries) {
    const bool bad = e.outcome == harness::Outcome::mismatch || e.violations > 0;
    if (s.json_out()) {
      json j{{"index", e.index},
             {"name", e.name},
             {"term", shown(e.term, s)},
             {"outcome", harness::to_string(e.outcome)},
             {"need", result_json(e.need, s)},
             {"ckplus", result_json(e.machine, s)}};
      if (s.check_simulation) j["violations"] = e.violations;
      if (!e.detail.empty()) j["detail"] = e.detail;
      std::cout << j.dump() << '\n';
    } else if (bad) {
      std::cout << (e.outcome == harness::Outcome::mismatch ? "MISMATCH" : "VIOLATION") << " #"
                << e.index << ' ' << e.name << ": " << shown(e.term, s) << "\n  " << e.detail << '\n';
    }
  }
  json summary{{"terms", report.entries.size()},
               {"answers", report.answers},
               {"budget", report.budget_exceeded},
               {"mismatches", report.mismatches},
               {"budget_limit", s.budget}};
  if (s.source.empty() && s.exhaustive == 0) {
    summary["seed"] = s.seed;
    summary["max_size"] = s.max_size;
    summary["count"] = s.count;
  }
  if (s.check_simulation) summary["violations"] = report.violations;
  if (s.json_out()) {
    std::cout << json{{"summary", summary}}.dump() << '\n';
  } else {
    std::cout << report.entries.size() << " terms: " << report.answers << " answers, "
              << report.budget_exceeded << " over budget, " << report.mismatches << " mismatches";
    if (s.check_simulation) std::cout << ", " << report.violations << " simulation violations";
    std::cout << '\n';
  }
  return report.mismatches > 0 || report.violations > 0 ? kFailure : kOk;
}

// ---------------------------------------------------------------------------

int cmd_bench(const Settings& s) {
  if (s.reps == 0) throw InputError("--reps must be positive");
  const char* mode = s.linear_scan ? "linear-scan" : "indexed";
  if (!s.json_out()) std::cout << "depth\tns_per_lookup\n";
  for (auto d : s.depths) {
    if (d == 0) throw InputError("depths must be positive");
    const auto row = harness::bench_lookup(d, s.reps, s.linear_scan);
    if (s.json_out()) {
      std::cout << json{{"depth", row.depth}, {"ns_per_lookup", row.ns_per_lookup},
                        {"reps", row.reps}, {"mode", mode}}
                       .dump()
                << '\n';
    } else {
      std::cout << row.depth << '\t' << row.ns_per_lookup << '\n';
    }
  }
  return kOk;
}

int cmd_gen(const Settings& s) {
  const auto corpus = harness::gen_corpus({s.seed, s.max_size, s.count}, !s.no_regressions);
  if (s.json_out()) {
    std::cout << json{{"seed", s.seed}, {"max_size", s.max_size}, {"count", s.count},
                      {"syntax", s.syntax}}
                     .dump()
              << '\n';
  }
  for (const auto& e : corpus.entries) {
    if (s.json_out()) {
      std::cout << json{{"name", e.name}, {"term", shown(e.term, s)}}.dump() << '\n';
    } else {
      std::cout << e.name << '\t' << shown(e.term, s) << '\n';
    }
  }
  return kOk;
}

// ---------------------------------------------------------------------------

void add_source(CLI::App* cmd, Settings& s, const std::string& what, bool required) {
  auto* opt = cmd->add_option("source", s.source, what + " (text, @file, or - for stdin)");
  if (required) opt->required();
}

void add_syntax(CLI::App* cmd, Settings& s) {
  cmd->add_option("--syntax", s.syntax, "term syntax for input and output")
      ->check(CLI::IsMember({"named", "debruijn"}))
      ->capture_default_str();
  cmd->add_option("--format", s.format, "output format (trace: json, others: text)")
      ->check(CLI::IsMember({"text", "json"}));
}

void add_machine(CLI::App* cmd, Settings& s, bool with_compaction) {
  cmd->add_option("--machine", s.machine, "evaluator (eval: need, trace: ckplus)")
      ->check(CLI::IsMember({"need", "ckplus"}));
  cmd->add_option("--budget", s.budget, "reduction budget")->capture_default_str();
  cmd->add_option("--max-steps", s.max_steps, "machine step budget (ckplus)")->capture_default_str();
  if (with_compaction) {
    cmd->add_option("--compact", s.compact, "off | manual | every:N | depth:D (ckplus)")
        ->capture_default_str();
  }
  cmd->add_option("--mutation", s.mutation, "deliberate machine defect, for harness self-tests")
      ->check(CLI::IsMember({"none", "swap-assoc-l"}))
      ->capture_default_str();
}

void add_corpus(CLI::App* cmd, Settings& s) {
  cmd->add_option("--seed", s.seed, "generator seed")->capture_default_str();
  cmd->add_option("--max-size", s.max_size, "largest random term")->capture_default_str();
  cmd->add_option("--count", s.count, "number of random terms")->capture_default_str();
  cmd->add_flag("--no-regressions", s.no_regressions, "leave out the fixed regression terms");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"call-by-need evaluators: the standard reduction and the CK+ machine"};
  app.require_subcommand(1);
  Settings s;

  auto* eval = app.add_subcommand("eval", "evaluate a closed program");
  add_source(eval, s, "program", true);
  add_machine(eval, s, true);
  add_syntax(eval, s);

  auto* trace = app.add_subcommand("trace", "print a run as JSON lines");
  add_source(trace, s, "program, or a recorded trace with --verify", true);
  add_machine(trace, s, true);
  add_syntax(trace, s);
  trace->add_flag("--phi", s.phi, "add the unloaded program and the simulation check to each line");
  trace->add_flag("--verify", s.verify, "replay a recorded ckplus trace against the machine");

  auto* diff = app.add_subcommand("diff", "compare both evaluators on a corpus");
  add_source(diff, s, "corpus, one term per line", false);
  add_corpus(diff, s);
  diff->add_option("--budget", s.budget, "reduction budget")->capture_default_str();
  diff->add_option("--exhaustive", s.exhaustive, "use all closed terms up to this size instead");
  diff->add_flag("--check-simulation", s.check_simulation,
                 "also check every machine step against the reduction relation");
  diff->add_option("--mutation", s.mutation, "deliberate machine defect, for harness self-tests")
      ->check(CLI::IsMember({"none", "swap-assoc-l"}))
      ->capture_default_str();
  diff->add_option("--jobs", s.jobs, "worker threads (0: one per core)");
  add_syntax(diff, s);

  auto* bench = app.add_subcommand("bench-lookup", "time locating a binding frame");
  bench->add_option("--depths", s.depths, "bind depths")->delimiter(',')->capture_default_str();
  bench->add_option("--reps", s.reps, "repetitions per depth")->capture_default_str();
  bench->add_flag("--linear-scan", s.linear_scan, "walk a linked chain of frames instead");
  bench->add_option("--format", s.format, "output format (default text)")
      ->check(CLI::IsMember({"text", "json"}));

  auto* gen = app.add_subcommand("gen", "print a generated corpus");
  add_corpus(gen, s);
  add_syntax(gen, s);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInput;
  }

  try {
    if (*eval) return cmd_eval(s);
    if (*trace) return cmd_trace(s);
    if (*diff) return cmd_diff(s);
    if (*bench) return cmd_bench(s);
    if (*gen) return cmd_gen(s);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kFailure;
  }
  return kInput;
}
