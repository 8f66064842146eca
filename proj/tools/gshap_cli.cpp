// gshap: group Shapley decompositions from the command line.
//
// Exit codes: 0 success, 2 incomplete utility table, 3 infeasible constraints,
// 64 usage or schema error, 70 external value command failed, 1 other errors.

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <sys/wait.h>

#include "gshap/gshap.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitIncomplete = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitUsage = 64;
constexpr int kExitExternal = 70;

class ExternalCommandError : public gshap::Error {
 public:
  ExternalCommandError(const std::string& key, const std::string& why)
      : gshap::Error("value command failed for coalition \"" + key + "\": " + why), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty())
    std::cout << text;
  else
    gshap::io::write_text_file(out_path, text);
}

std::string render(const gshap::ShapleyResult& r, const std::string& format) {
  const auto table = gshap::io::importance_table(r);
  return format == "csv" ? gshap::io::render_csv(table) : gshap::io::render_markdown(table);
}

int report_incomplete(const gshap::UtilityTable& table) {
  std::cerr << "error: the utility table is incomplete; missing coalitions:";
  for (auto m : table.missing()) std::cerr << " {" << gshap::coalition_key(m) << "}";
  std::cerr << "\nuse `gshap bounds` or `gshap smns` with a constraint file to infer Shapley values "
               "from partial information\n";
  return kExitIncomplete;
}

// Runs `cmd` with the coalition key on standard input and parses one number from its output.
double run_value_command(const std::string& cmd, const std::string& key) {
  const std::string line = "printf '%s\\n' '" + key + "' | " + cmd;
  FILE* pipe = ::popen(line.c_str(), "r");
  if (pipe == nullptr) throw ExternalCommandError(key, "could not start process");
  std::string out;
  char buf[256];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) out += buf;
  const int status = ::pclose(pipe);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw ExternalCommandError(key, "process exited with status " + std::to_string(status));
  const auto first = out.find_first_not_of(" \t\r\n");
  const auto last = out.find_last_not_of(" \t\r\n");
  if (first == std::string::npos) throw ExternalCommandError(key, "no output");
  const std::string text = out.substr(first, last - first + 1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
    throw ExternalCommandError(key, "output is not a single finite number: '" + text + "'");
  return v;
}

struct Options {
  std::string utilities, constraints, out, format = "md", method = "cls";
  std::string scenario, emit_utilities, value_cmd;
  std::optional<std::size_t> draws;
  std::optional<std::uint64_t> seed;
  std::size_t groups = 0, q = 0;
  std::uint64_t sample_seed = 0;
  bool exhaustive = false;
  std::optional<double> box_min, box_max;
  std::string box_mode = "difference";
};

int cmd_decompose(const Options& o) {
  const auto table = gshap::io::read_utility_file(o.utilities);
  if (!table.complete()) return report_incomplete(table);
  gshap::ShapleyResult r = o.method == "exact"         ? gshap::exact_shapley_subtractive(table)
                           : o.method == "permutation" ? gshap::permutation_oracle(table)
                           : table.groups() == 1       ? gshap::exact_shapley_subtractive(table)
                                                       : gshap::cls_shapley(table);
  emit(render(r, o.format), o.out);
  return kExitOk;
}

int cmd_bounds(const Options& o) {
  const auto table = gshap::io::read_utility_file(o.utilities);
  const auto constraints = gshap::io::read_constraint_file(o.constraints, table.groups());
  const auto r = gshap::infer_partial(table, constraints);
  emit(gshap::io::render_bounds(table.partition(), r, o.format != "csv"), o.out);
  bool infeasible = r.feasibility == gshap::SolveOutcome::infeasible;
  for (const auto& s : r.lower) infeasible = infeasible || s.status == gshap::SolveOutcome::infeasible;
  for (const auto& s : r.upper) infeasible = infeasible || s.status == gshap::SolveOutcome::infeasible;
  if (infeasible) std::cerr << "constraints are infeasible for the observed utilities\n";
  return infeasible ? kExitInfeasible : kExitOk;
}

int cmd_smns(const Options& o) {
  const auto table = gshap::io::read_utility_file(o.utilities);
  const auto constraints = gshap::io::read_constraint_file(o.constraints, table.groups());
  const auto r = gshap::shapley_minimum_norm(table, constraints);
  if (!r.smns) {
    emit(std::string("SMNS: ") + gshap::to_string(r.feasibility) + "\n", o.out);
    std::cerr << "constraints are infeasible for the observed utilities\n";
    return kExitInfeasible;
  }
  emit(render(*r.smns, o.format), o.out);
  if (!o.emit_utilities.empty()) {
    const auto filled = gshap::UtilityTable::complete(table.partition(), r.completed_utilities, table.grand());
    gshap::io::write_text_file(o.emit_utilities, gshap::io::write_utility_json(filled));
  }
  return kExitOk;
}

int cmd_roy(const Options& o) {
  auto doc = gshap::io::parse_roy_scenario_json(gshap::io::read_text_file(o.scenario));
  if (o.draws) {
    if (*o.draws == 0) throw gshap::io::SchemaError("--draws must be positive");
    doc.config.n_draws = *o.draws;
  }
  if (o.seed) doc.config.seed = *o.seed;
  const auto table = gshap::roy::roy_utility_table(doc.scenario, doc.config);
  if (!o.emit_utilities.empty()) gshap::io::write_text_file(o.emit_utilities, gshap::io::write_utility_json(table));
  emit(render(gshap::cls_shapley(table), o.format), o.out);
  return kExitOk;
}

int cmd_sample(const Options& o) {
  if (o.groups < 2) throw gshap::io::SchemaError("--groups must be at least 2");
  if (o.q < o.groups) throw gshap::io::SchemaError("--q must be at least --groups");
  const auto partition = gshap::GroupPartition::anonymous(o.groups);
  gshap::ValueFunction vf{[cmd = o.value_cmd](gshap::CoalitionMask m) {
                            return m.empty() ? 0.0 : run_value_command(cmd, gshap::coalition_key(m));
                          },
                          false, 1.0};
  gshap::SampledShapleyOptions opts;
  opts.exhaustive = o.exhaustive;
  const auto r = gshap::sampled_shapley(vf, partition, o.q, o.sample_seed, opts);
  emit(render(r.result, o.format) + "distinct coalitions evaluated: " + std::to_string(r.distinct_coalitions) + "\n",
       o.out);
  return kExitOk;
}

int cmd_constraints(const Options& o) {
  const auto table = gshap::io::read_utility_file(o.utilities);
  std::optional<gshap::ValueBox> box;
  if (o.box_min || o.box_max) box = gshap::ValueBox{o.box_min, o.box_max};
  const auto mode = o.box_mode == "level" ? gshap::BoxMode::level : gshap::BoxMode::difference;
  emit(gshap::io::write_constraint_json(gshap::build_globalization_constraints(table, box, mode)), o.out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group Shapley value decompositions of model counterfactuals"};
  app.require_subcommand(1);
  Options o;
  int (*action)(const Options&) = nullptr;

  auto add_output = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Write the table to FILE instead of standard output");
    sub->add_option("--format", o.format, "Table format")->check(CLI::IsMember({"csv", "md"}));
  };

  auto* decompose = app.add_subcommand("decompose", "Shapley values of a complete utility table");
  decompose->add_option("--utilities", o.utilities, "Utility file (JSON)")->required();
  decompose->add_option("--method", o.method, "Computation route")
      ->check(CLI::IsMember({"cls", "exact", "permutation"}));
  add_output(decompose);
  decompose->callback([&] { action = cmd_decompose; });

  auto* bounds = app.add_subcommand("bounds", "Shapley lower/upper bounds and minimum norm solution");
  bounds->add_option("--utilities", o.utilities, "Utility file with missing coalitions")->required();
  bounds->add_option("--constraints", o.constraints, "Constraint file (JSON)")->required();
  add_output(bounds);
  bounds->callback([&] { action = cmd_bounds; });

  auto* smns = app.add_subcommand("smns", "Shapley minimum norm solution");
  smns->add_option("--utilities", o.utilities, "Utility file with missing coalitions")->required();
  smns->add_option("--constraints", o.constraints, "Constraint file (JSON)")->required();
  smns->add_option("--emit-utilities", o.emit_utilities, "Write the completed utility table");
  add_output(smns);
  smns->callback([&] { action = cmd_smns; });

  auto* roy = app.add_subcommand("roy", "Decompose a Roy model counterfactual by simulation");
  roy->add_option("--scenario", o.scenario, "Scenario file (JSON)")->required();
  roy->add_option("--draws", o.draws, "Monte Carlo draws (overrides the scenario)");
  roy->add_option("--seed", o.seed, "Random seed (overrides the scenario)");
  roy->add_option("--emit-utilities", o.emit_utilities, "Write the evaluated utility table");
  add_output(roy);
  roy->callback([&] { action = cmd_roy; });

  auto* sample = app.add_subcommand("sample", "Kernel-sampled Shapley values from an external value command");
  sample->add_option("--groups", o.groups, "Number of groups")->required();
  sample->add_option("--q", o.q, "Number of sampled coalitions")->required();
  sample->add_option("--seed", o.sample_seed, "Random seed");
  sample->add_option("--value-cmd", o.value_cmd, "Shell command: coalition key on stdin, one number on stdout")
      ->required();
  sample->add_flag("--exhaustive", o.exhaustive, "Enumerate all coalitions when q >= 2^groups - 2");
  add_output(sample);
  sample->callback([&] { action = cmd_sample; });

  auto* constraints = app.add_subcommand("constraints", "Sign (and box) restrictions for two missing pair coalitions");
  constraints->add_option("--utilities", o.utilities, "Three-group utility file")->required();
  constraints->add_option("--box-min", o.box_min, "Lower box bound (omit for none)");
  constraints->add_option("--box-max", o.box_max, "Upper box bound (omit for none)");
  constraints->add_option("--box-mode", o.box_mode, "How box bounds are read")
      ->check(CLI::IsMember({"difference", "level"}));
  constraints->add_option("--out", o.out, "Write the constraint file to FILE");
  constraints->callback([&] { action = cmd_constraints; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    return action(o);
  } catch (const gshap::io::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const gshap::IncompleteTableError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIncomplete;
  } catch (const ExternalCommandError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitExternal;
  } catch (const gshap::UnsupportedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const gshap::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const gshap::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
