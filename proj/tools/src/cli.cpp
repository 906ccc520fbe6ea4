#include "cli.hpp"

#include <algorithm>
#include <array>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "kbound/errors.hpp"
#include "kbound/evaluation/reports.hpp"
#include "kbound/pipeline/config.hpp"
#include "kbound/pipeline/manifest.hpp"
#include "kbound/pipeline/stages.hpp"
#include "kbound/uncertainty/uncertainty.hpp"
#include "kbound/util/jsonl.hpp"

namespace kbound::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 8> kCommands = {"curate",   "probe",    "pairgen",     "losses-check",
                                                       "toy-train", "evaluate", "uncertainty", "report"};

std::string usage() {
  std::string u = "usage: kbound <command> --config <file> [options]\n\ncommands:\n";
  for (auto c : kCommands) u += "  " + std::string(c) + "\n";
  u += "\nrun `kbound <command> --help` for command options\n";
  return u;
}

struct CommonOptions {
  std::string config;
  std::vector<std::string> sets;
  std::string input;
  std::string probe;
  std::string tag;
};

void add_common(CLI::App& cmd, CommonOptions& o, bool with_inputs) {
  cmd.add_option("-c,--config", o.config, "Pipeline config file")->required();
  cmd.add_option("--set", o.sets, "Override a config value: dotted.key=value");
  if (with_inputs) {
    cmd.add_option("--input", o.input, "Input corpus instead of the stage default");
    cmd.add_option("--probe", o.probe, "Probe records instead of <out_dir>/probe.jsonl");
    cmd.add_option("--tag", o.tag, "Artifact tag for evaluate/uncertainty outputs");
  }
}

std::vector<std::pair<std::string, std::string>> parse_sets(const std::vector<std::string>& sets) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigurationError("--set expects key=value, got: " + s);
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return out;
}

pipeline::StageInputs stage_inputs(const CommonOptions& o) {
  pipeline::StageInputs in;
  if (!o.input.empty()) in.corpus = o.input;
  if (!o.probe.empty()) in.probe = o.probe;
  if (!o.tag.empty()) in.tag = o.tag;
  return in;
}

void print_result(std::ostream& out, const std::string& command, const pipeline::StageResult& r) {
  out << command << ": " << r.summary.dump() << "\n";
  for (const auto& p : r.outputs) out << "  wrote " << p.string() << "\n";
}

void print_losses_check(std::ostream& out, const pipeline::StageResult& r) {
  out << "max relative gradient error (tolerance " << r.summary.at("tolerance").get<double>() << ")\n";
  for (const auto& [name, row] : r.summary.at("objectives").items()) {
    char line[160];
    std::snprintf(line, sizeof(line), "  %-5s %.3e  %s", name.c_str(), row.at("max_relative_error").get<double>(),
                  row.at("pass").get<bool>() ? "ok" : "FAIL");
    out << line;
    if (const auto skipped = row.at("skipped_policies").get<std::size_t>(); skipped > 0) {
      out << "  (" << skipped << " policies skipped near p=1)";
    }
    out << "\n";
  }
}

struct ReportOptions {
  std::vector<std::string> compare;
  std::vector<std::string> chart;
  std::vector<std::string> uncertainty_compare;
  std::string show;
  std::string output;
  std::string grouping = "method";
  bool fold = false;
};

void write_report_manifest(const fs::path& output, const std::vector<std::string>& inputs, const std::string& started) {
  pipeline::RunManifest m;
  m.command = "report";
  for (const auto& p : inputs) m.inputs.push_back(pipeline::describe_artifact(p));
  m.outputs.push_back(pipeline::describe_artifact(output));
  m.started_at = started;
  m.finished_at = pipeline::utc_now();
  m.tool_version = pipeline::tool_version();
  pipeline::write_manifest(output, m);
}

int run_report(const ReportOptions& o, std::ostream& out) {
  const auto started = pipeline::utc_now();
  const int modes = !o.compare.empty() + !o.chart.empty() + !o.uncertainty_compare.empty() + !o.show.empty();
  if (modes != 1) throw InvalidArgument("report: give exactly one of --compare, --chart, --uncertainty, --show");

  std::string text;
  std::vector<std::string> inputs;
  if (!o.compare.empty()) {
    if (o.compare.size() != 2) throw InvalidArgument("report --compare expects BASE ALIGNED");
    const auto base = evaluation::eval_report_from_json(util::read_json(o.compare[0]));
    const auto aligned = evaluation::eval_report_from_json(util::read_json(o.compare[1]));
    text = evaluation::compare_reports(base, aligned).markdown();
    inputs = o.compare;
  } else if (!o.chart.empty()) {
    std::vector<evaluation::EvalReport> reports;
    for (const auto& p : o.chart) reports.push_back(evaluation::eval_report_from_json(util::read_json(p)));
    const auto grouping =
        o.grouping == "dataset" ? evaluation::ChartGrouping::kByDataset : evaluation::ChartGrouping::kByMethod;
    text = evaluation::render_chart_data(reports, grouping);
    inputs = o.chart;
  } else if (!o.uncertainty_compare.empty()) {
    if (o.uncertainty_compare.size() != 2) throw InvalidArgument("report --uncertainty expects PRE POST");
    const auto pre = uncertainty::UncertaintySummary::from_json(util::read_json(o.uncertainty_compare[0]));
    const auto post = uncertainty::UncertaintySummary::from_json(util::read_json(o.uncertainty_compare[1]));
    text = uncertainty::compare(pre, post).markdown();
    inputs = o.uncertainty_compare;
  } else {
    text = evaluation::report_markdown(evaluation::eval_report_from_json(util::read_json(o.show)), o.fold);
    inputs = {o.show};
  }
  out << text;
  if (!o.output.empty()) {
    util::write_text(o.output, text);
    write_report_manifest(o.output, inputs, started);
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (args.empty()) {
    err << usage();
    return kExitUsage;
  }
  const std::string& first = args.front();
  const bool help = first == "-h" || first == "--help";
  if (help) {
    out << usage();
    return kExitOk;
  }
  if (std::find(kCommands.begin(), kCommands.end(), first) == kCommands.end()) {
    err << "unknown command: " << first << "\n" << usage();
    return kExitUsage;
  }

  CLI::App app{"Knowledge-boundary dataset and evaluation toolkit", "kbound"};
  app.require_subcommand(1);

  CommonOptions common;
  auto* curate = app.add_subcommand("curate", "Filter a corpus with the judge rubric");
  add_common(*curate, common, true);
  bool no_judge = false;
  curate->add_flag("--no-judge", no_judge, "Accept the corpus as already curated");

  std::optional<double> tau;
  std::optional<int> n;
  std::optional<double> temperature;
  auto* probe = app.add_subcommand("probe", "Label samples Known/Unknown by consistency probing");
  add_common(*probe, common, true);
  probe->add_option("--tau", tau, "Known threshold");
  probe->add_option("--n", n, "Samples per question");
  probe->add_option("--temperature", temperature, "Sampling temperature");

  auto* pairgen = app.add_subcommand("pairgen", "Build preference pairs and train/test splits");
  add_common(*pairgen, common, true);

  std::size_t policies = 20;
  auto* losses_check = app.add_subcommand("losses-check", "Finite-difference check of every objective's gradient");
  add_common(*losses_check, common, false);
  losses_check->add_option("--policies", policies, "Random toy policies to check")->check(CLI::PositiveNumber);

  std::string objective;
  std::optional<int> steps;
  std::optional<double> lr;
  auto* toy_train = app.add_subcommand("toy-train", "Train the toy policy on the train split");
  add_common(*toy_train, common, true);
  toy_train->add_option("--objective", objective, "sft, dpo, cpo or orpo");
  toy_train->add_option("--steps", steps, "Gradient steps");
  toy_train->add_option("--lr", lr, "Learning rate");

  std::string mode;
  auto* evaluate = app.add_subcommand("evaluate", "Quadrant evaluation of greedy answers");
  add_common(*evaluate, common, true);
  evaluate->add_option("--mode", mode, "zero-shot, few-shot, idk-prompting or refusal-only-ood");

  auto* uncertainty = app.add_subcommand("uncertainty", "Forced-scoring logprob and PPL by mastery");
  add_common(*uncertainty, common, true);

  ReportOptions report;
  auto* report_cmd = app.add_subcommand("report", "Render comparison tables and chart data");
  report_cmd->add_option("--compare", report.compare, "BASE.json ALIGNED.json")->expected(2);
  report_cmd->add_option("--chart", report.chart, "Evaluation reports for chart data")->expected(1, -1);
  report_cmd->add_option("--uncertainty", report.uncertainty_compare, "PRE.summary.json POST.summary.json")
      ->expected(2);
  report_cmd->add_option("--show", report.show, "Render one evaluation report");
  report_cmd->add_option("--output", report.output, "Write the rendered report here");
  report_cmd->add_option("--grouping", report.grouping, "Chart grouping: method or dataset")
      ->check(CLI::IsMember({"method", "dataset"}));
  report_cmd->add_flag("--fold", report.fold, "Merge WRONG-ON-KNOWN into IDK-IDK");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (report_cmd->parsed()) return run_report(report, out);

    auto overrides = parse_sets(common.sets);
    if (no_judge) overrides.emplace_back("curation.passthrough", "true");
    if (tau) overrides.emplace_back("probing.tau", std::to_string(*tau));
    if (n) overrides.emplace_back("probing.n", std::to_string(*n));
    if (temperature) overrides.emplace_back("probing.temperature", std::to_string(*temperature));
    if (!objective.empty()) overrides.emplace_back("training.objective", json(objective).dump());
    if (steps) overrides.emplace_back("training.steps", std::to_string(*steps));
    if (lr) overrides.emplace_back("training.lr", std::to_string(*lr));
    if (!mode.empty()) {
      overrides.emplace_back("evaluation", json{{"mode", mode}}.dump());
    }

    pipeline::Pipeline p(pipeline::load_config(common.config, overrides));
    const auto in = stage_inputs(common);
    if (curate->parsed()) {
      print_result(out, "curate", p.curate(in));
    } else if (probe->parsed()) {
      print_result(out, "probe", p.probe(in));
    } else if (pairgen->parsed()) {
      print_result(out, "pairgen", p.pairgen(in));
    } else if (losses_check->parsed()) {
      const auto r = p.losses_check(policies);
      print_losses_check(out, r);
      return r.passed ? kExitOk : kExitValidation;
    } else if (toy_train->parsed()) {
      print_result(out, "toy-train", p.toy_train(in));
    } else if (evaluate->parsed()) {
      const auto r = p.evaluate(in);
      out << util::read_text(r.outputs.at(2));
      for (const auto& path : r.outputs) out << "  wrote " << path.string() << "\n";
    } else if (uncertainty->parsed()) {
      const auto r = p.uncertainty(in);
      out << util::read_text(r.outputs.at(2));
      for (const auto& path : r.outputs) out << "  wrote " << path.string() << "\n";
    }
    return kExitOk;
  } catch (const RemoteUnavailable& e) {
    err << "remote failure: " << e.what() << "\n";
    if (!e.completed_ids().empty()) {
      err << e.completed_ids().size() << " items completed before the failure; rerun to resume\n";
    }
    return kExitRemote;
  } catch (const Error& e) {
    err << to_string(e.kind()) << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "invalid JSON: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "io: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace kbound::cli
