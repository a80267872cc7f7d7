// Command line front end: simulation batches, the workshop HTTP service,
// appraisal import, log replay and report aggregation.

#include <voa/simulation_lab.hpp>
#include <voa/workshop_http.hpp>
#include <voa/workshop_service.hpp>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

class cli_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

auto read_file(fs::path const& path) -> std::string {
  auto in = std::ifstream(path, std::ios::binary);
  if (!in) {
    throw cli_error("cannot read '" + path.string() + "'");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Relative output paths land in $VOA_OUTPUT_DIR when it is set.
auto resolve_output(std::string const& path) -> fs::path {
  auto p = fs::path(path);
  if (p.is_relative()) {
    if (auto const* dir = std::getenv("VOA_OUTPUT_DIR"); dir != nullptr && *dir != '\0') {
      return fs::path(dir) / p;
    }
  }
  return p;
}

void write_output(std::string const& path, std::string const& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  auto p = resolve_output(path);
  if (p.has_parent_path()) {
    fs::create_directories(p.parent_path());
  }
  auto out = std::ofstream(p, std::ios::binary);
  if (!out || !(out << text)) {
    throw cli_error("cannot write '" + p.string() + "'");
  }
}

auto split_list(std::string const& text) -> std::vector<std::string> {
  auto out = std::vector<std::string>{};
  auto item = std::string{};
  auto in = std::istringstream{text};
  while (std::getline(in, item, ',')) {
    if (!item.empty()) {
      out.push_back(item);
    }
  }
  return out;
}

struct SimulateArgs {
  std::vector<std::string> settings{"V1-W0-A1"};
  std::size_t options = 25;
  std::size_t runs = 20;
  std::string policies = "voa,maxrange,random";
  std::uint64_t seed = 1;
  long time_budget_ms = voa::kDefaultTimeBudget.count();
  std::string out = "-";
  std::string records;
  std::size_t jobs = 1;
  std::string std_mode = "literal";
  std::string predictor = "median";
  std::string dominance = "prose";
  std::string tie_break = "range-width";
};

auto run_simulate(SimulateArgs const& a) -> int {
  auto policies = std::vector<voa::Policy>{};
  for (auto const& p : split_list(a.policies)) {
    policies.push_back(voa::parse_policy(p));
  }
  if (policies.empty()) {
    throw cli_error("no policies given");
  }
  auto sim = voa::SimOptions{};
  sim.pda.time_budget = std::chrono::milliseconds{a.time_budget_ms};
  sim.predictor = voa::parse_predictor(a.predictor);
  sim.rule = a.dominance == "printed" ? voa::DominanceRule::printed : voa::DominanceRule::prose;
  sim.recommend.weight_tie_break =
      a.tie_break == "max-excess" ? voa::WeightTieBreak::max_excess : voa::WeightTieBreak::range_width;

  // every setting is validated before the first batch starts
  auto configs = std::vector<voa::InstanceConfig>{};
  for (auto const& name : a.settings) {
    auto base = voa::InstanceConfig{};
    base.n_options = a.options;
    base.seed = a.seed;
    base.std_mode = a.std_mode == "width" ? voa::StdMode::width : voa::StdMode::literal;
    configs.push_back(voa::parse_setting(name, base));
  }
  auto records = std::vector<voa::RunRecord>{};
  for (auto const& base : configs) {
    auto batch = voa::BatchConfig{base, a.runs, policies, sim, a.jobs};
    auto part = voa::run_batch(batch);
    records.insert(records.end(), part.begin(), part.end());
  }
  write_output(a.out, voa::to_csv(voa::report(records)));
  if (!a.records.empty()) {
    write_output(a.records, voa::records_to_csv(records));
  }
  return 0;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
};

auto run_serve(ServeArgs const& a) -> int {
  auto registry = voa::SessionRegistry{};
  auto server = httplib::Server{};
  voa::register_routes(server, registry);
  std::cerr << "listening on " << a.host << ':' << a.port << '\n';
  if (!server.listen(a.host, a.port)) {
    throw cli_error("cannot listen on " + a.host + ':' + std::to_string(a.port));
  }
  return 0;
}

struct ImportArgs {
  std::string problem;
  std::string csv;
  std::string predictor = "median";
  std::string id = "imported";
  std::string out = "-";
};

auto run_import(ImportArgs const& a) -> int {
  auto problem = voa::problem_from_json(nlohmann::json::parse(read_file(a.problem)));
  auto session = voa::WorkshopSession(a.id, problem, voa::parse_predictor(a.predictor));
  for (auto const& sub : voa::parse_appraisal_csv(read_file(a.csv), problem)) {
    session.submit_appraisals(sub);
  }
  write_output(a.out, session.to_ndjson());
  return 0;
}

struct ReplayArgs {
  std::string log;
  std::string out = "-";
};

auto run_replay(ReplayArgs const& a) -> int {
  auto result = voa::replay_log(read_file(a.log));
  if (result.truncated_line) {
    std::cerr << "warning: ignored truncated final line " << *result.truncated_line << '\n';
  }
  auto& s = result.session;
  auto const& problem = s.problem();
  auto options = nlohmann::json::array();
  for (std::size_t i = 0; i < problem.n_options(); ++i) {
    auto r = s.state().option_range(i);
    options.push_back({{"option", problem.options[i].id},
                       {"status", voa::to_string(s.state().status(i))},
                       {"range", {r.lo, r.hi}}});
  }
  auto const& rec = s.recommendation();
  auto dump = nlohmann::json{{"session", s.id()},
                             {"events", result.events},
                             {"snapshots_checked", result.snapshots_checked},
                             {"reinitializations", s.reinit_count()},
                             {"resolved", voa::resolved(s.state())},
                             {"options", options},
                             {"recommendation", rec ? s.recommendation_json(*rec, true) : nlohmann::json(nullptr)},
                             {"state_hash", s.state_hash_hex()}};
  write_output(a.out, dump.dump(2) + '\n');
  return 0;
}

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out = "-";
  std::string sign_test;
};

auto run_report(ReportArgs const& a) -> int {
  auto records = std::vector<voa::RunRecord>{};
  for (auto const& path : a.inputs) {
    auto part = voa::records_from_csv(read_file(path));
    records.insert(records.end(), part.begin(), part.end());
  }
  write_output(a.out, voa::to_csv(voa::report(records)));
  if (!a.sign_test.empty()) {
    auto pair = split_list(a.sign_test);
    if (pair.size() != 2) {
      throw cli_error("--sign-test expects two policies, e.g. voa,maxrange");
    }
    auto const pa = voa::parse_policy(pair[0]);
    auto const pb = voa::parse_policy(pair[1]);
    using Key = std::tuple<std::string, std::size_t, voa::AgreementModel, std::uint64_t, std::size_t>;
    auto counts = std::map<Key, std::pair<std::optional<double>, std::optional<double>>>{};
    for (auto const& r : records) {
      auto& slot = counts[{r.setting, r.n_options, r.agreement, r.seed_base, r.instance}];
      if (r.policy == pa) {
        slot.first = static_cast<double>(r.result.agreements);
      } else if (r.policy == pb) {
        slot.second = static_cast<double>(r.result.agreements);
      }
    }
    auto xs = std::vector<double>{};
    auto ys = std::vector<double>{};
    for (auto const& [key, v] : counts) {
      if (v.first && v.second) {
        xs.push_back(*v.first);
        ys.push_back(*v.second);
      }
    }
    auto t = voa::sign_test_less(xs, ys);
    std::cerr << "sign test " << pair[0] << " < " << pair[1] << ": below=" << t.below << " above=" << t.above
              << " ties=" << t.ties << " p=" << t.p_value << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  auto app = CLI::App{"Value-of-agreement workshop engine"};
  app.require_subcommand(1);

  auto sim = SimulateArgs{};
  auto* simulate = app.add_subcommand("simulate", "run seeded simulation batches and print the mean-agreement report");
  simulate->add_option("--setting", sim.settings, "setting names such as V1-W0-A1 or V0-W1-C1-A2")
      ->delimiter(',')
      ->capture_default_str();
  simulate->add_option("--options", sim.options, "options per instance")->check(CLI::Range(2, 128))->capture_default_str();
  simulate->add_option("--runs", sim.runs, "instances per setting")->capture_default_str();
  simulate->add_option("--policies", sim.policies, "comma list of voa, maxrange, random, lowerbound")
      ->capture_default_str();
  simulate->add_option("--seed", sim.seed, "base seed; the only source of randomness")->capture_default_str();
  simulate->add_option("--time-budget-ms", sim.time_budget_ms, "portfolio screening budget per call, 0 = none")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  simulate->add_option("--out", sim.out, "report CSV path, '-' for stdout")->capture_default_str();
  simulate->add_option("--records", sim.records, "optional per-run CSV path");
  simulate->add_option("--jobs", sim.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--std-mode", sim.std_mode, "spread of simulated appraisals")
      ->check(CLI::IsMember({"literal", "width"}))
      ->capture_default_str();
  simulate->add_option("--predictor", sim.predictor, "agreement predictor")
      ->check(CLI::IsMember({"median", "sjs", "mean", "geomean"}))
      ->capture_default_str();
  simulate->add_option("--dominance", sim.dominance, "strict dominance rule")
      ->check(CLI::IsMember({"prose", "printed"}))
      ->capture_default_str();
  simulate->add_option("--weight-tie-break", sim.tie_break, "ordering of criteria with equal g_A")
      ->check(CLI::IsMember({"range-width", "max-excess"}))
      ->capture_default_str();

  auto srv = ServeArgs{};
  auto* serve = app.add_subcommand("serve", "run the workshop HTTP service");
  serve->add_option("--host", srv.host)->capture_default_str();
  serve->add_option("--port", srv.port)->check(CLI::Range(1, 65535))->capture_default_str();

  auto imp = ImportArgs{};
  auto* import = app.add_subcommand("import", "build a session from a problem file and an appraisal CSV");
  import->add_option("--problem", imp.problem, "problem JSON")->required()->check(CLI::ExistingFile);
  import->add_option("--csv", imp.csv, "rows participant,option,criterion,value")
      ->required()
      ->check(CLI::ExistingFile);
  import->add_option("--predictor", imp.predictor)
      ->check(CLI::IsMember({"median", "sjs", "mean", "geomean", "proposed"}))
      ->capture_default_str();
  import->add_option("--id", imp.id, "session id")->capture_default_str();
  import->add_option("--out", imp.out, "session log (NDJSON), '-' for stdout")->capture_default_str();

  auto rep = ReplayArgs{};
  auto* replay = app.add_subcommand("replay", "replay a session log and dump the final classification");
  replay->add_option("log", rep.log, "session log (NDJSON)")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", rep.out)->capture_default_str();

  auto rpt = ReportArgs{};
  auto* report = app.add_subcommand("report", "aggregate per-run CSV files into the report table");
  report->add_option("inputs", rpt.inputs, "per-run CSV files written by simulate --records")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--out", rpt.out)->capture_default_str();
  report->add_option("--sign-test", rpt.sign_test, "paired one-tailed sign test 'a,b' of a < b");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      return run_simulate(sim);
    }
    if (*serve) {
      return run_serve(srv);
    }
    if (*import) {
      return run_import(imp);
    }
    if (*replay) {
      return run_replay(rep);
    }
    if (*report) {
      return run_report(rpt);
    }
  } catch (std::exception const& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
