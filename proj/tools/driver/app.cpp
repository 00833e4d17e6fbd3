#include <exception>
#include <ostream>

#include <CLI11.hpp>

#include "driver.hpp"
#include "lrcv/error.hpp"

namespace lrcv::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multilevel Monte Carlo with low-rank control variates"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;
  std::uint64_t seed = 0;
  std::string out_dir;
  unsigned threads = 1;
  std::string method;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "JSON run configuration")->required();
    sub->add_option("--seed", seed, "Override master_seed");
    sub->add_option("--out-dir", out_dir, "Override output_dir");
    sub->add_option("--threads", threads, "Override threads (0 = all cores)");
  };
  CLI::App* pilot = app.add_subcommand("pilot", "Pilot run: statistics, bases and plans");
  CLI::App* estimate = app.add_subcommand("estimate", "Main runs from cached pilot artifacts");
  CLI::App* compare = app.add_subcommand("compare", "Plan-based cost table for every epsilon");
  for (CLI::App* sub : {pilot, estimate, compare}) add_common(sub);
  estimate->add_option("--method", method, "mc, mlmc or mlcv (default: configured methods)")
      ->check(CLI::IsMember({"mc", "mlmc", "mlcv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    RunConfig cfg = load_config(config_path);
    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed")) overrides.seed = seed;
    if (sub->count("--out-dir")) overrides.out_dir = out_dir;
    if (sub->count("--threads")) overrides.threads = threads;
    apply_overrides(cfg, overrides);

    if (sub == pilot) {
      cmd_pilot(cfg, out);
    } else if (sub == estimate) {
      std::optional<mlmc::Method> m;
      if (!method.empty()) m = mlmc::parse_method(method);
      cmd_estimate(cfg, m, out);
    } else {
      cmd_compare(cfg, out);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace lrcv::cli
