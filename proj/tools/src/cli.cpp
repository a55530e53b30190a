#include "fleetsurv/cli.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <iostream>

#include "common.hpp"
#include "fleetsurv/config.hpp"
#include "fleetsurv/errors.hpp"

namespace fleetsurv::cli {

namespace {

std::optional<std::string> find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

// Config entries become leading "--key=value" tokens, so flags given on the
// command line win under the take-last policy.
std::vector<std::string> inject_config(const CLI::App& app, const std::vector<std::string>& args) {
  if (args.empty() || args[0] == "simulate") return args;
  const auto path = find_config(args);
  if (!path) return args;
  const auto* sub = app.get_subcommand_no_throw(args[0]);
  if (sub == nullptr) return args;
  const auto cfg = KeyValueConfig::load(*path);

  std::vector<std::string> injected;
  const auto add = [&](const std::map<std::string, std::string>& entries, bool strict) {
    for (const auto& [key, value] : entries) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (flag == "--config") continue;
      if (sub->get_option_no_throw(flag) == nullptr) {
        if (strict) throw UsageError(fmt::format("{}: [{}] has no option {}", *path, args[0], key));
        continue;
      }
      injected.push_back(flag + "=" + value);
    }
  };
  add(cfg.section(""), false);
  add(cfg.section(args[0]), true);

  std::vector<std::string> out{args[0]};
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Context ctx{out, err};
  CLI::App app{"Survival analysis toolkit for bike-share component maintenance", "fleetsurv"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  add_simulate(app, ctx);
  add_mobility(app, ctx);
  add_build_units(app, ctx);
  add_fit(app, ctx);
  add_tune(app, ctx);
  add_evaluate(app, ctx);
  add_analyze(app, ctx);
  add_explain(app, ctx);

  try {
    auto argv = inject_config(app, args);
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace fleetsurv::cli
