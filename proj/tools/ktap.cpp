#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "ktap/scenario.hpp"

namespace {

void usage(std::ostream& os) {
  os << "usage:\n"
        "  ktap run <config-file-or-scenario> [--seed S] [--t-end T] [--dt D] [--out PATH]\n"
        "  ktap validate <config-file-or-scenario>\n"
        "  ktap list [extra-config-dir]\n";
}

struct Overrides {
  bool has_seed = false, has_t_end = false, has_dt = false, has_out = false;
  long seed = 0;
  double t_end = 0.0, dt = 0.0;
  std::string out;
};

double parse_flag_double(const std::string& flag, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ktap::config_error("flag " + flag + ": '" + value + "' is not a number");
  }
}

Overrides parse_overrides(const std::vector<std::string>& args, std::size_t from) {
  Overrides o;
  for (std::size_t i = from; i < args.size(); ++i) {
    const std::string& flag = args[i];
    if (i + 1 >= args.size()) throw ktap::config_error("flag " + flag + " expects a value");
    const std::string& value = args[++i];
    if (flag == "--seed") {
      o.seed = static_cast<long>(parse_flag_double(flag, value));
      o.has_seed = true;
    } else if (flag == "--t-end") {
      o.t_end = parse_flag_double(flag, value);
      if (!(o.t_end > 0.0)) throw ktap::config_error("flag --t-end must be positive");
      o.has_t_end = true;
    } else if (flag == "--dt") {
      o.dt = parse_flag_double(flag, value);
      if (!(o.dt > 0.0)) throw ktap::config_error("flag --dt must be positive");
      o.has_dt = true;
    } else if (flag == "--out") {
      o.out = value;
      o.has_out = true;
    } else {
      throw ktap::config_error("unknown flag '" + flag + "'");
    }
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty()) {
    usage(std::cerr);
    return 1;
  }
  const std::string& cmd = args[0];
  try {
    if (cmd == "list") {
      if (args.size() > 2) {
        usage(std::cerr);
        return 1;
      }
      for (const ktap::ScenarioInfo& info : ktap::list_scenarios(args.size() == 2 ? args[1] : ""))
        std::printf("%-24s %-12s %s\n", info.name.c_str(), info.solver.c_str(),
                    info.description.c_str());
      return 0;
    }
    if (cmd == "run" || cmd == "validate") {
      if (args.size() < 2) {
        usage(std::cerr);
        return 1;
      }
      const Overrides o = parse_overrides(args, 2);
      ktap::ScenarioConfig cfg = ktap::load_scenario(args[1]);
      if (o.has_seed) cfg.seed = o.seed;
      if (o.has_t_end) cfg.t_end = o.t_end;
      if (o.has_dt) cfg.dt = o.dt;
      if (o.has_out) cfg.out = o.out;
      if (cmd == "validate") {
        std::printf("ok: scenario '%s' (%s solver), t_end=%g dt=%g\n", cfg.scenario.c_str(),
                    cfg.solver.c_str(), cfg.t_end, cfg.dt);
        return 0;
      }
      const ktap::RunReport rep = ktap::run(cfg);
      std::printf("scenario   %s\n", rep.scenario.c_str());
      std::printf("steps      %ld\n", rep.steps);
      std::printf("wall       %.3f s\n", rep.wall_seconds);
      std::printf("drift      %.3e\n", rep.drift);
      if (rep.clamp_events > 0)
        std::printf("clamped    %.3e over %ld events\n", rep.clamped_mass, rep.clamp_events);
      for (const std::string& path : rep.outputs) std::printf("wrote      %s\n", path.c_str());
      return 0;
    }
    std::cerr << "unknown command '" << cmd << "'\n";
    usage(std::cerr);
    return 1;
  } catch (const ktap::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ktap::arena_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ktap::model_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}
