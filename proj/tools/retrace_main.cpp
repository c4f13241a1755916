#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "retrace/dump.hpp"
#include "retrace/harness.hpp"
#include "retrace/source_text.hpp"

namespace {

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in.is_open()) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<retrace::TraceSet> load_trace_set(const std::string& path) {
  auto text = read_file(path);
  if (!text) {
    std::cerr << "error: cannot open " << path << "\n";
    return std::nullopt;
  }
  auto parsed = retrace::parse_trace_set(*text);
  if (!parsed) {
    std::cerr << path << ": parse error: " << parsed.error().message() << "\n";
    return std::nullopt;
  }
  return std::move(parsed).value();
}

int cmd_check(const std::string& path) {
  auto set = load_trace_set(path);
  if (!set) return 1;
  if (auto wf = retrace::check_well_formed(*set); !wf) {
    std::cerr << wf.error().message() << "\n";
    return 1;
  }
  std::cout << "ok\n";
  return 0;
}

int cmd_build(const std::string& path, const std::string& out_dir, int dump_level) {
  auto set = load_trace_set(path);
  if (!set) return 1;
  auto pipeline = retrace::build_pipeline(*set);
  if (!pipeline) {
    std::cerr << pipeline.error().message() << "\n";
    return 1;
  }
  if (dump_level != 0)
    std::cout << retrace::format_level_dump(*set, pipeline.value(), dump_level);
  if (!out_dir.empty()) {
    auto bt = retrace::back_translate(*set);
    if (!bt) {
      std::cerr << bt.error().message() << "\n";
      return 1;
    }
    std::filesystem::create_directories(out_dir);
    const bool main_in_context = set->is_context(set->main);
    const std::string main_line =
        "main " + set->names[set->main.value] + ".internal\n";
    // name oracle covering every compartment any fragment may call into
    retrace::SourceProgram namer;
    namer.compartments = bt.value().context.compartments;
    if (!bt.value().programs.empty())
      for (const auto& [c, comp] : bt.value().programs.front().compartments)
        namer.compartments.emplace(c, comp);
    {
      std::ofstream out(std::filesystem::path(out_dir) / "context.src");
      out << retrace::pretty_compartments(bt.value().context.compartments, namer);
      if (main_in_context) out << main_line;
    }
    for (std::size_t i = 0; i < bt.value().programs.size(); ++i) {
      std::ofstream out(std::filesystem::path(out_dir) /
                        ("program_" + std::to_string(i) + ".src"));
      out << retrace::pretty_compartments(bt.value().programs[i].compartments, namer);
      if (!main_in_context) out << main_line;
    }
  }
  return 0;
}

int cmd_run(const std::string& path, std::uint64_t bound) {
  auto text = read_file(path);
  if (!text) {
    std::cerr << "error: cannot open " << path << "\n";
    return 1;
  }
  auto parsed = retrace::parse_source_program(*text);
  if (!parsed) {
    std::cerr << path << ": parse error: " << parsed.error().message() << "\n";
    return 1;
  }
  const retrace::RunResult r = retrace::run_source(parsed.value(), bound);
  for (const retrace::Event& e : r.emitted)
    std::cout << retrace::format_event(parsed.value(), e) << "\n";
  switch (r.outcome) {
    case retrace::Outcome::Halted: return 0;
    case retrace::Outcome::Stuck:
      std::cerr << "outcome: stuck\n";
      return 1;
    case retrace::Outcome::BoundExceeded:
      std::cerr << "outcome: step bound exceeded\n";
      return 1;
  }
  return 1;
}

int cmd_verify(const std::string& path, bool levels, bool end_to_end) {
  auto set = load_trace_set(path);
  if (!set) return 1;
  if (!levels && !end_to_end) levels = end_to_end = true;
  bool ok = true;
  if (levels) {
    const retrace::LevelsReport report = retrace::verify_all_levels(*set);
    std::cout << report.format();
    ok = ok && report.all_ok();
  }
  if (end_to_end) {
    const retrace::EndToEndReport report = retrace::verify_end_to_end(*set);
    std::cout << report.format();
    ok = ok && report.all_ok();
  }
  return ok ? 0 : 1;
}

int cmd_fuzz(std::uint64_t seeds, std::uint32_t max_traces, std::uint32_t max_len,
             std::uint32_t max_comps, std::uint32_t max_procs, const std::string& json_path) {
  std::uint64_t failures = 0;
  nlohmann::json records = nlohmann::json::array();
  const auto record = [&](std::uint64_t seed, const char* check, bool ok,
                          const std::string& detail) {
    records.push_back({{"seed", seed}, {"check", check}, {"ok", ok}, {"detail", detail}});
    if (!ok) ++failures;
  };
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    std::mt19937_64 prng(seed ^ 0xC0FFEE123456789Aull);
    retrace::GenParams params;
    params.trace_count = static_cast<std::uint32_t>(prng() % (max_traces + 1));
    params.max_len = 1 + static_cast<std::uint32_t>(prng() % std::max(1u, max_len));
    params.compartments = 1 + static_cast<std::uint32_t>(prng() % std::max(1u, max_comps));
    params.procs = 1 + static_cast<std::uint32_t>(prng() % std::max(1u, max_procs));
    const retrace::TraceSet set = retrace::generate_trace_set(seed, params);

    auto wf = retrace::check_well_formed(set);
    record(seed, "well_formed", wf.has_value(), wf ? "" : wf.error().message());
    const retrace::LevelsReport lv = retrace::verify_all_levels(set);
    record(seed, "levels", lv.all_ok(), lv.all_ok() ? "" : lv.format());
    const retrace::EndToEndReport e2e = retrace::verify_end_to_end(set);
    record(seed, "end_to_end", e2e.all_ok(), e2e.all_ok() ? "" : e2e.format());

    std::cout << "seed " << seed << ": well-formed=" << (wf ? "ok" : "FAIL")
              << " levels=" << (lv.all_ok() ? "ok" : "FAIL")
              << " end-to-end=" << (e2e.all_ok() ? "ok" : "FAIL") << "\n";
  }
  std::cout << "fuzz: " << seeds << " seeds, " << failures << " failing checks\n";
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    out << records.dump(2) << "\n";
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trace-set back-translation pipeline"};
  app.require_subcommand(1);

  std::string traceset_path;
  std::string out_dir;
  int dump_level = 0;
  std::string program_path;
  std::uint64_t bound = 1u << 20;
  bool levels = false, end_to_end = false;
  std::uint64_t seeds = 100;
  std::uint32_t fz_traces = 4, fz_len = 16, fz_comps = 4, fz_procs = 2;
  std::string json_path;

  CLI::App* check = app.add_subcommand("check", "validate a trace-set file");
  check->add_option("traceset", traceset_path, "trace-set file")->required();

  CLI::App* build = app.add_subcommand("build", "run the pipeline; write code or IR dumps");
  build->add_option("traceset", traceset_path, "trace-set file")->required();
  build->add_option("-o,--output", out_dir, "directory for context.src and program_<i>.src");
  build->add_option("--dump-level", dump_level, "print the IR of one level (1-4)")
      ->check(CLI::Range(1, 4));

  CLI::App* run = app.add_subcommand("run", "execute a source program, print its trace");
  run->add_option("program", program_path, "source program file")->required();
  run->add_option("--bound", bound, "step bound");

  CLI::App* verify = app.add_subcommand("verify", "replay all levels and/or end-to-end");
  verify->add_option("traceset", traceset_path, "trace-set file")->required();
  verify->add_flag("--levels", levels, "replay levels 1-4 per trace");
  verify->add_flag("--end-to-end", end_to_end, "back-translate, link, run, compare");

  CLI::App* fuzz = app.add_subcommand("fuzz", "verify generated well-formed trace sets");
  fuzz->add_option("--seeds", seeds, "number of seeds");
  fuzz->add_option("--K", fz_traces, "max traces per set");
  fuzz->add_option("--len", fz_len, "max events per trace");
  fuzz->add_option("--comps", fz_comps, "max compartments");
  fuzz->add_option("--procs", fz_procs, "max procedures per compartment");
  fuzz->add_option("--json", json_path, "write a machine-readable summary");

  CLI11_PARSE(app, argc, argv);

  if (check->parsed()) return cmd_check(traceset_path);
  if (build->parsed()) return cmd_build(traceset_path, out_dir, dump_level);
  if (run->parsed()) return cmd_run(program_path, bound);
  if (verify->parsed()) return cmd_verify(traceset_path, levels, end_to_end);
  if (fuzz->parsed()) return cmd_fuzz(seeds, fz_traces, fz_len, fz_comps, fz_procs, json_path);
  return 1;
}
