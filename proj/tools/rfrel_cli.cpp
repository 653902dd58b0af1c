// Command-line driver: simulate, images, matrix, report, validate.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "rfrel/pipeline.hpp"

namespace {

struct Overrides {
  std::string spec_path;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> plugin;
};

rfrel::RunSpec resolve_spec(const Overrides& o) {
  rfrel::RunSpec spec = o.spec_path.empty() ? rfrel::RunSpec{} : rfrel::load_run_spec(o.spec_path);
  if (o.output_dir) spec.output_dir = std::filesystem::absolute(*o.output_dir);
  if (o.seed) spec.seed = *o.seed;
  if (o.workers) spec.workers = *o.workers;
  if (o.plugin) {
    spec.discriminator.kind = rfrel::DiscriminatorConfig::Kind::plugin;
    spec.discriminator.plugin_command = *o.plugin;
  }
  return spec;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-s,--spec", o.spec_path, "Run-spec JSON file (defaults apply when omitted)");
  cmd->add_option("-o,--output-dir", o.output_dir, "Override output_dir");
  cmd->add_option("--seed", o.seed, "Override the master seed");
  cmd->add_option("-j,--workers", o.workers, "Override the worker count (0 = all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rfrel: RF fingerprint reliability toolkit"};
  app.set_version_flag("--version", std::string(rfrel::kVersion));
  app.require_subcommand(1);

  Overrides o;
  std::size_t max_pairs = std::numeric_limits<std::size_t>::max();
  bool print_spec = false;

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic corpus with ground-truth labels");
  add_common(simulate, o);
  auto* images = app.add_subcommand("images", "Render PNG tile images for every measurement");
  add_common(images, o);
  auto* matrix = app.add_subcommand("matrix", "Compute (or resume) the dissimilarity matrices");
  add_common(matrix, o);
  matrix->add_option("--max-pairs", max_pairs, "Stop after this many new pair computations");
  matrix->add_option("--plugin", o.plugin, "External discriminator command (overrides the spec)");
  auto* report = app.add_subcommand("report", "Emit the analytics bundle from complete matrices");
  add_common(report, o);
  auto* validate = app.add_subcommand("validate", "Check the corpus manifest and trace files");
  add_common(validate, o);
  validate->add_flag("--print-spec", print_spec, "Print the resolved run spec as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and --version exit 0; bad arguments count as validation failures.
    return app.exit(e) == 0 ? rfrel::kExitOk : rfrel::kExitValidation;
  }

  try {
    const auto spec = resolve_spec(o);
    if (simulate->parsed()) {
      std::cout << rfrel::cmd_simulate(spec).string() << '\n';
    } else if (images->parsed()) {
      std::cout << rfrel::cmd_images(spec) << " images written\n";
    } else if (matrix->parsed()) {
      const auto r = rfrel::cmd_matrix(spec, {max_pairs});
      std::cout << "computed " << r.computed << ", skipped " << r.skipped << ", failed " << r.failed << '\n';
      return r.exit_code;
    } else if (report->parsed()) {
      const auto bundle = rfrel::cmd_report(spec);
      for (const auto& f : bundle.files) std::cout << f.string() << '\n';
    } else if (validate->parsed()) {
      if (print_spec) std::cout << rfrel::to_json(spec).dump(2) << '\n';
      const auto corpus = rfrel::cmd_validate(spec);
      std::cout << "corpus ok: " << corpus.transmitter_ids().size() << " transmitters, " << corpus.size()
                << " measurements\n";
    }
  } catch (const rfrel::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return rfrel::kExitValidation;
  } catch (const rfrel::IncompleteMatrixError& e) {
    std::cerr << "incomplete: " << e.what() << '\n';
    return rfrel::kExitIncomplete;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rfrel::kExitValidation;
  }
  return rfrel::kExitOk;
}
