#include "rfrel/plugin.hpp"

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace rfrel {

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

}  // namespace

nlohmann::json make_plugin_job(const PairJob& job, const SplitPlan& plan,
                               const std::vector<std::filesystem::path>& images_x,
                               const std::vector<std::filesystem::path>& images_y) {
  auto part = [&](const std::vector<LabeledIndex>& items) {
    auto arr = nlohmann::json::array();
    for (const auto& li : items) {
      const auto& src = li.label == 0 ? images_x : images_y;
      arr.push_back({{"path", src.at(li.index).string()}, {"label", li.label}});
    }
    return arr;
  };
  return {{"tx_id", job.tx_id}, {"x", job.x},           {"y", job.y},         {"seed", job.seed},
          {"train", part(plan.train)}, {"val", part(plan.val)}, {"test", part(plan.test)}};
}

DeltaResult parse_plugin_result(const std::string& stdout_text) {
  std::istringstream in(stdout_text);
  std::string line;
  std::string last;
  while (std::getline(in, line))
    if (line.find_first_not_of(" \t\r") != std::string::npos) last = line;
  if (last.empty()) throw PluginError("plugin printed no result");
  try {
    const auto j = nlohmann::json::parse(last);
    const auto correct = j.at("correct").get<std::size_t>();
    const auto total = j.at("total").get<std::size_t>();
    const auto delta = j.at("delta").get<double>();
    const auto r = delta_from_counts(correct, total);
    if (std::abs(r.delta - delta) > 1e-9)
      throw PluginError("plugin delta " + std::to_string(delta) + " disagrees with correct/total");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw PluginError(std::string("malformed plugin result: ") + e.what());
  } catch (const ArgumentError& e) {
    throw PluginError(std::string("invalid plugin counts: ") + e.what());
  }
}

PluginDiscriminator::PluginDiscriminator(std::string command, ImagePathResolver images, SplitSpec split,
                                         std::filesystem::path job_dir)
    : command_(std::move(command)), images_(std::move(images)), split_(split), job_dir_(std::move(job_dir)) {
  split_.validate();
  if (command_.empty()) throw ArgumentError("plugin command is empty");
}

std::string PluginDiscriminator::id() const { return "plugin:" + command_; }

DeltaResult PluginDiscriminator::run(const PairJob& job) const {
  const auto images_x = images_(job.tx_id, job.x);
  const auto images_y = images_(job.tx_id, job.y);
  SplitSpec spec = split_;
  spec.shuffle_seed = job.seed;
  const auto plan = plan_split(images_x.size(), images_y.size(), spec);

  std::filesystem::create_directories(job_dir_);
  char name[64];
  std::snprintf(name, sizeof name, "tx%02d_%03d_%03d.json", job.tx_id, job.x, job.y);
  const auto job_path = job_dir_ / name;
  {
    std::ofstream out(job_path, std::ios::trunc);
    if (!out) throw PersistenceError("cannot write plugin job", job_path);
    out << make_plugin_job(job, plan, images_x, images_y).dump(1) << '\n';
  }

  const std::string cmd = command_ + " " + shell_quote(job_path.string());
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), &pclose);
  if (!pipe) throw PluginError("cannot start plugin: " + command_);
  std::string output;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe.get())) output.append(buf, got);
  const int status = pclose(pipe.release());
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw PluginError("plugin exited with status " + std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1) +
                      " for pair (" + std::to_string(job.x) + ", " + std::to_string(job.y) + ")");
  return parse_plugin_result(output);
}

}  // namespace rfrel
