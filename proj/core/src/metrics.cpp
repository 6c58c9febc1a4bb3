#include "hygrpo/metrics.hpp"

#include <nlohmann/json.hpp>
#include <sstream>
#include <vector>

#include "hygrpo/error.hpp"

namespace hygrpo {

std::string metrics_jsonl(const StepMetrics& m) {
  std::string out;
  for (const auto& t : m.tasks) {
    nlohmann::ordered_json j;
    j["step"] = m.step;
    j["task"] = to_string(t.task);
    j["mean_group_reward"] = t.mean_group_reward;
    j["loss_discrete"] = t.loss_discrete;
    j["loss_continuous"] = t.loss_continuous;
    j["kl"] = t.kl;
    j["clip_frac"] = t.clip_frac;
    j["v_over_g"] = t.v_over_g;
    j["degenerate"] = m.degenerate;
    out += j.dump();
    out += '\n';
  }
  return out;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, std::size_t keep_before) {
  std::vector<std::string> kept;
  if (keep_before > 0 && std::filesystem::exists(path)) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("step")) {
        throw Error("malformed metrics record in " + path.string());
      }
      if (j["step"].get<std::size_t>() < keep_before) kept.push_back(line);
    }
  }
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error("cannot write " + path.string());
  for (const auto& line : kept) out_ << line << '\n';
  out_.flush();
}

void MetricsWriter::write(const StepMetrics& m) {
  out_ << metrics_jsonl(m);
  out_.flush();
}

}  // namespace hygrpo
