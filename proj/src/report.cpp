#include "rabdef/report.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "rabdef/error.hpp"
#include "rabdef/xai.hpp"

namespace rabdef {

namespace {

constexpr int kAccuracyPrecision = 6;
constexpr int kWeightPrecision = 9;

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io, "cannot write '" + path.string() + "'");
  return out;
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create directory '" + dir + "': " + ec.message());
}

void write_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
  auto out = open_output(path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io, "short write to '" + path.string() + "'");
}

}  // namespace

std::string format_fixed(double value, int precision) {
  char buffer[64];
  auto [ptr, ec] =
      std::to_chars(buffer, buffer + sizeof(buffer), value, std::chars_format::fixed, precision);
  if (ec != std::errc()) fail(ErrorCode::invalid_argument, "value not representable as fixed decimal");
  return std::string(buffer, ptr);
}

void emit_reports(const ExperimentResult& result, int n_clients, const std::string& out_dir) {
  if (n_clients < 1) fail(ErrorCode::invalid_argument, "n_clients must be at least 1");
  ensure_directory(out_dir);
  std::filesystem::path base(out_dir);

  {
    auto out = open_output(base / "rounds.csv");
    out << "round,accuracy,backdoor_accuracy,discarded_regular,discarded_poor,"
           "discarded_adversarial,fallback\n";
    for (const auto& r : result.rounds) {
      out << r.round << ',' << format_fixed(r.accuracy, kAccuracyPrecision) << ',';
      if (r.backdoor_accuracy >= 0.0) out << format_fixed(r.backdoor_accuracy, kAccuracyPrecision);
      out << ',' << r.discarded_regular << ',' << r.discarded_poor << ','
          << r.discarded_adversarial << ',' << (r.fallback ? 1 : 0) << '\n';
    }
    if (!out) fail(ErrorCode::io, "short write to rounds.csv");
  }

  {
    auto out = open_output(base / "weights.csv");
    out << "round";
    for (int c = 0; c < n_clients; ++c) out << ",client_" << c;
    out << '\n';
    std::vector<const ClientRoundRecord*> by_client(n_clients);
    for (const auto& r : result.rounds) {
      std::fill(by_client.begin(), by_client.end(), nullptr);
      for (const auto& rec : r.clients) by_client[rec.client] = &rec;
      out << r.round;
      for (int c = 0; c < n_clients; ++c) {
        out << ',';
        if (by_client[c]) out << format_fixed(by_client[c]->weight, kWeightPrecision);
      }
      out << '\n';
    }
    if (!out) fail(ErrorCode::io, "short write to weights.csv");
  }

  {
    auto out = open_output(base / "fairness.csv");
    const FairnessSummary& f = result.fairness;
    out << "metric,value\n";
    out << "adversarial_discard_min," << format_fixed(f.adversarial_min, kAccuracyPrecision)
        << '\n';
    out << "adversarial_discard_max," << format_fixed(f.adversarial_max, kAccuracyPrecision)
        << '\n';
    out << "adversarial_discard_mean," << format_fixed(f.adversarial_mean, kAccuracyPrecision)
        << '\n';
    out << "poor_discard_min," << format_fixed(f.poor_min, kAccuracyPrecision) << '\n';
    out << "poor_discard_max," << format_fixed(f.poor_max, kAccuracyPrecision) << '\n';
    out << "poor_discard_mean," << format_fixed(f.poor_mean, kAccuracyPrecision) << '\n';
    for (size_t i = 0; i < f.poor_ids.size(); ++i) {
      out << "poor_client_" << f.poor_ids[i] << "_accuracy,"
          << format_fixed(f.poor_accuracy[i], kAccuracyPrecision) << '\n';
    }
    out << "poor_accuracy_mean," << format_fixed(f.poor_accuracy_mean, kAccuracyPrecision)
        << '\n';
    if (!out) fail(ErrorCode::io, "short write to fairness.csv");
  }
}

void emit_explanation(const Explanation& explanation, const std::string& out_dir) {
  if (!explanation.shape.set())
    fail(ErrorCode::invalid_argument, "explanation rendering needs image-shaped data");
  ensure_directory(out_dir);
  std::filesystem::path base(out_dir);
  for (size_t k = 0; k < explanation.instances.size(); ++k) {
    int idx = explanation.instances[k];
    write_bytes(base / ("instance_" + std::to_string(idx) + ".pgm"),
                render_input(explanation.instance_features[k], explanation.shape));
    write_bytes(base / ("explanation_round" + std::to_string(explanation.round) + "_client" +
                        std::to_string(explanation.client) + "_instance_" + std::to_string(idx) +
                        ".pgm"),
                render_importance(explanation.matrices[k], explanation.instance_labels[k],
                                  explanation.shape));
  }
}

std::string render_fairness_report(const std::string& in_dir) {
  std::filesystem::path path = std::filesystem::path(in_dir) / "fairness.csv";
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");

  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  bool header = true;
  size_t width = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    size_t comma = line.find(',');
    if (comma == std::string::npos)
      fail(ErrorCode::format, "malformed fairness.csv line: " + line);
    if (header) {
      header = false;
      continue;
    }
    rows.emplace_back(line.substr(0, comma), line.substr(comma + 1));
    width = std::max(width, rows.back().first.size());
  }
  if (header) fail(ErrorCode::format, "fairness.csv is empty");

  std::ostringstream out;
  for (const auto& [metric, value] : rows) {
    out << metric << std::string(width - metric.size() + 2, ' ') << value << '\n';
  }
  return out.str();
}

}  // namespace rabdef
