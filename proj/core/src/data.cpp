#include "saferep/data.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace saferep {

namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "saferep-dataset";

json state_to_json(const SystemState& s) { return json(s.x); }

SystemState state_from_json(const json& j) {
  if (!j.is_array() || j.size() != SystemState::kDim) {
    throw std::invalid_argument("state must be an array of 12 numbers");
  }
  SystemState s;
  for (std::size_t i = 0; i < SystemState::kDim; ++i) {
    if (!j[i].is_number()) throw std::invalid_argument("state component is not a number");
    s[i] = j[i].get<double>();
  }
  return s;
}

[[noreturn]] void fail_line(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

std::vector<SystemState> Dataset::initial_states() const {
  std::vector<SystemState> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.x0);
  return out;
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label);
  return out;
}

std::string to_string(Source source) { return source == Source::kSim ? "sim" : "real"; }

Source source_from_string(const std::string& text) {
  if (text == "sim") return Source::kSim;
  if (text == "real") return Source::kReal;
  throw std::invalid_argument("unknown record source '" + text + "'");
}

void validate_record(const RecoveryRecord& r) {
  if (r.label != 0 && r.label != 1) throw std::invalid_argument("record label must be 0 or 1");
  if (r.trajectory.empty()) throw std::invalid_argument("record trajectory is empty");
  if (!(r.trajectory.front() == r.x0)) throw std::invalid_argument("trajectory[0] must equal x0");
  for (const auto& s : r.trajectory) {
    if (!s.is_finite()) throw std::invalid_argument("record contains a non-finite state");
  }
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");

  json header = {{"format", kFormatTag},
                 {"version", kDatasetFormatVersion},
                 {"k", ds.k()},
                 {"params_fingerprint", ds.meta.params_fingerprint},
                 {"seed", ds.meta.seed}};
  out << header.dump() << '\n';
  for (const auto& r : ds.records) {
    validate_record(r);
    json traj = json::array();
    for (const auto& s : r.trajectory) traj.push_back(state_to_json(s));
    json rec = {{"x0", state_to_json(r.x0)},
                {"label", r.label},
                {"source", to_string(r.source)},
                {"trajectory", std::move(traj)}};
    out << rec.dump() << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");

  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail_line(path, line_no, std::string("malformed record: ") + e.what());
    }
    try {
      if (!have_header) {
        if (j.value("format", "") != kFormatTag) fail_line(path, line_no, "not a saferep dataset");
        const int version = j.at("version").get<int>();
        if (version != kDatasetFormatVersion) {
          fail_line(path, line_no, "dataset version mismatch: file has " + std::to_string(version) +
                                       ", expected " + std::to_string(kDatasetFormatVersion));
        }
        expected = j.at("k").get<std::size_t>();
        ds.meta.params_fingerprint = j.at("params_fingerprint").get<std::string>();
        ds.meta.seed = j.at("seed").get<std::uint64_t>();
        ds.records.reserve(expected);
        have_header = true;
        continue;
      }
      RecoveryRecord r;
      r.x0 = state_from_json(j.at("x0"));
      r.label = j.at("label").get<int>();
      r.source = source_from_string(j.at("source").get<std::string>());
      for (const auto& s : j.at("trajectory")) r.trajectory.push_back(state_from_json(s));
      validate_record(r);
      ds.records.push_back(std::move(r));
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception& e) {
      fail_line(path, line_no, std::string("malformed record: ") + e.what());
    }
  }
  if (!have_header) throw std::runtime_error(path.string() + ": missing dataset header");
  if (ds.records.size() != expected) {
    throw std::runtime_error(path.string() + ": header declares " + std::to_string(expected) +
                             " records but file holds " + std::to_string(ds.records.size()));
  }
  return ds;
}

std::vector<std::size_t> downsample_indices(std::size_t length, std::size_t target_len) {
  if (length == 0) throw std::invalid_argument("downsample: empty trajectory");
  if (target_len < 2) throw std::invalid_argument("downsample: target length must be >= 2");
  std::vector<std::size_t> idx;
  if (length <= target_len) {
    idx.resize(length);
    for (std::size_t i = 0; i < length; ++i) idx[i] = i;
    return idx;
  }
  idx.reserve(target_len);
  const double scale = static_cast<double>(length - 1) / static_cast<double>(target_len - 1);
  for (std::size_t i = 0; i < target_len; ++i) {
    idx.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(i) * scale)));
  }
  return idx;
}

std::vector<SystemState> downsample_trajectory(std::span<const SystemState> traj, std::size_t target_len) {
  const auto idx = downsample_indices(traj.size(), target_len);
  std::vector<SystemState> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(traj[i]);
  return out;
}

}  // namespace saferep
