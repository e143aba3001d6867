#include "ctmsm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "ctmsm/error.hpp"

namespace ctmsm {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, delim)) out.push_back(trim(field));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;
};

Table read_table(std::istream& in, char delim, const std::string& name) {
  Table t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line, delim);
    if (t.header.empty()) {
      if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw FormatError(name + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw FormatError(name + ": missing header row");
  return t;
}

double parse_real(const std::string& s, const std::string& ctx) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw FormatError(ctx + ": not a finite number: '" + s + "'");
  }
  return v;
}

int parse_int(const std::string& s, const std::string& ctx) {
  int v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw FormatError(ctx + ": not an integer: '" + s + "'");
  return v;
}

int column(const Table& t, const std::string& name, const std::string& table_name) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw FormatError(table_name + ": missing column '" + name + "'");
  return static_cast<int>(it - t.header.begin());
}

std::string time_label(double t) { return format_real(t); }

}  // namespace

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

int EncounterHistory::sightings() const {
  return static_cast<int>(std::count_if(observations.begin(), observations.end(), [](int x) { return x != 0; }));
}

void validate_grid(const OccasionGrid& grid, int alive_states, bool allow_empty_occasions) {
  if (alive_states < 1) throw ValidationError("grid: at least one alive state is required");
  if (grid.times.empty()) throw ValidationError("grid: no occasions");
  if (grid.times.front() != 0.0) throw ValidationError("grid: first occasion must be at time 0");
  if (grid.effort.size() != grid.times.size()) throw ValidationError("grid: effort rows do not match occasions");
  for (std::size_t u = 0; u < grid.times.size(); ++u) {
    if (!std::isfinite(grid.times[u])) throw ValidationError("grid: non-finite occasion time");
    if (u > 0 && !(grid.times[u] > grid.times[u - 1])) {
      throw ValidationError("grid: occasion times must be strictly increasing (at " + time_label(grid.times[u]) + ")");
    }
    if (static_cast<int>(grid.effort[u].size()) != alive_states) {
      throw ValidationError("grid: effort row has wrong number of areas");
    }
    bool any = false;
    for (int e : grid.effort[u]) {
      if (e != 0 && e != 1) throw ValidationError("grid: effort flags must be 0 or 1");
      any = any || e == 1;
    }
    if (u > 0 && !any && !allow_empty_occasions) {
      throw ValidationError("grid: occasion at time " + time_label(grid.times[u]) + " has no surveyed area");
    }
  }
}

int first_capture_of(const std::vector<int>& observations) {
  const auto it = std::find_if(observations.begin(), observations.end(), [](int x) { return x != 0; });
  if (it == observations.end()) throw ValidationError("history has no sightings");
  return static_cast<int>(it - observations.begin());
}

void validate_history(const EncounterHistory& h, const OccasionGrid& grid, int alive_states) {
  const std::string who = "individual '" + h.id + "'";
  if (h.observations.size() != grid.times.size()) {
    throw ValidationError(who + ": history length does not match the occasion grid");
  }
  int first = -1;
  for (std::size_t u = 0; u < h.observations.size(); ++u) {
    const int x = h.observations[u];
    if (x < 0 || x > alive_states) throw ValidationError(who + ": observation out of range");
    if (x == 0) continue;
    if (first < 0) first = static_cast<int>(u);
    if (grid.effort[u][x - 1] == 0) {
      throw ValidationError(who + ": seen in area " + std::to_string(x) + " at time " + time_label(grid.times[u]) +
                            " but that area was not surveyed");
    }
  }
  if (first < 0) throw ValidationError(who + ": no sightings");
  if (h.first_capture != first) throw ValidationError(who + ": first_capture does not match the first sighting");
}

EncounterData parse_encounter_data(std::istream& histories, std::istream& effort, std::istream* individuals,
                                   const CsvOptions& options) {
  const char d = options.delimiter;
  EncounterData data;

  const Table et = read_table(effort, d, "effort");
  if (et.header.size() < 2 || et.header[0] != "time") {
    throw FormatError("effort: header must be time,area_1,...,area_M");
  }
  data.alive_states = static_cast<int>(et.header.size()) - 1;
  for (std::size_t i = 0; i < et.rows.size(); ++i) {
    const std::string ctx = "effort:" + std::to_string(et.line_numbers[i]);
    const double t = parse_real(et.rows[i][0], ctx);
    if (!data.grid.times.empty() && !(t > data.grid.times.back())) {
      throw FormatError(ctx + ": times must be strictly increasing without duplicates");
    }
    std::vector<int> flags;
    for (std::size_t m = 1; m < et.rows[i].size(); ++m) {
      const int f = parse_int(et.rows[i][m], ctx);
      if (f != 0 && f != 1) throw FormatError(ctx + ": effort flags must be 0 or 1");
      flags.push_back(f);
    }
    data.grid.times.push_back(t);
    data.grid.effort.push_back(std::move(flags));
  }
  validate_grid(data.grid, data.alive_states);

  std::unordered_map<double, int> occasion_of;
  for (int u = 0; u < data.grid.occasions(); ++u) occasion_of.emplace(data.grid.times[u], u);

  const Table ht = read_table(histories, d, "histories");
  const int c_id = column(ht, "id", "histories");
  const int c_time = column(ht, "time", "histories");
  const int c_obs = column(ht, "obs", "histories");
  std::unordered_map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < ht.rows.size(); ++i) {
    const auto& row = ht.rows[i];
    const std::string ctx = "histories:" + std::to_string(ht.line_numbers[i]);
    const std::string& id = row[c_id];
    if (id.empty()) throw FormatError(ctx + ": empty id");
    const double t = parse_real(row[c_time], ctx);
    const int x = parse_int(row[c_obs], ctx);
    if (x < 0 || x > data.alive_states) {
      throw FormatError(ctx + ": obs " + std::to_string(x) + " outside 0.." + std::to_string(data.alive_states));
    }
    const auto occ = occasion_of.find(t);
    if (occ == occasion_of.end()) {
      throw ValidationError(ctx + ": individual '" + id + "' has a record at time " + row[c_time] +
                            " which is not a survey occasion");
    }
    auto [it, inserted] = index_of.emplace(id, data.histories.size());
    if (inserted) {
      EncounterHistory h;
      h.id = id;
      h.observations.assign(data.grid.times.size(), 0);
      data.histories.push_back(std::move(h));
    }
    auto& obs = data.histories[it->second].observations[occ->second];
    if (obs != 0 && obs != x) throw FormatError(ctx + ": conflicting records for '" + id + "' at time " + row[c_time]);
    obs = std::max(obs, x);
  }

  if (individuals != nullptr) {
    const Table it = read_table(*individuals, d, "individuals");
    const int c_ind = column(it, "id", "individuals");
    for (std::size_t i = 0; i < it.rows.size(); ++i) {
      const std::string ctx = "individuals:" + std::to_string(it.line_numbers[i]);
      const auto found = index_of.find(it.rows[i][c_ind]);
      if (found == index_of.end()) continue;
      auto& h = data.histories[found->second];
      for (std::size_t c = 0; c < it.header.size(); ++c) {
        if (static_cast<int>(c) == c_ind) continue;
        h.covariates[it.header[c]] = parse_real(it.rows[i][c], ctx);
      }
    }
  }

  for (auto& h : data.histories) {
    if (h.sightings() == 0) throw ValidationError("individual '" + h.id + "': no sightings");
    h.first_capture = first_capture_of(h.observations);
    validate_history(h, data.grid, data.alive_states);
  }
  return data;
}

void write_histories(std::ostream& out, const EncounterData& data, const CsvOptions& options) {
  const char d = options.delimiter;
  out << "id" << d << "time" << d << "obs\n";
  for (const auto& h : data.histories) {
    for (std::size_t u = 0; u < h.observations.size(); ++u) {
      if (h.observations[u] == 0) continue;
      out << h.id << d << format_real(data.grid.times[u]) << d << h.observations[u] << '\n';
    }
  }
}

void write_effort(std::ostream& out, const OccasionGrid& grid, const CsvOptions& options) {
  const char d = options.delimiter;
  out << "time";
  for (int m = 0; m < grid.areas(); ++m) out << d << "area_" << (m + 1);
  out << '\n';
  for (int u = 0; u < grid.occasions(); ++u) {
    out << format_real(grid.times[u]);
    for (int e : grid.effort[u]) out << d << e;
    out << '\n';
  }
}

bool write_individuals(std::ostream& out, const EncounterData& data, const CsvOptions& options) {
  std::vector<std::string> names;
  for (const auto& h : data.histories) {
    for (const auto& [k, v] : h.covariates) {
      if (std::find(names.begin(), names.end(), k) == names.end()) names.push_back(k);
    }
  }
  if (names.empty()) return false;
  std::sort(names.begin(), names.end());
  const char d = options.delimiter;
  out << "id";
  for (const auto& n : names) out << d << n;
  out << '\n';
  for (const auto& h : data.histories) {
    out << h.id;
    for (const auto& n : names) {
      const auto it = h.covariates.find(n);
      if (it == h.covariates.end()) throw ValidationError("individual '" + h.id + "' lacks covariate " + n);
      out << d << format_real(it->second);
    }
    out << '\n';
  }
  return true;
}

EncounterData load_encounter_dir(const std::string& dir, const CsvOptions& options) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  std::ifstream hist(base / "histories.csv");
  if (!hist) throw FormatError("cannot open " + (base / "histories.csv").string());
  std::ifstream eff(base / "effort.csv");
  if (!eff) throw FormatError("cannot open " + (base / "effort.csv").string());
  std::ifstream ind(base / "individuals.csv");
  return parse_encounter_data(hist, eff, ind ? &ind : nullptr, options);
}

void save_encounter_dir(const std::string& dir, const EncounterData& data, const CsvOptions& options) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  std::error_code ec;
  fs::create_directories(base, ec);
  if (ec) throw OutputError("cannot create directory " + dir + ": " + ec.message());
  std::ofstream hist(base / "histories.csv");
  std::ofstream eff(base / "effort.csv");
  if (!hist || !eff) throw OutputError("cannot write encounter files to " + dir);
  write_histories(hist, data, options);
  write_effort(eff, data.grid, options);
  std::ostringstream ind;
  if (write_individuals(ind, data, options)) {
    std::ofstream f(base / "individuals.csv");
    f << ind.str();
  } else {
    fs::remove(base / "individuals.csv");
  }
}

DataSummary summarize(const EncounterData& data) {
  DataSummary s;
  s.individuals = static_cast<int>(data.histories.size());
  s.occasions = data.grid.occasions();
  s.area_occasions.assign(data.grid.areas(), 0);
  for (const auto& row : data.grid.effort) {
    for (std::size_t m = 0; m < row.size(); ++m) s.area_occasions[m] += row[m];
  }
  if (data.histories.empty()) return s;
  std::vector<int> counts;
  counts.reserve(data.histories.size());
  for (const auto& h : data.histories) counts.push_back(h.sightings());
  std::sort(counts.begin(), counts.end());
  for (int c : counts) s.total_sightings += c;
  s.min_sightings = counts.front();
  s.max_sightings = counts.back();
  const std::size_t n = counts.size();
  s.median_sightings = n % 2 == 1 ? counts[n / 2] : 0.5 * (counts[n / 2 - 1] + counts[n / 2]);
  return s;
}

}  // namespace ctmsm
