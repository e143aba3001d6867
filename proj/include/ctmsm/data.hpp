#pragma once

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ctmsm {

/// Capture occasions shared by every individual, with per-area survey effort.
struct OccasionGrid {
  std::vector<double> times;              // days since study start; times[0] == 0
  std::vector<std::vector<int>> effort;   // effort[u][m] in {0,1}, m zero-based

  int occasions() const { return static_cast<int>(times.size()); }
  int areas() const { return effort.empty() ? 0 : static_cast<int>(effort.front().size()); }
  double span() const { return times.empty() ? 0.0 : times.back(); }
  bool surveyed(int u, int m) const { return effort[u][m] != 0; }
};

/// One animal's observations aligned with the grid; 0 = not seen, m = seen in state m.
struct EncounterHistory {
  std::string id;
  std::vector<int> observations;
  int first_capture = 0;
  std::map<std::string, double> covariates;

  int sightings() const;
};

struct EncounterData {
  OccasionGrid grid;
  std::vector<EncounterHistory> histories;
  int alive_states = 0;
};

/// Throws ValidationError/FormatError when the grid invariants fail.
/// `allow_empty_occasions` admits occasions without effort (used by the simulator and tests).
void validate_grid(const OccasionGrid& grid, int alive_states, bool allow_empty_occasions = false);

/// Checks one history against the grid and fixes nothing. Throws ValidationError.
void validate_history(const EncounterHistory& h, const OccasionGrid& grid, int alive_states);

/// Index of the first non-zero observation; throws ValidationError when there is none.
int first_capture_of(const std::vector<int>& observations);

/// Shortest round-trip decimal representation.
std::string format_real(double v);

struct CsvOptions {
  char delimiter = ',';
};

/// Reads `histories` (id,time,obs) and `effort` (time,area_1..area_M) streams.
/// An optional `individuals` stream (id,<covariate>...) supplies time-constant covariates.
EncounterData parse_encounter_data(std::istream& histories, std::istream& effort,
                                   std::istream* individuals = nullptr, const CsvOptions& options = {});

/// Writes only the sightings; zero observations are implied.
void write_histories(std::ostream& out, const EncounterData& data, const CsvOptions& options = {});
void write_effort(std::ostream& out, const OccasionGrid& grid, const CsvOptions& options = {});
/// Returns false (and writes nothing) when no individual carries covariates.
bool write_individuals(std::ostream& out, const EncounterData& data, const CsvOptions& options = {});

/// Reads histories.csv, effort.csv and, when present, individuals.csv from a directory.
EncounterData load_encounter_dir(const std::string& dir, const CsvOptions& options = {});
void save_encounter_dir(const std::string& dir, const EncounterData& data, const CsvOptions& options = {});

struct DataSummary {
  int individuals = 0;
  int occasions = 0;                    // T + 1
  std::vector<int> area_occasions;      // occasions with effort, per area
  int total_sightings = 0;
  std::optional<int> min_sightings;
  std::optional<double> median_sightings;
  std::optional<int> max_sightings;
};

DataSummary summarize(const EncounterData& data);

}  // namespace ctmsm
