#pragma once

#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "ctmsm/data.hpp"
#include "ctmsm/likelihood.hpp"
#include "ctmsm/model.hpp"

namespace ctmsm {

/// Decoded states and local state probabilities for occasions first_capture..T.
/// States are one-based; alive_states + 1 is the death state.
struct DecodedPath {
  int first_capture = 0;
  std::vector<int> states;
  Eigen::MatrixXd posterior;  // one row per occasion from first capture, one column per state (death last)
};

/// Viterbi and forward-backward decoding sharing one set of transition matrices.
class Decoder {
 public:
  Decoder(const ModelSpec& spec, const ParamVector& params, const OccasionGrid& grid);

  /// Most probable state sequence given the history; ties go to the lowest state index.
  std::vector<int> viterbi(const EncounterHistory& h) const;

  /// Pr(state at occasion u = k | history) for u >= first capture.
  Eigen::MatrixXd state_probabilities(const EncounterHistory& h) const;

  DecodedPath decode(const EncounterHistory& h) const;

 private:
  const ModelSpec* spec_;
  LikelihoodContext ctx_;
};

std::vector<int> viterbi(const ModelSpec& spec, const ParamVector& params, const OccasionGrid& grid,
                         const EncounterHistory& history);

Eigen::MatrixXd state_probabilities(const ModelSpec& spec, const ParamVector& params, const OccasionGrid& grid,
                                    const EncounterHistory& history);

/// Decodes every individual in data order.
std::vector<DecodedPath> decode_all(const ModelSpec& spec, const ParamVector& params, const EncounterData& data,
                                    int threads = 1);

/// Reference decoding by enumerating all compatible state sequences. Throws EnumerationLimit
/// past `max_unknown` unobserved occasions.
DecodedPath decode_by_enumeration(const ModelSpec& spec, const ParamVector& params, const OccasionGrid& grid,
                                  const EncounterHistory& history, int max_unknown = 12);

/// Rows `id,time,viterbi_state,p_state_1,...,p_state_{M+1}`.
void write_decoded(std::ostream& out, const EncounterData& data, const std::vector<DecodedPath>& paths,
                   char delimiter = ',');

}  // namespace ctmsm
