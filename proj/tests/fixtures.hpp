#pragma once

#include <map>
#include <string>

#include "ctmsm/model.hpp"

namespace ctmsm::fixtures {

/// Generating values of the two-area seasonal simulation design (natural scale).
inline std::map<std::string, double> seasonal_truth() {
  return {{"q12.intercept", -6.5}, {"q12.sin", -0.7}, {"q12.cos", -0.2},
          {"q21.intercept", -7.0}, {"q21.sin", 0.7},  {"q21.cos", -0.4},
          {"death.intercept", -9.0}, {"p1", 0.4},     {"p2", 0.2}};
}

}  // namespace ctmsm::fixtures
