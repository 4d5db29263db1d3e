#pragma once

#include <string>
#include <string_view>

#include "melohist/pitch_grid.hpp"

namespace melohist {

// Training/inference variants.
//   M1    histogram regression, fixed target sigma (= bin width)
//   M2    histogram regression, error-tracking target sigma (stop gradient)
//   M3    voicing classifier + voiced-pitch histogram, combined loss
//   MMse  scalar regression baseline, mean squared error
//   MNll  scalar regression baseline, Gaussian negative log-likelihood
enum class Method { M1, M2, M3, MMse, MNll };

std::string to_string(Method method);
// Accepts "M1", "M2", "M3", "M_MSE", "M_NLL"; throws std::invalid_argument
// otherwise.
Method method_from_string(std::string_view name);

inline GridKind grid_for(Method method) {
  return method == Method::M3 ? GridKind::VoicedOnly : GridKind::Joint;
}

inline bool uses_histogram(Method method) {
  return method == Method::M1 || method == Method::M2 || method == Method::M3;
}

}  // namespace melohist
