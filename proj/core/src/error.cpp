#include "hsissl/error.hpp"

namespace hsissl {

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const DimensionError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const LabelError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const FormatError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const NumericalError*>(&e) != nullptr) return 4;
  return 1;
}

}  // namespace hsissl
