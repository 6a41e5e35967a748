#include "simba/errors.hpp"

namespace simba {

int exit_code_for(const std::exception& e) noexcept {
    if (auto* err = dynamic_cast<const Error*>(&e)) return err->exit_code();
    if (dynamic_cast<const std::invalid_argument*>(&e)) return 2;
    return 1;
}

} // namespace simba
