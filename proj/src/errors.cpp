#include "fbmlt/errors.hpp"

namespace fbmlt {

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const NumericalError*>(&e) != nullptr) {
        return 2;
    }
    return 1;
}

}  // namespace fbmlt
