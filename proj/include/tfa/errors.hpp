#pragma once

#include <stdexcept>

namespace tfa {

struct PreconditionError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct FalsificationError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace tfa
