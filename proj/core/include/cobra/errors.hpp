#ifndef COBRA_ERRORS_HPP
#define COBRA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace cobra {

// Invalid inputs, shapes, values, file contents. CLI maps this to exit code 1.
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / stream failures. CLI maps this to exit code 2.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cobra

#endif
