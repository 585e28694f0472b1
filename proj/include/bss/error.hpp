#pragma once

#include <stdexcept>
#include <string>

namespace bss {

// I/O failure (unreadable path, short write, ...). CLI maps this to exit 1.
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed file contents. Carries the byte offset where parsing failed.
class format_error : public std::runtime_error {
public:
    format_error(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Lookup of a key that is not present. CLI maps this to exit 3.
class not_found_error : public std::runtime_error {
public:
    explicit not_found_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bss
