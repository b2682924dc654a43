#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace xtail {

using LabelId = std::int32_t;
using TokenId = std::int32_t;

// Every user-facing failure carries a short machine code plus a human
// message; the CLI prints them as one "error: <code>: <message>" line.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), m_code(std::move(code)) {}

    const std::string& code() const noexcept { return m_code; }

private:
    std::string m_code;
};

// Fixed-point decimal string, used wherever file bytes must be reproducible.
std::string format_fixed(double value, int decimals);

// Shortest-ish scientific form with a fixed number of significant digits.
std::string format_general(double value, int significant);

}  // namespace xtail
