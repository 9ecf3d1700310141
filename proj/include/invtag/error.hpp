#pragma once

#include <cstdarg>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace invtag {

inline std::string strprintf(const char* fmt, ...) {
    va_list ap;
    va_start(ap, fmt);
    va_list ap2;
    va_copy(ap2, ap);
    int n = std::vsnprintf(nullptr, 0, fmt, ap);
    va_end(ap);
    std::string s(size_t(n > 0 ? n : 0), '\0');
    if (n > 0) std::vsnprintf(s.data(), s.size() + 1, fmt, ap2);
    va_end(ap2);
    return s;
}

struct Error : std::runtime_error {
    explicit Error(std::string msg) : std::runtime_error(std::move(msg)) {}
};

template <typename... Args>
void check(bool cond, const char* fmt, Args... args) {
    if (!cond) {
        if constexpr (sizeof...(Args) == 0)
            throw Error(fmt);
        else
            throw Error(strprintf(fmt, args...));
    }
}

}  // namespace invtag
