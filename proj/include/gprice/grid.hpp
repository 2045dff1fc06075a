#pragma once

#include <cstddef>

namespace gprice {

enum class Stretching { uniform_price, uniform_log };

struct GridSpec {
    std::size_t n_space = 400;
    std::size_t n_time = 400;
    Stretching stretching = Stretching::uniform_log;

    void validate() const;

    bool operator==(const GridSpec&) const = default;
};

const char* to_string(Stretching s);

}  // namespace gprice
