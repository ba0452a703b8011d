#include "semimage/threads.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <string>

#include <omp.h>

#include "semimage/error.hpp"

namespace semimage {

int configure_threads() {
    int n = 1;
    if (const char* env = std::getenv("SEMIMAGE_THREADS"); env && *env) {
        const char* end = env + std::strlen(env);
        auto [p, ec] = std::from_chars(env, end, n);
        if (ec != std::errc() || p != end || n < 1)
            throw UsageError(std::string("SEMIMAGE_THREADS must be a positive integer, got '") + env + "'");
    }
    omp_set_num_threads(n);
    return n;
}

int thread_count() { return omp_get_max_threads(); }

}  // namespace semimage
