#include <atomic>
#include <cstdlib>
#include <string>

#include "ltc/simd.hpp"

namespace ltc::simd {

#ifdef LTC_HAVE_AVX2
extern const KernelTable kAvx2Table;
#endif

namespace {

Level initial_level() {
    if (const char* env = std::getenv("LTC_SIMD")) {
        const std::string want(env);
        if (want == "scalar") return Level::kScalar;
        if (want == "avx2" && level_supported(Level::kAvx2)) return Level::kAvx2;
    }
    return best_supported_level();
}

std::atomic<Level>& level_slot() {
    static std::atomic<Level> slot{initial_level()};
    return slot;
}

}  // namespace

std::string_view level_name(Level level) {
    switch (level) {
        case Level::kScalar: return "scalar";
        case Level::kAvx2: return "avx2";
    }
    return "unknown";
}

const KernelTable* kernels_for(Level level) {
    switch (level) {
        case Level::kScalar: return &scalar_kernels();
        case Level::kAvx2:
#ifdef LTC_HAVE_AVX2
            return &kAvx2Table;
#else
            return nullptr;
#endif
    }
    return nullptr;
}

bool level_supported(Level level) {
    if (level == Level::kScalar) return true;
#ifdef LTC_HAVE_AVX2
    if (level == Level::kAvx2) {
        __builtin_cpu_init();
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    }
#endif
    return false;
}

Level best_supported_level() {
    return level_supported(Level::kAvx2) ? Level::kAvx2 : Level::kScalar;
}

Level active_level() { return level_slot().load(std::memory_order_relaxed); }

void set_active_level(Level level) {
    if (!level_supported(level)) level = Level::kScalar;
    level_slot().store(level, std::memory_order_relaxed);
}

const KernelTable& active() { return *kernels_for(active_level()); }

}  // namespace ltc::simd
