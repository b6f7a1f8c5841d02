// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 matr contributors

#include <matr/common.hpp>
#include <matr/kernels.hpp>

#include <cstdlib>

namespace matr::kernels {

#if defined(MATR_HAVE_AVX2_TU)
const Ops* avx2_ops_table();
#else
inline const Ops* avx2_ops_table() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2_fma() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Ops* g_active = nullptr;

const Ops* pick(const std::string& name) {
    if (name == "scalar") return &scalar_ops();
    if (name == "avx2") {
        const Ops* v = avx2_ops();
        if (!v) throw_usage("kernel backend 'avx2' not available on this build/CPU");
        return v;
    }
    if (name == "auto") {
        if (const Ops* v = avx2_ops()) return v;
        return &scalar_ops();
    }
    throw_usage("unknown kernel backend '" + name + "' (use auto|scalar|avx2)");
}

const Ops* initial_pick() {
    const char* env = std::getenv("MATR_KERNELS");
    return pick(env && *env ? env : "auto");
}

}  // namespace

const Ops* avx2_ops() {
    static const Ops* table = cpu_has_avx2_fma() ? avx2_ops_table() : nullptr;
    return table;
}

const Ops& active() {
    if (!g_active) g_active = initial_pick();
    return *g_active;
}

void set_backend(const std::string& name) { g_active = pick(name); }

std::vector<std::string> available_backends() {
    std::vector<std::string> out{"scalar"};
    if (avx2_ops()) out.push_back("avx2");
    return out;
}

}  // namespace matr::kernels
