#pragma once

#include <CLI11.hpp>

namespace adascale::cli {

inline void register_all(CLI::App& app) {
    (void)app;  // subcommands are registered as pipeline stages land
}

}  // namespace adascale::cli
