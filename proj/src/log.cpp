#include "statemem/log.hpp"

#include <atomic>
#include <iostream>

namespace statemem {

namespace {
std::atomic<bool> g_verbose{false};
}

void set_verbose(bool on) { g_verbose = on; }
bool verbose() { return g_verbose; }

void log_info(std::string_view msg)
{
    if (g_verbose) std::cerr << msg << '\n';
}

}  // namespace statemem
