#pragma once

#include <string_view>

namespace statemem {

// Progress messages go to stderr; data never does.
void set_verbose(bool on);
bool verbose();
void log_info(std::string_view msg);

}  // namespace statemem
