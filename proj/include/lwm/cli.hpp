#pragma once

namespace lwm {

// Command-line entry point. Subcommands: embed, extract, channel,
// threshold, sweep, selftest. Returns 0 on success, 1 on usage errors,
// 2 on data errors (I/O, malformed inputs, failed embedding).
int cli_main(int argc, const char* const* argv);

} // namespace lwm
