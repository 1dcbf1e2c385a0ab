// Doctest driver for the command-line tests. The path to the kge binary under
// test arrives as --kge=PATH ahead of the usual doctest flags.

#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <cstdio>
#include <string>
#include <vector>

std::string g_kge_path;

int main(int argc, char** argv) {
  std::vector<char*> rest;
  for (int i = 0; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg.rfind("--kge=", 0) == 0)
      g_kge_path = arg.substr(6);
    else
      rest.push_back(argv[i]);
  }
  if (g_kge_path.empty()) {
    std::fprintf(stderr, "usage: kge_cli --kge=PATH [doctest options]\n");
    return 2;
  }
  doctest::Context ctx;
  ctx.applyCommandLine(static_cast<int>(rest.size()), rest.data());
  return ctx.run();
}
