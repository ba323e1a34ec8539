#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "vle2/eval.hpp"

int main(int argc, char** argv) {
  vle2::apply_thread_cap_from_env();
  doctest::Context ctx;
  ctx.applyCommandLine(argc, argv);
  return ctx.run();
}
