// Acceptance suite: one pass/fail line per criterion. Placeholder until all
// modules are in place.
#include <cstdio>

int main() {
  std::printf("acceptance: pending\n");
  return 1;
}
