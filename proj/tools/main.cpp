#include <cstdio>

int main() {
  std::puts("motkit placeholder");
  return 0;
}
