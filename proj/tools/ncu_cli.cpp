#include "ncu/cli.hpp"

int main(int argc, char ** argv)
{
  return ncu::run_cli(argc, argv);
}
