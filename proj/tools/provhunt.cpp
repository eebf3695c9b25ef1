#include "provhunt/cli.hpp"

int main(int argc, char** argv) { return provhunt::run(argc, argv); }
