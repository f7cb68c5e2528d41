#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "albumgan/log.hpp"

int main(int argc, char** argv) {
    albumgan::logging::set_level(albumgan::logging::Level::warn);
    return doctest::Context(argc, argv).run();
}
