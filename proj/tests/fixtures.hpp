#pragma once

#include "netroot/scenario.hpp"

#include <string>

inline std::string fixture_path(const std::string& rel)
{
    return std::string(NETROOT_FIXTURE_DIR) + "/" + rel;
}

inline std::string read_fixture(const std::string& rel)
{
    return netroot::scenario::read_text_file(fixture_path(rel));
}

inline netroot::scenario::Scenario load_fixture_scenario(const std::string& rel)
{
    return netroot::scenario::load_scenario(fixture_path(rel));
}
