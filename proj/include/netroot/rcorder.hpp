#pragma once

// Orders rc.d scripts from their PROVIDE/REQUIRE/BEFORE headers.

#include "netroot/configparse.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace netroot::rc {

struct RcScript {
    std::string name;
    config::RcHeader header;
    // Script text; the cluster interprets scripts by the tags they provide.
    std::string body;
};

RcScript make_script(std::string name, std::string text);

enum class OrderErrc { unsatisfied_requirement, dependency_cycle, duplicate_provide, duplicate_script };

std::string_view to_string(OrderErrc code);

class OrderError : public std::runtime_error {
public:
    OrderError(OrderErrc code, std::vector<std::string> names);

    OrderErrc code() const noexcept { return code_; }
    // unsatisfied_requirement: {script, tag}; dependency_cycle: the scripts
    // on one cycle in edge order; duplicate_*: {tag or name, ...}.
    const std::vector<std::string>& names() const noexcept { return names_; }

private:
    OrderErrc code_;
    std::vector<std::string> names_;
};

struct OrderResult {
    std::vector<std::string> order;
    // BEFORE lines naming tags nobody provides.
    std::vector<std::string> warnings;
};

// Topological order; REQUIRE(t) puts provider(t) first, BEFORE(t) puts the
// script ahead of provider(t). Unconstrained scripts run in name order.
OrderResult order(const std::vector<RcScript>& scripts);

}  // namespace netroot::rc
