#include "netroot/rcorder.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>

namespace netroot::rc {

std::string_view to_string(OrderErrc code)
{
    switch (code) {
    case OrderErrc::unsatisfied_requirement: return "UnsatisfiedRequirement";
    case OrderErrc::dependency_cycle: return "DependencyCycle";
    case OrderErrc::duplicate_provide: return "DuplicateProvide";
    case OrderErrc::duplicate_script: return "DuplicateScript";
    }
    return "OrderError";
}

namespace {

std::string order_message(OrderErrc code, const std::vector<std::string>& names)
{
    std::string out(to_string(code));
    out += ":";
    for (const auto& n : names)
        out += " " + n;
    return out;
}

}  // namespace

OrderError::OrderError(OrderErrc code, std::vector<std::string> names)
    : std::runtime_error(order_message(code, names)), code_(code), names_(std::move(names))
{
}

RcScript make_script(std::string name, std::string text)
{
    RcScript script;
    script.header = config::parse_rc_header(name, text);
    script.name = std::move(name);
    script.body = std::move(text);
    return script;
}

OrderResult order(const std::vector<RcScript>& scripts)
{
    OrderResult result;

    std::map<std::string, std::size_t> by_name;
    std::map<std::string, std::size_t> provider;
    for (std::size_t i = 0; i < scripts.size(); ++i) {
        if (!by_name.emplace(scripts[i].name, i).second)
            throw OrderError(OrderErrc::duplicate_script, {scripts[i].name});
        for (const auto& tag : scripts[i].header.provides) {
            auto [it, fresh] = provider.emplace(tag, i);
            if (!fresh && it->second != i)
                throw OrderError(OrderErrc::duplicate_provide,
                                 {tag, scripts[it->second].name, scripts[i].name});
        }
    }

    std::vector<std::set<std::size_t>> out_edges(scripts.size());
    std::vector<std::set<std::size_t>> in_edges(scripts.size());
    auto add_edge = [&](std::size_t from, std::size_t to) {
        if (from != to && out_edges[from].insert(to).second)
            in_edges[to].insert(from);
    };

    for (std::size_t i = 0; i < scripts.size(); ++i) {
        const auto& s = scripts[i];
        for (const auto& tag : s.header.requires_) {
            auto it = provider.find(tag);
            if (it == provider.end())
                throw OrderError(OrderErrc::unsatisfied_requirement, {s.name, tag});
            add_edge(it->second, i);
        }
        for (const auto& tag : s.header.before) {
            auto it = provider.find(tag);
            if (it == provider.end()) {
                result.warnings.push_back(s.name + ": BEFORE names unknown tag '" + tag + "'");
                continue;
            }
            add_edge(i, it->second);
        }
    }

    std::vector<std::size_t> indegree(scripts.size());
    std::set<std::pair<std::string, std::size_t>> ready;
    for (std::size_t i = 0; i < scripts.size(); ++i) {
        indegree[i] = in_edges[i].size();
        if (indegree[i] == 0)
            ready.emplace(scripts[i].name, i);
    }
    while (!ready.empty()) {
        auto [name, i] = *ready.begin();
        ready.erase(ready.begin());
        result.order.push_back(name);
        for (std::size_t next : out_edges[i])
            if (--indegree[next] == 0)
                ready.emplace(scripts[next].name, next);
    }
    if (result.order.size() == scripts.size())
        return result;

    // Every leftover script has a leftover predecessor, so walking
    // predecessors from any of them must revisit a node.
    std::optional<std::size_t> start;
    for (std::size_t i = 0; i < scripts.size(); ++i)
        if (indegree[i] > 0 && (!start || scripts[i].name < scripts[*start].name))
            start = i;
    std::vector<std::size_t> walk;
    std::map<std::size_t, std::size_t> seen_at;
    std::size_t cur = *start;
    while (!seen_at.count(cur)) {
        seen_at[cur] = walk.size();
        walk.push_back(cur);
        std::optional<std::size_t> pred;
        for (std::size_t p : in_edges[cur])
            if (indegree[p] > 0 && (!pred || scripts[p].name < scripts[*pred].name))
                pred = p;
        cur = *pred;
    }
    std::vector<std::string> cycle;
    for (std::size_t k = walk.size(); k-- > seen_at[cur];)
        cycle.push_back(scripts[walk[k]].name);
    auto smallest = std::min_element(cycle.begin(), cycle.end());
    std::rotate(cycle.begin(), smallest, cycle.end());
    throw OrderError(OrderErrc::dependency_cycle, std::move(cycle));
}

}  // namespace netroot::rc
