#include "netroot/configparse.hpp"

namespace netroot::config {

RcHeader parse_rc_header(std::string_view script_name, std::string_view text)
{
    RcHeader header;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;

        if (line.empty() || line[0] != '#')
            continue;
        line.remove_prefix(1);
        while (!line.empty() && (line.front() == ' ' || line.front() == '\t'))
            line.remove_prefix(1);

        std::vector<std::string>* target = nullptr;
        std::string_view rest;
        for (auto [keyword, list] : {std::pair{std::string_view("PROVIDE:"), &header.provides},
                                     std::pair{std::string_view("REQUIRE:"), &header.requires_},
                                     std::pair{std::string_view("BEFORE:"), &header.before}}) {
            if (line.substr(0, keyword.size()) == keyword) {
                target = list;
                rest = line.substr(keyword.size());
                break;
            }
        }
        if (target == nullptr)
            continue;
        for (auto& name : split_ws(rest))
            target->push_back(std::move(name));
    }
    if (header.provides.empty())
        header.provides.emplace_back(script_name);
    return header;
}

std::string serialize_rc_header(const RcHeader& header)
{
    std::string out;
    auto emit = [&](std::string_view keyword, const std::vector<std::string>& names) {
        if (names.empty())
            return;
        out += "# ";
        out += keyword;
        for (const auto& n : names)
            out += " " + n;
        out += '\n';
    };
    emit("PROVIDE:", header.provides);
    emit("REQUIRE:", header.requires_);
    emit("BEFORE:", header.before);
    return out;
}

}  // namespace netroot::config
