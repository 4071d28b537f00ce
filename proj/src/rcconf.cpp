#include "netroot/configparse.hpp"

#include <algorithm>
#include <cctype>

namespace netroot::config {

void RcConf::set(std::string name, std::string value)
{
    for (auto& var : vars_) {
        if (var.first == name) {
            var.second = std::move(value);
            return;
        }
    }
    vars_.emplace_back(std::move(name), std::move(value));
}

std::optional<std::string> RcConf::get(std::string_view name) const
{
    for (const auto& var : vars_)
        if (var.first == name)
            return var.second;
    return std::nullopt;
}

std::string RcConf::get_or(std::string_view name, std::string fallback) const
{
    auto v = get(name);
    return v ? *v : std::move(fallback);
}

bool RcConf::enabled(std::string_view name, bool fallback) const
{
    auto v = get(name);
    if (!v)
        return fallback;
    std::string upper = *v;
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return upper == "YES" || upper == "TRUE" || upper == "ON" || upper == "1";
}

bool is_shell_identifier(std::string_view name)
{
    if (name.empty() || std::isdigit(static_cast<unsigned char>(name[0])))
        return false;
    return std::all_of(name.begin(), name.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_';
    });
}

namespace {

bool is_space(char c)
{
    return c == ' ' || c == '\t' || c == '\r';
}

// Reads one shell word starting at i; quotes are removed.
std::string read_word(std::string_view line, std::size_t& i, int line_no)
{
    std::string value;
    while (i < line.size() && !is_space(line[i])) {
        const char c = line[i];
        if (c == '"') {
            ++i;
            while (i < line.size() && line[i] != '"') {
                if (line[i] == '\\' && i + 1 < line.size() &&
                    std::string_view("$`\"\\").find(line[i + 1]) != std::string_view::npos)
                    ++i;
                value += line[i++];
            }
            if (i >= line.size())
                throw ParseError(ParseErrc::bad_assignment, line_no, "unterminated double quote");
            ++i;
        } else if (c == '\'') {
            ++i;
            while (i < line.size() && line[i] != '\'')
                value += line[i++];
            if (i >= line.size())
                throw ParseError(ParseErrc::bad_assignment, line_no, "unterminated single quote");
            ++i;
        } else if (c == '\\' && i + 1 < line.size()) {
            value += line[i + 1];
            i += 2;
        } else {
            value += c;
            ++i;
        }
    }
    return value;
}

}  // namespace

RcConf parse_rc_conf(std::string_view text)
{
    RcConf conf;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        std::size_t i = 0;
        while (true) {
            while (i < line.size() && is_space(line[i]))
                ++i;
            if (i >= line.size() || line[i] == '#')
                break;
            const std::size_t start = i;
            while (i < line.size() && line[i] != '=' && !is_space(line[i]))
                ++i;
            std::string_view name = line.substr(start, i - start);
            if (i >= line.size() || line[i] != '=' || !is_shell_identifier(name))
                throw ParseError(ParseErrc::bad_assignment, line_no, std::string(line.substr(start)));
            ++i;
            conf.set(std::string(name), read_word(line, i, line_no));
        }
    }
    return conf;
}

namespace {

bool needs_quotes(const std::string& value)
{
    if (value.empty())
        return true;
    return value.find_first_of(" \t#\"'\\$`;&|<>()*?[]~") != std::string::npos;
}

}  // namespace

std::string serialize_rc_conf(const RcConf& conf)
{
    std::string out;
    for (const auto& [name, value] : conf.vars()) {
        out += name + "=";
        if (!needs_quotes(value)) {
            out += value;
        } else {
            out += '"';
            for (char c : value) {
                if (c == '"' || c == '\\' || c == '$' || c == '`')
                    out += '\\';
                out += c;
            }
            out += '"';
        }
        out += '\n';
    }
    return out;
}

}  // namespace netroot::config
