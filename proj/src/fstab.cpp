#include "netroot/configparse.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace netroot::config {

std::string_view to_string(ParseErrc code)
{
    switch (code) {
    case ParseErrc::field_count: return "FieldCount";
    case ParseErrc::bad_option_syntax: return "BadOptionSyntax";
    case ParseErrc::bad_number: return "BadNumber";
    case ParseErrc::bad_assignment: return "BadAssignment";
    case ParseErrc::unbalanced_braces: return "UnbalancedBraces";
    case ParseErrc::bad_mac: return "BadMac";
    case ParseErrc::missing_semicolon: return "MissingSemicolon";
    case ParseErrc::unterminated_string: return "UnterminatedString";
    case ParseErrc::unexpected_token: return "UnexpectedToken";
    }
    return "ParseError";
}

namespace {

std::string error_text(ParseErrc code, int line, const std::string& detail)
{
    std::string out = std::string(to_string(code)) + " at line " + std::to_string(line);
    if (!detail.empty())
        out += ": " + detail;
    return out;
}

}  // namespace

ParseError::ParseError(ParseErrc code, int line, std::string detail)
    : std::runtime_error(error_text(code, line, detail)),
      code_(code),
      line_(line),
      detail_(std::move(detail))
{
}

std::vector<std::string> split_ws(std::string_view text)
{
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])))
            ++j;
        if (j > i)
            out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string trim(std::string_view text)
{
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b])))
        ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1])))
        --e;
    return std::string(text.substr(b, e - b));
}

std::string MountOption::text() const
{
    std::string out = dashed ? "-" + key : key;
    if (value)
        out += "=" + *value;
    return out;
}

bool FstabEntry::has_flag(std::string_view flag) const
{
    return std::any_of(options.begin(), options.end(),
                       [&](const MountOption& o) { return !o.value && o.key == flag; });
}

std::vector<std::string> FstabEntry::mount_options() const
{
    std::vector<std::string> out;
    for (const auto& o : options)
        out.push_back(o.value ? o.key + "=" + *o.value : o.key);
    return out;
}

namespace {

bool option_key_char(char c)
{
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

MountOption parse_mount_option(std::string_view text, int line)
{
    MountOption opt;
    if (!text.empty() && text[0] == '-') {
        opt.dashed = true;
        text.remove_prefix(1);
    }
    auto eq = text.find('=');
    std::string_view key = text.substr(0, eq);
    if (key.empty() || !std::all_of(key.begin(), key.end(), option_key_char))
        throw ParseError(ParseErrc::bad_option_syntax, line, std::string(text));
    opt.key = std::string(key);
    if (eq != std::string_view::npos) {
        auto value = text.substr(eq + 1);
        if (value.empty() || value.find_first_of(",= \t") != std::string_view::npos)
            throw ParseError(ParseErrc::bad_option_syntax, line, std::string(text));
        opt.value = std::string(value);
    } else if (opt.dashed) {
        // "-k" without a value is not a mount flag this format knows.
        throw ParseError(ParseErrc::bad_option_syntax, line, "-" + std::string(text));
    }
    return opt;
}

int parse_int(const std::string& text, int line)
{
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError(ParseErrc::bad_number, line, text);
    return value;
}

FstabEntry parse_fstab_fields(std::string_view body, int line)
{
    // Trailing "# comment" after whitespace.
    for (std::size_t i = 1; i < body.size(); ++i) {
        if (body[i] == '#' && std::isspace(static_cast<unsigned char>(body[i - 1]))) {
            body = body.substr(0, i);
            break;
        }
    }
    auto fields = split_ws(body);
    if (fields.size() != 6)
        throw ParseError(ParseErrc::field_count, line,
                         "expected 6 fields, found " + std::to_string(fields.size()));

    FstabEntry entry;
    entry.spec = fields[0];
    entry.mount_point = fields[1];
    entry.fstype = fields[2];
    std::string_view opts = fields[3];
    std::size_t i = 0;
    while (true) {
        auto j = opts.find(',', i);
        auto piece = opts.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i);
        entry.options.push_back(parse_mount_option(piece, line));
        if (j == std::string_view::npos)
            break;
        i = j + 1;
    }
    entry.dump = parse_int(fields[4], line);
    entry.pass = parse_int(fields[5], line);
    return entry;
}

// "#1.5: rest" -> ("1.5", "rest")
std::optional<std::pair<std::string, std::string_view>> release_tag(std::string_view line)
{
    std::size_t i = 1;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t'))
        ++i;
    std::size_t start = i;
    while (i < line.size() && (std::isdigit(static_cast<unsigned char>(line[i])) || line[i] == '.'))
        ++i;
    if (i == start || i >= line.size() || line[i] != ':' ||
        !std::isdigit(static_cast<unsigned char>(line[start])))
        return std::nullopt;
    return std::pair{std::string(line.substr(start, i - start)), line.substr(i + 1)};
}

}  // namespace

std::vector<FstabEntry> parse_fstab(std::string_view text, const FstabParseOptions& opts)
{
    std::vector<FstabEntry> entries;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        const std::string line = trim(raw);
        if (line.empty())
            continue;
        if (line[0] == '#') {
            auto tagged = release_tag(line);
            if (!tagged || std::find(opts.active_tags.begin(), opts.active_tags.end(),
                                     tagged->first) == opts.active_tags.end())
                continue;
            auto entry = parse_fstab_fields(tagged->second, line_no);
            entry.tag = tagged->first;
            entries.push_back(std::move(entry));
            continue;
        }
        entries.push_back(parse_fstab_fields(line, line_no));
    }
    return entries;
}

std::string serialize_fstab(const std::vector<FstabEntry>& entries)
{
    std::string out;
    for (const auto& e : entries) {
        if (!e.tag.empty())
            out += "#" + e.tag + ": ";
        std::string opts;
        for (const auto& o : e.options) {
            if (!opts.empty())
                opts += ',';
            opts += o.text();
        }
        out += e.spec + " " + e.mount_point + " " + e.fstype + " " + opts + " " +
               std::to_string(e.dump) + " " + std::to_string(e.pass) + "\n";
    }
    return out;
}

}  // namespace netroot::config
