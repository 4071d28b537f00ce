#include "netroot/configparse.hpp"

#include <cctype>

namespace netroot::config {

std::optional<std::string> canonical_mac(std::string_view text)
{
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    int octets = 0;
    std::size_t i = 0;
    while (true) {
        std::size_t start = i;
        int value = 0;
        while (i < text.size() && std::isxdigit(static_cast<unsigned char>(text[i]))) {
            const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
            value = value * 16 + (c <= '9' ? c - '0' : c - 'a' + 10);
            ++i;
        }
        const std::size_t digits = i - start;
        if (digits == 0 || digits > 2)
            return std::nullopt;
        if (!out.empty())
            out += ':';
        out += hex[value >> 4];
        out += hex[value & 0xf];
        ++octets;
        if (i == text.size())
            break;
        if (text[i] != ':' || octets == 6)
            return std::nullopt;
        ++i;
    }
    if (octets != 6)
        return std::nullopt;
    return out;
}

std::string DhcpParam::text() const
{
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
        std::string out;
        for (std::size_t i = 1; i + 1 < value.size(); ++i) {
            if (value[i] == '\\' && i + 2 < value.size())
                ++i;
            out += value[i];
        }
        return out;
    }
    return value;
}

std::vector<std::string> DhcpParam::list() const
{
    std::vector<std::string> items;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < value.size(); ++i) {
        const char c = value[i];
        if (c == '"') {
            quoted = !quoted;
        } else if (c == '\\' && quoted && i + 1 < value.size()) {
            cur += value[++i];
        } else if (c == ',' && !quoted) {
            items.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty() || !items.empty())
        items.push_back(trim(cur));
    return items;
}

bool DhcpConfig::operator==(const DhcpConfig& other) const
{
    return params == other.params && deny_unknown_clients == other.deny_unknown_clients &&
           use_host_decl_names == other.use_host_decl_names && subnets == other.subnets &&
           groups == other.groups && hosts == other.hosts;
}

namespace {

struct Token {
    enum Kind { word, string, semi, lbrace, rbrace, comma, eof } kind;
    std::string text;
    int line;
};

std::vector<Token> tokenize(std::string_view text)
{
    std::vector<Token> tokens;
    int line = 1;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n') {
            ++line;
            ++i;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '#') {
            while (i < text.size() && text[i] != '\n')
                ++i;
        } else if (c == ';') {
            tokens.push_back({Token::semi, ";", line});
            ++i;
        } else if (c == '{') {
            tokens.push_back({Token::lbrace, "{", line});
            ++i;
        } else if (c == '}') {
            tokens.push_back({Token::rbrace, "}", line});
            ++i;
        } else if (c == ',') {
            tokens.push_back({Token::comma, ",", line});
            ++i;
        } else if (c == '"') {
            const int start_line = line;
            std::string value;
            ++i;
            while (i < text.size() && text[i] != '"') {
                if (text[i] == '\\' && i + 1 < text.size())
                    ++i;
                if (text[i] == '\n')
                    ++line;
                value += text[i++];
            }
            if (i >= text.size())
                throw ParseError(ParseErrc::unterminated_string, start_line);
            ++i;
            tokens.push_back({Token::string, std::move(value), start_line});
        } else {
            const std::size_t start = i;
            while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])) &&
                   std::string_view(";{},\"#").find(text[i]) == std::string_view::npos)
                ++i;
            tokens.push_back({Token::word, std::string(text.substr(start, i - start)), line});
        }
    }
    tokens.push_back({Token::eof, "", line});
    return tokens;
}

std::string quote(std::string_view s)
{
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\')
            out += '\\';
        out += c;
    }
    return out + "\"";
}

std::string join_value(const std::vector<Token>& stmt, std::size_t from)
{
    std::string out;
    for (std::size_t i = from; i < stmt.size(); ++i) {
        const Token& t = stmt[i];
        if (t.kind == Token::comma) {
            out += ",";
            continue;
        }
        if (!out.empty())
            out += ' ';
        out += t.kind == Token::string ? quote(t.text) : t.text;
    }
    return out;
}

enum class Scope { top, subnet, group, host };

struct Context {
    Scope scope;
    std::vector<DhcpParam>* params;
    std::vector<DhcpGroup>* groups = nullptr;
    std::vector<DhcpHost>* hosts = nullptr;
    DhcpHost* host = nullptr;
};

class Parser {
public:
    Parser(std::vector<Token> tokens, DhcpConfig& config)
        : tokens_(std::move(tokens)), config_(config)
    {
    }

    void run()
    {
        Context top{Scope::top, &config_.params, &config_.groups, &config_.hosts};
        body(top, 0);
    }

private:
    const Token& peek() const { return tokens_[pos_]; }

    void warn(int line, std::string message)
    {
        config_.warnings.push_back(ParseWarning{line, std::move(message)});
    }

    // Parses statements until the matching '}' (consumed) or, at top level,
    // end of input.
    void body(Context& ctx, int open_line)
    {
        while (true) {
            const Token& t = peek();
            if (t.kind == Token::eof) {
                if (ctx.scope != Scope::top)
                    throw ParseError(ParseErrc::unbalanced_braces, open_line, "block never closed");
                return;
            }
            if (t.kind == Token::rbrace) {
                if (ctx.scope == Scope::top)
                    throw ParseError(ParseErrc::unbalanced_braces, t.line, "unexpected '}'");
                ++pos_;
                return;
            }

            std::vector<Token> stmt;
            while (peek().kind == Token::word || peek().kind == Token::string ||
                   peek().kind == Token::comma)
                stmt.push_back(tokens_[pos_++]);

            const Token& end = peek();
            if (end.kind == Token::semi) {
                ++pos_;
                if (!stmt.empty())
                    statement(ctx, stmt);
            } else if (end.kind == Token::lbrace) {
                ++pos_;
                block(ctx, stmt, end.line);
            } else {
                const int line = stmt.empty() ? end.line : stmt.back().line;
                throw ParseError(ParseErrc::missing_semicolon, line,
                                 stmt.empty() ? std::string() : stmt.front().text);
            }
        }
    }

    void skip_block(int open_line)
    {
        int depth = 1;
        while (depth > 0) {
            const Token& t = tokens_[pos_];
            if (t.kind == Token::eof)
                throw ParseError(ParseErrc::unbalanced_braces, open_line, "block never closed");
            if (t.kind == Token::lbrace)
                ++depth;
            if (t.kind == Token::rbrace)
                --depth;
            ++pos_;
        }
    }

    void block(Context& ctx, const std::vector<Token>& head, int line)
    {
        const std::string kind = head.empty() ? std::string() : head[0].text;
        if (kind == "subnet" && ctx.scope == Scope::top && head.size() == 4 &&
            head[2].text == "netmask") {
            DhcpSubnet& subnet = config_.subnets.emplace_back();
            subnet.network = head[1].text;
            subnet.netmask = head[3].text;
            Context inner{Scope::subnet, &subnet.params, &subnet.groups, &subnet.hosts};
            body(inner, line);
            return;
        }
        if (kind == "group" && head.size() == 1 && ctx.groups != nullptr) {
            DhcpGroup group;
            Context inner{Scope::group, &group.params, &group.groups, &group.hosts};
            body(inner, line);
            ctx.groups->push_back(std::move(group));
            return;
        }
        if (kind == "host" && head.size() == 2 && ctx.hosts != nullptr) {
            DhcpHost host;
            host.name = head[1].text;
            Context inner{Scope::host, &host.params, nullptr, nullptr, &host};
            body(inner, line);
            ctx.hosts->push_back(std::move(host));
            return;
        }
        warn(line, "unsupported block '" + join_value(head, 0) + "' skipped");
        skip_block(line);
    }

    void statement(Context& ctx, const std::vector<Token>& stmt)
    {
        const std::string& head = stmt[0].text;
        const int line = stmt[0].line;
        if (stmt[0].kind == Token::word && head == "option" && stmt.size() >= 2) {
            ctx.params->push_back(DhcpParam{true, stmt[1].text, join_value(stmt, 2)});
            return;
        }
        if (head == "filename" || head == "next-server" || head == "server-name") {
            ctx.params->push_back(DhcpParam{false, head, join_value(stmt, 1)});
            return;
        }
        if (head == "deny" && stmt.size() == 2 && stmt[1].text == "unknown-clients" &&
            ctx.scope == Scope::top) {
            config_.deny_unknown_clients = true;
            return;
        }
        if (head == "use-host-decl-names" && stmt.size() == 2 && ctx.scope == Scope::top) {
            const std::string& v = stmt[1].text;
            config_.use_host_decl_names = v == "on" || v == "true";
            return;
        }
        if (ctx.scope == Scope::host && head == "hardware") {
            if (stmt.size() != 3 || stmt[1].text != "ethernet")
                throw ParseError(ParseErrc::bad_mac, line, join_value(stmt, 0));
            auto mac = canonical_mac(stmt[2].text);
            if (!mac)
                throw ParseError(ParseErrc::bad_mac, line, stmt[2].text);
            ctx.host->mac = *mac;
            return;
        }
        if (ctx.scope == Scope::host && head == "fixed-address" && stmt.size() >= 2) {
            ctx.host->fixed_address = join_value(stmt, 1);
            return;
        }
        warn(line, "unsupported statement '" + join_value(stmt, 0) + "' skipped");
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
    DhcpConfig& config_;
};

void indent(std::string& out, int depth)
{
    out.append(static_cast<std::size_t>(depth) * 8, ' ');
}

void emit_params(std::string& out, const std::vector<DhcpParam>& params, int depth)
{
    for (const auto& p : params) {
        indent(out, depth);
        out += p.option ? "option " + p.name : p.name;
        if (!p.value.empty())
            out += " " + p.value;
        out += ";\n";
    }
}

void emit_hosts(std::string& out, const std::vector<DhcpHost>& hosts, int depth)
{
    for (const auto& h : hosts) {
        indent(out, depth);
        out += "host " + h.name + " {\n";
        if (!h.mac.empty()) {
            indent(out, depth + 1);
            out += "hardware ethernet " + h.mac + ";\n";
        }
        if (!h.fixed_address.empty()) {
            indent(out, depth + 1);
            out += "fixed-address " + h.fixed_address + ";\n";
        }
        emit_params(out, h.params, depth + 1);
        indent(out, depth);
        out += "}\n";
    }
}

void emit_groups(std::string& out, const std::vector<DhcpGroup>& groups, int depth)
{
    for (const auto& g : groups) {
        indent(out, depth);
        out += "group {\n";
        emit_params(out, g.params, depth + 1);
        emit_groups(out, g.groups, depth + 1);
        emit_hosts(out, g.hosts, depth + 1);
        indent(out, depth);
        out += "}\n";
    }
}

}  // namespace

DhcpConfig parse_dhcpd(std::string_view text)
{
    DhcpConfig config;
    Parser parser(tokenize(text), config);
    parser.run();
    return config;
}

std::string serialize_dhcpd(const DhcpConfig& config)
{
    std::string out;
    emit_params(out, config.params, 0);
    if (config.deny_unknown_clients)
        out += "deny unknown-clients;\n";
    if (config.use_host_decl_names)
        out += "use-host-decl-names on;\n";
    for (const auto& s : config.subnets) {
        out += "subnet " + s.network + " netmask " + s.netmask + " {\n";
        emit_params(out, s.params, 1);
        emit_groups(out, s.groups, 1);
        emit_hosts(out, s.hosts, 1);
        out += "}\n";
    }
    emit_groups(out, config.groups, 0);
    emit_hosts(out, config.hosts, 0);
    return out;
}

}  // namespace netroot::config
