#pragma once

// Parsers for the on-disk formats a diskless client touches while booting:
// /etc/fstab, /etc/rc.conf, rc.d dependency headers and a dhcpd.conf subset.
// Every parser either returns a value or throws ParseError carrying the
// offending line number; none of them evaluates shell.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace netroot::config {

enum class ParseErrc {
    field_count,
    bad_option_syntax,
    bad_number,
    bad_assignment,
    unbalanced_braces,
    bad_mac,
    missing_semicolon,
    unterminated_string,
    unexpected_token,
};

std::string_view to_string(ParseErrc code);

class ParseError : public std::runtime_error {
public:
    ParseError(ParseErrc code, int line, std::string detail = {});

    ParseErrc code() const noexcept { return code_; }
    int line() const noexcept { return line_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ParseErrc code_;
    int line_;
    std::string detail_;
};

struct ParseWarning {
    int line = 0;
    std::string message;

    bool operator==(const ParseWarning&) const = default;
};

// ---------------------------------------------------------------------------
// fstab

// "rw" is a bare flag; "-s=32768" is a dashed key/value pair.
struct MountOption {
    std::string key;
    std::optional<std::string> value;
    bool dashed = false;

    std::string text() const;
    bool operator==(const MountOption&) const = default;
};

struct FstabEntry {
    std::string spec;
    std::string mount_point;
    std::string fstype;
    std::vector<MountOption> options;
    int dump = 0;
    int pass = 0;
    // Release tag of a "#1.5: ..." line that was activated, empty otherwise.
    std::string tag;

    bool has_flag(std::string_view flag) const;
    // Options as the mount layer spells them: "rw", "s=32768", "i=512".
    std::vector<std::string> mount_options() const;
    bool operator==(const FstabEntry&) const = default;
};

struct FstabParseOptions {
    // Lines written "#<tag>: <entry>" are parsed as entries when <tag> is
    // listed here; otherwise they are ordinary comments.
    std::vector<std::string> active_tags;
};

std::vector<FstabEntry> parse_fstab(std::string_view text, const FstabParseOptions& opts = {});
std::string serialize_fstab(const std::vector<FstabEntry>& entries);

// ---------------------------------------------------------------------------
// rc.conf

class RcConf {
public:
    using Var = std::pair<std::string, std::string>;

    // Later assignments override earlier ones but keep the first position.
    void set(std::string name, std::string value);
    std::optional<std::string> get(std::string_view name) const;
    std::string get_or(std::string_view name, std::string fallback) const;
    // rc.subr truth test: YES/TRUE/ON/1, case-insensitive.
    bool enabled(std::string_view name, bool fallback = false) const;

    const std::vector<Var>& vars() const noexcept { return vars_; }
    bool operator==(const RcConf&) const = default;

private:
    std::vector<Var> vars_;
};

RcConf parse_rc_conf(std::string_view text);
std::string serialize_rc_conf(const RcConf& conf);
bool is_shell_identifier(std::string_view name);

// ---------------------------------------------------------------------------
// rc.d headers

struct RcHeader {
    std::vector<std::string> provides;
    std::vector<std::string> requires_;
    std::vector<std::string> before;

    bool operator==(const RcHeader&) const = default;
};

RcHeader parse_rc_header(std::string_view script_name, std::string_view text);
std::string serialize_rc_header(const RcHeader& header);

// ---------------------------------------------------------------------------
// dhcpd.conf

// One "option <name> <value>;" or plain "<name> <value>;" statement. The
// value keeps its source spelling (quotes included, lists as "a, b").
struct DhcpParam {
    bool option = false;
    std::string name;
    std::string value;

    // Value with surrounding quotes removed.
    std::string text() const;
    // Comma-separated items, unquoted.
    std::vector<std::string> list() const;
    bool operator==(const DhcpParam&) const = default;
};

struct DhcpHost {
    std::string name;
    std::string mac;            // lowercase, two hex digits per octet
    std::string fixed_address;  // name or dotted quad, as written
    std::vector<DhcpParam> params;

    bool operator==(const DhcpHost&) const = default;
};

struct DhcpGroup {
    std::vector<DhcpParam> params;
    std::vector<DhcpGroup> groups;
    std::vector<DhcpHost> hosts;

    bool operator==(const DhcpGroup&) const = default;
};

struct DhcpSubnet {
    std::string network;
    std::string netmask;
    std::vector<DhcpParam> params;
    std::vector<DhcpGroup> groups;
    std::vector<DhcpHost> hosts;

    bool operator==(const DhcpSubnet&) const = default;
};

struct DhcpConfig {
    std::vector<DhcpParam> params;
    bool deny_unknown_clients = false;
    bool use_host_decl_names = false;
    std::vector<DhcpSubnet> subnets;
    std::vector<DhcpGroup> groups;
    std::vector<DhcpHost> hosts;
    // Statements outside the supported subset, skipped.
    std::vector<ParseWarning> warnings;

    // Structural equality; warnings are not part of the configuration.
    bool operator==(const DhcpConfig& other) const;
};

DhcpConfig parse_dhcpd(std::string_view text);
std::string serialize_dhcpd(const DhcpConfig& config);
// Accepts six colon-separated hex octets; returns the canonical spelling.
std::optional<std::string> canonical_mac(std::string_view text);

// Shared helpers.
std::vector<std::string> split_ws(std::string_view text);
std::string trim(std::string_view text);

}  // namespace netroot::config
