#include "netroot/netboot.hpp"

#include "netroot/fsmodel.hpp"

#include <algorithm>
#include <cctype>

namespace netroot::boot {

std::string_view to_string(BootErrc code)
{
    switch (code) {
    case BootErrc::unknown_client_denied: return "UnknownClientDenied";
    case BootErrc::ambiguous_host: return "AmbiguousHost";
    case BootErrc::no_free_lease: return "NoFreeLease";
    case BootErrc::unresolved_address: return "UnresolvedAddress";
    case BootErrc::missing_hostname: return "MissingHostname";
    case BootErrc::kernel_not_found: return "KernelNotFound";
    }
    return "BootError";
}

BootError::BootError(BootErrc code, std::string detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code)
{
}

namespace {

using ParamList = std::vector<config::DhcpParam>;

struct Match {
    const config::DhcpHost* host;
    // Enclosing scopes, innermost first.
    std::vector<const ParamList*> scopes;
};

void collect(const std::vector<config::DhcpHost>& hosts, const std::vector<const ParamList*>& outer,
             std::string_view mac, std::vector<Match>& out)
{
    for (const auto& h : hosts) {
        if (h.mac != mac)
            continue;
        Match m{&h, {&h.params}};
        m.scopes.insert(m.scopes.end(), outer.begin(), outer.end());
        out.push_back(std::move(m));
    }
}

void collect_groups(const std::vector<config::DhcpGroup>& groups,
                    const std::vector<const ParamList*>& outer, std::string_view mac,
                    std::vector<Match>& out)
{
    for (const auto& g : groups) {
        std::vector<const ParamList*> scopes{&g.params};
        scopes.insert(scopes.end(), outer.begin(), outer.end());
        collect(g.hosts, scopes, mac, out);
        collect_groups(g.groups, scopes, mac, out);
    }
}

const config::DhcpParam* find(const Match& m, bool option, std::string_view name)
{
    for (const ParamList* scope : m.scopes)
        for (const auto& p : *scope)
            if (p.option == option && p.name == name)
                return &p;
    return nullptr;
}

bool is_dotted_quad(std::string_view s)
{
    int parts = 0;
    std::size_t i = 0;
    while (i <= s.size()) {
        std::size_t j = i;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j])))
            ++j;
        if (j == i || j - i > 3 || std::stoi(std::string(s.substr(i, j - i))) > 255)
            return false;
        ++parts;
        if (j == s.size())
            break;
        if (s[j] != '.')
            return false;
        i = j + 1;
    }
    return parts == 4;
}

}  // namespace

Lease handle_boot_request(const config::DhcpConfig& config, std::string_view raw_mac,
                          const HostsMap& hosts)
{
    const auto mac = config::canonical_mac(raw_mac);
    if (!mac)
        throw BootError(BootErrc::unknown_client_denied, std::string(raw_mac));

    std::vector<Match> matches;
    const std::vector<const ParamList*> global{&config.params};
    collect(config.hosts, global, *mac, matches);
    collect_groups(config.groups, global, *mac, matches);
    for (const auto& s : config.subnets) {
        std::vector<const ParamList*> scopes{&s.params, &config.params};
        collect(s.hosts, scopes, *mac, matches);
        collect_groups(s.groups, scopes, *mac, matches);
    }

    if (matches.empty()) {
        if (config.deny_unknown_clients)
            throw BootError(BootErrc::unknown_client_denied, *mac);
        // No dynamic pools are modelled.
        throw BootError(BootErrc::no_free_lease, *mac);
    }
    if (matches.size() > 1)
        throw BootError(BootErrc::ambiguous_host, *mac);

    const Match& m = matches.front();
    Lease lease;
    lease.mac = *mac;

    const std::string& fixed = m.host->fixed_address;
    if (fixed.empty())
        throw BootError(BootErrc::unresolved_address, m.host->name);
    if (is_dotted_quad(fixed)) {
        lease.ip = fixed;
    } else if (auto it = hosts.find(fixed); it != hosts.end()) {
        lease.ip = it->second;
    } else {
        throw BootError(BootErrc::unresolved_address, fixed);
    }

    if (config.use_host_decl_names) {
        lease.hostname = m.host->name;
    } else if (const auto* p = find(m, true, "host-name")) {
        lease.hostname = p->text();
    }
    if (lease.hostname.empty())
        throw BootError(BootErrc::missing_hostname, *mac);

    auto text_of = [&](bool option, std::string_view name) {
        const auto* p = find(m, option, name);
        return p ? p->text() : std::string();
    };
    auto list_of = [&](std::string_view name) {
        const auto* p = find(m, true, name);
        return p ? p->list() : std::vector<std::string>{};
    };
    lease.domain_name = text_of(true, "domain-name");
    lease.filename = text_of(false, "filename");
    lease.next_server = text_of(false, "next-server");
    lease.server_name = text_of(false, "server-name");
    lease.root_path = text_of(true, "root-path");
    lease.routers = list_of("routers");
    lease.dns_servers = list_of("domain-name-servers");
    lease.lpr_servers = list_of("lpr-servers");
    return lease;
}

void BootArea::add(std::string name, std::string image)
{
    images_[std::move(name)] = std::move(image);
}

bool BootArea::contains(std::string_view name) const
{
    return images_.find(name) != images_.end();
}

KernelHandle BootArea::fetch(std::string_view name) const
{
    auto it = images_.find(name);
    if (name.empty() || it == images_.end())
        throw BootError(BootErrc::kernel_not_found, std::string(name));
    return KernelHandle{it->first, it->second.size(), fs::hex64(fs::fnv1a64(it->second))};
}

KernelHandle fetch_kernel(const BootArea& area, std::string_view filename)
{
    return area.fetch(filename);
}

}  // namespace netroot::boot
