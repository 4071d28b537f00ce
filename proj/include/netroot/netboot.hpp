#pragma once

// DHCP service model: answers a client's boot request from a parsed
// dhcpd.conf, and serves kernel images from the server's boot area.

#include "netroot/configparse.hpp"

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace netroot::boot {

struct Lease {
    std::string mac;
    std::string ip;
    std::string hostname;
    std::string domain_name;
    std::string filename;
    std::string next_server;
    std::string server_name;
    std::string root_path;
    std::vector<std::string> routers;
    std::vector<std::string> dns_servers;
    std::vector<std::string> lpr_servers;

    bool operator==(const Lease&) const = default;
};

enum class BootErrc {
    unknown_client_denied,
    ambiguous_host,
    no_free_lease,
    unresolved_address,
    missing_hostname,
    kernel_not_found,
};

std::string_view to_string(BootErrc code);

class BootError : public std::runtime_error {
public:
    BootError(BootErrc code, std::string detail);

    BootErrc code() const noexcept { return code_; }

private:
    BootErrc code_;
};

// Static name -> dotted-quad table standing in for DNS.
using HostsMap = std::map<std::string, std::string, std::less<>>;

// Scope precedence is host > group > subnet > global.
Lease handle_boot_request(const config::DhcpConfig& config, std::string_view mac,
                          const HostsMap& hosts);

struct KernelHandle {
    std::string name;
    std::size_t size = 0;
    std::string digest;
};

class BootArea {
public:
    void add(std::string name, std::string image);
    bool contains(std::string_view name) const;
    KernelHandle fetch(std::string_view name) const;
    const std::map<std::string, std::string, std::less<>>& images() const noexcept { return images_; }

private:
    std::map<std::string, std::string, std::less<>> images_;
};

KernelHandle fetch_kernel(const BootArea& area, std::string_view filename);

}  // namespace netroot::boot
