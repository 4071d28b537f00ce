#include "netroot/cluster.hpp"

namespace netroot::cluster {

std::vector<ServiceSpec> default_services()
{
    std::vector<ServiceSpec> services;
    auto add = [&](std::string name) -> ServiceSpec& {
        ServiceSpec& s = services.emplace_back();
        s.pid_file = "/var/run/" + name + ".pid";
        s.name = std::move(name);
        return s;
    };

    auto& syslogd = add("syslogd");
    syslogd.sockets = {"/var/run/log"};
    syslogd.remote_log = true;
    syslogd.default_enabled = true;

    add("sshd").reads = {"/etc/ssh/ssh_host_key"};
    add("lpd").sockets = {"/var/run/printer"};
    add("inetd");
    add("ntpd");
    add("postfix");
    add("rpcbind");
    add("ypbind");

    auto& amd = add("amd");
    amd.inert = true;
    return services;
}

const std::vector<std::string>& makedev_nodes(MakedevSet set)
{
    static const std::vector<std::string> all = {
        "console", "constty", "tty",   "null",  "zero",  "mem",   "kmem",  "klog",
        "random",  "urandom", "stdin", "stdout", "stderr", "ttyp0", "ttyp1", "ttyp2",
        "ttyp3",   "ttyp4",   "ttyp5", "ttyp6", "ttyp7", "ptyp0", "ptyp1", "ptyp2",
    };
    static const std::vector<std::string> minimal = {
        "console", "tty", "null", "zero", "ttyp0", "ttyp1", "ptyp0", "ptyp1",
    };
    return set == MakedevSet::all ? all : minimal;
}

std::optional<MakedevSet> parse_makedev_set(std::string_view text)
{
    if (text == "all")
        return MakedevSet::all;
    if (text == "minimal")
        return MakedevSet::minimal;
    return std::nullopt;
}

}  // namespace netroot::cluster
