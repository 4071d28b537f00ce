#include "netroot/cluster.hpp"

#include "netroot/rcorder.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

namespace netroot::cluster {

std::string_view to_string(Phase phase)
{
    switch (phase) {
    case Phase::powered_off: return "PoweredOff";
    case Phase::leased: return "Leased";
    case Phase::kernel_loaded: return "KernelLoaded";
    case Phase::root_mounted: return "RootMounted";
    case Phase::rc_running: return "RcRunning";
    case Phase::multi_user: return "MultiUser";
    case Phase::shutting_down: return "ShuttingDown";
    case Phase::halted: return "Halted";
    }
    return "?";
}

std::optional<Phase> parse_phase(std::string_view text)
{
    for (Phase p : {Phase::powered_off, Phase::leased, Phase::kernel_loaded, Phase::root_mounted,
                    Phase::rc_running, Phase::multi_user, Phase::shutting_down, Phase::halted})
        if (to_string(p) == text)
            return p;
    return std::nullopt;
}

std::string_view to_string(Mode mode)
{
    return mode == Mode::compat15 ? "1.5" : "1.6";
}

std::optional<Mode> parse_mode(std::string_view text)
{
    if (text == "1.5" || text == "compat-1.5")
        return Mode::compat15;
    if (text == "1.6")
        return Mode::v16;
    return std::nullopt;
}

std::string Event::render() const
{
    char step_buf[24];
    std::snprintf(step_buf, sizeof step_buf, "%06llu", static_cast<unsigned long long>(step));
    return std::string(step_buf) + " " + client + " " + action + " " +
           (target.empty() ? "-" : target) + " | " + detail + " | " + outcome;
}

void ServerState::rebaseline()
{
    baseline_hashes.clear();
    for (const auto& [path, exp] : nfs.exports())
        if (exp.read_only)
            baseline_hashes[path] = nfs.export_hash(path);
}

std::vector<std::string> dhcp_root_paths(const config::DhcpConfig& dhcp)
{
    std::vector<std::string> out;
    auto scan = [&](const std::vector<config::DhcpParam>& params) {
        for (const auto& p : params)
            if (p.option && p.name == "root-path" &&
                std::find(out.begin(), out.end(), p.text()) == out.end())
                out.push_back(p.text());
    };
    std::function<void(const config::DhcpGroup&)> group = [&](const config::DhcpGroup& g) {
        scan(g.params);
        for (const auto& h : g.hosts)
            scan(h.params);
        for (const auto& inner : g.groups)
            group(inner);
    };
    scan(dhcp.params);
    for (const auto& s : dhcp.subnets) {
        scan(s.params);
        for (const auto& h : s.hosts)
            scan(h.params);
        for (const auto& g : s.groups)
            group(g);
    }
    for (const auto& g : dhcp.groups)
        group(g);
    for (const auto& h : dhcp.hosts)
        scan(h.params);
    return out;
}

std::vector<std::string> dhcp_host_names(const config::DhcpConfig& dhcp)
{
    std::vector<std::string> out;
    std::function<void(const config::DhcpGroup&)> group = [&](const config::DhcpGroup& g) {
        for (const auto& h : g.hosts)
            out.push_back(h.name);
        for (const auto& inner : g.groups)
            group(inner);
    };
    for (const auto& s : dhcp.subnets) {
        for (const auto& h : s.hosts)
            out.push_back(h.name);
        for (const auto& g : s.groups)
            group(g);
    }
    for (const auto& g : dhcp.groups)
        group(g);
    for (const auto& h : dhcp.hosts)
        out.push_back(h.name);
    return out;
}

namespace {

// Thrown inside a boot stage to halt the client with a named cause.
struct Halt {
    std::string cause;
};

std::string error_outcome(std::string_view code)
{
    return "error:" + std::string(code);
}

// "server:/path" -> {"server", "/path"}
std::pair<std::string, std::string> split_source(const std::string& source)
{
    auto colon = source.find(':');
    if (colon == std::string::npos)
        return {std::string(), source};
    return {source.substr(0, colon), source.substr(colon + 1)};
}

std::string join(const std::vector<std::string>& items, const std::string& sep)
{
    std::string out;
    for (const auto& item : items) {
        if (!out.empty())
            out += sep;
        out += item;
    }
    return out;
}

const std::vector<std::string> small_mfs_options = {"i=256", "s=512"};

}  // namespace

// ---------------------------------------------------------------------------

Simulation::Simulation(ServerState server, SimulationConfig config)
    : server_(std::move(server)), config_(std::move(config))
{
    std::set<std::string> names;
    for (const auto& spec : config_.clients) {
        if (!names.insert(spec.name).second)
            throw SimulationError("duplicate client name '" + spec.name + "'");
        auto c = std::make_unique<ClientState>();
        c->spec = spec;
        c->mode = config_.mode;
        clients_.push_back(std::move(c));
    }
    for (const auto& svc : config_.services)
        if (!svc.inert && fs::parent_path(svc.pid_file) != "/var/run")
            throw SimulationError("service " + svc.name + ": pid file " + svc.pid_file +
                                  " is not under /var/run");
    server_.rebaseline();
}

std::vector<std::string> Simulation::validate() const
{
    std::vector<std::string> problems;
    const auto host_names = dhcp_host_names(config_.dhcp);

    for (const auto& root : dhcp_root_paths(config_.dhcp)) {
        if (server_.nfs.find_export(root) == nullptr) {
            problems.push_back("root-path " + root + " is not exported");
            continue;
        }
        const fs::FsNode* rc_conf = server_.nfs.tree().walk(root.substr(1) + "/etc/rc.conf");
        if (rc_conf == nullptr)
            continue;
        config::RcConf env;
        try {
            env = config::parse_rc_conf(rc_conf->content());
        } catch (const config::ParseError& e) {
            problems.push_back(root + "/etc/rc.conf: " + e.what());
            continue;
        }
        for (const char* var : {"shroot_pfx_var", "shroot_pfx_swap"}) {
            const std::string prefix = env.get_or(var, "");
            if (prefix.empty())
                continue;
            for (const auto& host : host_names) {
                auto [server, path] = split_source(prefix + host);
                if (server != server_.nfs.name() || server_.nfs.find_export(path) == nullptr)
                    problems.push_back(std::string(var) + ": no export " + prefix + host +
                                       " for host " + host);
            }
        }
    }
    return problems;
}

std::vector<std::string> Simulation::client_names() const
{
    std::vector<std::string> out;
    for (const auto& c : clients_)
        out.push_back(c->spec.name);
    return out;
}

bool Simulation::has_client(std::string_view name) const
{
    return std::any_of(clients_.begin(), clients_.end(),
                       [&](const auto& c) { return c->spec.name == name; });
}

const ClientState& Simulation::client(std::string_view name) const
{
    for (const auto& c : clients_)
        if (c->spec.name == name)
            return *c;
    throw SimulationError("unknown client '" + std::string(name) + "'");
}

ClientState& Simulation::mut(std::string_view name)
{
    return const_cast<ClientState&>(client(name));
}

std::string Simulation::render_trace() const
{
    std::string out;
    for (const auto& e : events_)
        out += e.render() + "\n";
    return out;
}

void Simulation::record(ClientState& c, std::string action, std::string target, std::string detail,
                        std::string outcome)
{
    Event e{++step_, c.spec.name, std::move(action), std::move(target), std::move(detail),
            std::move(outcome)};
    c.events.push_back(e);
    events_.push_back(e);
    if (on_event)
        on_event(events_.back());
}

void Simulation::record_server(std::string action, std::string target, std::string detail,
                               std::string outcome)
{
    events_.push_back(Event{++step_, server_.nfs.name(), std::move(action), std::move(target),
                            std::move(detail), std::move(outcome)});
    if (on_event)
        on_event(events_.back());
}

void Simulation::after_operation()
{
    for (auto& c : clients_) {
        const auto& seen = c->mounts.ro_violations();
        for (; c->ro_seen < seen.size(); ++c->ro_seen) {
            const auto& v = seen[c->ro_seen];
            ro_attempts_.push_back(RoAttempt{c->spec.name, v});
            record(*c, "violation", v.path, v.operation + " refused by read-only mount " + v.mount_point,
                   "ReadOnlyViolation");
        }
    }
    if (config_.strict) {
        for (auto& problem : check_immutability())
            if (strict_seen_.insert(problem).second)
                strict_violations_.push_back("step " + std::to_string(step_) + ": " + problem);
    }
}

void Simulation::halt(ClientState& c, const std::string& cause)
{
    c.mounts.clear();
    c.services.clear();
    c.logins.clear();
    c.remote_syslog = false;
    c.swap_active = false;
    c.phase = Phase::halted;
    c.halt_cause = cause;
    record(c, "halt", "", cause, "halted");
}

void Simulation::power_cycle(ClientState& c)
{
    c.mounts.clear();
    c.lease.reset();
    c.kernel.reset();
    c.env = config::RcConf{};
    c.swap_active = false;
    c.halt_cause.clear();
    c.single_user = false;
    c.rc_order.clear();
    c.rc_next = 0;
    c.dev_checked = false;
    c.services.clear();
    c.remote_syslog = false;
    c.host_key_fingerprint.reset();
    c.logins.clear();
    c.phase = Phase::powered_off;
    record(c, "power-on", "", "reset", "ok");
}

// ---------------------------------------------------------------------------
// boot

bool Simulation::booting(std::string_view name) const
{
    const ClientState& c = client(name);
    switch (c.phase) {
    case Phase::powered_off:
    case Phase::leased:
    case Phase::kernel_loaded:
    case Phase::root_mounted:
        return true;
    case Phase::rc_running:
        return !c.single_user;
    default:
        return false;
    }
}

void Simulation::boot(std::string_view name)
{
    ClientState& c = mut(name);
    if (c.phase == Phase::halted)
        power_cycle(c);
    if (c.phase != Phase::powered_off)
        throw SimulationError("boot " + c.spec.name + ": client is " +
                              std::string(to_string(c.phase)) + ", expected PoweredOff");
    while (step(name)) {
    }
}

void Simulation::boot_interleaved(const std::vector<std::string>& names, std::uint64_t seed)
{
    for (const auto& name : names) {
        ClientState& c = mut(name);
        if (c.phase == Phase::halted)
            power_cycle(c);
        if (c.phase != Phase::powered_off)
            throw SimulationError("boot " + c.spec.name + ": client is " +
                                  std::string(to_string(c.phase)) + ", expected PoweredOff");
    }
    std::mt19937_64 rng(seed);
    std::vector<std::string> active = names;
    while (!active.empty()) {
        const std::size_t pick = static_cast<std::size_t>(rng() % active.size());
        if (!step(active[pick]))
            active.erase(active.begin() + static_cast<std::ptrdiff_t>(pick));
    }
}

bool Simulation::step(std::string_view name)
{
    if (!booting(name))
        return false;
    ClientState& c = mut(name);
    try {
        switch (c.phase) {
        case Phase::powered_off: stage_dhcp(c); break;
        case Phase::leased: stage_kernel(c); break;
        case Phase::kernel_loaded: stage_root(c); break;
        case Phase::root_mounted:
            if (c.dev_checked)
                start_rc(c);
            else
                init_dev_check(c);
            break;
        case Phase::rc_running:
            if (c.rc_next < c.rc_order.size())
                run_script(c, c.rc_order[c.rc_next++]);
            else
                finish_boot(c);
            break;
        default:
            break;
        }
    } catch (const Halt& h) {
        halt(c, h.cause);
    } catch (const fs::FsError& e) {
        halt(c, std::string(fs::to_string(e.code())));
    } catch (const boot::BootError& e) {
        halt(c, std::string(boot::to_string(e.code())));
    } catch (const config::ParseError& e) {
        halt(c, std::string(config::to_string(e.code())));
    } catch (const rc::OrderError& e) {
        halt(c, std::string(rc::to_string(e.code())));
    }
    after_operation();
    return true;
}

void Simulation::stage_dhcp(ClientState& c)
{
    try {
        c.lease = boot::handle_boot_request(config_.dhcp, c.spec.mac, config_.hosts);
    } catch (const boot::BootError& e) {
        record(c, "dhcp", c.spec.mac, "", error_outcome(boot::to_string(e.code())));
        throw;
    }
    record(c, "dhcp", c.spec.mac,
           c.lease->hostname + " " + c.lease->ip + " root-path " + c.lease->root_path, "ok");
    c.phase = Phase::leased;
}

void Simulation::stage_kernel(ClientState& c)
{
    try {
        c.kernel = boot::fetch_kernel(server_.boot_area, c.lease->filename);
    } catch (const boot::BootError& e) {
        record(c, "tftp", c.lease->filename, "", error_outcome(boot::to_string(e.code())));
        throw;
    }
    record(c, "tftp", c.kernel->name,
           std::to_string(c.kernel->size) + " bytes digest " + c.kernel->digest, "ok");
    c.phase = Phase::kernel_loaded;
}

void Simulation::stage_root(ClientState& c)
{
    const std::string server = c.lease->next_server.empty() ? server_.nfs.name() : c.lease->next_server;
    const std::string source = server + ":" + c.lease->root_path;
    const fs::Export* exp = server == server_.nfs.name() ? server_.nfs.find_export(c.lease->root_path) : nullptr;
    if (exp == nullptr) {
        record(c, "mount", "/", source, "error:ExportUnknown");
        throw Halt{"ExportUnknown"};
    }
    if (!exp->root_access) {
        record(c, "mount", "/", source, "error:RootAccessDenied");
        throw Halt{"RootAccessDenied"};
    }
    do_mount(c, fs::MountEntry{fs::MountKind::nfs, source, "/", {"ro"}, std::nullopt});
    c.phase = Phase::root_mounted;
}

void Simulation::init_dev_check(ClientState& c)
{
    c.dev_checked = true;
    const bool console = c.mounts.exists("/dev/console");
    if (c.mode == Mode::compat15) {
        if (!console) {
            record(c, "init", "/dev/console", "absent on root export", "error:ConsoleMissing");
            throw Halt{"ConsoleMissing"};
        }
        record(c, "init", "/dev/console", "present; /dev left to shroot", "ok");
        return;
    }
    if (console) {
        record(c, "init", "/dev/console", "present", "ok");
        return;
    }
    record(c, "init", "/dev/console", "absent; creating mfs /dev", "ok");
    do_mount(c, fs::MountEntry{fs::MountKind::mfs, "mfs", "/dev", small_mfs_options, std::nullopt});
    make_devices(c);
}

void Simulation::make_devices(ClientState& c)
{
    const auto& nodes = makedev_nodes(config_.makedev);
    for (const auto& node : nodes) {
        const std::uint16_t mode =
            (node == "null" || node == "zero" || node == "tty" || node.rfind("std", 0) == 0) ? 0666 : 0600;
        c.mounts.mknod("/dev/" + node, mode, 0);
    }
    record(c, "makedev", "/dev",
           std::string(config_.makedev == MakedevSet::all ? "all" : "minimal") + ": " +
               std::to_string(nodes.size()) + " nodes",
           "ok");
}

void Simulation::start_rc(ClientState& c)
{
    try {
        c.env = config::parse_rc_conf(c.mounts.read_file("/etc/rc.conf"));
    } catch (const config::ParseError& e) {
        record(c, "rc", "/etc/rc.conf", e.what(), error_outcome(config::to_string(e.code())));
        throw;
    }

    std::vector<rc::RcScript> scripts;
    for (const auto& name : c.mounts.list("/etc/rc.d"))
        scripts.push_back(rc::make_script(name, c.mounts.read_file("/etc/rc.d/" + name)));
    rc::OrderResult result;
    try {
        result = rc::order(scripts);
    } catch (const rc::OrderError& e) {
        record(c, "rcorder", "/etc/rc.d", e.what(), error_outcome(rc::to_string(e.code())));
        throw;
    }
    for (const auto& w : result.warnings)
        record(c, "rcorder", "/etc/rc.d", w, "warn");
    c.rc_order = std::move(result.order);
    c.rc_next = 0;
    c.phase = Phase::rc_running;
    record(c, "rcorder", "/etc/rc.d", join(c.rc_order, " "), "ok");

    if (!c.env.enabled("rc_configured")) {
        c.single_user = true;
        record(c, "rc", "rc_configured", "not YES; staying in single-user mode", "single-user");
    }
}

void Simulation::run_script(ClientState& c, const std::string& script)
{
    if (script == "shroot") {
        shroot_exec(c);
        return;
    }
    if (script == "mountcritlocal") {
        mountcritlocal(c);
        return;
    }
    if (script == "mountall") {
        mountall(c);
        return;
    }
    for (const auto& svc : config_.services) {
        if (svc.name != script)
            continue;
        if (svc.inert) {
            record(c, "rc", script,
                   svc.name + "=" + c.env.get_or(svc.name, "NO") + " parsed; not started", "inert");
        } else if (c.env.enabled(svc.name, svc.default_enabled)) {
            start_service(c, svc);
        } else {
            record(c, "rc", script, "disabled in rc.conf", "skip");
        }
        return;
    }
    record(c, "rc", script, "", "ok");
}

void Simulation::finish_boot(ClientState& c)
{
    c.phase = Phase::multi_user;
    record(c, "boot", "", "multi-user", "ok");
    log_message(c, "daemon", "boot complete");
}

void Simulation::shroot_exec(ClientState& c)
{
    const std::string& hostname = c.lease->hostname;
    record(c, "shroot", "/bin/hostname", hostname, "ok");

    const std::string pfx_var = c.env.get_or("shroot_pfx_var", "");
    if (pfx_var.empty()) {
        record(c, "shroot", "/var", "shroot_pfx_var empty", "skip");
    } else {
        const std::string source = pfx_var + hostname;
        auto [host, path] = split_source(source);
        if (host != server_.nfs.name() || server_.nfs.find_export(path) == nullptr) {
            record(c, "mount", "/var", source, "error:VarExportMissing");
            throw Halt{"VarExportMissing"};
        }
        do_mount(c, fs::MountEntry{fs::MountKind::nfs, source, "/var", {}, std::nullopt});
    }

    const std::string pfx_swap = c.env.get_or("shroot_pfx_swap", "");
    if (pfx_swap.empty()) {
        record(c, "shroot", "/swap", "shroot_pfx_swap empty", "skip");
    } else {
        const std::string source = pfx_swap + hostname;
        auto [host, path] = split_source(source);
        if (host != server_.nfs.name() || server_.nfs.find_export(path) == nullptr) {
            record(c, "mount", "/swap", source, "error:SwapExportMissing");
            throw Halt{"SwapExportMissing"};
        }
        do_mount(c, fs::MountEntry{fs::MountKind::nfs, source, "/swap", {}, std::nullopt});
        if (!c.mounts.writable("/swap")) {
            record(c, "swapon", "/swap", "swap area not writable", "error:EROFS");
            throw Halt{"EROFS"};
        }
        c.swap_active = true;
        record(c, "swapon", "/swap", "", "ok");
    }

    if (c.mode == Mode::compat15)
        do_mount(c, fs::MountEntry{fs::MountKind::mfs, "swap", "/dev", small_mfs_options, std::nullopt});

    auto etc_options = small_mfs_options;
    etc_options.push_back("union");
    do_mount(c, fs::MountEntry{fs::MountKind::union_mfs, "swap", "/etc", etc_options, std::nullopt});
    c.mounts.chmod("/etc", 0755);
    record(c, "chmod", "/etc", "755", "ok");

    if (c.mode == Mode::compat15) {
        c.mounts.chmod("/dev", 0755);
        record(c, "chmod", "/dev", "755", "ok");
        for (const char* script : {"/sbin/MAKEDEV", "/sbin/MAKEDEV.local"}) {
            c.mounts.write_file(std::string("/dev/") + fs::base_name(script), c.mounts.read_file(script));
            record(c, "cp", script, "/dev", "ok");
        }
        make_devices(c);
    }
}

std::vector<config::FstabEntry> Simulation::read_fstab(ClientState& c)
{
    config::FstabParseOptions opts;
    opts.active_tags = {"1.5"};
    try {
        return config::parse_fstab(c.mounts.read_file("/etc/fstab"), opts);
    } catch (const config::ParseError& e) {
        record(c, "fstab", "/etc/fstab", e.what(), error_outcome(config::to_string(e.code())));
        throw;
    }
}

void Simulation::mountcritlocal(ClientState& c)
{
    const auto fstab = read_fstab(c);
    for (const auto& path : config::split_ws(c.env.get_or("critical_filesystems_local", ""))) {
        if (c.mounts.is_mounted(path)) {
            record(c, "mount", path, "critical filesystem already mounted", "skip:AlreadyMounted");
            continue;
        }
        auto it = std::find_if(fstab.begin(), fstab.end(),
                               [&](const config::FstabEntry& e) { return e.mount_point == path; });
        if (it == fstab.end()) {
            record(c, "mount", path, "critical filesystem not in /etc/fstab", "error:NoFstabEntry");
            throw Halt{"NoFstabEntry"};
        }
        mount_fstab_entry(c, *it);
    }
}

void Simulation::mountall(ClientState& c)
{
    for (const auto& e : read_fstab(c)) {
        if (e.mount_point == "/" || e.has_flag("noauto"))
            continue;
        if (c.mounts.is_mounted(e.mount_point)) {
            record(c, "mount", e.mount_point, "already mounted", "skip:AlreadyMounted");
            continue;
        }
        mount_fstab_entry(c, e);
    }
}

void Simulation::mount_fstab_entry(ClientState& c, const config::FstabEntry& e)
{
    fs::MountEntry entry;
    entry.source = e.spec;
    entry.mount_point = e.mount_point;
    entry.options = e.mount_options();
    if (e.fstype == "nfs") {
        entry.kind = fs::MountKind::nfs;
    } else if (e.fstype == "mfs") {
        entry.kind = e.has_flag("union") ? fs::MountKind::union_mfs : fs::MountKind::mfs;
    } else {
        record(c, "mount", e.mount_point, "fstype " + e.fstype, "error:UnsupportedFsType");
        throw Halt{"UnsupportedFsType"};
    }
    do_mount(c, std::move(entry));
}

void Simulation::do_mount(ClientState& c, fs::MountEntry entry)
{
    if (entry.kind != fs::MountKind::nfs)
        entry.mfs_id = next_pid();
    const std::string line = fs::render_mount_line(entry);
    const std::string mount_point = entry.mount_point;
    try {
        c.mounts.mount(std::move(entry), &server_.nfs);
    } catch (const fs::FsError& e) {
        record(c, "mount", mount_point, line, error_outcome(fs::to_string(e.code())));
        throw;
    }
    record(c, "mount", mount_point, line, "ok");
}

void Simulation::start_service(ClientState& c, const ServiceSpec& spec)
{
    const std::uint64_t pid = next_pid();
    std::optional<std::string> fingerprint;
    std::string current = spec.pid_file;
    try {
        c.mounts.write_file(spec.pid_file, std::to_string(pid) + "\n");
        for (const auto& sock : spec.sockets) {
            current = sock;
            if (c.mounts.exists(sock))
                c.mounts.unlink(sock);
            c.mounts.mksock(sock);
        }
        for (const auto& path : spec.reads) {
            current = path;
            fingerprint = "fnv1a64:" + fs::hex64(fs::fnv1a64(c.mounts.read_file(path)));
        }
    } catch (const fs::FsError& e) {
        record(c, "service", spec.name, current, error_outcome(fs::to_string(e.code())));
        return;
    }

    c.services.emplace_back(spec.name, pid);
    if (fingerprint && spec.name == "sshd")
        c.host_key_fingerprint = fingerprint;
    std::string detail = "pid " + std::to_string(pid);
    for (const auto& sock : spec.sockets)
        detail += " socket " + sock;
    if (fingerprint)
        detail += " key " + *fingerprint;
    record(c, "service", spec.name, detail, "ok");
    if (spec.remote_log)
        c.remote_syslog = true;
    log_message(c, "daemon", spec.name + "[" + std::to_string(pid) + "]: started");
}

void Simulation::log_message(ClientState& c, const std::string& facility, const std::string& message)
{
    if (!c.remote_syslog) {
        record(c, "syslog", facility, message, "dropped");
        return;
    }
    const std::string host = c.lease ? c.lease->hostname : c.spec.name;
    server_.log_sink.push_back(LogRecord{host, facility, message});
    record(c, "syslog", facility, message, "forwarded:" + server_.nfs.name());
}

void Simulation::syslog(std::string_view name, const std::string& facility, const std::string& message)
{
    log_message(mut(name), facility, message);
    after_operation();
}

// ---------------------------------------------------------------------------
// sessions and shutdown

fs::Uid Simulation::uid_of(const std::string& user)
{
    if (user == "root")
        return 0;
    auto [it, fresh] = uids_.emplace(user, static_cast<fs::Uid>(1000 + uids_.size()));
    return it->second;
}

LoginResult Simulation::login(std::string_view name, const std::string& user)
{
    ClientState& c = mut(name);
    LoginResult result;
    if (c.phase != Phase::multi_user && c.phase != Phase::shutting_down) {
        result.reason = "down";
        record(c, "login", user, "client is " + std::string(to_string(c.phase)), "denied:down");
        after_operation();
        return result;
    }
    if (c.mounts.exists("/etc/nologin")) {
        result.reason = "nologin";
        record(c, "login", user, "/etc/nologin present", "denied:nologin");
        after_operation();
        return result;
    }
    if (auto it = c.logins.find(user); it != c.logins.end()) {
        result.allowed = true;
        result.tty = it->second;
        record(c, "login", user, it->second, "allowed");
        after_operation();
        return result;
    }
    std::set<std::string> busy;
    for (const auto& [_, tty] : c.logins)
        busy.insert(tty);
    for (const auto& node : makedev_nodes(config_.makedev)) {
        const std::string tty = "/dev/" + node;
        if (node.rfind("ttyp", 0) != 0 || busy.count(tty) || !c.mounts.exists(tty))
            continue;
        try {
            c.mounts.chown(tty, uid_of(user));
        } catch (const fs::FsError& e) {
            record(c, "login", user, tty, error_outcome(fs::to_string(e.code())));
            after_operation();
            throw;
        }
        c.logins[user] = tty;
        result.allowed = true;
        result.tty = tty;
        record(c, "login", user, tty + " owner " + std::to_string(uid_of(user)), "allowed");
        after_operation();
        return result;
    }
    result.reason = "no-pty";
    record(c, "login", user, "no free pseudo terminal", "denied:no-pty");
    after_operation();
    return result;
}

void Simulation::logout(std::string_view name, const std::string& user)
{
    ClientState& c = mut(name);
    auto it = c.logins.find(user);
    if (it == c.logins.end())
        throw SimulationError("logout " + c.spec.name + ": " + user + " is not logged in");
    c.mounts.chown(it->second, 0);
    record(c, "logout", user, it->second + " owner 0", "ok");
    c.logins.erase(it);
    after_operation();
}

void Simulation::begin_shutdown(std::string_view name)
{
    ClientState& c = mut(name);
    if (c.phase != Phase::multi_user)
        throw SimulationError("shutdown " + c.spec.name + ": client is " +
                              std::string(to_string(c.phase)) + ", expected MultiUser");
    c.mounts.write_file("/etc/nologin", "NO LOGINS: System going down\n");
    c.phase = Phase::shutting_down;
    record(c, "shutdown", "/etc/nologin", "created", "ok");
    after_operation();
}

void Simulation::finish_shutdown(std::string_view name)
{
    ClientState& c = mut(name);
    if (c.phase != Phase::shutting_down)
        throw SimulationError("shutdown " + c.spec.name + ": client is " +
                              std::string(to_string(c.phase)) + ", expected ShuttingDown");

    for (auto it = c.services.rbegin(); it != c.services.rend(); ++it) {
        auto spec = std::find_if(config_.services.begin(), config_.services.end(),
                                 [&](const ServiceSpec& s) { return s.name == it->first; });
        std::vector<std::string> paths{spec->pid_file};
        paths.insert(paths.end(), spec->sockets.begin(), spec->sockets.end());
        for (const auto& p : paths)
            if (c.mounts.exists(p))
                c.mounts.unlink(p);
        record(c, "stop", it->first, "pid " + std::to_string(it->second), "ok");
    }
    c.services.clear();
    c.remote_syslog = false;
    c.logins.clear();
    if (c.swap_active) {
        c.swap_active = false;
        record(c, "swapoff", "/swap", "", "ok");
    }
    while (!c.mounts.empty()) {
        const std::string mp = c.mounts.entry(c.mounts.size() - 1).mount_point;
        c.mounts.unmount(mp);
        record(c, "umount", mp, "", "ok");
    }
    c.phase = Phase::halted;
    c.halt_cause.clear();
    record(c, "halt", "", "shutdown", "halted");
    after_operation();
}

void Simulation::shutdown(std::string_view name)
{
    begin_shutdown(name);
    finish_shutdown(name);
}

// ---------------------------------------------------------------------------
// server-side administration

void Simulation::grant_write(const std::string& export_path)
{
    fs::Export* exp = server_.nfs.find_export(export_path);
    if (exp == nullptr)
        throw fs::FsError(fs::FsErrc::export_unknown, export_path);
    exp->read_only = false;
    server_.baseline_hashes.erase(export_path);
    record_server("grant-write", export_path, "export now read-write", "ok");
    after_operation();
}

void Simulation::revoke_write(const std::string& export_path)
{
    fs::Export* exp = server_.nfs.find_export(export_path);
    if (exp == nullptr)
        throw fs::FsError(fs::FsErrc::export_unknown, export_path);
    exp->read_only = true;
    server_.baseline_hashes[export_path] = server_.nfs.export_hash(export_path);
    record_server("revoke-write", export_path,
                  "baseline " + fs::hex64(server_.baseline_hashes[export_path]), "ok");
    after_operation();
}

void Simulation::mkdirs(ClientState& c, const std::string& path)
{
    auto parts = fs::split_path(path);
    for (std::size_t i = 1; i <= parts.size(); ++i) {
        const std::string prefix = "/" + fs::join_path(parts, i);
        if (!c.mounts.exists(prefix))
            c.mounts.mkdir(prefix);
    }
}

void Simulation::pkg_install(std::string_view name, const std::string& pkg,
                             const std::optional<std::string>& dbdir)
{
    ClientState& c = mut(name);
    if (c.phase != Phase::multi_user)
        throw SimulationError("pkg-install " + c.spec.name + ": client is " +
                              std::string(to_string(c.phase)) + ", expected MultiUser");

    // The chosen client remounts / read-write while the server grants it.
    bool remounted = false;
    const fs::MountEntry root = c.mounts.entry(0);
    const fs::Export* exp = server_.nfs.find_export(split_source(root.source).second);
    if (exp != nullptr && !exp->read_only && root.has_option("ro")) {
        c.mounts.remount("/", {"rw"});
        remounted = true;
        record(c, "mount", "/", "update: read-write", "ok");
    }
    auto restore = [&] {
        if (remounted) {
            c.mounts.remount("/", {"ro"});
            record(c, "mount", "/", "update: read-only", "ok");
        }
    };

    const std::string db = dbdir.value_or("/var/db/pkg");
    std::string step = "/usr/pkg/" + pkg;
    try {
        mkdirs(c, "/usr/pkg/" + pkg + "/bin");
        step = "/usr/pkg/" + pkg + "/bin/" + pkg;
        c.mounts.write_file(step, "#!/bin/sh\necho " + pkg + "\n");
        if (!dbdir)
            record(c, "pkg_add", pkg, "PKG_DBDIR unset; record goes to per-client " + db,
                   "warn:SharedDbViolation");
        step = db + "/" + pkg + "/+CONTENTS";
        mkdirs(c, db + "/" + pkg);
        c.mounts.write_file(step, "@name " + pkg + "\n@cwd /usr/pkg/" + pkg + "\n");
    } catch (const fs::FsError& e) {
        record(c, "pkg_add", pkg, step, error_outcome(fs::to_string(e.code())));
        restore();
        after_operation();
        throw;
    }
    record(c, "pkg_add", pkg, "record " + db + "/" + pkg + "/+CONTENTS", "ok");
    restore();
    after_operation();
}

void Simulation::client_write(std::string_view name, const std::string& path, std::string bytes)
{
    ClientState& c = mut(name);
    if (c.mounts.empty())
        throw SimulationError("write " + c.spec.name + ": client has no namespace (" +
                              std::string(to_string(c.phase)) + ")");
    const std::size_t size = bytes.size();
    try {
        c.mounts.write_file(path, std::move(bytes));
    } catch (const fs::FsError& e) {
        record(c, "write", path, std::to_string(size) + " bytes", error_outcome(fs::to_string(e.code())));
        after_operation();
        throw;
    }
    record(c, "write", path, std::to_string(size) + " bytes", "ok");
    after_operation();
}

// ---------------------------------------------------------------------------
// invariants

std::vector<std::string> Simulation::check_immutability() const
{
    std::vector<std::string> problems;
    for (const auto& [path, baseline] : server_.baseline_hashes) {
        const fs::Export* exp = server_.nfs.find_export(path);
        if (exp == nullptr || !exp->read_only)
            continue;
        const std::uint64_t now = server_.nfs.export_hash(path);
        if (now != baseline)
            problems.push_back("immutability: read-only export " + path + " changed (baseline " +
                               fs::hex64(baseline) + ", now " + fs::hex64(now) + ")");
    }
    return problems;
}

std::vector<std::string> Simulation::check_invariants() const
{
    std::vector<std::string> problems;
    std::set<std::string> fingerprints;
    std::map<std::string, std::string> hostnames, addresses;
    for (const auto& c : clients_) {
        if (c->lease) {
            for (auto [seen, key] : {std::pair{&hostnames, c->lease->hostname},
                                     std::pair{&addresses, c->lease->ip}}) {
                auto [it, fresh] = seen->emplace(key, c->spec.name);
                if (!fresh)
                    problems.push_back("lease: " + c->spec.name + " and " + it->second +
                                       " share " + key);
            }
        }

        bool var_mounted = false;
        for (const auto& e : c->events) {
            if (e.action == "power-on" || e.action == "dhcp")
                var_mounted = false;
            if (e.action != "mount" || e.outcome != "ok")
                continue;
            if (e.target == "/var")
                var_mounted = true;
            if (e.target == "/var/run" && !var_mounted)
                problems.push_back("ordering: " + c->spec.name + " mounted /var/run before /var (step " +
                                   std::to_string(e.step) + ")");
        }

        const auto& order = c->rc_order;
        auto pos = [&](const char* n) { return std::find(order.begin(), order.end(), n); };
        if (pos("root") != order.end() && pos("shroot") != order.end() &&
            pos("mountcritlocal") != order.end() &&
            !(pos("root") < pos("shroot") && pos("shroot") < pos("mountcritlocal")))
            problems.push_back("ordering: " + c->spec.name +
                               " rc order does not place shroot between root and mountcritlocal");

        if (c->host_key_fingerprint)
            fingerprints.insert(*c->host_key_fingerprint);
    }
    if (fingerprints.size() > 1)
        problems.push_back("key sharing: " + std::to_string(fingerprints.size()) +
                           " distinct sshd host key fingerprints");
    return problems;
}

}  // namespace netroot::cluster
