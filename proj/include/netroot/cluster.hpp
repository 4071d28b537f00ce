#pragma once

// The diskless cluster: one file server exporting a shared read-only root,
// and client state machines that netboot, run the rc.d sequence (including
// the shroot overlay script), start services, and log in / shut down.

#include "netroot/configparse.hpp"
#include "netroot/fsmodel.hpp"
#include "netroot/netboot.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace netroot::cluster {

enum class Phase {
    powered_off,
    leased,
    kernel_loaded,
    root_mounted,
    rc_running,
    multi_user,
    shutting_down,
    halted,
};

std::string_view to_string(Phase phase);
std::optional<Phase> parse_phase(std::string_view text);

// compat15: the root export carries /dev/console and shroot builds /dev.
// v16: init notices the missing /dev/console and builds /dev itself.
enum class Mode { compat15, v16 };

std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view text);

enum class MakedevSet { all, minimal };

std::optional<MakedevSet> parse_makedev_set(std::string_view text);
const std::vector<std::string>& makedev_nodes(MakedevSet set);

struct Event {
    std::uint64_t step = 0;
    std::string client;
    std::string action;
    std::string target;
    std::string detail;
    std::string outcome;

    std::string render() const;
};

struct ServiceSpec {
    std::string name;
    std::string pid_file;
    std::vector<std::string> sockets;
    std::vector<std::string> reads;
    bool remote_log = false;
    bool default_enabled = false;
    // Parsed from rc.conf but never started (the automounter).
    bool inert = false;
};

std::vector<ServiceSpec> default_services();

struct LogRecord {
    std::string client;
    std::string facility;
    std::string message;

    bool operator==(const LogRecord&) const = default;
};

struct ServerState {
    fs::NfsServer nfs{"server"};
    boot::BootArea boot_area;
    std::vector<LogRecord> log_sink;
    // Content hash of every read-only export, keyed by export path.
    std::map<std::string, std::uint64_t> baseline_hashes;

    void rebaseline();
};

struct ClientSpec {
    std::string name;
    std::string mac;
};

struct SimulationConfig {
    Mode mode = Mode::v16;
    config::DhcpConfig dhcp;
    boot::HostsMap hosts;
    std::vector<ClientSpec> clients;
    std::vector<ServiceSpec> services = default_services();
    MakedevSet makedev = MakedevSet::all;
    // Check read-only exports after every step instead of only on request.
    bool strict = false;
};

struct ClientState {
    ClientSpec spec;
    Mode mode = Mode::v16;
    Phase phase = Phase::powered_off;
    std::optional<boot::Lease> lease;
    std::optional<boot::KernelHandle> kernel;
    fs::MountTable mounts;
    config::RcConf env;
    bool swap_active = false;
    std::string halt_cause;
    bool single_user = false;

    std::vector<std::string> rc_order;
    std::size_t rc_next = 0;
    bool dev_checked = false;

    // Running services in start order with their pids.
    std::vector<std::pair<std::string, std::uint64_t>> services;
    bool remote_syslog = false;
    std::optional<std::string> host_key_fingerprint;
    std::map<std::string, std::string> logins;   // user -> tty path
    std::vector<Event> events;
    std::size_t ro_seen = 0;
};

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LoginResult {
    bool allowed = false;
    std::string reason;
    std::string tty;
};

struct RoAttempt {
    std::string client;
    fs::RoViolation violation;
};

class Simulation {
public:
    // Computes the read-only baselines; see validate() for load-time checks.
    Simulation(ServerState server, SimulationConfig config);
    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    ServerState& server() noexcept { return server_; }
    const ServerState& server() const noexcept { return server_; }
    const SimulationConfig& config() const noexcept { return config_; }

    std::vector<std::string> client_names() const;
    bool has_client(std::string_view name) const;
    const ClientState& client(std::string_view name) const;
    const std::vector<Event>& events() const noexcept { return events_; }
    std::string render_trace() const;

    // Runs every boot stage; ends in MultiUser, single-user RcRunning or
    // Halted. A Halted client is power-cycled first.
    void boot(std::string_view name);
    // Advances one boot stage; false when the client has nothing left to do.
    bool step(std::string_view name);
    bool booting(std::string_view name) const;
    // Boots the named clients concurrently; the stage interleaving is drawn
    // from `seed`.
    void boot_interleaved(const std::vector<std::string>& names, std::uint64_t seed);

    LoginResult login(std::string_view name, const std::string& user);
    void logout(std::string_view name, const std::string& user);

    // shutdown() = begin_shutdown() + finish_shutdown(). Between the two the
    // client is ShuttingDown with /etc/nologin in place.
    void shutdown(std::string_view name);
    void begin_shutdown(std::string_view name);
    void finish_shutdown(std::string_view name);

    void grant_write(const std::string& export_path);
    void revoke_write(const std::string& export_path);

    // Installs under /usr/pkg/<pkg>; the package record goes to dbdir or,
    // when unset, to the per-client /var/db/pkg.
    void pkg_install(std::string_view name, const std::string& pkg,
                     const std::optional<std::string>& dbdir);

    // Writes a file through the client's namespace (a user or attacker
    // action); read-only refusals are recorded and rethrown.
    void client_write(std::string_view name, const std::string& path, std::string bytes);
    // Sends a message to syslogd; forwarded to the server when running.
    void syslog(std::string_view name, const std::string& facility, const std::string& message);

    // Server-side problems that make the scenario unbootable by design:
    // missing per-host exports for the shroot prefixes, absent kernels.
    std::vector<std::string> validate() const;

    // Read-only export hashes that differ from their baseline.
    std::vector<std::string> check_immutability() const;
    // Mount ordering (/var before /var/run), lease uniqueness and host key
    // sharing.
    std::vector<std::string> check_invariants() const;
    // Violations recorded by strict mode.
    const std::vector<std::string>& strict_violations() const noexcept { return strict_violations_; }
    // Writes refused with EROFS, across all clients, in order.
    const std::vector<RoAttempt>& ro_attempts() const noexcept { return ro_attempts_; }

    std::function<void(const Event&)> on_event;

private:
    ClientState& mut(std::string_view name);
    void record(ClientState& c, std::string action, std::string target, std::string detail,
                std::string outcome);
    void record_server(std::string action, std::string target, std::string detail,
                       std::string outcome);
    void log_message(ClientState& c, const std::string& facility, const std::string& message);
    void halt(ClientState& c, const std::string& cause);
    void power_cycle(ClientState& c);
    void after_operation();

    void stage_dhcp(ClientState& c);
    void stage_kernel(ClientState& c);
    void stage_root(ClientState& c);
    void init_dev_check(ClientState& c);
    void start_rc(ClientState& c);
    void run_script(ClientState& c, const std::string& script);
    void finish_boot(ClientState& c);

    void shroot_exec(ClientState& c);
    void mountcritlocal(ClientState& c);
    void mountall(ClientState& c);
    void start_service(ClientState& c, const ServiceSpec& spec);
    void make_devices(ClientState& c);

    void do_mount(ClientState& c, fs::MountEntry entry);
    void mount_fstab_entry(ClientState& c, const config::FstabEntry& e);
    std::vector<config::FstabEntry> read_fstab(ClientState& c);
    void mkdirs(ClientState& c, const std::string& path);
    fs::Uid uid_of(const std::string& user);
    std::uint64_t next_pid() { return next_pid_++; }

    ServerState server_;
    SimulationConfig config_;
    std::vector<std::unique_ptr<ClientState>> clients_;
    std::vector<Event> events_;
    std::vector<std::string> strict_violations_;
    std::set<std::string> strict_seen_;
    std::vector<RoAttempt> ro_attempts_;
    std::map<std::string, fs::Uid> uids_;
    std::uint64_t next_pid_ = 30;
    std::uint64_t step_ = 0;
};

// Every root-path named anywhere in the DHCP configuration.
std::vector<std::string> dhcp_root_paths(const config::DhcpConfig& dhcp);
// Declared host names in file order.
std::vector<std::string> dhcp_host_names(const config::DhcpConfig& dhcp);

}  // namespace netroot::cluster
