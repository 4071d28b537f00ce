#include "netroot/scenario.hpp"

#include "netroot/rcorder.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace netroot::scenario {

namespace fsys = std::filesystem;
using cluster::Phase;

std::string read_text_file(const fsys::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ScenarioError(path.string() + ": cannot read file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

namespace {

[[noreturn]] void fail(const std::string& source, int line, const std::string& message)
{
    throw ScenarioError(source + ":" + std::to_string(line) + ": " + message);
}

std::vector<std::pair<int, std::string>> logical_lines(std::string_view text)
{
    std::vector<std::pair<int, std::string>> out;
    std::istringstream in{std::string(text)};
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        std::string t = config::trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        out.emplace_back(no, std::move(t));
    }
    return out;
}

std::string unescape(std::string_view text)
{
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\\' && i + 1 < text.size()) {
            const char c = text[++i];
            out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
        } else {
            out += text[i];
        }
    }
    return out;
}

// Remainder of `line` after the first `n` whitespace-separated words.
std::string rest_after(const std::string& line, std::size_t n)
{
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        pos = line.find_first_not_of(" \t", pos);
        if (pos == std::string::npos)
            return {};
        pos = line.find_first_of(" \t", pos);
        if (pos == std::string::npos)
            return {};
    }
    pos = line.find_first_not_of(" \t", pos);
    return pos == std::string::npos ? std::string() : line.substr(pos);
}

std::optional<std::uint64_t> parse_uint(std::string_view text, int base = 10)
{
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
    if (ec != std::errc() || ptr != text.data() + text.size())
        return std::nullopt;
    return value;
}

std::string replace_all(std::string text, std::string_view from, std::string_view to)
{
    for (std::size_t pos = 0; (pos = text.find(from, pos)) != std::string::npos; pos += to.size())
        text.replace(pos, from.size(), to);
    return text;
}

void seed_line(cluster::ServerState& server, const std::string& line, const std::string& source, int no)
{
    const auto words = config::split_ws(line);
    const std::string& op = words[0];
    auto need = [&](std::size_t n) {
        if (words.size() < n)
            fail(source, no, "'" + op + "' needs " + std::to_string(n - 1) + " argument(s)");
    };
    auto mode_arg = [&](std::size_t i, std::uint16_t fallback) -> std::uint16_t {
        if (words.size() <= i)
            return fallback;
        auto m = parse_uint(words[i], 8);
        if (!m || *m > fs::mode_mask)
            fail(source, no, "bad mode '" + words[i] + "'");
        return static_cast<std::uint16_t>(*m);
    };
    auto path_arg = [&](std::size_t i) {
        if (!fs::is_normalized_absolute(words[i]))
            fail(source, no, "path must be absolute and normalized: " + words[i]);
        return words[i];
    };
    auto node_at = [&](const std::string& path) -> fs::FsNode& {
        fs::FsNode* node = server.nfs.tree().walk(path.substr(1));
        if (node == nullptr)
            fail(source, no, "no such path " + path);
        return *node;
    };

    try {
        if (op == "server") {
            need(2);
            if (!server.nfs.exports().empty() || server.nfs.tree().child_count() != 0)
                fail(source, no, "'server' must come first");
            server.nfs = fs::NfsServer(words[1]);
        } else if (op == "dir") {
            need(2);
            server.nfs.make_dirs(path_arg(1)).set_mode(mode_arg(2, 0755));
        } else if (op == "file") {
            need(2);
            const std::string path = path_arg(1);
            fs::FsNode node(fs::NodeKind::file, fs::base_name(path), 0644);
            node.set_content(unescape(rest_after(line, 2)));
            server.nfs.put(path, std::move(node));
        } else if (op == "device") {
            need(2);
            const std::string path = path_arg(1);
            server.nfs.put(path, fs::FsNode(fs::NodeKind::device, fs::base_name(path), mode_arg(2, 0600)));
        } else if (op == "socket") {
            need(2);
            const std::string path = path_arg(1);
            server.nfs.put(path, fs::FsNode(fs::NodeKind::socket, fs::base_name(path), 0666));
        } else if (op == "symlink") {
            need(3);
            const std::string path = path_arg(1);
            fs::FsNode node(fs::NodeKind::symlink, fs::base_name(path), 0777);
            node.set_content(words[2]);
            server.nfs.put(path, std::move(node));
        } else if (op == "chmod") {
            need(3);
            node_at(path_arg(1)).set_mode(mode_arg(2, 0));
        } else if (op == "chown") {
            need(3);
            auto uid = parse_uint(words[2]);
            if (!uid)
                fail(source, no, "bad uid '" + words[2] + "'");
            node_at(path_arg(1)).set_owner(static_cast<fs::Uid>(*uid));
        } else if (op == "export") {
            need(3);
            if (words[2] != "ro" && words[2] != "rw")
                fail(source, no, "export access must be ro or rw");
            const bool root_access = words.size() > 3 && words[3] == "root-access";
            if (words.size() > 3 && !root_access)
                fail(source, no, "unknown export flag '" + words[3] + "'");
            server.nfs.add_export(path_arg(1), words[2] == "ro", root_access);
        } else if (op == "kernel") {
            need(2);
            server.boot_area.add(words[1], unescape(rest_after(line, 2)));
        } else {
            fail(source, no, "unknown seed directive '" + op + "'");
        }
    } catch (const fs::FsError& e) {
        fail(source, no, e.what());
    }
}

void install_fixture_file(cluster::ServerState& server, const std::string& path, std::string content)
{
    fs::FsNode node(fs::NodeKind::file, fs::base_name(path), 0644);
    node.set_content(std::move(content));
    server.nfs.put(path, std::move(node));
}

template <class Parse>
void check_fixture(const fsys::path& file, const std::string& text, Parse parse)
{
    try {
        parse(text);
    } catch (const config::ParseError& e) {
        throw ScenarioError(file.string() + ":" + std::to_string(e.line()) + ": " +
                            std::string(config::to_string(e.code())) +
                            (e.detail().empty() ? "" : " (" + e.detail() + ")"));
    }
}

const std::set<std::string> known_directives = {
    "boot",       "shutdown",     "shutdown-begin", "login",        "logout",
    "pkg-install", "grant-write", "revoke-write",   "write",        "syslog",
    "assert-mounts", "assert-trace", "assert-exists", "assert-absent", "assert-logged",
};

}  // namespace

void apply_server_seed(cluster::ServerState& server, std::string_view text,
                       const std::vector<std::string>& hosts, const std::string& source_name)
{
    for (const auto& [no, line] : logical_lines(text)) {
        if (line.rfind("per-host", 0) == 0) {
            const std::string body = rest_after(line, 1);
            if (body.empty())
                fail(source_name, no, "'per-host' needs a directive");
            for (const auto& host : hosts)
                seed_line(server, replace_all(body, "{host}", host), source_name, no);
        } else {
            seed_line(server, line, source_name, no);
        }
    }
}

Scenario parse_scenario(std::string_view text, const fsys::path& base_dir, const std::string& source_name)
{
    Scenario sc;
    sc.base_dir = base_dir;
    sc.source_name = source_name;

    std::map<std::string, std::pair<int, std::string>> fixtures;
    std::string section;
    std::set<std::string> seen_sections;
    std::set<std::string> macs;

    for (const auto& [no, line] : logical_lines(text)) {
        if (line.front() == '[') {
            if (line.back() != ']')
                fail(source_name, no, "unterminated section header");
            section = line.substr(1, line.size() - 2);
            static const std::set<std::string> sections = {"fixtures", "settings", "hosts", "clients",
                                                           "script"};
            if (!sections.count(section))
                fail(source_name, no, "unknown section [" + section + "]");
            if (!seen_sections.insert(section).second)
                fail(source_name, no, "duplicate section [" + section + "]");
            continue;
        }
        if (section.empty())
            fail(source_name, no, "line outside any section");

        if (section == "fixtures" || section == "settings") {
            auto eq = line.find('=');
            if (eq == std::string::npos)
                fail(source_name, no, "expected key = value");
            const std::string key = config::trim(line.substr(0, eq));
            const std::string value = config::trim(line.substr(eq + 1));
            if (section == "fixtures") {
                static const std::set<std::string> keys = {"dhcpd", "fstab", "rc.conf", "rc.d", "server"};
                if (!keys.count(key))
                    fail(source_name, no, "unknown fixture '" + key + "'");
                fixtures[key] = {no, value};
            } else if (key == "mode") {
                auto mode = cluster::parse_mode(value);
                if (!mode)
                    fail(source_name, no, "mode must be 1.5 or 1.6");
                sc.config.mode = *mode;
            } else if (key == "seed") {
                auto seed = parse_uint(value);
                if (!seed)
                    fail(source_name, no, "bad seed '" + value + "'");
                sc.seed = *seed;
            } else if (key == "makedev") {
                auto set = cluster::parse_makedev_set(value);
                if (!set)
                    fail(source_name, no, "makedev must be all or minimal");
                sc.config.makedev = *set;
            } else {
                fail(source_name, no, "unknown setting '" + key + "'");
            }
        } else if (section == "hosts") {
            const auto words = config::split_ws(line);
            if (words.size() != 2)
                fail(source_name, no, "expected '<name> <address>'");
            sc.config.hosts[words[0]] = words[1];
        } else if (section == "clients") {
            const auto words = config::split_ws(line);
            if (words.size() != 2)
                fail(source_name, no, "expected '<client> <mac>'");
            auto mac = config::canonical_mac(words[1]);
            if (!mac)
                fail(source_name, no, "bad MAC '" + words[1] + "'");
            if (!macs.insert(*mac).second)
                fail(source_name, no, "MAC " + *mac + " declared twice");
            for (const auto& c : sc.config.clients)
                if (c.name == words[0])
                    fail(source_name, no, "client " + words[0] + " declared twice");
            sc.config.clients.push_back(cluster::ClientSpec{words[0], *mac});
        } else {
            Directive d{no, line, config::split_ws(line)};
            if (!known_directives.count(d.words[0]))
                fail(source_name, no, "unknown directive '" + d.words[0] + "'");
            sc.script.push_back(std::move(d));
        }
    }

    for (const char* key : {"dhcpd", "fstab", "rc.conf", "rc.d", "server"})
        if (!fixtures.count(key))
            fail(source_name, 0, std::string("missing fixture '") + key + "'");
    auto fixture_path = [&](const char* key) { return base_dir / fixtures[key].second; };

    const fsys::path dhcpd_path = fixture_path("dhcpd");
    const std::string dhcpd_text = read_text_file(dhcpd_path);
    check_fixture(dhcpd_path, dhcpd_text, [&](const std::string& t) { sc.config.dhcp = config::parse_dhcpd(t); });

    const fsys::path fstab_path = fixture_path("fstab");
    const std::string fstab_text = read_text_file(fstab_path);
    check_fixture(fstab_path, fstab_text, [](const std::string& t) { config::parse_fstab(t); });

    const fsys::path rcconf_path = fixture_path("rc.conf");
    const std::string rcconf_text = read_text_file(rcconf_path);
    check_fixture(rcconf_path, rcconf_text, [](const std::string& t) { config::parse_rc_conf(t); });

    const fsys::path rcd_path = fixture_path("rc.d");
    if (!fsys::is_directory(rcd_path))
        fail(source_name, fixtures["rc.d"].first, "rc.d fixture is not a directory: " + rcd_path.string());
    std::vector<fsys::path> rc_files;
    for (const auto& entry : fsys::directory_iterator(rcd_path))
        if (entry.is_regular_file() && entry.path().filename().string().front() != '.')
            rc_files.push_back(entry.path());
    std::sort(rc_files.begin(), rc_files.end());

    const fsys::path seed_path = fixture_path("server");
    apply_server_seed(sc.server, read_text_file(seed_path), cluster::dhcp_host_names(sc.config.dhcp),
                      seed_path.string());

    // Every root the DHCP server hands out gets the same configuration files.
    try {
        for (const auto& root : cluster::dhcp_root_paths(sc.config.dhcp)) {
            install_fixture_file(sc.server, root + "/etc/fstab", fstab_text);
            install_fixture_file(sc.server, root + "/etc/rc.conf", rcconf_text);
            sc.server.nfs.make_dirs(root + "/etc/rc.d");
            for (const auto& file : rc_files)
                install_fixture_file(sc.server, root + "/etc/rc.d/" + file.filename().string(),
                                     read_text_file(file));
        }
    } catch (const fs::FsError& e) {
        fail(source_name, 0, std::string("installing fixtures: ") + e.what());
    }

    for (const auto& d : sc.script) {
        static const std::set<std::string> with_client = {"boot", "shutdown", "shutdown-begin", "login",
                                                          "logout", "pkg-install", "write", "syslog",
                                                          "assert-mounts", "assert-exists", "assert-absent"};
        if (!with_client.count(d.words[0]))
            continue;
        if (d.words.size() < 2)
            fail(source_name, d.line, d.words[0] + " needs a client");
        const std::string& who = d.words[1];
        const bool any = who == "all" && (d.words[0] == "boot" || d.words[0] == "shutdown");
        if (!any && std::none_of(sc.config.clients.begin(), sc.config.clients.end(),
                                 [&](const cluster::ClientSpec& c) { return c.name == who; }))
            fail(source_name, d.line, "undeclared client '" + who + "'");
        if (d.words[0] == "assert-mounts") {
            if (d.words.size() != 3)
                fail(source_name, d.line, "assert-mounts needs <client> <golden>");
            if (!fsys::exists(base_dir / d.words[2]))
                fail(source_name, d.line, "golden file not found: " + d.words[2]);
        }
    }
    for (const auto& d : sc.script)
        if (d.words[0] == "assert-trace" && (d.words.size() != 2 || !fsys::exists(base_dir / d.words[1])))
            fail(source_name, d.line, "assert-trace needs an existing golden file");

    return sc;
}

Scenario load_scenario(const fsys::path& path)
{
    Scenario sc = parse_scenario(read_text_file(path), path.parent_path(), path.string());
    cluster::Simulation probe(sc.server, sc.config);
    auto problems = probe.validate();
    if (!problems.empty())
        throw ScenarioError(path.string() + ": " + problems.front());
    return sc;
}

// ---------------------------------------------------------------------------

namespace {

class Runner {
public:
    Runner(const Scenario& sc, const RunOptions& options)
        : sc_(sc), sim_(sc.server, with_strict(sc.config, options.strict)),
          seed_(options.seed.value_or(sc.seed))
    {
        if (options.trace)
            sim_.on_event = options.trace;
    }

    RunReport run()
    {
        RunReport report;
        for (const auto& d : sc_.script) {
            Outcome out{d.line, d.text, true, {}};
            try {
                execute(d, out);
            } catch (const std::exception& e) {
                out.ok = false;
                out.message = e.what();
            }
            report.outcomes.push_back(std::move(out));
        }

        std::set<std::size_t> unexpected;
        for (std::size_t i = 0; i < sim_.ro_attempts().size(); ++i)
            if (!expected_ro_.count(i))
                unexpected.insert(i);
        for (auto i : unexpected) {
            const auto& a = sim_.ro_attempts()[i];
            report.violations.push_back("isolation: " + a.client + " " + a.violation.operation + " " +
                                        a.violation.path + " refused by read-only " +
                                        a.violation.mount_point);
        }
        for (const auto& v : sim_.strict_violations())
            report.violations.push_back(v);
        if (!sim_.config().strict)
            for (auto& v : sim_.check_immutability())
                report.violations.push_back(std::move(v));
        for (auto& v : sim_.check_invariants())
            report.violations.push_back(std::move(v));

        for (const auto& name : sim_.client_names())
            report.final_mounts[name] = fs::render_mount_table(sim_.client(name).mounts);
        report.trace = sim_.render_trace();
        const bool all_ok = std::all_of(report.outcomes.begin(), report.outcomes.end(),
                                        [](const Outcome& o) { return o.ok; });
        report.exit_status = all_ok && report.violations.empty() ? 0 : 1;
        return report;
    }

private:
    static cluster::SimulationConfig with_strict(cluster::SimulationConfig config, bool strict)
    {
        config.strict = config.strict || strict;
        return config;
    }

    std::vector<std::string> targets(const std::string& who) const
    {
        if (who == "all")
            return sim_.client_names();
        return {who};
    }

    // Runs `op`; true when it threw EROFS. Refusals during the call are
    // marked expected when `expect_erofs`.
    template <class Op>
    bool attempt_erofs(bool expect_erofs, Op op)
    {
        const std::size_t before = sim_.ro_attempts().size();
        bool erofs = false;
        try {
            op();
        } catch (const fs::FsError& e) {
            if (e.code() != fs::FsErrc::read_only)
                throw;
            erofs = true;
        }
        if (expect_erofs)
            for (std::size_t i = before; i < sim_.ro_attempts().size(); ++i)
                expected_ro_.insert(i);
        return erofs;
    }

    void expect_phase(const std::string& client, const std::string& expect, Outcome& out)
    {
        const auto& c = sim_.client(client);
        std::string got = std::string(cluster::to_string(c.phase));
        if (c.phase == Phase::halted && !c.halt_cause.empty())
            got += "(" + c.halt_cause + ")";

        bool ok;
        if (expect.empty()) {
            ok = c.phase == Phase::multi_user;
        } else if (expect == "expect-halt") {
            ok = c.phase == Phase::halted;
        } else if (expect.rfind("expect-halt=", 0) == 0) {
            ok = c.phase == Phase::halted && c.halt_cause == expect.substr(12);
        } else if (expect.rfind("expect-phase=", 0) == 0) {
            auto phase = cluster::parse_phase(expect.substr(13));
            if (!phase)
                throw ScenarioError("unknown phase '" + expect.substr(13) + "'");
            ok = c.phase == *phase;
        } else {
            throw ScenarioError("unknown expectation '" + expect + "'");
        }
        if (!out.message.empty())
            out.message += ", ";
        out.message += client + " " + got;
        out.ok = out.ok && ok;
    }

    void execute(const Directive& d, Outcome& out)
    {
        const auto& w = d.words;
        const std::string& op = w[0];
        auto arg = [&](std::size_t i) -> const std::string& {
            if (w.size() <= i)
                throw ScenarioError(op + ": missing argument");
            return w[i];
        };
        const bool expect_erofs = std::find(w.begin(), w.end(), "expect-erofs") != w.end();

        if (op == "boot") {
            const std::string expect = w.size() > 2 ? w[2] : "";
            const auto names = targets(arg(1));
            if (arg(1) == "all")
                sim_.boot_interleaved(names, seed_);
            else
                sim_.boot(names.front());
            for (const auto& n : names)
                expect_phase(n, expect, out);
        } else if (op == "shutdown") {
            for (const auto& n : targets(arg(1)))
                sim_.shutdown(n);
        } else if (op == "shutdown-begin") {
            sim_.begin_shutdown(arg(1));
        } else if (op == "login") {
            const bool want = !(w.size() > 3 && w[3] == "expect-deny");
            auto r = sim_.login(arg(1), arg(2));
            out.message = r.allowed ? "allowed " + r.tty : "denied(" + r.reason + ")";
            out.ok = r.allowed == want;
        } else if (op == "logout") {
            sim_.logout(arg(1), arg(2));
        } else if (op == "pkg-install") {
            std::optional<std::string> dbdir;
            if (w.size() > 3 && w[3] != "expect-erofs") {
                std::string value = w[3];
                if (value.rfind("PKG_DBDIR=", 0) == 0)
                    value = value.substr(10);
                dbdir = value;
            }
            const bool erofs = attempt_erofs(expect_erofs, [&] { sim_.pkg_install(arg(1), arg(2), dbdir); });
            out.message = erofs ? "EROFS" : "installed";
            out.ok = erofs == expect_erofs;
        } else if (op == "grant-write") {
            sim_.grant_write(arg(1));
        } else if (op == "revoke-write") {
            sim_.revoke_write(arg(1));
        } else if (op == "write") {
            std::string text = "x\n";
            if (w.size() > 3 && w[3] != "expect-erofs")
                text = w[3] + "\n";
            const bool erofs = attempt_erofs(expect_erofs, [&] { sim_.client_write(arg(1), arg(2), text); });
            out.message = erofs ? "EROFS" : "written";
            out.ok = erofs == expect_erofs;
        } else if (op == "syslog") {
            sim_.syslog(arg(1), "user", rest_after(d.text, 2));
        } else if (op == "assert-mounts") {
            const auto& c = sim_.client(arg(1));
            const std::string got = fs::normalize_mfs_ids(fs::render_mount_table(c.mounts));
            const std::string want = fs::normalize_mfs_ids(read_text_file(sc_.base_dir / arg(2)));
            out.ok = got == want;
            if (!out.ok)
                out.message = "mount table differs:\n" + got;
        } else if (op == "assert-trace") {
            const std::string want = read_text_file(sc_.base_dir / arg(1));
            out.ok = sim_.render_trace() == want;
            if (!out.ok)
                out.message = "trace differs from " + arg(1);
        } else if (op == "assert-exists" || op == "assert-absent") {
            const bool present = sim_.client(arg(1)).mounts.exists(arg(2));
            out.ok = present == (op == "assert-exists");
            out.message = present ? "present" : "absent";
        } else if (op == "assert-logged") {
            const std::string message = rest_after(d.text, 2);
            const auto& sink = sim_.server().log_sink;
            out.ok = std::any_of(sink.begin(), sink.end(), [&](const cluster::LogRecord& r) {
                return r.client == arg(1) && r.message == message;
            });
            out.message = out.ok ? "logged" : "not in server log";
        }
    }

    const Scenario& sc_;
    cluster::Simulation sim_;
    std::uint64_t seed_;
    std::set<std::size_t> expected_ro_;
};

}  // namespace

std::string RunReport::render() const
{
    std::ostringstream out;
    for (const auto& o : outcomes) {
        out << (o.ok ? "ok   " : "FAIL ") << "line " << o.line << ": " << o.directive;
        if (!o.message.empty())
            out << " -> " << o.message;
        out << '\n';
    }
    out << "violations: " << violations.size() << '\n';
    for (const auto& v : violations)
        out << "  " << v << '\n';
    out << "exit " << exit_status << '\n';
    return out.str();
}

RunReport run(const Scenario& scenario, const RunOptions& options)
{
    Runner runner(scenario, options);
    return runner.run();
}

std::string mounts_for(const Scenario& scenario, const std::string& client)
{
    cluster::Simulation sim(scenario.server, scenario.config);
    sim.boot(client);
    const auto& c = sim.client(client);
    if (c.phase != Phase::multi_user)
        throw ScenarioError(client + " did not boot: " + std::string(cluster::to_string(c.phase)) +
                            (c.halt_cause.empty() ? "" : "(" + c.halt_cause + ")"));
    return fs::normalize_mfs_ids(fs::render_mount_table(c.mounts));
}

std::string order_dir(const fsys::path& dir)
{
    if (!fsys::is_directory(dir))
        throw ScenarioError(dir.string() + ": not a directory");
    std::vector<fsys::path> files;
    for (const auto& entry : fsys::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename().string().front() != '.')
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<rc::RcScript> scripts;
    for (const auto& f : files)
        scripts.push_back(rc::make_script(f.filename().string(), read_text_file(f)));
    std::string out;
    for (const auto& name : rc::order(scripts).order)
        out += name + "\n";
    return out;
}

}  // namespace netroot::scenario
