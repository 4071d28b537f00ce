#include "netroot/configparse.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <random>

using namespace netroot::config;

namespace {

ParseErrc parse_code(auto&& fn)
{
    try {
        fn();
    } catch (const ParseError& e) {
        return e.code();
    }
    FAIL("expected ParseError");
    return ParseErrc::unexpected_token;
}

int parse_line(auto&& fn)
{
    try {
        fn();
    } catch (const ParseError& e) {
        return e.line();
    }
    return -1;
}

}  // namespace

// ---------------------------------------------------------------------------
// fstab

TEST_CASE("fstab: root line")
{
    auto entries = parse_fstab("server:/BSD/root2/1.6 / nfs ro 0 0\n");
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].spec == "server:/BSD/root2/1.6");
    CHECK(entries[0].mount_point == "/");
    CHECK(entries[0].fstype == "nfs");
    REQUIRE(entries[0].options.size() == 1);
    CHECK(entries[0].options[0].key == "ro");
    CHECK_FALSE(entries[0].options[0].value);
    CHECK(entries[0].dump == 0);
    CHECK(entries[0].pass == 0);
}

TEST_CASE("fstab: release-tagged lines are comments unless activated")
{
    const std::string line = "#1.5: swap /var/run mfs rw,-i=512,-s=256 0 0\n";
    CHECK(parse_fstab(line).empty());
    FstabParseOptions opts;
    opts.active_tags = {"1.5"};
    auto entries = parse_fstab(line, opts);
    REQUIRE(entries.size() == 1);
    CHECK(entries[0].tag == "1.5");
    CHECK(entries[0].mount_point == "/var/run");
    CHECK(entries[0].mount_options() == std::vector<std::string>{"rw", "i=512", "s=256"});
    CHECK(entries[0].options[1].dashed);
    CHECK(entries[0].options[1].key == "i");
    CHECK(entries[0].options[1].value == "512");
}

TEST_CASE("fstab: errors carry line numbers")
{
    CHECK(parse_code([] { parse_fstab("a b c\n"); }) == ParseErrc::field_count);
    CHECK(parse_line([] { parse_fstab("# c\n\na b c d e f g\n"); }) == 3);
    CHECK(parse_code([] { parse_fstab("swap /tmp mfs rw,,x 0 0\n"); }) == ParseErrc::bad_option_syntax);
    CHECK(parse_code([] { parse_fstab("swap /tmp mfs -s= 0 0\n"); }) == ParseErrc::bad_option_syntax);
    CHECK(parse_code([] { parse_fstab("swap /tmp mfs rw x 0\n"); }) == ParseErrc::bad_number);
}

TEST_CASE("fstab: site figure")
{
    const auto entries = parse_fstab(read_fixture("site/fstab"));
    REQUIRE(entries.size() == 3);
    CHECK(entries[1].spec == "server:/BSD/root/vargames");
    CHECK(entries[1].mount_point == "/var/games");
    CHECK(entries[1].has_flag("rw"));
    CHECK(entries[2].spec == "swap");
    CHECK(entries[2].fstype == "mfs");
    CHECK(entries[2].mount_options() == std::vector<std::string>{"rw", "s=32768"});
}

TEST_CASE("fstab: round trip")
{
    FstabParseOptions opts;
    opts.active_tags = {"1.5"};
    for (const auto& text : {read_fixture("site/fstab"), std::string("a /b nfs rw,-x=1,y 1 2\n")}) {
        const auto first = parse_fstab(text, opts);
        CHECK(parse_fstab(serialize_fstab(first), opts) == first);
    }
}

// ---------------------------------------------------------------------------
// rc.conf

TEST_CASE("rc.conf: site examples")
{
    CHECK(parse_rc_conf("shroot_pfx_swap=server:/BSD/swap/\n").get("shroot_pfx_swap") == "server:/BSD/swap/");
    auto multi = parse_rc_conf("sshd=YES postfix=YES ntpd=YES\n");
    CHECK(multi.vars().size() == 3);
    CHECK(multi.enabled("postfix"));
    auto commented = parse_rc_conf("inetd=YES       # ntalk, (c)fingerd\n");
    CHECK(commented.vars().size() == 1);
    CHECK(commented.get("inetd") == "YES");
    CHECK(parse_rc_conf("lpd=YES lpd_flags=-s\n").get("lpd_flags") == "-s");
}

TEST_CASE("rc.conf: quoting and overrides")
{
    auto conf = parse_rc_conf("critical_filesystems_local=\"/var /var/run\"\na=1\nb='x y'\na=2\n");
    CHECK(conf.get("critical_filesystems_local") == "/var /var/run");
    CHECK(conf.get("a") == "2");
    CHECK(conf.vars()[1].first == "a");
    CHECK(conf.get("b") == "x y");
    CHECK(conf.get_or("missing", "dflt") == "dflt");
    CHECK(parse_rc_conf("x=NO\n").enabled("x", true) == false);
    CHECK(parse_rc_conf("").enabled("x", true));
    CHECK(parse_rc_conf("x=yes\n").enabled("x"));
}

TEST_CASE("rc.conf: errors")
{
    CHECK(parse_code([] { parse_rc_conf("1abc=3\n"); }) == ParseErrc::bad_assignment);
    CHECK(parse_code([] { parse_rc_conf("just words\n"); }) == ParseErrc::bad_assignment);
    CHECK(parse_line([] { parse_rc_conf("a=1\nb=\"open\n"); }) == 2);
    CHECK(is_shell_identifier("shroot_pfx_var"));
    CHECK_FALSE(is_shell_identifier("9x"));
}

TEST_CASE("rc.conf: site figure")
{
    const auto conf = parse_rc_conf(read_fixture("site/rc.conf"));
    CHECK(conf.get("rc_configured") == "YES");
    CHECK(conf.get("shroot_pfx_var") == "server:/BSD/root/var-");
    CHECK(conf.get("critical_filesystems_local") == "/var /var/run");
    CHECK_FALSE(conf.get("critical_filesystems_beforenet"));
    CHECK(conf.get("amd_dir") == "/var/amdroot");
    CHECK(conf.get("domainname") == "nis.doma.in");
    CHECK(conf.vars().size() == 19);
    CHECK(parse_rc_conf(serialize_rc_conf(conf)) == conf);
}

TEST_CASE("rc.conf: round trip of awkward values")
{
    RcConf conf;
    conf.set("a", "has space");
    conf.set("b", "quote\"inside");
    conf.set("c", "$dollar and `tick` \\ slash");
    conf.set("d", "");
    conf.set("e", "#hash");
    CHECK(parse_rc_conf(serialize_rc_conf(conf)) == conf);
}

// ---------------------------------------------------------------------------
// rc.d headers

TEST_CASE("rc header: shroot figure")
{
    const auto h = parse_rc_header("shroot", read_fixture("site/rc.d/shroot"));
    CHECK(h.provides == std::vector<std::string>{"shroot"});
    CHECK(h.requires_ == std::vector<std::string>{"root"});
    CHECK(h.before == std::vector<std::string>{"mountcritlocal"});
    CHECK(parse_rc_header("shroot", serialize_rc_header(h)) == h);
}

TEST_CASE("rc header: defaults and lists")
{
    const auto bare = parse_rc_header("foo", "#!/bin/sh\necho hi\n");
    CHECK(bare.provides == std::vector<std::string>{"foo"});
    CHECK(bare.requires_.empty());
    CHECK(bare.before.empty());
    const auto two = parse_rc_header("x", "# REQUIRE: root network\n# REQUIRE: syslogd\n");
    CHECK(two.requires_ == std::vector<std::string>{"root", "network", "syslogd"});
}

// ---------------------------------------------------------------------------
// dhcpd.conf

TEST_CASE("dhcpd: site figure")
{
    const auto cfg = parse_dhcpd(read_fixture("site/dhcpd.conf"));
    CHECK(cfg.warnings.empty());
    CHECK(cfg.deny_unknown_clients);
    CHECK(cfg.use_host_decl_names);
    REQUIRE(cfg.subnets.size() == 1);
    CHECK(cfg.subnets[0].network == "10.10.10.0");
    CHECK(cfg.subnets[0].netmask == "255.255.255.0");
    REQUIRE(cfg.subnets[0].groups.size() == 1);
    const auto& group = cfg.subnets[0].groups[0];
    CHECK(group.hosts.size() == 10);
    CHECK(group.hosts[0].name == "client");
    CHECK(group.hosts[0].mac == "10:20:30:40:50:60");
    CHECK(group.hosts[0].fixed_address == "client.my.doma.in");
    auto param = [&](const std::string& name) {
        for (const auto& p : group.params)
            if (p.name == name)
                return p.text();
        return std::string("<absent>");
    };
    CHECK(param("root-path") == "/BSD/root2/1.6");
    CHECK(param("filename") == "netbsd-SHARK-1.6");
    CHECK(param("next-server") == "server");
    CHECK(param("server-name") == "server");
    CHECK(cfg.params[1].list() == std::vector<std::string>{"10.10.10.2", "10.10.10.1"});
}

TEST_CASE("dhcpd: verbatim excerpt with a single host")
{
    const std::string text = R"(option domain-name "my.doma.in";
option domain-name-servers 10.10.10.2, 10.10.10.1;
deny unknown-clients;
use-host-decl-names on;
subnet 10.10.10.0 netmask 255.255.255.0 {
        option routers 10.10.10.3;
        group {
                option lpr-servers server.my.doma.in;
                server-name "server";
                next-server server;
                filename "netbsd-SHARK-1.6";
                option root-path "/BSD/root2/1.6";
                host client {
                        hardware ethernet 10:20:30:40:50:60;
                        fixed-address client.my.doma.in;
                }
        }
}
)";
    const auto cfg = parse_dhcpd(text);
    CHECK(cfg.warnings.empty());
    CHECK(cfg.subnets.at(0).groups.at(0).hosts.size() == 1);
    CHECK(parse_dhcpd(serialize_dhcpd(cfg)) == cfg);
}

TEST_CASE("dhcpd: errors and edge cases")
{
    CHECK(parse_code([] { parse_dhcpd("host h { hardware ethernet zz:10:20:30:40:50; }"); }) ==
          ParseErrc::bad_mac);
    CHECK(parse_code([] { parse_dhcpd("group { filename \"x\";"); }) == ParseErrc::unbalanced_braces);
    CHECK(parse_code([] { parse_dhcpd("}"); }) == ParseErrc::unbalanced_braces);
    CHECK(parse_code([] { parse_dhcpd("group {\n filename \"x\"\n}"); }) == ParseErrc::missing_semicolon);
    CHECK(parse_line([] { parse_dhcpd("group {\n filename \"x\"\n}"); }) == 2);
    CHECK(parse_code([] { parse_dhcpd("filename \"x;"); }) == ParseErrc::unterminated_string);

    const auto empty = parse_dhcpd("");
    CHECK_FALSE(empty.deny_unknown_clients);
    CHECK(empty.subnets.empty());

    const auto warned = parse_dhcpd("ddns-update-style none;\ngroup { max-lease-time 5; }\n");
    CHECK(warned.warnings.size() == 2);
    CHECK(warned.warnings[0].line == 1);
    CHECK(canonical_mac("10:20:30:40:50:6A") == "10:20:30:40:50:6a");
    CHECK_FALSE(canonical_mac("10:20:30:40:50"));
}

TEST_CASE("dhcpd: round trip of nested scopes")
{
    const std::string text = R"(option domain-name "d";
host top { hardware ethernet 00:00:00:00:00:01; fixed-address 10.0.0.1; }
group { next-server a; group { filename "k"; host h2 { hardware ethernet 00:00:00:00:00:02; } } }
subnet 10.0.0.0 netmask 255.0.0.0 { option routers 10.0.0.254; host h3 { option root-path "/r"; } }
)";
    const auto cfg = parse_dhcpd(text);
    CHECK(cfg.hosts.size() == 1);
    CHECK(cfg.groups.at(0).groups.at(0).hosts.at(0).name == "h2");
    CHECK(parse_dhcpd(serialize_dhcpd(cfg)) == cfg);
}

// ---------------------------------------------------------------------------
// totality: mutated fixtures either parse or fail with a positioned error

TEST_CASE("parsers are total over mutated inputs")
{
    const std::vector<std::string> seeds = {read_fixture("site/fstab"), read_fixture("site/rc.conf"),
                                            read_fixture("site/dhcpd.conf"), read_fixture("site/rc.d/shroot")};
    const std::string alphabet = " \t\n#{};,\"'=-/:abc019\\";
    std::mt19937_64 rng(42);
    int failures = 0;
    for (int round = 0; round < 2000; ++round) {
        std::string text = seeds[rng() % seeds.size()];
        const int edits = 1 + static_cast<int>(rng() % 6);
        for (int e = 0; e < edits && !text.empty(); ++e) {
            const std::size_t pos = rng() % text.size();
            switch (rng() % 3) {
            case 0: text[pos] = alphabet[rng() % alphabet.size()]; break;
            case 1: text.erase(pos, 1 + rng() % 8); break;
            default: text.insert(pos, 1, alphabet[rng() % alphabet.size()]); break;
            }
        }
        for (int parser = 0; parser < 4; ++parser) {
            try {
                switch (parser) {
                case 0: parse_fstab(text); break;
                case 1: parse_rc_conf(text); break;
                case 2: parse_dhcpd(text); break;
                default: parse_rc_header("x", text); break;
                }
            } catch (const ParseError& e) {
                if (e.line() < 1)
                    ++failures;
            }
        }
    }
    CHECK(failures == 0);
}
