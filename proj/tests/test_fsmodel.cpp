#include "netroot/fsmodel.hpp"

#include <doctest.h>

using namespace netroot::fs;

namespace {

FsNode file_node(const std::string& name, std::string bytes, std::uint16_t mode = 0644)
{
    FsNode n(NodeKind::file, name, mode);
    n.set_content(std::move(bytes));
    return n;
}

NfsServer sample_server()
{
    NfsServer s("server");
    for (const char* d : {"/BSD/root2/1.6/etc", "/BSD/root2/1.6/var", "/BSD/root2/1.6/tmp",
                          "/BSD/root2/1.6/dev", "/BSD/root/var-client/run", "/BSD/swap/client"})
        s.make_dirs(d);
    s.put("/BSD/root2/1.6/etc/motd", file_node("motd", "NetBSD 1.6\n"));
    s.put("/BSD/root2/1.6/etc/rc.conf", file_node("rc.conf", "rc_configured=YES\n"));
    s.add_export("/BSD/root2/1.6", true, true);
    s.add_export("/BSD/root/var-client", false, true);
    s.add_export("/BSD/swap/client", false, true);
    return s;
}

MountEntry nfs(const std::string& source, const std::string& mp, std::vector<std::string> opts = {})
{
    return MountEntry{MountKind::nfs, source, mp, std::move(opts), std::nullopt};
}

MountEntry mfs(const std::string& mp, std::vector<std::string> opts, std::uint64_t id = 1,
               MountKind kind = MountKind::mfs)
{
    return MountEntry{kind, "swap", mp, std::move(opts), id};
}

FsErrc code_of(auto&& fn)
{
    try {
        fn();
    } catch (const FsError& e) {
        return e.code();
    }
    FAIL("expected FsError");
    return FsErrc::invalid_path;
}

}  // namespace

TEST_CASE("paths normalize and split")
{
    CHECK(normalize_path("//a/./b/../c/") == "/a/c");
    CHECK(normalize_path("/") == "/");
    CHECK(is_normalized_absolute("/var/run"));
    CHECK_FALSE(is_normalized_absolute("/var/run/"));
    CHECK_FALSE(is_normalized_absolute("var"));
    CHECK(parent_path("/var/run") == "/var");
    CHECK(parent_path("/var") == "/");
    CHECK(base_name("/var/run") == "run");
}

TEST_CASE("mount routes paths into the per-client export")
{
    NfsServer s = sample_server();
    MountTable t;
    t.mount(nfs("server:/BSD/root2/1.6", "/", {"ro"}), &s);
    t.mount(nfs("server:/BSD/root/var-client", "/var"), &s);
    CHECK(t.owner_of("/var/run") == 1);
    CHECK(t.owner_of("/") == 0);
    CHECK(t.list("/var") == std::vector<std::string>{"run"});
    t.write_file("/var/log", "hello");
    CHECK(s.tree().walk("BSD/root/var-client/log")->content() == "hello");
}

TEST_CASE("mount errors")
{
    NfsServer s = sample_server();
    MountTable t;
    CHECK(code_of([&] { t.mount(mfs("/etc", {"s=16"}), &s); }) == FsErrc::mount_point_missing);
    t.mount(nfs("server:/BSD/root2/1.6", "/", {"ro"}), &s);
    CHECK(code_of([&] { t.mount(mfs("/nonexistent", {"s=16"}), &s); }) == FsErrc::mount_point_missing);
    CHECK(code_of([&] { t.mount(nfs("server:/BSD/nope", "/var"), &s); }) == FsErrc::export_unknown);
    CHECK(code_of([&] { t.mount(nfs("other:/BSD/root/var-client", "/var"), &s); }) ==
          FsErrc::export_unknown);
    t.mount(mfs("/tmp", {"s=16"}), &s);
    CHECK(code_of([&] { t.mount(mfs("/tmp", {"s=16"}, 2), &s); }) == FsErrc::already_mounted);
    // Unions may stack on an occupied point.
    t.mount(mfs("/tmp", {"s=16", "union"}, 3, MountKind::union_mfs), &s);
    CHECK(t.size() == 3);
}

TEST_CASE("union with empty upper falls through to the shared root")
{
    NfsServer s = sample_server();
    MountTable t;
    t.mount(nfs("server:/BSD/root2/1.6", "/", {"ro"}), &s);
    t.mount(mfs("/etc", {"i=256", "s=512", "union"}, 37, MountKind::union_mfs), &s);
    CHECK(t.read_file("/etc/rc.conf") == "rc_configured=YES\n");
    CHECK(t.list("/etc") == std::vector<std::string>{"motd", "rc.conf"});
}

TEST_CASE("resolution picks the deepest mount and is repeatable")
{
    NfsServer s = sample_server();
    MountTable t;
    t.mount(nfs("server:/BSD/root2/1.6", "/", {"ro"}), &s);
    t.mount(nfs("server:/BSD/root/var-client", "/var"), &s);
    t.mount(mfs("/var/run", {"-i=512", "-s=256"}), &s);
    t.write_file("/var/run/syslogd.pid", "34\n");
    CHECK(t.owner_of("/var/run/syslogd.pid") == 2);
    CHECK(t.owner_of("/var/run/syslogd.pid") == t.owner_of("/var/run/syslogd.pid"));
    CHECK(t.store(2)->used_inodes() == 1);
    // The export underneath is untouched.
    CHECK(s.tree().walk("BSD/root/var-client/run")->child_count() == 0);
    CHECK(t.owner_of("/") == 0);
    CHECK(code_of([&] { t.read_file("/var/run/syslogd.pid/x"); }) == FsErrc::not_a_directory);
}

TEST_CASE("writes to the read-only root are refused and leave the server intact")
{
    NfsServer s = sample_server();
    const auto before = s.export_hash("/BSD/root2/1.6");
    MountTable t;
    t.mount(nfs("server:/BSD/root2/1.6", "/", {"ro"}), &s);
    CHECK(code_of([&] { t.write_file("/newfile", "x"); }) == FsErrc::read_only);
    CHECK(code_of([&] { t.write_file("/etc/motd", "x"); }) == FsErrc::read_only);
    CHECK(code_of([&] { t.chmod("/etc", 0777); }) == FsErrc::read_only);
    CHECK(code_of([&] { t.unlink("/etc/motd"); }) == FsErrc::read_only);
    CHECK(code_of([&] { t.mkdir("/new"); }) == FsErrc::read_only);
    REQUIRE(t.ro_violations().size() == 5);
    CHECK(t.ro_violations()[0].path == "/newfile");
    CHECK(t.ro_violations()[0].mount_point == "/");
    CHECK(s.export_hash("/BSD/root2/1.6") == before);
}

TEST_CASE("the ro mount flag wins over a writable export, and remount lifts it")
{
    NfsServer s = sample_server();
    s.find_export("/BSD/root2/1.6")->read_only = false;
    MountTable t;
    t.mount(nfs("server:/BSD/root2/1.6", "/", {"ro"}), &s);
    CHECK_FALSE(t.writable("/etc"));
    t.remount("/", {"rw"});
    CHECK(t.writable("/etc"));
    t.write_file("/etc/new", "y");
    CHECK(s.tree().walk("BSD/root2/1.6/etc/new") != nullptr);
}

TEST_CASE("union writes land in the upper layer only")
{
    NfsServer s = sample_server();
    const auto before = s.export_hash("/BSD/root2/1.6");
    MountTable t;
    t.mount(nfs("server:/BSD/root2/1.6", "/", {"ro"}), &s);
    t.mount(mfs("/etc", {"i=256", "s=512", "union"}, 37, MountKind::union_mfs), &s);

    t.write_file("/etc/nologin", "going down\n");
    CHECK(t.read_file("/etc/nologin") == "going down\n");
    CHECK(t.store(1)->root().child("nologin") != nullptr);

    t.write_file("/etc/motd", "local motd\n");
    CHECK(t.read_file("/etc/motd") == "local motd\n");
    CHECK(s.tree().walk("BSD/root2/1.6/etc/motd")->content() == "NetBSD 1.6\n");

    t.chmod("/etc", 0755);
    CHECK(t.stat("/etc").mode == 0755);
    CHECK(s.tree().walk("BSD/root2/1.6/etc")->mode() == 0755);

    t.unlink("/etc/rc.conf");
    CHECK_FALSE(t.exists("/etc/rc.conf"));
    CHECK(t.store(1)->whited_out("rc.conf"));
    CHECK(s.tree().walk("BSD/root2/1.6/etc/rc.conf") != nullptr);

    CHECK(s.export_hash("/BSD/root2/1.6") == before);
    CHECK(t.ro_violations().empty());
}

TEST_CASE("chmod on a union mount point changes only the upper root")
{
    NfsServer s = sample_server();
    s.tree().walk("BSD/root2/1.6/etc")->set_mode(0700);
    MountTable t;
    t.mount(nfs("server:/BSD/root2/1.6", "/", {"ro"}), &s);
    t.mount(mfs("/etc", {"i=256", "s=512", "union"}, 37, MountKind::union_mfs), &s);
    CHECK(t.stat("/etc").mode == 01777);
    t.chmod("/etc", 0755);
    CHECK(t.stat("/etc").mode == 0755);
    CHECK(s.tree().walk("BSD/root2/1.6/etc")->mode() == 0700);
}

TEST_CASE("device owners change inside the memory /dev")
{
    NfsServer s = sample_server();
    MountTable t;
    t.mount(nfs("server:/BSD/root2/1.6", "/", {"ro"}), &s);
    t.mount(mfs("/dev", {"i=256", "s=512"}), &s);
    t.mknod("/dev/ttyp0", 0600, 0);
    t.chown("/dev/ttyp0", 1000);
    CHECK(t.stat("/dev/ttyp0").owner == 1000);
    CHECK(t.stat("/dev/ttyp0").kind == NodeKind::device);
    t.chown("/dev/ttyp0", 0);
    CHECK(t.stat("/dev/ttyp0").owner == 0);
}

TEST_CASE("mfs sizing follows newfs conventions")
{
    CHECK(mfs_size_from_options({"rw", "-i=512", "-s=256"}).capacity_bytes() == 131072);
    CHECK(mfs_size_from_options({"rw", "-i=512", "-s=256"}).max_inodes() == 256);
    CHECK(mfs_size_from_options({"i=256", "s=512", "union"}).max_inodes() == 1024);
    // Default inode density.
    CHECK(mfs_size_from_options({"rw", "-s=32768"}).max_inodes() == 2048);
    CHECK(mfs_size_from_options({"rw", "-s=32768"}).capacity_bytes() == 32768ULL * 512);
}

TEST_CASE("mfs inode capacity is exact")
{
    NfsServer s = sample_server();
    for (auto [sectors, density] : {std::pair{256, 512}, std::pair{16, 1024}, std::pair{3, 512}}) {
        MountTable t;
        t.mount(nfs("server:/BSD/root2/1.6", "/", {"ro"}), &s);
        t.mount(mfs("/tmp", {"s=" + std::to_string(sectors), "i=" + std::to_string(density)}), &s);
        const int expected = sectors * 512 / density;
        for (int i = 0; i < expected; ++i)
            t.mksock("/tmp/n" + std::to_string(i));
        CHECK(code_of([&] { t.mksock("/tmp/overflow"); }) == FsErrc::no_space);
        CHECK(t.store(1)->used_inodes() == static_cast<std::uint64_t>(expected));
        // Freeing one slot makes room again.
        t.unlink("/tmp/n0");
        t.mksock("/tmp/overflow");
    }
}

TEST_CASE("mfs byte capacity is enforced")
{
    NfsServer s = sample_server();
    MountTable t;
    t.mount(nfs("server:/BSD/root2/1.6", "/", {"ro"}), &s);
    t.mount(mfs("/tmp", {"s=2", "i=64"}), &s);
    t.write_file("/tmp/a", std::string(1000, 'a'));
    CHECK(code_of([&] { t.write_file("/tmp/b", std::string(25, 'b')); }) == FsErrc::no_space);
    t.write_file("/tmp/b", std::string(24, 'b'));
    CHECK(code_of([&] { t.write_file("/tmp/a", std::string(1001, 'a')); }) == FsErrc::no_space);
    CHECK(t.read_file("/tmp/a").size() == 1000);
}

TEST_CASE("symlinks resolve and loops are detected")
{
    NfsServer s = sample_server();
    MountTable t;
    t.mount(nfs("server:/BSD/root2/1.6", "/", {"ro"}), &s);
    t.mount(mfs("/tmp", {"s=64"}), &s);
    t.symlink("/tmp/motd", "/etc/motd");
    CHECK(t.read_file("/tmp/motd") == "NetBSD 1.6\n");
    CHECK(t.read_link("/tmp/motd") == "/etc/motd");
    t.symlink("/tmp/rel", "../etc");
    CHECK(t.read_file("/tmp/rel/motd") == "NetBSD 1.6\n");
    t.symlink("/tmp/a", "/tmp/b");
    t.symlink("/tmp/b", "/tmp/a");
    CHECK(code_of([&] { t.read_file("/tmp/a"); }) == FsErrc::loop_detected);
    CHECK_FALSE(t.exists("/tmp/a"));
    CHECK(t.lstat("/tmp/a").kind == NodeKind::symlink);
}

TEST_CASE("unmount order")
{
    NfsServer s = sample_server();
    MountTable t;
    t.mount(nfs("server:/BSD/root2/1.6", "/", {"ro"}), &s);
    t.mount(nfs("server:/BSD/root/var-client", "/var"), &s);
    t.mount(mfs("/var/run", {"s=64"}), &s);
    CHECK(code_of([&] { t.unmount("/var"); }) == FsErrc::busy);
    t.unmount("/var/run");
    t.unmount("/var");
    CHECK(t.size() == 1);
    CHECK(code_of([&] { t.unmount("/var"); }) == FsErrc::not_found);
}

TEST_CASE("mount table rendering")
{
    NfsServer s = sample_server();
    MountTable t;
    CHECK(render_mount_table(t).empty());
    t.mount(nfs("server:/BSD/root2/1.6", "/", {"ro"}), &s);
    t.mount(nfs("server:/BSD/root/var-client", "/var"), &s);
    t.mount(mfs("/etc", {"i=256", "s=512", "union"}, 37, MountKind::union_mfs), &s);
    t.mount(mfs("/tmp", {"rw", "-s=32768"}, 1085), &s);
    const std::string expected =
        "server:/BSD/root2/1.6 on / type nfs (read-only)\n"
        "server:/BSD/root/var-client on /var type nfs\n"
        "mfs:37 on /etc type mfs (asynchronous, local, union)\n"
        "mfs:1085 on /tmp type mfs (asynchronous, local)\n";
    CHECK(render_mount_table(t) == expected);
    CHECK(normalize_mfs_ids(render_mount_table(t)).find("mfs:* on /etc") != std::string::npos);
    CHECK(normalize_mfs_ids("mfs:1085 on /tmp") == "mfs:* on /tmp");
}

TEST_CASE("content hash covers names, bytes and metadata")
{
    NfsServer a = sample_server();
    NfsServer b = sample_server();
    CHECK(a.export_hash("/BSD/root2/1.6") == b.export_hash("/BSD/root2/1.6"));
    b.tree().walk("BSD/root2/1.6/etc/motd")->set_content("NetBSD 1.6 \n");
    CHECK(a.export_hash("/BSD/root2/1.6") != b.export_hash("/BSD/root2/1.6"));
    NfsServer c = sample_server();
    c.tree().walk("BSD/root2/1.6/etc/motd")->set_owner(5);
    CHECK(a.export_hash("/BSD/root2/1.6") != c.export_hash("/BSD/root2/1.6"));
    CHECK(hex64(0xcbf29ce484222325ULL) == "cbf29ce484222325");
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}
