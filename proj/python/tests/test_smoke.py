import pytest

import netroot


def test_golden_scenario_runs_clean(fixtures):
    report = netroot.run_scenario(fixtures / "site" / "golden.scn")
    assert report["exit_status"] == 0
    assert report["violations"] == []
    assert all(o["ok"] for o in report["outcomes"])


def test_golden_mount_table(fixtures):
    expected = (fixtures / "site" / "golden" / "client-1.6.mounts").read_text()
    assert netroot.mounts(fixtures / "site" / "golden.scn", "client") == expected


def test_violation_exits_nonzero(fixtures):
    report = netroot.run_scenario(fixtures / "site" / "violation.scn")
    assert report["exit_status"] == 1
    assert "refused by read-only /" in report["violations"][0]


def test_seed_determinism(fixtures):
    path = fixtures / "site" / "cluster.scn"
    assert netroot.run_scenario(path)["trace"] == netroot.run_scenario(path)["trace"]
    assert netroot.run_scenario(path, seed=7)["trace"] != netroot.run_scenario(path, seed=8)["trace"]


def test_order(fixtures):
    names = netroot.order(fixtures / "site" / "rc.d")
    assert names[:3] == ["root", "shroot", "mountcritlocal"]
    with pytest.raises(netroot.OrderError, match="DependencyCycle"):
        netroot.order(fixtures / "broken" / "cycle.d")


def test_parsers(fixtures):
    entries = netroot.parse_fstab((fixtures / "site" / "fstab").read_text(), ["1.5"])
    assert [e["mount_point"] for e in entries] == ["/", "/var/games", "/tmp", "/var/run"]
    assert entries[3]["options"] == ["rw", "i=512", "s=256"]
    assert ("rc_configured", "YES") in netroot.parse_rc_conf((fixtures / "site" / "rc.conf").read_text())
    hosts = netroot.dhcp_hosts((fixtures / "site" / "dhcpd.conf").read_text())
    assert hosts[0] == "client" and len(hosts) == 10
    with pytest.raises(netroot.ParseError):
        netroot.parse_fstab("swap /tmp mfs\n")


def test_simulation_session(fixtures):
    sim = netroot.Simulation(fixtures / "site" / "cluster.scn")
    assert len(sim.clients) == 10
    sim.boot_all()
    assert {sim.phase(c) for c in sim.clients} == {"MultiUser"}
    sim.begin_shutdown("client3")
    assert sim.login("client3", "alice").reason == "nologin"
    assert sim.login("client", "alice").tty == "/dev/ttyp0"
    with pytest.raises(netroot.FsError):
        sim.write("client", "/bin/evil", "x")
    sim.write("client", "/etc/motd", "local\n")
    assert sim.read_file("client", "/etc/motd") == "local\n"
    assert sim.read_file("client2", "/etc/motd") == "NetBSD 1.6\n"
    assert sim.check_immutability() == []
    assert sim.check_invariants() == []
    assert ("client", "daemon", "boot complete") in sim.log_sink()


def test_unknown_client_halts(fixtures):
    sim = netroot.Simulation(fixtures / "broken" / "stranger.scn")
    sim.boot("stranger")
    assert sim.phase("stranger") == "Halted"
    assert sim.halt_cause("stranger") == "UnknownClientDenied"
