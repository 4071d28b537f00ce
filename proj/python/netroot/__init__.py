"""Simulator of diskless clients booting from a shared read-only NFS root."""

from ._core import (
    BootError,
    FsError,
    NetrootError,
    OrderError,
    ParseError,
    ScenarioError,
    Simulation,
    SimulationError,
    dhcp_hosts,
    mounts,
    order,
    parse_fstab,
    parse_rc_conf,
    run_scenario,
)

__all__ = [
    "BootError",
    "FsError",
    "NetrootError",
    "OrderError",
    "ParseError",
    "ScenarioError",
    "Simulation",
    "SimulationError",
    "dhcp_hosts",
    "mounts",
    "order",
    "parse_fstab",
    "parse_rc_conf",
    "run_scenario",
]
