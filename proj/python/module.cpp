#include "netroot/cluster.hpp"
#include "netroot/configparse.hpp"
#include "netroot/rcorder.hpp"
#include "netroot/scenario.hpp"

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace netroot;

namespace {

// Owns the scenario so the simulation can be rebuilt from the same files.
class PySimulation {
public:
    explicit PySimulation(const std::filesystem::path& scenario_path)
    {
        auto sc = scenario::load_scenario(scenario_path);
        seed_ = sc.seed;
        sim_ = std::make_unique<cluster::Simulation>(std::move(sc.server), std::move(sc.config));
    }

    cluster::Simulation& sim() { return *sim_; }
    std::uint64_t seed() const { return seed_; }

private:
    std::unique_ptr<cluster::Simulation> sim_;
    std::uint64_t seed_ = 1;
};

py::dict report_dict(const scenario::RunReport& r)
{
    py::list outcomes;
    for (const auto& o : r.outcomes) {
        py::dict d;
        d["line"] = o.line;
        d["directive"] = o.directive;
        d["ok"] = o.ok;
        d["message"] = o.message;
        outcomes.append(d);
    }
    py::dict out;
    out["exit_status"] = r.exit_status;
    out["outcomes"] = outcomes;
    out["violations"] = r.violations;
    out["final_mounts"] = r.final_mounts;
    out["trace"] = r.trace;
    out["text"] = r.render();
    return out;
}

py::list fstab_list(const std::vector<config::FstabEntry>& entries)
{
    py::list out;
    for (const auto& e : entries) {
        py::dict d;
        d["spec"] = e.spec;
        d["mount_point"] = e.mount_point;
        d["fstype"] = e.fstype;
        d["options"] = e.mount_options();
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Diskless NFS-root cluster simulator";

    auto base = py::register_exception<std::runtime_error>(m, "NetrootError");
    py::register_exception<fs::FsError>(m, "FsError", base.ptr());
    py::register_exception<config::ParseError>(m, "ParseError", base.ptr());
    py::register_exception<rc::OrderError>(m, "OrderError", base.ptr());
    py::register_exception<boot::BootError>(m, "BootError", base.ptr());
    py::register_exception<cluster::SimulationError>(m, "SimulationError", base.ptr());
    py::register_exception<scenario::ScenarioError>(m, "ScenarioError", base.ptr());

    m.def(
        "run_scenario",
        [](const std::filesystem::path& path, bool strict, std::optional<std::uint64_t> seed) {
            scenario::RunOptions opts;
            opts.strict = strict;
            opts.seed = seed;
            return report_dict(scenario::run(scenario::load_scenario(path), opts));
        },
        py::arg("path"), py::arg("strict") = false, py::arg("seed") = py::none());
    m.def(
        "mounts",
        [](const std::filesystem::path& path, const std::string& client) {
            return scenario::mounts_for(scenario::load_scenario(path), client);
        },
        py::arg("path"), py::arg("client"));
    m.def(
        "order",
        [](const std::filesystem::path& dir) {
            std::vector<std::string> names;
            std::istringstream in(scenario::order_dir(dir));
            for (std::string line; std::getline(in, line);)
                names.push_back(line);
            return names;
        },
        py::arg("rc_dir"));

    m.def(
        "parse_fstab",
        [](const std::string& text, std::vector<std::string> tags) {
            config::FstabParseOptions opts;
            opts.active_tags = std::move(tags);
            return fstab_list(config::parse_fstab(text, opts));
        },
        py::arg("text"), py::arg("active_tags") = std::vector<std::string>{});
    m.def(
        "parse_rc_conf", [](const std::string& text) { return config::parse_rc_conf(text).vars(); },
        py::arg("text"));
    m.def(
        "dhcp_hosts", [](const std::string& text) { return cluster::dhcp_host_names(config::parse_dhcpd(text)); },
        py::arg("text"));

    py::class_<cluster::LoginResult>(m, "LoginResult")
        .def_readonly("allowed", &cluster::LoginResult::allowed)
        .def_readonly("reason", &cluster::LoginResult::reason)
        .def_readonly("tty", &cluster::LoginResult::tty);

    py::class_<PySimulation>(m, "Simulation")
        .def(py::init<const std::filesystem::path&>(), py::arg("scenario_path"))
        .def_property_readonly("seed", &PySimulation::seed)
        .def_property_readonly("clients", [](PySimulation& s) { return s.sim().client_names(); })
        .def("boot", [](PySimulation& s, const std::string& n) { s.sim().boot(n); })
        .def(
            "boot_all",
            [](PySimulation& s, std::optional<std::uint64_t> seed) {
                s.sim().boot_interleaved(s.sim().client_names(), seed.value_or(s.seed()));
            },
            py::arg("seed") = py::none())
        .def("phase", [](PySimulation& s, const std::string& n) { return std::string(to_string(s.sim().client(n).phase)); })
        .def("halt_cause", [](PySimulation& s, const std::string& n) { return s.sim().client(n).halt_cause; })
        .def(
            "mount_table",
            [](PySimulation& s, const std::string& n, bool normalize) {
                auto text = fs::render_mount_table(s.sim().client(n).mounts);
                return normalize ? fs::normalize_mfs_ids(text) : text;
            },
            py::arg("client"), py::arg("normalize") = true)
        .def("exists", [](PySimulation& s, const std::string& n, const std::string& p) { return s.sim().client(n).mounts.exists(p); })
        .def("read_file", [](PySimulation& s, const std::string& n, const std::string& p) { return s.sim().client(n).mounts.read_file(p); })
        .def("write", [](PySimulation& s, const std::string& n, const std::string& p, std::string bytes) {
            s.sim().client_write(n, p, std::move(bytes));
        })
        .def("login", [](PySimulation& s, const std::string& n, const std::string& u) { return s.sim().login(n, u); })
        .def("logout", [](PySimulation& s, const std::string& n, const std::string& u) { s.sim().logout(n, u); })
        .def("shutdown", [](PySimulation& s, const std::string& n) { s.sim().shutdown(n); })
        .def("begin_shutdown", [](PySimulation& s, const std::string& n) { s.sim().begin_shutdown(n); })
        .def("grant_write", [](PySimulation& s, const std::string& e) { s.sim().grant_write(e); })
        .def("revoke_write", [](PySimulation& s, const std::string& e) { s.sim().revoke_write(e); })
        .def(
            "pkg_install",
            [](PySimulation& s, const std::string& n, const std::string& pkg, std::optional<std::string> dbdir) {
                s.sim().pkg_install(n, pkg, dbdir);
            },
            py::arg("client"), py::arg("pkg"), py::arg("dbdir") = py::none())
        .def("trace", [](PySimulation& s) { return s.sim().render_trace(); })
        .def("check_invariants", [](PySimulation& s) { return s.sim().check_invariants(); })
        .def("check_immutability", [](PySimulation& s) { return s.sim().check_immutability(); })
        .def("log_sink", [](PySimulation& s) {
            std::vector<std::tuple<std::string, std::string, std::string>> out;
            for (const auto& r : s.sim().server().log_sink)
                out.emplace_back(r.client, r.facility, r.message);
            return out;
        });
}
