#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qka/adversary.hpp"
#include "qka/cluster.hpp"
#include "qka/efficiency.hpp"
#include "qka/protocol.hpp"
#include "qka/selftest.hpp"

namespace py = pybind11;
namespace qcore = qka::qcore;
using json = nlohmann::ordered_json;

namespace {

qka::protocol::ProtocolConfig config_from_string(const std::string& config_json) {
  return qka::protocol::ProtocolConfig::from_json(json::parse(config_json));
}

qcore::BasisKind basis_from_string(const std::string& basis) {
  if (basis == "Z" || basis == "z") return qcore::BasisKind::kZ;
  if (basis == "X" || basis == "x") return qcore::BasisKind::kX;
  throw std::invalid_argument("basis must be 'Z' or 'X'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "cluster-state key agreement simulator core";

  py::class_<qcore::StateVector>(m, "StateVector")
      .def_readonly("num_qubits", &qcore::StateVector::num_qubits)
      .def_readonly("amps", &qcore::StateVector::amps)
      .def("norm_sq", &qcore::StateVector::norm_sq);

  py::class_<qka::RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t>(), py::arg("seed"))
      .def("next_u64", &qka::RngStream::next_u64)
      .def("next_unit", &qka::RngStream::next_unit)
      .def("next_bit", &qka::RngStream::next_bit)
      .def("next_below", &qka::RngStream::next_below, py::arg("bound"));

  m.def("split_seed", &qka::split_seed, py::arg("base"), py::arg("index"));

  m.def("basis_state", &qcore::basis_state, py::arg("bits"));
  m.def("make_cluster_state", &qcore::make_cluster_state);
  m.def("apply_x", &qcore::apply_x, py::arg("state"), py::arg("qubit"));
  m.def(
      "measure_qubit",
      [](const qcore::StateVector& s, int qubit, const std::string& basis, qka::RngStream& rng) {
        auto [outcome, post] = qcore::measure_qubit(s, qubit, basis_from_string(basis), rng);
        return py::make_tuple(outcome, post);
      },
      py::arg("state"), py::arg("qubit"), py::arg("basis"), py::arg("rng"));
  m.def(
      "cluster_basis_measure",
      [](const qcore::StateVector& s, qka::RngStream& rng) {
        auto [index, post] = qka::cluster::cluster_basis_measure(s, rng);
        return py::make_tuple(index ? py::object(py::int_(*index)) : py::object(py::none()),
                              post);
      },
      py::arg("state"), py::arg("rng"));
  m.def(
      "codebook_index_for_mask",
      [](int mask) { return qka::cluster::derived_codebook().index_by_mask.at(mask); },
      py::arg("mask"));

  // protocol-level entry points; configs and reports travel as JSON strings
  m.def(
      "run_protocol",
      [](const std::string& config_json, const std::string& attack) {
        const auto cfg = config_from_string(config_json);
        std::unique_ptr<qka::protocol::Adversary> adversary;
        if (!attack.empty())
          adversary = qka::adversary::make_adversary(qka::adversary::parse_attack_spec(attack));
        return qka::protocol::run_protocol(cfg, adversary.get()).to_json_string();
      },
      py::arg("config_json"), py::arg("attack") = "");
  m.def(
      "estimate_detection",
      [](const std::string& config_json, const std::string& attack, int trials,
         std::uint64_t seed) {
        const auto report = qka::adversary::estimate_detection(
            config_from_string(config_json), qka::adversary::parse_attack_spec(attack), trials,
            seed);
        return report.to_json().dump();
      },
      py::arg("config_json"), py::arg("attack"), py::arg("trials"), py::arg("seed"));
  m.def(
      "collusion_report",
      [](const std::string& config_json, int trials, std::uint64_t seed, bool measure) {
        return qka::adversary::collusion_run(config_from_string(config_json), trials, seed,
                                             measure)
            .to_json()
            .dump();
      },
      py::arg("config_json"), py::arg("trials"), py::arg("seed"), py::arg("measure") = true);
  m.def(
      "efficiency",
      [](int n, int m_chunks, std::optional<int> l_verify) {
        return qka::efficiency::compute(n, m_chunks, l_verify).to_json().dump();
      },
      py::arg("n"), py::arg("m"), py::arg("l_verify") = std::nullopt);
  m.def("verify_table", []() {
    json rows = json::array();
    for (const auto& row : qka::cluster::compare_reference_table()) {
      json r;
      r["k_b"] = std::to_string(row.kb.b1) + std::to_string(row.kb.b2);
      r["k_d"] = std::to_string(row.kd.b1) + std::to_string(row.kd.b2);
      r["derived"] = row.derived_index;
      r["reference"] = row.reference_index;
      r["agree"] = row.agree;
      rows.push_back(std::move(r));
    }
    return rows.dump();
  });
  m.def(
      "selftest",
      [](const std::string& inject_fault) {
        py::list out;
        for (const auto& check : qka::selftest::run_selftest(inject_fault))
          out.append(py::make_tuple(check.name, check.pass, check.detail));
        return out;
      },
      py::arg("inject_fault") = "");
}
