#include <cmath>
#include <sstream>

#include "qka/adversary.hpp"
#include "qka/cluster.hpp"
#include "qka/selftest.hpp"

namespace qka::selftest {

namespace {

CheckResult check_codebook(bool inject) {
  CheckResult r{"codebook-soundness", false, ""};
  const cluster::Codebook& cb = cluster::derived_codebook();

  double worst = 0.0;
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      worst = std::max(worst,
                       std::abs(std::abs(qcore::inner_product(cb.frame[i], cb.frame[j])) - want));
    }
  if (worst > 1e-9) {
    r.detail = "frame is not orthonormal, gram deviation " + std::to_string(worst);
    return r;
  }

  std::array<bool, 16> seen{};
  for (int mask = 0; mask < 16; ++mask) {
    const int index = cb.index_by_mask[mask];
    if (index < 1 || index > 16 || seen[index - 1]) {
      r.detail = "mask-to-state map is not a bijection";
      return r;
    }
    seen[index - 1] = true;
  }

  // spot anchors: the identity mask keeps the base state, and the mask acts
  // as an offset into the frame ordering
  const int base = inject ? 2 : 1;
  for (int mask = 0; mask < 16; ++mask) {
    if (cb.index_by_mask[mask] != mask + base) {
      r.detail = "mask " + std::to_string(mask) + " maps to C" +
                 std::to_string(cb.index_by_mask[mask]) + ", expected C" +
                 std::to_string(mask + base);
      return r;
    }
  }
  r.pass = true;
  return r;
}

CheckResult check_correlations(bool inject) {
  CheckResult r{"cluster-correlations", false, ""};
  // injection swaps in the all-plus product state, whose Z pass rate is 5/32
  qcore::StateVector probe = qcore::make_cluster_state();
  if (inject) {
    probe.amps.assign(64, 1.0 / 8.0);
  }
  const double z = adversary::z_round_pass_probability(probe);
  const double x = adversary::x_round_pass_probability(probe);
  // Z is an exact invariant of the agreed state; X is a coin flip on it (the
  // all-X outcome distribution is uniform), which is itself a fixed quantity
  // worth pinning down
  if (std::abs(z - 1.0) > 1e-12 || std::abs(x - 0.5) > 1e-12) {
    std::ostringstream os;
    os << "correlation pass probabilities z=" << z << " x=" << x << ", expected z=1 x=0.5";
    r.detail = os.str();
    return r;
  }
  r.pass = true;
  return r;
}

CheckResult check_golden_run(bool inject) {
  CheckResult r{"golden-example-run", false, ""};
  protocol::ProtocolConfig cfg;
  cfg.n = 5;
  cfg.m = 3;
  cfg.l_verify = 2;
  cfg.pivot = 3;
  cfg.seed = 20240901;
  cfg.fixed_keys = {{hashmod::KeyString::parse(inject ? "10,11,11" : "10,11,10"),
                     hashmod::KeyString::parse("00,01,01"),
                     hashmod::KeyString::parse("11,01,00"),
                     hashmod::KeyString::parse("11,10,11"),
                     hashmod::KeyString::parse("00,10,01")}};

  protocol::RunTrace trace;
  const protocol::Transcript tr = protocol::run_protocol(cfg, nullptr, &trace);
  if (tr.aborted()) {
    r.detail = "honest run aborted in " + tr.abort->phase;
    return r;
  }
  if (tr.shared_key->to_chunked_string() != "10,11,01") {
    r.detail = "recovered key " + tr.shared_key->to_chunked_string() + ", expected 10,11,01";
    return r;
  }
  const std::vector<int> want{12, 9, 15};
  if (trace.cluster_outcomes != want) {
    std::string got;
    for (int c : trace.cluster_outcomes) got += "C" + std::to_string(c) + " ";
    r.detail = "cluster outcomes " + got + ", expected C12 C9 C15";
    return r;
  }
  for (const auto& phase : tr.phases) {
    if (phase.at("phase") != "measurement") continue;
    if (phase.at("k_b") != "10,10,11" || phase.at("k_d") != "11,00,10") {
      r.detail = "measured k_b/k_d do not match the worked values";
      return r;
    }
  }
  r.pass = true;
  return r;
}

CheckResult check_hash(bool inject) {
  CheckResult r{"hash-homomorphism", false, ""};

  const hashmod::HashParams xl = hashmod::xor_linear_params(64, 6, 42);
  RngStream rng(7);
  for (int i = 0; i < 200; ++i) {
    const hashmod::KeyString a = hashmod::KeyString::random(3, rng);
    const hashmod::KeyString b = hashmod::KeyString::random(3, rng);
    hashmod::Digest left = hashmod::combine(hashmod::hash(a, xl), hashmod::hash(b, xl));
    if (inject) left.value ^= 1;
    if (!(left == hashmod::hash(a.xored(b), xl))) {
      r.detail = "xor-linear combine(H(x),H(y)) != H(x^y) for x=" + a.to_chunked_string() +
                 " y=" + b.to_chunked_string();
      return r;
    }
  }

  const hashmod::HashParams me = hashmod::modexp_params(2, 11);
  hashmod::KeyString three, two, five;
  three.bits = {0, 0, 1, 1};
  two.bits = {0, 0, 1, 0};
  five.bits = {0, 1, 0, 1};
  const std::uint64_t h3 = hashmod::hash(three, me).value;
  const std::uint64_t h2 = hashmod::hash(two, me).value;
  const std::uint64_t h5 = hashmod::hash(five, me).value;
  const std::uint64_t product = hashmod::combine(hashmod::hash(three, me), hashmod::hash(two, me)).value;
  if (h3 != 8 || h2 != 4 || h5 != 10 || product != h5) {
    std::ostringstream os;
    os << "modexp worked values off: H(3)=" << h3 << " H(2)=" << h2 << " H(5)=" << h5
       << " H(3)*H(2)=" << product;
    r.detail = os.str();
    return r;
  }
  r.pass = true;
  return r;
}

}  // namespace

std::vector<CheckResult> run_selftest(const std::string& inject_fault) {
  return {
      check_codebook(inject_fault == "codebook-soundness"),
      check_correlations(inject_fault == "cluster-correlations"),
      check_golden_run(inject_fault == "golden-example-run"),
      check_hash(inject_fault == "hash-homomorphism"),
  };
}

}  // namespace qka::selftest
