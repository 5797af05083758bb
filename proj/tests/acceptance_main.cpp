// Acceptance gate: one pass/fail line per criterion, nonzero exit when any
// line fails. Each check recomputes its expectations from scratch rather
// than trusting the library's own constants, so a silent regression in the
// core cannot hide behind a matching regression here.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qka/adversary.hpp"
#include "qka/cluster.hpp"
#include "qka/efficiency.hpp"
#include "qka/hashmod.hpp"
#include "qka/protocol.hpp"
#include "qka/qcore.hpp"

using qka::RngStream;
using qka::hashmod::KeyString;
using qka::protocol::ProtocolConfig;
using qka::protocol::Transcript;
namespace adversary = qka::adversary;
namespace cluster = qka::cluster;
namespace hashmod = qka::hashmod;
namespace protocol = qka::protocol;
namespace qcore = qka::qcore;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void report(int index, const Outcome& o) {
  std::cout << "criterion " << index << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
            << "\n";
  std::cout.flush();
  if (!o.pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ProtocolConfig golden_config() {
  ProtocolConfig cfg;
  cfg.n = 5;
  cfg.m = 3;
  cfg.l_verify = 2;
  cfg.pivot = 3;
  cfg.seed = 20240901;
  cfg.fixed_keys = std::vector<KeyString>{
      KeyString::parse("10,11,10"), KeyString::parse("00,01,01"),
      KeyString::parse("11,01,00"), KeyString::parse("11,10,11"),
      KeyString::parse("00,10,01")};
  return cfg;
}

std::array<int, 6> measure_all(qcore::StateVector s, qcore::BasisKind basis, RngStream& rng) {
  std::array<int, 6> out{};
  for (int q = 1; q <= 6; ++q) {
    auto [o, post] = qcore::measure_qubit(s, q, basis, rng);
    out[q - 1] = o;
    s = std::move(post);
  }
  return out;
}

// 1. The worked example reproduces exactly, in under a second.
Outcome golden_example() {
  const auto t0 = std::chrono::steady_clock::now();
  protocol::RunTrace trace;
  const Transcript t = protocol::run_protocol(golden_config(), nullptr, &trace);
  const double dt = seconds_since(t0);

  std::ostringstream os;
  if (t.aborted()) return {false, "golden run aborted in " + t.abort->phase};
  const std::string s = t.shared_key->to_chunked_string();

  std::string k_b, k_d;
  for (const auto& p : t.phases)
    if (p.at("phase") == "measurement") {
      k_b = p.at("k_b").get<std::string>();
      k_d = p.at("k_d").get<std::string>();
    }

  const bool ok = s == "10,11,01" && k_b == "10,10,11" && k_d == "11,00,10" &&
                  trace.cluster_outcomes == std::vector<int>{12, 9, 15} && dt < 1.0;
  os << "s=" << s << ", K_B=" << k_b << ", K_D=" << k_d << ", outcomes C"
     << trace.cluster_outcomes[0] << ",C" << trace.cluster_outcomes[1] << ",C"
     << trace.cluster_outcomes[2] << ", " << std::lround(dt * 1000) << " ms";
  return {ok, os.str()};
}

// 2. 500 seeded honest runs across n and m recover the XOR of all keys.
Outcome correctness_sweep() {
  const int kRuns = 500;
  int good = 0;
  for (int i = 0; i < kRuns; ++i) {
    ProtocolConfig cfg;
    cfg.n = std::array{3, 5, 7}[i % 3];
    cfg.m = 1 + (i / 3) % 8;
    cfg.l_verify = 2;
    cfg.seed = 1000 + static_cast<std::uint64_t>(i);

    protocol::RunTrace trace;
    const Transcript t = protocol::run_protocol(cfg, nullptr, &trace);
    if (t.aborted() || !t.shared_key) continue;
    KeyString expect = KeyString::zero(cfg.m);
    for (const auto& k : trace.keys) expect = expect.xored(k);
    good += *t.shared_key == expect;
  }
  std::ostringstream os;
  os << good << "/" << kRuns << " honest runs recovered the xor of all keys (n in {3,5,7}, m in "
     << "1..8, random keys and pivots)";
  return {good == kRuns, os.str()};
}

// 3. Codebook: orthonormal frame, 13/16 table agreement, the three known
// disagreements pinned down.
Outcome codebook_check() {
  const auto& book = cluster::derived_codebook();
  double gram_dev = 0.0;
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j) {
      const auto ip = qcore::inner_product(book.frame[i], book.frame[j]);
      gram_dev = std::max(gram_dev, std::abs(ip - (i == j ? 1.0 : 0.0)));
    }

  const auto rows = cluster::compare_reference_table();
  int agree = 0;
  bool disagreements_pinned = true;
  for (const auto& row : rows) {
    if (row.agree) {
      ++agree;
      continue;
    }
    // every disagreement sits on a K_B=11 row, and the derived index is the
    // one consistent with the state list and the worked example
    const bool kb11 = row.kb.b1 == 1 && row.kb.b2 == 1;
    const int mask = cluster::chunks_to_mask(row.kb, row.kd).value();
    disagreements_pinned =
        disagreements_pinned && kb11 && row.derived_index == book.index_by_mask[mask];
  }

  std::ostringstream os;
  os << "gram deviation " << gram_dev << ", " << agree
     << "/16 rows agree with the reference table; the three K_B=11 disagreements follow the "
     << "state list (documented erratum)";
  return {gram_dev < 1e-9 && agree == 13 && disagreements_pinned, os.str()};
}

// 4. Correlation invariants over 10,000 sampled measurements. The Z relation
// is an invariant and must hold every time. The X relation is not one: the
// all-X outcome distribution of the agreed state is uniform over all 64
// patterns, so its pass rate is exactly 1/2 and the circulated always-holds
// claim is unsatisfiable. The criterion is scored against the derived law,
// and the engine verifies identities in Z only; this is the documented
// resolution, same as the codebook table rows.
Outcome correlation_invariants() {
  const int kSamples = 10000;
  RngStream rng(4242);
  const qcore::StateVector cluster_state = qcore::make_cluster_state();

  int z_pass = 0, x_pass = 0;
  for (int i = 0; i < kSamples; ++i) {
    const auto zb = measure_all(cluster_state, qcore::BasisKind::kZ, rng);
    z_pass += cluster::check_z_correlation(cluster::pair_symbol_z(zb[0], zb[1]),
                                           cluster::pair_symbol_z(zb[2], zb[3]),
                                           cluster::pair_symbol_z(zb[4], zb[5]));
    const auto xb = measure_all(cluster_state, qcore::BasisKind::kX, rng);
    x_pass += cluster::check_x_correlation(cluster::pair_symbol_x(xb[0], xb[1]),
                                           cluster::pair_symbol_x(xb[2], xb[3]),
                                           cluster::pair_symbol_x(xb[4], xb[5]));
  }
  const double x_rate = static_cast<double>(x_pass) / kSamples;
  const double x_law = adversary::x_round_pass_probability(cluster_state);

  // wrong-state detection: one Z round against |++++++>, sampled vs the
  // enumerated accepting-set probability
  qcore::StateVector plus;
  plus.num_qubits = 6;
  plus.amps.assign(64, 1.0 / 8.0);
  const double enumerated_detect = 1.0 - adversary::z_round_pass_probability(plus);
  int detected = 0;
  for (int i = 0; i < kSamples; ++i) {
    const auto zb = measure_all(plus, qcore::BasisKind::kZ, rng);
    detected += !cluster::check_z_correlation(cluster::pair_symbol_z(zb[0], zb[1]),
                                              cluster::pair_symbol_z(zb[2], zb[3]),
                                              cluster::pair_symbol_z(zb[4], zb[5]));
  }
  const double detect_rate = static_cast<double>(detected) / kSamples;

  const bool ok = z_pass == kSamples && std::abs(x_law - 0.5) < 1e-12 &&
                  std::abs(x_rate - 0.5) < 0.02 &&
                  std::abs(detect_rate - enumerated_detect) < 0.02;
  std::ostringstream os;
  os << "z-correlation " << z_pass << "/" << kSamples << "; x-correlation " << x_rate
     << " matching the derived 1/2 law (uniform all-X spectrum; the always-holds claim is "
     << "unsatisfiable for this state, so identity rounds measure Z only - documented erratum); "
     << "|++++++> Z detection " << detect_rate << " vs enumerated " << enumerated_detect;
  return {ok, os.str()};
}

// 5. Intercept-and-resend detection matches 1-(3/4)^d within 0.02 at 10,000
// trials for d in {4,8,16}, in under a minute.
Outcome intercept_resend_detection() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto attack = adversary::parse_attack_spec("intercept-resend:transfer=0,basis=random");

  std::ostringstream os;
  bool ok = true;
  for (int d : {4, 8, 16}) {
    ProtocolConfig cfg;
    cfg.n = 3;
    cfg.m = 2;
    cfg.l_verify = 2;
    cfg.decoys_per_transfer = d;
    const auto est = adversary::estimate_detection(cfg, attack, 10000, 20240901 + d);
    const double analytic = 1.0 - std::pow(0.75, d);
    ok = ok && std::abs(est.estimate - analytic) < 0.02;
    os << "d=" << d << ": " << est.estimate << " vs " << analytic << "; ";
  }
  const double dt = seconds_since(t0);
  ok = ok && dt < 60.0;
  os << std::lround(dt) << " s";
  return {ok, os.str()};
}

// 6. The theta coupling: invisible at 0, half-rate X errors at pi/2.
Outcome entangle_measure_limits() {
  ProtocolConfig cfg;
  cfg.n = 3;
  cfg.m = 2;
  cfg.l_verify = 2;
  cfg.decoys_per_transfer = 8;

  const auto silent = adversary::parse_attack_spec("entangle-measure:theta=0,transfer=1");
  const auto est = adversary::estimate_detection(cfg, silent, 2000, 99);

  RngStream rng(31337);
  const double mi = adversary::mutual_information_bits(0.0, 20000, rng);
  const auto errs = adversary::estimate_decoy_errors(M_PI_2, 20000, rng);

  const bool ok = est.detected == 0 && est.aborted_total == 0 && mi < 0.01 &&
                  std::abs(errs.x_rate - 0.5) < 0.02 && errs.z_errors == 0;
  std::ostringstream os;
  os << "theta=0: detections " << est.detected << "/2000, mutual information " << mi
     << " bits; theta=pi/2: per-X-decoy error " << errs.x_rate
     << " vs (1-cos)/2 = 0.5, Z-decoy errors " << errs.z_errors;
  return {ok, os.str()};
}

// 7. Hash homomorphism: 1,000 exact XOR-LINEAR pairs plus the MODEXP worked
// values g=2, modulus 11.
Outcome hash_homomorphism() {
  RngStream rng(424242);
  const auto params = hashmod::xor_linear_params(64, 8, rng.next_u64());
  int exact = 0;
  for (int i = 0; i < 1000; ++i) {
    const KeyString x = KeyString::random(4, rng);
    const KeyString y = KeyString::random(4, rng);
    exact += hashmod::combine(hashmod::hash(x, params), hashmod::hash(y, params)) ==
             hashmod::hash(x.xored(y), params);
  }

  const auto mp = hashmod::modexp_params(2, 11);
  const auto h3 = hashmod::hash(KeyString::parse("00,11"), mp);
  const auto h2 = hashmod::hash(KeyString::parse("00,10"), mp);
  const auto h5 = hashmod::hash(KeyString::parse("01,01"), mp);
  const bool worked = h3.value == 8 && h2.value == 4 && h5.value == 10 &&
                      hashmod::combine(h3, h2) == h5;

  std::ostringstream os;
  os << exact << "/1000 xor-linear pairs combine exactly; modexp worked values H(3)=" << h3.value
     << ", H(2)=" << h2.value << ", H(3)*H(2)=" << hashmod::combine(h3, h2).value
     << " = H(5)=" << h5.value;
  return {exact == 1000 && worked, os.str()};
}

// 8. 1,000 random single-field forgeries are all rejected on the right
// equation, and none announces a key.
Outcome forgery_rejection() {
  struct Field {
    const char* spec;
    std::string check;
  };
  const std::array<Field, 5> fields = {{
      {"forge-submission:field=k_b", "eq3-k_b-digest"},
      {"forge-submission:field=k_d", "eq4-k_d-digest"},
      {"forge-submission:field=h_b", "eq1-left-chain-digest"},
      {"forge-submission:field=h_d", "eq2-right-chain-digest"},
      {"forge-pivot-key", "eq5-pivot-key-digest"},
  }};

  int rejected = 0, right_equation = 0, announced = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& field = fields[i % fields.size()];
    ProtocolConfig cfg;
    cfg.n = 5;
    cfg.m = 2;
    cfg.l_verify = 2;
    cfg.decoys_per_transfer = 4;
    cfg.seed = qka::split_seed(888, static_cast<std::uint64_t>(i));

    const Transcript t = adversary::forged_submission_run(
        cfg, adversary::parse_attack_spec(field.spec), cfg.seed);
    rejected += t.aborted();
    right_equation += t.aborted() && t.abort->check == field.check;
    for (const auto& msg : t.messages) announced += msg.kind == "key_announce";
  }

  std::ostringstream os;
  os << rejected << "/1000 forgeries rejected, " << right_equation
     << "/1000 on the matching equation, " << announced << " keys announced";
  return {rejected == 1000 && right_equation == 1000 && announced == 0, os.str()};
}

// 9. Efficiency closed form 1/(2n+13) at l=m and the 1/(2n) comparison.
Outcome efficiency_form() {
  const auto r5 = qka::efficiency::compute(5, 3, 3);
  const auto r7 = qka::efficiency::compute(7, 2);
  const auto skew = qka::efficiency::compute(5, 2, 4);

  const bool ok = r5.closed_form && r5.numerator == 1 && r5.denominator == 23 &&
                  std::abs(r5.value - 1.0 / 23.0) < 1e-15 && std::abs(r5.approx_value - 0.1) <
                  1e-15 && r7.closed_form && r7.denominator == 27 && !skew.closed_form &&
                  r5.to_text().find("1/(2n)") != std::string::npos;
  std::ostringstream os;
  os << "n=5, l=m: eta = " << r5.numerator << "/" << r5.denominator << " = " << r5.value
     << ", circulating approximation 1/(2n) = " << r5.approx_value
     << " reported alongside; n=7 denominator " << r7.denominator;
  return {ok, os.str()};
}

std::string run_command(const std::string& cmd, int& exit_code) {
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    exit_code = -1;
    return out;
  }
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  exit_code = pclose(pipe);
  return out;
}

// 10. Byte-identical reruns, through the library and through the binary.
Outcome determinism() {
  const ProtocolConfig cfg = golden_config();
  const bool lib_run = protocol::run_protocol(cfg).to_json_string() ==
                       protocol::run_protocol(cfg).to_json_string();

  ProtocolConfig attack_cfg;
  attack_cfg.n = 3;
  attack_cfg.m = 2;
  attack_cfg.l_verify = 2;
  attack_cfg.decoys_per_transfer = 4;
  const auto attack = adversary::parse_attack_spec("intercept-resend:transfer=0");
  const bool lib_attack =
      adversary::estimate_detection(attack_cfg, attack, 500, 7).to_json().dump() ==
      adversary::estimate_detection(attack_cfg, attack, 500, 7).to_json().dump();

  std::ostringstream os;
  os << "library reruns byte-identical (transcript " << (lib_run ? "yes" : "NO") << ", report "
     << (lib_attack ? "yes" : "NO") << ")";

  bool cli_ok = true;
  if (const char* bin = std::getenv("QKA_SIM_BIN")) {
    const std::string base = std::string("'") + bin + "'";
    const std::string run_cmd =
        base +
        " run --n 5 --m 3 --l-verify 2 --pivot 3 --seed 20240901"
        " --keys '10,11,10;00,01,01;11,01,00;11,10,11;00,10,01' --out '' --json 2>/dev/null";
    const std::string eff_cmd = base + " efficiency --n 5 --m 3 --json 2>/dev/null";
    int rc1 = 0, rc2 = 0, rc3 = 0, rc4 = 0;
    const std::string run1 = run_command(run_cmd, rc1);
    const std::string run2 = run_command(run_cmd, rc2);
    const std::string eff1 = run_command(eff_cmd, rc3);
    const std::string eff2 = run_command(eff_cmd, rc4);
    cli_ok = rc1 == 0 && rc2 == 0 && rc3 == 0 && rc4 == 0 && !run1.empty() && run1 == run2 &&
             !eff1.empty() && eff1 == eff2;
    os << "; cli reruns byte-identical (" << (cli_ok ? "yes" : "NO") << ")";
  } else {
    os << "; cli binary not provided via QKA_SIM_BIN, checked library paths only";
  }
  return {lib_run && lib_attack && cli_ok, os.str()};
}

}  // namespace

int main() {
  report(1, golden_example());
  report(2, correctness_sweep());
  report(3, codebook_check());
  report(4, correlation_invariants());
  report(5, intercept_resend_detection());
  report(6, entangle_measure_limits());
  report(7, hash_homomorphism());
  report(8, forgery_rejection());
  report(9, efficiency_form());
  report(10, determinism());

  if (g_failures == 0) {
    std::cout << "all criteria pass\n";
    return 0;
  }
  std::cout << g_failures << " criteria failing\n";
  return 1;
}
