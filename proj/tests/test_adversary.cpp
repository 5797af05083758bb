#include <doctest.h>

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "qka/adversary.hpp"
#include "qka/protocol.hpp"

using qka::RngStream;
using qka::hashmod::KeyString;
using qka::protocol::ProtocolConfig;
using qka::protocol::Transcript;
namespace adversary = qka::adversary;
namespace protocol = qka::protocol;
namespace qcore = qka::qcore;

namespace {

// Decoy kinds in draw order, mirroring the engine: |0>, |1>, |+>, |->.
qcore::StateVector decoy_of(int kind) {
  switch (kind) {
    case 0: return qcore::basis_state({0});
    case 1: return qcore::basis_state({1});
    default: {
      qcore::StateVector s;
      s.num_qubits = 1;
      s.amps = {M_SQRT1_2, kind == 2 ? M_SQRT1_2 : -M_SQRT1_2};
      return s;
    }
  }
}

qcore::BasisKind prep_basis(int kind) {
  return kind < 2 ? qcore::BasisKind::kZ : qcore::BasisKind::kX;
}

ProtocolConfig small_config() {
  ProtocolConfig cfg;
  cfg.n = 5;
  cfg.m = 2;
  cfg.l_verify = 2;
  cfg.decoys_per_transfer = 4;
  return cfg;
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

}  // namespace

TEST_CASE("attack specs parse into the right variants") {
  using adversary::parse_attack_spec;

  auto a = parse_attack_spec("intercept-resend");
  auto* ir = std::get_if<adversary::InterceptResend>(&a);
  REQUIRE(ir != nullptr);
  CHECK(ir->target_transfer == 0);
  CHECK(ir->policy == adversary::BasisPolicy::kRandom);

  a = parse_attack_spec("intercept-resend:transfer=3,basis=z");
  ir = std::get_if<adversary::InterceptResend>(&a);
  REQUIRE(ir != nullptr);
  CHECK(ir->target_transfer == 3);
  CHECK(ir->policy == adversary::BasisPolicy::kZ);

  a = parse_attack_spec("entangle-measure:theta=0.5,transfer=2");
  auto* em = std::get_if<adversary::EntangleMeasure>(&a);
  REQUIRE(em != nullptr);
  CHECK(em->theta == doctest::Approx(0.5));
  CHECK(em->target_transfer == 2);

  a = parse_attack_spec("wrong-state:state=zero");
  auto* ws = std::get_if<adversary::WrongStateDistributor>(&a);
  REQUIRE(ws != nullptr);
  CHECK(ws->label == "zero");
  CHECK(ws->substitute.amps[0] == 1.0);

  a = parse_attack_spec("wrong-state");
  ws = std::get_if<adversary::WrongStateDistributor>(&a);
  REQUIRE(ws != nullptr);
  CHECK(ws->label == "plus");

  a = parse_attack_spec("forge-submission:field=h_d,bit=3,consistent=1");
  auto* fs = std::get_if<adversary::ForgedDistributorSubmission>(&a);
  REQUIRE(fs != nullptr);
  CHECK(fs->field == adversary::DistributorField::kHD);
  CHECK(fs->bit_index == 3);
  CHECK(fs->consistent_digest);

  // Chunked key values contain commas; the parser must not split them.
  a = parse_attack_spec("forge-pivot-key:key=10,11,01");
  auto* fp = std::get_if<adversary::ForgedPivotKey>(&a);
  REQUIRE(fp != nullptr);
  REQUIRE(fp->substitute.has_value());
  CHECK(fp->substitute->to_chunked_string() == "10,11,01");

  a = parse_attack_spec("forge-pivot-key");
  fp = std::get_if<adversary::ForgedPivotKey>(&a);
  REQUIRE(fp != nullptr);
  CHECK(!fp->substitute.has_value());

  a = parse_attack_spec("collusion:measure=0");
  auto* co = std::get_if<adversary::EndpointCollusion>(&a);
  REQUIRE(co != nullptr);
  CHECK(!co->measure);

  CHECK_THROWS_AS(parse_attack_spec("mitm"), std::invalid_argument);
  CHECK_THROWS_AS(parse_attack_spec("intercept-resend:basis=q"), std::invalid_argument);
  CHECK_THROWS_AS(parse_attack_spec("intercept-resend:bogus=1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_attack_spec("intercept-resend:transfer=1,transfer=2"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_attack_spec("entangle-measure:theta=2.0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_attack_spec("entangle-measure:theta=-0.1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_attack_spec("wrong-state:state=ghz"), std::invalid_argument);
  CHECK_THROWS_AS(parse_attack_spec("forge-submission:field=nope"), std::invalid_argument);
  CHECK_THROWS_AS(parse_attack_spec("forge-submission:bit=x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_attack_spec("forge-pivot-key:key=1"), std::invalid_argument);
}

TEST_CASE("attack names label the variants") {
  CHECK(adversary::attack_name(adversary::InterceptResend{}) == "intercept-resend");
  CHECK(adversary::attack_name(adversary::EntangleMeasure{}) == "entangle-measure");
  CHECK(adversary::attack_name(adversary::ForgedPivotKey{}) == "forge-pivot-key");
  CHECK(adversary::attack_name(adversary::EndpointCollusion{false}) == "collusion(passive)");
  CHECK(adversary::attack_name(adversary::parse_attack_spec("forge-submission:field=k_d")) ==
        "forge-submission(k_d)");
  CHECK(adversary::attack_name(adversary::parse_attack_spec("wrong-state:state=plus")) ==
        "wrong-state(plus)");
}

TEST_CASE("intercept-resend tap fixes matched-basis decoys and disturbs the rest") {
  RngStream rng(31);

  // A Z-policy tap on a Z eigenstate is invisible: same outcome, same state.
  for (int rep = 0; rep < 20; ++rep) {
    qcore::StateVector s = decoy_of(1);
    CHECK(adversary::intercept_resend_tap(s, 1, adversary::BasisPolicy::kZ, rng) == 1);
    auto [out, post] = qcore::measure_qubit(s, 1, qcore::BasisKind::kZ, rng);
    CHECK(out == 1);
  }
  for (int rep = 0; rep < 20; ++rep) {
    qcore::StateVector s = decoy_of(3);
    CHECK(adversary::intercept_resend_tap(s, 1, adversary::BasisPolicy::kX, rng) == 1);
    auto [out, post] = qcore::measure_qubit(s, 1, qcore::BasisKind::kX, rng);
    CHECK(out == 1);
  }

  // Random-policy taps on random decoys: wrong basis half the time, coin
  // flip on the re-measure, 1/4 error overall.
  const int trials = 10000;
  int errors = 0;
  for (int t = 0; t < trials; ++t) {
    const int kind = static_cast<int>(rng.next_below(4));
    qcore::StateVector s = decoy_of(kind);
    adversary::intercept_resend_tap(s, 1, adversary::BasisPolicy::kRandom, rng);
    auto [out, post] = qcore::measure_qubit(s, 1, prep_basis(kind), rng);
    errors += out != (kind & 1);
  }
  CHECK(std::abs(errors / static_cast<double>(trials) - 0.25) < 0.02);
}

TEST_CASE("the theta coupling is the identity at zero and a flip at pi/2") {
  const qcore::Mat4 id = adversary::controlled_rotation(0.0);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(std::abs(id[r][c] - (r == c ? 1.0 : 0.0)) < 1e-15);

  // Control |0> never touches the ancilla, any theta.
  RngStream rng(5);
  const qcore::Mat4 full = adversary::controlled_rotation(M_PI_2);
  for (int rep = 0; rep < 10; ++rep) {
    qcore::StateVector s = decoy_of(0);
    CHECK(adversary::entangle_measure_tap(s, 1, full, rng) == 0);
    qcore::StateVector t = decoy_of(1);
    CHECK(adversary::entangle_measure_tap(t, 1, full, rng) == 1);
  }

  // Zero coupling leaves every decoy byte-identical.
  const qcore::Mat4 zero = adversary::controlled_rotation(0.0);
  for (int kind = 0; kind < 4; ++kind) {
    qcore::StateVector s = decoy_of(kind);
    const qcore::StateVector before = s;
    CHECK(adversary::entangle_measure_tap(s, 1, zero, rng) == 0);
    REQUIRE(s.amps.size() == before.amps.size());
    for (std::size_t i = 0; i < s.amps.size(); ++i)
      CHECK(std::abs(s.amps[i] - before.amps[i]) < 1e-12);
  }
}

TEST_CASE("theta coupling error rates split by basis") {
  RngStream rng(17);

  // Z decoys are coupling eigenstates: no errors at any strength.
  auto stats = adversary::estimate_decoy_errors(M_PI_2, 8000, rng);
  CHECK(stats.z_errors == 0);
  CHECK(stats.x_samples + stats.z_samples == 8000);
  CHECK(std::abs(stats.x_rate - 0.5) < 0.02);

  stats = adversary::estimate_decoy_errors(0.7, 8000, rng);
  CHECK(stats.z_errors == 0);
  CHECK(std::abs(stats.x_rate - (1.0 - std::cos(0.7)) / 2.0) < 0.02);
}

TEST_CASE("eavesdropper information tracks the coupling strength") {
  RngStream rng(23);
  CHECK(adversary::mutual_information_bits(0.0, 8000, rng) < 0.01);
  CHECK(adversary::mutual_information_bits(M_PI_2, 8000, rng) > 0.3);
}

TEST_CASE("detection estimates match the closed forms") {
  ProtocolConfig cfg = small_config();

  const auto ir = adversary::parse_attack_spec("intercept-resend:transfer=0,basis=random");
  const auto est = adversary::estimate_detection(cfg, ir, 2000, 42);
  CHECK(est.attack == "intercept-resend");
  CHECK(est.trials == 2000);
  CHECK(est.detected <= est.aborted_total);
  CHECK(est.aborted_total <= est.trials);
  REQUIRE(est.analytic.has_value());
  CHECK(*est.analytic == doctest::Approx(1.0 - std::pow(0.75, 4)));
  CHECK(std::abs(est.estimate - *est.analytic) < 0.03);
  CHECK(est.wilson_low <= est.estimate);
  CHECK(est.estimate <= est.wilson_high);

  int breakdown_sum = 0;
  for (const auto& [key, count] : est.abort_breakdown) breakdown_sum += count;
  CHECK(breakdown_sum == est.aborted_total);
}

TEST_CASE("more decoys mean more detections") {
  const auto ir = adversary::parse_attack_spec("intercept-resend:transfer=0");
  double prev = -1.0;
  for (int d : {1, 4, 16}) {
    ProtocolConfig cfg = small_config();
    cfg.decoys_per_transfer = d;
    const auto est = adversary::estimate_detection(cfg, ir, 1500, 7);
    CHECK(est.estimate > prev);
    CHECK(std::abs(est.estimate - *est.analytic) < 0.04);
    prev = est.estimate;
  }
}

TEST_CASE("a zero-strength coupling is never detected") {
  ProtocolConfig cfg = small_config();
  const auto em = adversary::parse_attack_spec("entangle-measure:theta=0,transfer=1");
  const auto est = adversary::estimate_detection(cfg, em, 400, 3);
  CHECK(est.detected == 0);
  CHECK(est.aborted_total == 0);
  CHECK(*est.analytic == 0.0);
}

TEST_CASE("estimator rejects bad arguments") {
  ProtocolConfig cfg = small_config();  // 12 transfers per run
  const adversary::AttackKind late = adversary::InterceptResend{99, adversary::BasisPolicy::kZ};
  CHECK_THROWS_AS(adversary::estimate_detection(cfg, late, 10, 1), std::invalid_argument);
  const adversary::AttackKind ok = adversary::InterceptResend{};
  CHECK_THROWS_AS(adversary::estimate_detection(cfg, ok, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(
      adversary::forged_submission_run(cfg, adversary::InterceptResend{}, 1),
      std::invalid_argument);
}

TEST_CASE("wrong-state statistics follow the Z spectrum") {
  ProtocolConfig cfg = small_config();
  cfg.l_verify = 3;

  // The agreed state itself never trips the check.
  auto rep = adversary::wrong_state_run(cfg, qcore::make_cluster_state(), 300, 11);
  CHECK(rep.detected == 0);
  CHECK(rep.analytic == 0.0);
  CHECK(rep.z_failures == 0);
  CHECK(rep.x_rounds == 0);

  qcore::StateVector plus;
  plus.num_qubits = 6;
  plus.amps.assign(64, 1.0 / 8.0);
  rep = adversary::wrong_state_run(cfg, plus, 2000, 11);
  CHECK(rep.analytic == doctest::Approx(1.0 - std::pow(5.0 / 32.0, 3)).epsilon(1e-12));
  CHECK(std::abs(rep.estimate - rep.analytic) < 0.01);
  CHECK(rep.x_rounds == 0);
  CHECK(rep.z_rounds > 0);
  CHECK(std::abs(rep.z_failure_rate - 27.0 / 32.0) < 0.02);
}

TEST_CASE("every forged field fails its own equation") {
  const ProtocolConfig cfg = golden_config();

  struct Case {
    const char* spec;
    const char* check;
    int offender;  // expected AbortInfo offender
  };
  const Case cases[] = {
      {"forge-submission:field=k_b,bit=0", "eq3-k_b-digest", protocol::kDistributor},
      {"forge-submission:field=k_b,bit=0,consistent=1", "eq1-left-chain-digest",
       protocol::kNobody},
      {"forge-submission:field=k_d,bit=2", "eq4-k_d-digest", protocol::kDistributor},
      {"forge-submission:field=k_d,bit=2,consistent=1", "eq2-right-chain-digest",
       protocol::kNobody},
      {"forge-submission:field=h_b", "eq1-left-chain-digest", protocol::kNobody},
      {"forge-submission:field=h_d", "eq2-right-chain-digest", protocol::kNobody},
      {"forge-pivot-key", "eq5-pivot-key-digest", 3},
  };

  for (const auto& c : cases) {
    CAPTURE(c.spec);
    const auto attack = adversary::parse_attack_spec(c.spec);
    const Transcript t = adversary::forged_submission_run(cfg, attack, 99);
    REQUIRE(t.aborted());
    CHECK(t.abort->phase == "tdc-verification");
    CHECK(t.abort->check == c.check);
    CHECK(t.abort->offender == c.offender);
    CHECK(!t.shared_key.has_value());
    for (const auto& m : t.messages) CHECK(m.kind != "key_announce");
  }
}

TEST_CASE("colluding endpoints read parities but not the key") {
  ProtocolConfig cfg;
  cfg.n = 5;
  cfg.m = 2;
  cfg.l_verify = 2;
  cfg.decoys_per_transfer = 4;

  const auto rep = adversary::collusion_run(cfg, 400, 13, true);
  CHECK(rep.trials == 400);
  CHECK(rep.measure);
  CHECK(rep.detection_analytic == doctest::Approx(1.0 - std::pow(0.25, 2)));
  CHECK(std::abs(rep.detection_estimate - rep.detection_analytic) < 0.05);
  CHECK(rep.completed + rep.aborted == rep.trials);
  CHECK(rep.completed > 0);

  // Chunk parities are classical once the endpoints measure: always right.
  CHECK(rep.parity_chunks > 0);
  CHECK(rep.parity_correct == rep.parity_chunks);
  CHECK(rep.parity_accuracy == 1.0);

  // Full-key guesses on surviving runs beat the passive baseline but stay
  // far from certainty.
  CHECK(rep.conditional_analytic == doctest::Approx(0.25));
  CHECK(rep.baseline_accuracy == doctest::Approx(0.0625));

  // Passive pooling: no measurements, no aborts, baseline guessing only.
  const auto passive = adversary::collusion_run(cfg, 400, 13, false);
  CHECK(passive.aborted == 0);
  CHECK(passive.completed == 400);
  CHECK(passive.detection_analytic == 0.0);
  CHECK(passive.detection_estimate == 0.0);
  CHECK(std::abs(passive.full_guess_accuracy - 0.0625) < 0.05);
}

TEST_CASE("wilson interval brackets the point estimate") {
  auto [lo0, hi0] = adversary::wilson_interval(0, 100);
  CHECK(lo0 < 1e-9);
  CHECK(hi0 > 0.0);
  CHECK(hi0 < 0.1);

  auto [lo1, hi1] = adversary::wilson_interval(100, 100);
  CHECK(hi1 > 1.0 - 1e-9);
  CHECK(hi1 <= 1.0);
  CHECK(lo1 > 0.9);

  auto [lo, hi] = adversary::wilson_interval(50, 100);
  CHECK(lo < 0.5);
  CHECK(hi > 0.5);
  CHECK(hi - lo < 0.25);

  auto [dl, dh] = adversary::wilson_interval(0, 0);
  CHECK(dl == 0.0);
  CHECK(dh == 1.0);
}
