#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qka/protocol.hpp"

namespace qka::adversary {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Attack descriptions. One variant is active per run; parameters beyond these
// come from the protocol config (decoy count, chunk count, ...).

enum class BasisPolicy { kRandom, kZ, kX };

/// Measure every qubit of one padded subsequence in transit and forward the
/// collapsed state.
struct InterceptResend {
  int target_transfer = 0;  // padded-subsequence ordinal, counted from 0
  BasisPolicy policy = BasisPolicy::kRandom;
};

/// Couple every qubit of one padded subsequence to a fresh ancilla via a
/// controlled rotation, forward the qubit, Z-measure the ancilla.
struct EntangleMeasure {
  double theta = 0.0;  // 0 = identity coupling, pi/2 = maximal
  int target_transfer = 0;
};

/// The distributor prepares `substitute` instead of the agreed cluster state.
struct WrongStateDistributor {
  qcore::StateVector substitute;
  std::string label;  // "plus", "zero", or a caller-chosen tag
};

enum class DistributorField { kKB, kKD, kHB, kHD };

/// The distributor tampers with one field of its end-of-run submission.
struct ForgedDistributorSubmission {
  DistributorField field = DistributorField::kKB;
  std::optional<int> bit_index;  // key bit to flip; nullopt: drawn at random
  // When forging a key, also recompute its announced digest so the pair is
  // internally consistent; detection then falls to the chain equations.
  bool consistent_digest = false;
};

/// The pivot submits a wrong key to the centre.
struct ForgedPivotKey {
  std::optional<hashmod::KeyString> substitute;  // nullopt: flip one random bit
};

/// The pivot and the two chain endpoints conspire: the endpoints Z-measure
/// their qubits before forwarding, and the three pool what they know.
struct EndpointCollusion {
  bool measure = true;  // false: pool keys only (passive baseline)
};

using AttackKind = std::variant<InterceptResend, EntangleMeasure, WrongStateDistributor,
                                ForgedDistributorSubmission, ForgedPivotKey, EndpointCollusion>;

std::string attack_name(const AttackKind& attack);

/// Parses "name" or "name:key=value,key=value". Known names:
///   intercept-resend   transfer=<int> basis=random|z|x
///   entangle-measure   theta=<float> transfer=<int>
///   wrong-state        state=plus|zero
///   forge-submission   field=k_b|k_d|h_b|h_d bit=<int> consistent=0|1
///   forge-pivot-key    key=<chunked bits, e.g. 10,11,01>
///   collusion          measure=0|1
/// Throws std::invalid_argument on anything else.
AttackKind parse_attack_spec(const std::string& spec);

/// Builds the engine-facing strategy object for an attack.
std::unique_ptr<protocol::Adversary> make_adversary(const AttackKind& attack);

// ---------------------------------------------------------------------------
// Tap primitives. These are the physical actions; the Adversary subclasses
// wire them to the right transfer.

/// Measures one qubit in a policy-chosen basis; the collapsed state is what
/// travels on. Returns the observed bit.
qcore::BitOutcome intercept_resend_tap(qcore::StateVector& s, int qubit, BasisPolicy policy,
                                       RngStream& rng);

/// The one-parameter coupling family: identity on control |0>, ancilla
/// rotation by theta on control |1>. Unitary for every theta.
qcore::Mat4 controlled_rotation(double theta);

/// Couples `qubit` to a fresh |0> ancilla with `coupling`, Z-measures the
/// ancilla and discards it. Returns the ancilla bit (Eve's record). Any
/// unitary coupling is accepted; non-unitary matrices are rejected by the
/// state layer.
qcore::BitOutcome entangle_measure_tap(qcore::StateVector& s, int qubit,
                                       const qcore::Mat4& coupling, RngStream& rng);

// ---------------------------------------------------------------------------
// Monte Carlo estimators. All are deterministic in (config, base_seed): trial
// t runs on split_seed(base_seed, t), so reports merge independently of
// execution order.

struct DetectionEstimate {
  std::string attack;
  int trials = 0;
  int detected = 0;    // aborts attributable to the attack's own signature check
  double estimate = 0.0;
  std::optional<double> analytic;
  double wilson_low = 0.0;  // two-sided 95% score interval
  double wilson_high = 0.0;
  int aborted_total = 0;                      // aborts of any cause
  std::map<std::string, int> abort_breakdown;  // "phase/check" -> count

  json to_json() const;
  std::string to_text() const;
};

/// Runs the protocol `trials` times under the attack and counts detections.
/// "Detected" means the run aborted on the check that the attack is supposed
/// to trip (decoy-check for channel taps, the correlation check for a wrong
/// source state, a verification equation for forgeries); the full abort mix
/// is reported alongside.
DetectionEstimate estimate_detection(const protocol::ProtocolConfig& cfg,
                                     const AttackKind& attack, int trials,
                                     std::uint64_t base_seed);

/// Wilson 95% score interval for `successes` out of `n`.
std::pair<double, double> wilson_interval(int successes, int n);

/// Single adversarial run, transcript returned for inspection. `variant`
/// must be ForgedPivotKey or ForgedDistributorSubmission.
protocol::Transcript forged_submission_run(const protocol::ProtocolConfig& cfg,
                                           const AttackKind& variant, std::uint64_t seed);

/// Detection statistics for a distributor that prepares `substitute` instead
/// of the cluster state, including per-basis verification-round counts.
struct WrongStateReport {
  int trials = 0;
  int detected = 0;  // identity-verification aborts
  double estimate = 0.0;
  double analytic = 0.0;  // from enumerating the substitute's outcome spectrum
  long z_rounds = 0, z_failures = 0;
  long x_rounds = 0, x_failures = 0;
  double z_failure_rate = 0.0;
  double x_failure_rate = 0.0;

  json to_json() const;
};

WrongStateReport wrong_state_run(const protocol::ProtocolConfig& cfg,
                                 const qcore::StateVector& substitute, int trials,
                                 std::uint64_t base_seed);

/// Per-round pass probabilities for one verification round against an
/// arbitrary six-qubit state, by direct enumeration of the Born spectrum.
double z_round_pass_probability(const qcore::StateVector& state);
double x_round_pass_probability(const qcore::StateVector& state);

/// What colluding pivot + endpoints learn about the final key, and what the
/// attempt costs them in aborts.
struct CollusionReport {
  int trials = 0;
  bool measure = true;
  int aborted = 0;
  int completed = 0;
  double detection_estimate = 0.0;
  double detection_analytic = 0.0;  // 1 - 4^{-m} when measuring, 0 otherwise
  int full_guess_correct = 0;       // among completed runs
  double full_guess_accuracy = 0.0;
  double conditional_analytic = 0.0;  // 2^{-m} when measuring, 4^{-m} otherwise
  double baseline_accuracy = 0.0;     // passive colluders: 4^{-m}
  long parity_chunks = 0;   // chunk parity functionals read off the Z outcomes
  long parity_correct = 0;  // (f4^f5, f5^f6) both right
  double parity_accuracy = 0.0;
  std::map<std::string, int> abort_breakdown;

  json to_json() const;
  std::string to_text() const;
};

CollusionReport collusion_run(const protocol::ProtocolConfig& cfg, int trials,
                              std::uint64_t base_seed, bool measure);

/// Empirical mutual information (bits) between decoy identity and Eve's
/// ancilla outcome for the theta-coupling, over `samples` uniformly drawn
/// decoys.
double mutual_information_bits(double theta, int samples, RngStream& rng);

/// Per-basis decoy error frequencies under the theta-coupling tap: the
/// receiver measures each tapped decoy in its preparation basis.
struct DecoyErrorStats {
  long z_samples = 0, z_errors = 0;
  long x_samples = 0, x_errors = 0;
  double z_rate = 0.0;
  double x_rate = 0.0;
};

DecoyErrorStats estimate_decoy_errors(double theta, int samples, RngStream& rng);

}  // namespace qka::adversary
