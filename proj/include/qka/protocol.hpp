#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qka/hashmod.hpp"
#include "qka/qcore.hpp"
#include "qka/rng.hpp"

namespace qka::protocol {

using json = nlohmann::ordered_json;

// Party codes. 1..n are participants; the distributor and the third-party
// centre sit outside that range.
inline constexpr int kDistributor = 0;
inline constexpr int kTdc = -1;
inline constexpr int kNobody = -2;  // "offender unknown" marker
std::string party_name(int party);

struct HashConfig {
  hashmod::HashMode mode = hashmod::HashMode::kXorLinear;
  int digest_bits = 64;            // XOR-LINEAR
  std::uint64_t generator = 5;     // MODEXP
  std::uint64_t hash_modulus = 1000003;
};

struct ProtocolConfig {
  int n = 5;                       // participants, odd, >= 3
  int m = 3;                       // key chunks
  int l_verify = 3;                // verification states
  std::optional<int> pivot;        // nullopt: drawn from the run RNG
  int decoys_per_transfer = 16;    // decoys inserted into each padded subsequence
  double error_threshold = 0.0;    // decoy error rate above this aborts
  HashConfig hash;
  std::uint64_t seed = 0;
  std::optional<std::vector<hashmod::KeyString>> fixed_keys;  // per participant

  void validate() const;
  json to_json() const;                       // round-trips through from_json
  static ProtocolConfig from_json(const json& j);  // rejects unknown fields
};

enum class Channel { kBroadcast, kSecure };

/// One classical protocol message. Payload layouts are fixed per kind; the
/// transcript parser checks them on the way back in.
struct Message {
  int seq = 0;
  std::string kind;
  Channel channel = Channel::kBroadcast;
  int from = kDistributor;
  int to = kNobody;  // meaningful for secure messages only
  json payload;
};

struct AbortInfo {
  std::string phase;
  std::string check;
  int offender = kNobody;
  std::string detail;
};

struct Transcript {
  json config;
  std::vector<Message> messages;
  json phases = json::array();
  std::optional<hashmod::KeyString> shared_key;
  std::optional<AbortInfo> abort;

  bool aborted() const { return abort.has_value(); }
  json to_json() const;
  std::string to_json_string() const;  // stable field order, deterministic
  static Transcript from_json(const json& j);
};

/// Distributor's announcement to the centre after measuring.
struct DistributorSubmission {
  hashmod::KeyString k_b, k_d;
  hashmod::Digest h_b, h_d;
};

/// Outcome of the centre's five verification equations:
///   eq1  H(B) equals the combined registered digests of the left chain
///   eq2  H(D) equals the combined registered digests of the right chain
///   eq3  H(B) equals the hash of the submitted K_B
///   eq4  H(D) equals the hash of the submitted K_D
///   eq5  the pivot's registered digest equals the hash of its submitted key
struct VerificationReport {
  bool eq1 = false, eq2 = false, eq3 = false, eq4 = false, eq5 = false;
  std::optional<hashmod::KeyString> recovered;

  bool all_pass() const { return eq1 && eq2 && eq3 && eq4 && eq5; }
  int first_failing() const;  // 1..5, or 0 when all pass
};

VerificationReport tdc_recover(const DistributorSubmission& sub,
                               const hashmod::KeyString& pivot_key, int pivot,
                               const std::vector<int>& left_ids,
                               const std::vector<int>& right_ids,
                               const hashmod::Registry& registry,
                               const hashmod::HashParams& params);

/// Applies one participant's key to its held subsequence pair: chunk j of
/// the key flips qubits (low_qubit, low_qubit+1) of the j-th live state.
void participant_apply_key(std::vector<qcore::StateVector>& states,
                           const std::vector<int>& live, int low_qubit,
                           const hashmod::KeyString& key);

/// A qubit slot inside a padded subsequence in transit: either one qubit of
/// a cluster state or a decoy.
struct PaddedSlot {
  bool is_decoy = false;
  int state_index = -1;  // cluster: index into the engine's state register
  int qubit = 0;         // cluster: 1..6
  int decoy_index = -1;  // decoy: index into the transfer's decoy pool
};

/// What a channel attacker gets to touch while a padded subsequence is in
/// transit. Mutating the referenced states is the attack.
struct TransferContext {
  int ordinal = 0;  // counts padded-subsequence transmissions from 0
  int subsequence = 0;
  int from = kDistributor;
  int to = kDistributor;
  std::vector<PaddedSlot>& slots;
  std::vector<qcore::StateVector>& cluster_states;
  std::vector<qcore::StateVector>& decoy_states;
  RngStream& rng;

  qcore::StateVector& state_of(const PaddedSlot& s) {
    return s.is_decoy ? decoy_states[s.decoy_index] : cluster_states[s.state_index];
  }
  int qubit_of(const PaddedSlot& s) const { return s.is_decoy ? 1 : s.qubit; }
};

/// A participant's turn in the key-application chain, exposed so colluding
/// strategies can act on the states they currently hold.
struct ParticipantTurn {
  int party = 0;
  int side = 0;  // 0 = left chain (qubits 3,4), 1 = right chain (qubits 5,6)
  bool is_endpoint = false;
  int low_qubit = 3;
  const std::vector<int>& live;
  std::vector<qcore::StateVector>& states;
  RngStream& rng;
};

/// Hook interface for adversarial behaviour. The engine calls these at fixed
/// points; the default implementations are honest no-ops.
class Adversary {
 public:
  virtual ~Adversary() = default;

  /// Replace the distributor's prepared state (wrong-state attacks).
  virtual std::optional<qcore::StateVector> substitute_prepared_state(int /*state_index*/) {
    return std::nullopt;
  }
  /// Touch a padded subsequence on the wire.
  virtual void on_transfer(TransferContext&) {}
  /// Act during a participant's chain turn, before its key is applied.
  virtual void on_participant_turn(const ParticipantTurn&) {}
  /// Tamper with the distributor's submission to the centre.
  virtual DistributorSubmission forge_distributor_submission(DistributorSubmission honest,
                                                             const hashmod::HashParams&,
                                                             RngStream&) {
    return honest;
  }
  /// Tamper with the pivot's submitted key.
  virtual hashmod::KeyString forge_pivot_key(const hashmod::KeyString& true_key, RngStream&) {
    return true_key;
  }
  /// Observation hook: colluding parties record the keys they legitimately
  /// know (their own and nothing else; the engine hands over the full set
  /// and trusts the strategy to restrict itself).
  virtual void observe_run_keys(int /*pivot*/, const std::vector<hashmod::KeyString>&) {}
};

/// Side record of a run for tests and instrumentation; not part of the
/// transcript.
struct RunTrace {
  struct Transfer {
    int ordinal, subsequence, from, to, padded_length, decoys, mismatches;
    bool pass;
  };
  struct OwnershipEvent {
    int state_index, qubit, holder;
  };
  struct MaskEvent {
    int party, state_index, mask_value;
  };
  std::vector<Transfer> transfers;
  std::vector<OwnershipEvent> ownership_events;
  std::vector<MaskEvent> mask_events;
  std::vector<int> cluster_outcomes;  // 0 marks an outside-frame outcome
  std::vector<hashmod::KeyString> keys;
  int pivot = 0;
};

/// Runs the five protocol phases against an optional adversary. Everything
/// random flows from `rng`; with the convenience overload, from config.seed.
class ProtocolEngine {
 public:
  ProtocolEngine(ProtocolConfig cfg, Adversary* adversary, RngStream& rng,
                 RunTrace* trace = nullptr);

  Transcript run();

  // Phase steps, public so tests can drive and inspect them one at a time.
  // Each returns false once the run has aborted.
  bool phase_preparation();
  bool phase_distributor_preparation();
  bool phase_identity_verification();
  bool phase_participant_chain();
  bool phase_measurement();
  bool phase_tdc();

  Transcript take_transcript();

  int pivot() const { return pivot_; }
  const std::vector<hashmod::KeyString>& keys() const { return keys_; }
  const std::vector<qcore::StateVector>& cluster_states() const { return states_; }
  const std::vector<std::array<int, 6>>& ownership() const { return owners_; }
  const std::vector<int>& live_states() const { return live_; }
  std::vector<int> left_chain() const;   // receivers from the distributor outward
  std::vector<int> right_chain() const;

 private:
  int wrap_party(int x) const;
  void emit(Message msg);
  void record_owner(int state_index, int qubit, int holder);
  bool do_transfer(const char* phase_label, json& checks, int from, int to, int subsequence);
  void abort_run(const std::string& phase, const std::string& check, int offender,
                 const std::string& detail);

  ProtocolConfig cfg_;
  Adversary* adversary_;
  RngStream& rng_;
  RunTrace* trace_;

  hashmod::HashParams params_;
  hashmod::Registry registry_;
  std::vector<hashmod::KeyString> keys_;
  int pivot_ = 1;

  std::vector<qcore::StateVector> states_;
  std::vector<std::array<int, 6>> owners_;
  std::vector<int> live_;
  int transfer_ordinal_ = 0;

  hashmod::KeyString k_b_, k_d_;
  hashmod::Digest h_b_, h_d_;
  std::vector<int> cluster_outcomes_;

  int seq_ = 0;
  std::vector<Message> messages_;
  json phases_ = json::array();
  std::optional<AbortInfo> abort_;
  std::optional<hashmod::KeyString> shared_key_;
  bool done_ = false;
};

Transcript run_protocol(const ProtocolConfig& cfg, Adversary* adversary, RngStream& rng,
                        RunTrace* trace = nullptr);
Transcript run_protocol(const ProtocolConfig& cfg, Adversary* adversary = nullptr,
                        RunTrace* trace = nullptr);

}  // namespace qka::protocol
