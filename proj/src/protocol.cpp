#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qka/cluster.hpp"
#include "qka/protocol.hpp"

namespace qka::protocol {

namespace {

// Decoy kinds, in draw order: |0>, |1>, |+>, |->.
qcore::StateVector make_decoy(int kind) {
  switch (kind) {
    case 0: return qcore::basis_state({0});
    case 1: return qcore::basis_state({1});
    case 2: {
      qcore::StateVector s;
      s.num_qubits = 1;
      s.amps = {M_SQRT1_2, M_SQRT1_2};
      return s;
    }
    default: {
      qcore::StateVector s;
      s.num_qubits = 1;
      s.amps = {M_SQRT1_2, -M_SQRT1_2};
      return s;
    }
  }
}

qcore::BasisKind decoy_basis(int kind) {
  return kind < 2 ? qcore::BasisKind::kZ : qcore::BasisKind::kX;
}

int decoy_expected(int kind) { return kind & 1; }

std::string symbol_string(qcore::BasisKind basis, qcore::BitOutcome a, qcore::BitOutcome b) {
  if (basis == qcore::BasisKind::kX)
    return std::to_string(cluster::pair_symbol_x(a, b));
  return std::string(1, cluster::pair_symbol_z_char(cluster::pair_symbol_z(a, b)));
}

}  // namespace

void participant_apply_key(std::vector<qcore::StateVector>& states,
                           const std::vector<int>& live, int low_qubit,
                           const hashmod::KeyString& key) {
  if (low_qubit != 3 && low_qubit != 5)
    throw std::invalid_argument("keys act on the (3,4) or (5,6) subsequence pair");
  if (key.num_chunks() != static_cast<int>(live.size()))
    throw std::invalid_argument("key chunk count does not match live state count");
  for (int j = 0; j < key.num_chunks(); ++j) {
    const cluster::Chunk c = key.chunk(j);
    const int s = live[j];
    if (c.b1) states[s] = qcore::apply_x(states[s], low_qubit);
    if (c.b2) states[s] = qcore::apply_x(states[s], low_qubit + 1);
  }
}

VerificationReport tdc_recover(const DistributorSubmission& sub,
                               const hashmod::KeyString& pivot_key, int pivot,
                               const std::vector<int>& left_ids,
                               const std::vector<int>& right_ids,
                               const hashmod::Registry& registry,
                               const hashmod::HashParams& params) {
  VerificationReport r;
  r.eq1 = hashmod::verify_chain(registry, left_ids, sub.h_b);
  r.eq2 = hashmod::verify_chain(registry, right_ids, sub.h_d);
  r.eq3 = hashmod::verify_equal(sub.h_b, sub.k_b, params);
  r.eq4 = hashmod::verify_equal(sub.h_d, sub.k_d, params);
  r.eq5 = hashmod::verify_equal(registry.at(pivot), pivot_key, params);
  if (r.all_pass()) r.recovered = sub.k_b.xored(sub.k_d).xored(pivot_key);
  return r;
}

ProtocolEngine::ProtocolEngine(ProtocolConfig cfg, Adversary* adversary, RngStream& rng,
                               RunTrace* trace)
    : cfg_(std::move(cfg)), adversary_(adversary), rng_(rng), trace_(trace) {
  cfg_.validate();
}

int ProtocolEngine::wrap_party(int x) const { return ((x - 1) % cfg_.n + cfg_.n) % cfg_.n + 1; }

std::vector<int> ProtocolEngine::left_chain() const {
  std::vector<int> chain;
  for (int k = 1; k <= (cfg_.n - 1) / 2; ++k) chain.push_back(wrap_party(pivot_ - k));
  return chain;
}

std::vector<int> ProtocolEngine::right_chain() const {
  std::vector<int> chain;
  for (int k = 1; k <= (cfg_.n - 1) / 2; ++k) chain.push_back(wrap_party(pivot_ + k));
  return chain;
}

void ProtocolEngine::emit(Message msg) {
  msg.seq = seq_++;
  messages_.push_back(std::move(msg));
}

void ProtocolEngine::record_owner(int state_index, int qubit, int holder) {
  owners_[state_index][qubit - 1] = holder;
  if (trace_) trace_->ownership_events.push_back({state_index, qubit, holder});
}

void ProtocolEngine::abort_run(const std::string& phase, const std::string& check, int offender,
                               const std::string& detail) {
  abort_ = AbortInfo{phase, check, offender, detail};
  Message msg;
  msg.kind = "abort";
  msg.channel = Channel::kBroadcast;
  // TDC failures are announced by the TDC, everything earlier by the distributor.
  msg.from = phase == "tdc-verification" ? kTdc : kDistributor;
  msg.payload["phase"] = phase;
  msg.payload["check"] = check;
  if (offender == kNobody)
    msg.payload["offender"] = nullptr;
  else
    msg.payload["offender"] = party_name(offender);
  msg.payload["detail"] = detail;
  emit(std::move(msg));
}

bool ProtocolEngine::phase_preparation() {
  if (abort_ || done_) return false;

  // Hash parameters are pinned before any key material is drawn, so the
  // matrix cannot depend on the keys it will later digest.
  if (cfg_.hash.mode == hashmod::HashMode::kXorLinear)
    params_ = hashmod::xor_linear_params(cfg_.hash.digest_bits, 2 * cfg_.m, rng_.next_u64());
  else
    params_ = hashmod::modexp_params(cfg_.hash.generator, cfg_.hash.hash_modulus);

  if (cfg_.fixed_keys) {
    keys_ = *cfg_.fixed_keys;
  } else {
    keys_.clear();
    for (int p = 1; p <= cfg_.n; ++p) keys_.push_back(hashmod::KeyString::random(cfg_.m, rng_));
  }

  pivot_ = cfg_.pivot ? *cfg_.pivot : 1 + static_cast<int>(rng_.next_below(cfg_.n));

  json registered = json::object();
  for (int p = 1; p <= cfg_.n; ++p) {
    const hashmod::Digest d = hashmod::hash(keys_[p - 1], params_);
    registry_[p] = d;
    Message msg;
    msg.kind = "tdc_submission";
    msg.channel = Channel::kSecure;
    msg.from = p;
    msg.to = kTdc;
    msg.payload["identity"] = p;
    msg.payload["digest"] = d.to_string();
    emit(std::move(msg));
    registered[party_name(p)] = d.to_string();
  }

  json rec;
  rec["phase"] = "preparation";
  rec["pivot"] = pivot_;
  rec["registered_digests"] = std::move(registered);
  phases_.push_back(std::move(rec));

  if (trace_) {
    trace_->keys = keys_;
    trace_->pivot = pivot_;
  }
  if (adversary_) adversary_->observe_run_keys(pivot_, keys_);
  return true;
}

bool ProtocolEngine::do_transfer(const char* phase_label, json& checks, int from, int to,
                                 int subsequence) {
  if (subsequence < 3 || subsequence > 6)
    throw std::logic_error("qubits 1,2 never leave the distributor");

  const int d = cfg_.decoys_per_transfer;
  const int raw = static_cast<int>(live_.size());

  std::vector<int> kinds(d);
  std::vector<qcore::StateVector> decoys;
  decoys.reserve(d);
  for (int i = 0; i < d; ++i) {
    kinds[i] = static_cast<int>(rng_.next_below(4));
    decoys.push_back(make_decoy(kinds[i]));
  }
  const std::vector<int> positions = sample_sorted(rng_, raw + d, d);

  std::vector<PaddedSlot> slots(raw + d);
  {
    std::size_t next_decoy = 0, next_live = 0;
    for (int p = 0; p < raw + d; ++p) {
      if (next_decoy < positions.size() && positions[next_decoy] == p) {
        slots[p] = PaddedSlot{true, -1, 0, static_cast<int>(next_decoy)};
        ++next_decoy;
      } else {
        slots[p] = PaddedSlot{false, live_[next_live], subsequence, -1};
        ++next_live;
      }
    }
  }

  {
    Message msg;
    msg.kind = "subsequence_transfer";
    msg.channel = Channel::kSecure;
    msg.from = from;
    msg.to = to;
    msg.payload["subsequence"] = subsequence;
    msg.payload["qubits"] = raw + d;
    msg.payload["decoys"] = d;
    emit(std::move(msg));
  }
  for (int s : live_) record_owner(s, subsequence, to);

  if (adversary_) {
    TransferContext ctx{transfer_ordinal_, subsequence, from, to, slots, states_, decoys, rng_};
    adversary_->on_transfer(ctx);
  }

  {
    Message msg;
    msg.kind = "receipt_confirm";
    msg.channel = Channel::kBroadcast;
    msg.from = to;
    msg.payload["subsequence"] = subsequence;
    emit(std::move(msg));
  }

  // Positions and bases go out only after the receipt is confirmed.
  json jpos = json::array(), jbases = json::array();
  for (int i = 0; i < d; ++i) {
    jpos.push_back(positions[i] + 1);
    jbases.push_back(decoy_basis(kinds[i]) == qcore::BasisKind::kZ ? "Z" : "X");
  }
  {
    Message msg;
    msg.kind = "decoy_reveal";
    msg.channel = Channel::kBroadcast;
    msg.from = from;
    msg.payload["subsequence"] = subsequence;
    msg.payload["positions"] = jpos;
    msg.payload["bases"] = jbases;
    emit(std::move(msg));
  }

  int mismatches = 0;
  json joutcomes = json::array();
  for (int i = 0; i < d; ++i) {
    auto [outcome, post] = qcore::measure_qubit(decoys[i], 1, decoy_basis(kinds[i]), rng_);
    decoys[i] = std::move(post);
    joutcomes.push_back(outcome);
    if (outcome != decoy_expected(kinds[i])) ++mismatches;
  }
  {
    Message msg;
    msg.kind = "decoy_results";
    msg.channel = Channel::kBroadcast;
    msg.from = to;
    msg.payload["subsequence"] = subsequence;
    msg.payload["outcomes"] = joutcomes;
    emit(std::move(msg));
  }

  const double error_rate = d > 0 ? static_cast<double>(mismatches) / d : 0.0;
  const bool pass = error_rate <= cfg_.error_threshold;

  json entry;
  entry["transfer"] = transfer_ordinal_;
  entry["subsequence"] = subsequence;
  entry["from"] = party_name(from);
  entry["to"] = party_name(to);
  entry["decoys"] = d;
  if (d == 0) entry["vacuous"] = true;
  entry["mismatches"] = mismatches;
  entry["error_rate"] = error_rate;
  entry["pass"] = pass;
  checks.push_back(std::move(entry));

  if (trace_)
    trace_->transfers.push_back(
        {transfer_ordinal_, subsequence, from, to, raw + d, d, mismatches, pass});
  ++transfer_ordinal_;

  if (!pass) {
    abort_run(phase_label, "decoy-check", kNobody,
              "decoy error rate " + std::to_string(error_rate) + " above threshold on transfer " +
                  std::to_string(transfer_ordinal_ - 1) + " (" + party_name(from) + " -> " +
                  party_name(to) + ", subsequence " + std::to_string(subsequence) + ")");
    return false;
  }
  return true;
}

bool ProtocolEngine::phase_distributor_preparation() {
  if (abort_ || done_) return false;

  const int total = cfg_.m + cfg_.l_verify;
  states_.clear();
  owners_.clear();
  live_.clear();
  for (int s = 0; s < total; ++s) {
    std::optional<qcore::StateVector> sub;
    if (adversary_) sub = adversary_->substitute_prepared_state(s);
    qcore::StateVector st = sub ? std::move(*sub) : qcore::make_cluster_state();
    if (st.num_qubits != 6)
      throw std::invalid_argument("prepared states must have six qubits");
    states_.push_back(std::move(st));
    owners_.push_back({kDistributor, kDistributor, kDistributor, kDistributor, kDistributor,
                       kDistributor});
    live_.push_back(s);
    if (trace_)
      for (int q = 1; q <= 6; ++q) trace_->ownership_events.push_back({s, q, kDistributor});
  }

  const int left0 = left_chain().front();
  const int right0 = right_chain().front();
  json checks = json::array();
  const bool ok = do_transfer("distributor-preparation", checks, kDistributor, left0, 3) &&
                  do_transfer("distributor-preparation", checks, kDistributor, left0, 4) &&
                  do_transfer("distributor-preparation", checks, kDistributor, right0, 5) &&
                  do_transfer("distributor-preparation", checks, kDistributor, right0, 6);

  json rec;
  rec["phase"] = "distributor-preparation";
  rec["cluster_states"] = total;
  rec["checks"] = std::move(checks);
  phases_.push_back(std::move(rec));
  return ok;
}

bool ProtocolEngine::phase_identity_verification() {
  if (abort_ || done_) return false;

  const int left0 = left_chain().front();
  const int right0 = right_chain().front();
  const int l = cfg_.l_verify;

  // Jointly seeded draw: both verifiers publish a share, and the sampled
  // positions and bases follow deterministically from the pair.
  const std::uint64_t share_a = rng_.next_u64();
  const std::uint64_t share_b = rng_.next_u64();
  for (auto [party, share] : {std::pair{left0, share_a}, std::pair{right0, share_b}}) {
    Message msg;
    msg.kind = "verify_seed_share";
    msg.channel = Channel::kBroadcast;
    msg.from = party;
    msg.payload["share"] = share;
    emit(std::move(msg));
  }

  RngStream joint(split_seed(share_a, share_b));
  const std::vector<int> zero_based = sample_sorted(joint, cfg_.m + l, l);
  std::vector<int> positions;
  for (int p : zero_based) positions.push_back(p + 1);

  // Verification rounds measure in the Z basis only. The Z pair correlation
  // is deterministic on the agreed cluster state, so an honest source always
  // passes. The X pair relation is not an invariant of that state: its all-X
  // outcome distribution is uniform over all 64 patterns, so an X round would
  // reject an honest source with probability 1/2. check_x_correlation stays
  // available as a predicate for analysis, but the engine never gates on it.
  const qcore::BasisKind basis = qcore::BasisKind::kZ;

  json jpos = json::array(), jbases = json::array();
  for (int i = 0; i < l; ++i) {
    jpos.push_back(positions[i]);
    jbases.push_back("Z");
  }
  {
    Message msg;
    msg.kind = "verify_spec";
    msg.channel = Channel::kBroadcast;
    msg.from = left0;
    msg.payload["positions"] = jpos;
    msg.payload["bases"] = jbases;
    emit(std::move(msg));
  }

  // The distributor measures its retained pair first and announces; the two
  // verifiers follow. All announcements are pair symbols, not raw bits.
  auto measure_pair = [&](int state_index, int low_qubit) {
    auto [o1, s1] = qcore::measure_qubit(states_[state_index], low_qubit, basis, rng_);
    states_[state_index] = std::move(s1);
    auto [o2, s2] = qcore::measure_qubit(states_[state_index], low_qubit + 1, basis, rng_);
    states_[state_index] = std::move(s2);
    return std::pair{o1, o2};
  };

  std::vector<std::array<std::pair<int, int>, 3>> outcomes(l);
  const std::array<std::pair<int, int>, 3> parts = {
      std::pair{kDistributor, 1}, std::pair{left0, 3}, std::pair{right0, 5}};
  for (int part = 0; part < 3; ++part) {
    json symbols = json::array();
    for (int i = 0; i < l; ++i) {
      const int s = live_[positions[i] - 1];
      outcomes[i][part] = measure_pair(s, parts[part].second);
      symbols.push_back(symbol_string(basis, outcomes[i][part].first, outcomes[i][part].second));
    }
    Message msg;
    msg.kind = "verify_announce";
    msg.channel = Channel::kBroadcast;
    msg.from = parts[part].first;
    msg.payload["symbols"] = std::move(symbols);
    emit(std::move(msg));
  }

  bool pass = true;
  json rounds = json::array();
  for (int i = 0; i < l; ++i) {
    json round;
    round["position"] = positions[i];
    round["basis"] = "Z";
    for (int part = 0; part < 3; ++part)
      round[part == 0 ? "r12" : (part == 1 ? "r34" : "r56")] =
          symbol_string(basis, outcomes[i][part].first, outcomes[i][part].second);
    const bool ok = cluster::check_z_correlation(
        cluster::pair_symbol_z(outcomes[i][0].first, outcomes[i][0].second),
        cluster::pair_symbol_z(outcomes[i][1].first, outcomes[i][1].second),
        cluster::pair_symbol_z(outcomes[i][2].first, outcomes[i][2].second));
    round["ok"] = ok;
    rounds.push_back(std::move(round));
    pass = pass && ok;
  }

  json rec;
  rec["phase"] = "identity-verification";
  rec["positions"] = jpos;
  rec["bases"] = jbases;
  rec["rounds"] = std::move(rounds);
  rec["pass"] = pass;
  phases_.push_back(std::move(rec));

  if (!pass) {
    abort_run("identity-verification", "cluster-correlation", kDistributor,
              "measured pair symbols violate the cluster correlations; the source did not "
              "distribute the agreed state");
    return false;
  }

  // Verified positions are consumed; the surviving states carry the key.
  for (int i = l - 1; i >= 0; --i) live_.erase(live_.begin() + (positions[i] - 1));
  return true;
}

bool ProtocolEngine::phase_participant_chain() {
  if (abort_ || done_) return false;

  const int hops = (cfg_.n - 1) / 2;
  const std::vector<int> left = left_chain();
  const std::vector<int> right = right_chain();
  json checks = json::array();
  bool ok = true;

  for (int t = 0; t < hops && ok; ++t) {
    const bool endpoint = t == hops - 1;
    for (int side = 0; side < 2 && ok; ++side) {
      const int party = side == 0 ? left[t] : right[t];
      const int low_qubit = side == 0 ? 3 : 5;
      if (adversary_) {
        ParticipantTurn turn{party, side, endpoint, low_qubit, live_, states_, rng_};
        adversary_->on_participant_turn(turn);
      }
      participant_apply_key(states_, live_, low_qubit, keys_[party - 1]);
      if (trace_) {
        for (int j = 0; j < cfg_.m; ++j) {
          const cluster::Chunk c = keys_[party - 1].chunk(j);
          const int mask = side == 0 ? (c.b1 << 3) | (c.b2 << 2) : (c.b1 << 1) | c.b2;
          trace_->mask_events.push_back({party, live_[j], mask});
        }
      }
      const int next = endpoint ? kDistributor : (side == 0 ? left[t + 1] : right[t + 1]);
      ok = do_transfer("chain", checks, party, next, low_qubit) &&
           do_transfer("chain", checks, party, next, low_qubit + 1);
    }
  }

  json rec;
  rec["phase"] = "chain";
  rec["checks"] = std::move(checks);
  phases_.push_back(std::move(rec));
  return ok;
}

bool ProtocolEngine::phase_measurement() {
  if (abort_ || done_) return false;

  const cluster::Codebook& cb = cluster::derived_codebook();
  k_b_ = hashmod::KeyString::zero(cfg_.m);
  k_d_ = hashmod::KeyString::zero(cfg_.m);
  cluster_outcomes_.clear();
  json joutcomes = json::array();

  for (int j = 0; j < cfg_.m; ++j) {
    const int s = live_[j];
    auto [index, post] = cluster::cluster_basis_measure(states_[s], rng_);
    states_[s] = std::move(post);
    if (!index) {
      cluster_outcomes_.push_back(0);
      if (trace_) trace_->cluster_outcomes = cluster_outcomes_;
      json rec;
      rec["phase"] = "measurement";
      rec["cluster_outcomes"] = std::move(joutcomes);
      rec["anomaly_position"] = j + 1;
      phases_.push_back(std::move(rec));
      abort_run("measurement", "cluster-frame-membership", kNobody,
                "joint measurement at position " + std::to_string(j + 1) +
                    " fell outside the sixteen-state frame");
      return false;
    }
    cluster_outcomes_.push_back(*index);
    joutcomes.push_back(*index);
    const auto [ckb, ckd] = cluster::mask_to_chunks(cluster::FlipMask::from_value(cb.mask_by_index[*index - 1]));
    k_b_.set_chunk(j, ckb);
    k_d_.set_chunk(j, ckd);
  }

  h_b_ = hashmod::hash(k_b_, params_);
  h_d_ = hashmod::hash(k_d_, params_);
  if (trace_) trace_->cluster_outcomes = cluster_outcomes_;

  json rec;
  rec["phase"] = "measurement";
  rec["cluster_outcomes"] = std::move(joutcomes);
  rec["k_b"] = k_b_.to_chunked_string();
  rec["k_d"] = k_d_.to_chunked_string();
  phases_.push_back(std::move(rec));
  return true;
}

bool ProtocolEngine::phase_tdc() {
  if (abort_ || done_) return false;

  DistributorSubmission sub{k_b_, k_d_, h_b_, h_d_};
  if (adversary_) sub = adversary_->forge_distributor_submission(std::move(sub), params_, rng_);
  {
    Message msg;
    msg.kind = "tdc_submission";
    msg.channel = Channel::kSecure;
    msg.from = kDistributor;
    msg.to = kTdc;
    msg.payload["k_b"] = sub.k_b.to_chunked_string();
    msg.payload["k_d"] = sub.k_d.to_chunked_string();
    msg.payload["h_b"] = sub.h_b.to_string();
    msg.payload["h_d"] = sub.h_d.to_string();
    emit(std::move(msg));
  }

  hashmod::KeyString pivot_key = keys_[pivot_ - 1];
  if (adversary_) pivot_key = adversary_->forge_pivot_key(pivot_key, rng_);
  {
    Message msg;
    msg.kind = "tdc_submission";
    msg.channel = Channel::kSecure;
    msg.from = pivot_;
    msg.to = kTdc;
    msg.payload["identity"] = pivot_;
    msg.payload["key"] = pivot_key.to_chunked_string();
    emit(std::move(msg));
  }

  // Equation order fixes the identity lists: left chain inward-to-outward is
  // H(i-(n-1)/2) ... H(i-1).
  std::vector<int> left_ids = left_chain();
  std::reverse(left_ids.begin(), left_ids.end());
  const std::vector<int> right_ids = right_chain();

  const VerificationReport report =
      tdc_recover(sub, pivot_key, pivot_, left_ids, right_ids, registry_, params_);

  json rec;
  rec["phase"] = "tdc-verification";
  rec["eq1"] = report.eq1;
  rec["eq2"] = report.eq2;
  rec["eq3"] = report.eq3;
  rec["eq4"] = report.eq4;
  rec["eq5"] = report.eq5;
  rec["pass"] = report.all_pass();
  phases_.push_back(std::move(rec));

  if (!report.all_pass()) {
    static const char* kChecks[] = {
        "", "eq1-left-chain-digest", "eq2-right-chain-digest", "eq3-k_b-digest",
        "eq4-k_d-digest", "eq5-pivot-key-digest"};
    const int failing = report.first_failing();
    int offender = kNobody;
    if (failing == 3 || failing == 4) offender = kDistributor;
    if (failing == 5) offender = pivot_;
    abort_run("tdc-verification", kChecks[failing], offender,
              "verification equation " + std::to_string(failing) + " failed");
    return false;
  }

  shared_key_ = report.recovered;
  {
    Message msg;
    msg.kind = "key_announce";
    msg.channel = Channel::kBroadcast;
    msg.from = kTdc;
    msg.payload["shared_key"] = shared_key_->to_chunked_string();
    emit(std::move(msg));
  }
  done_ = true;
  return true;
}

Transcript ProtocolEngine::take_transcript() {
  Transcript t;
  t.config = cfg_.to_json();
  t.messages = std::move(messages_);
  t.phases = std::move(phases_);
  t.shared_key = shared_key_;
  t.abort = abort_;
  done_ = true;
  return t;
}

Transcript ProtocolEngine::run() {
  phase_preparation() && phase_distributor_preparation() && phase_identity_verification() &&
      phase_participant_chain() && phase_measurement() && phase_tdc();
  return take_transcript();
}

Transcript run_protocol(const ProtocolConfig& cfg, Adversary* adversary, RngStream& rng,
                        RunTrace* trace) {
  ProtocolEngine engine(cfg, adversary, rng, trace);
  return engine.run();
}

Transcript run_protocol(const ProtocolConfig& cfg, Adversary* adversary, RunTrace* trace) {
  RngStream rng(cfg.seed);
  return run_protocol(cfg, adversary, rng, trace);
}

}  // namespace qka::protocol
