#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qka/adversary.hpp"
#include "qka/cluster.hpp"

namespace qka::adversary {

namespace {

qcore::StateVector plus_state(int qubits) {
  qcore::StateVector s;
  s.num_qubits = qubits;
  s.amps.assign(std::size_t{1} << qubits, 1.0 / std::sqrt(double(std::size_t{1} << qubits)));
  return s;
}

qcore::StateVector decoy_state(int kind) {
  switch (kind) {
    case 0: return qcore::basis_state({0});
    case 1: return qcore::basis_state({1});
    case 2: return plus_state(1);
    default: {
      qcore::StateVector s = plus_state(1);
      s.amps[1] = -s.amps[1];
      return s;
    }
  }
}

qcore::BasisKind decoy_basis(int kind) {
  return kind < 2 ? qcore::BasisKind::kZ : qcore::BasisKind::kX;
}

int decoy_expected(int kind) { return kind & 1; }

// spec string helpers for parse_attack_spec

std::map<std::string, std::string> parse_params(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string item;
  std::string last;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      // a segment without '=' continues the previous value; chunked keys
      // like key=10,11,01 contain literal commas
      if (last.empty() || eq == 0)
        throw std::invalid_argument("attack parameter must be key=value, got '" + item + "'");
      out[last] += "," + item;
      continue;
    }
    last = item.substr(0, eq);
    if (!out.emplace(last, item.substr(eq + 1)).second)
      throw std::invalid_argument("duplicate attack parameter '" + last + "'");
  }
  return out;
}

int param_int(const std::map<std::string, std::string>& params, const std::string& key,
              int fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("attack parameter " + key + " wants an integer, got '" +
                                it->second + "'");
  }
}

double param_double(const std::map<std::string, std::string>& params, const std::string& key,
                    double fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("attack parameter " + key + " wants a number, got '" +
                                it->second + "'");
  }
}

void reject_unknown_params(const std::map<std::string, std::string>& params,
                           std::initializer_list<const char*> known) {
  for (const auto& [key, value] : params) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("unknown attack parameter '" + key + "'");
  }
}

// engine-facing strategies

class InterceptResendAdversary : public protocol::Adversary {
 public:
  explicit InterceptResendAdversary(InterceptResend a) : a_(a) {}

  void on_transfer(protocol::TransferContext& ctx) override {
    if (ctx.ordinal != a_.target_transfer) return;
    for (auto& slot : ctx.slots)
      intercept_resend_tap(ctx.state_of(slot), ctx.qubit_of(slot), a_.policy, ctx.rng);
  }

 private:
  InterceptResend a_;
};

class EntangleMeasureAdversary : public protocol::Adversary {
 public:
  explicit EntangleMeasureAdversary(EntangleMeasure a)
      : a_(a), coupling_(controlled_rotation(a.theta)) {}

  void on_transfer(protocol::TransferContext& ctx) override {
    if (ctx.ordinal != a_.target_transfer) return;
    for (auto& slot : ctx.slots)
      entangle_measure_tap(ctx.state_of(slot), ctx.qubit_of(slot), coupling_, ctx.rng);
  }

 private:
  EntangleMeasure a_;
  qcore::Mat4 coupling_;
};

class WrongStateAdversary : public protocol::Adversary {
 public:
  explicit WrongStateAdversary(qcore::StateVector substitute)
      : substitute_(std::move(substitute)) {}

  std::optional<qcore::StateVector> substitute_prepared_state(int) override {
    return substitute_;
  }

 private:
  qcore::StateVector substitute_;
};

hashmod::Digest perturb_digest(const hashmod::Digest& d, const hashmod::HashParams& params,
                               RngStream& rng) {
  hashmod::Digest out = d;
  if (d.mode == hashmod::HashMode::kXorLinear) {
    out.value ^= std::uint64_t{1} << rng.next_below(d.width_bits);
  } else {
    // multiplying by the generator stays inside the group and cannot fix
    // a nonzero residue
    out.value = hashmod::combine(d, hashmod::hash(hashmod::KeyString::parse("01"),
                                                  params)).value;
  }
  return out;
}

class ForgeSubmissionAdversary : public protocol::Adversary {
 public:
  explicit ForgeSubmissionAdversary(ForgedDistributorSubmission a) : a_(a) {}

  protocol::DistributorSubmission forge_distributor_submission(
      protocol::DistributorSubmission sub, const hashmod::HashParams& params,
      RngStream& rng) override {
    auto flip = [&](hashmod::KeyString& k) {
      const int bit = a_.bit_index ? *a_.bit_index
                                   : static_cast<int>(rng.next_below(k.bits.size()));
      if (bit < 0 || bit >= static_cast<int>(k.bits.size()))
        throw std::invalid_argument("forged bit index out of range");
      k.bits[bit] ^= 1;
    };
    switch (a_.field) {
      case DistributorField::kKB:
        flip(sub.k_b);
        if (a_.consistent_digest) sub.h_b = hashmod::hash(sub.k_b, params);
        break;
      case DistributorField::kKD:
        flip(sub.k_d);
        if (a_.consistent_digest) sub.h_d = hashmod::hash(sub.k_d, params);
        break;
      case DistributorField::kHB:
        sub.h_b = perturb_digest(sub.h_b, params, rng);
        break;
      case DistributorField::kHD:
        sub.h_d = perturb_digest(sub.h_d, params, rng);
        break;
    }
    return sub;
  }

 private:
  ForgedDistributorSubmission a_;
};

class ForgePivotKeyAdversary : public protocol::Adversary {
 public:
  explicit ForgePivotKeyAdversary(ForgedPivotKey a) : a_(std::move(a)) {}

  hashmod::KeyString forge_pivot_key(const hashmod::KeyString& true_key,
                                     RngStream& rng) override {
    if (a_.substitute) {
      if (a_.substitute->bits.size() != true_key.bits.size())
        throw std::invalid_argument("substitute pivot key has the wrong width");
      return *a_.substitute;
    }
    hashmod::KeyString forged = true_key;
    forged.bits[rng.next_below(forged.bits.size())] ^= 1;
    return forged;
  }

 private:
  ForgedPivotKey a_;
};

// The colluding endpoints read their qubits out in Z before their own key
// goes on; the pivot contributes its key knowledge after the run.
class CollusionAdversary : public protocol::Adversary {
 public:
  explicit CollusionAdversary(bool measure) : measure_(measure) {}

  void observe_run_keys(int pivot, const std::vector<hashmod::KeyString>& keys) override {
    const int n = static_cast<int>(keys.size());
    const int hops = (n - 1) / 2;
    auto wrap = [n](int x) { return ((x - 1) % n + n) % n + 1; };
    pivot_key_ = keys[pivot - 1];
    left_end_key_ = keys[wrap(pivot - hops) - 1];
    right_end_key_ = keys[wrap(pivot + hops) - 1];
  }

  void on_participant_turn(const protocol::ParticipantTurn& t) override {
    if (!measure_ || !t.is_endpoint) return;
    auto& record = t.side == 0 ? left_obs_ : right_obs_;
    record.clear();
    for (int s : t.live) {
      auto [o1, s1] = qcore::measure_qubit(t.states[s], t.low_qubit, qcore::BasisKind::kZ, t.rng);
      t.states[s] = std::move(s1);
      auto [o2, s2] =
          qcore::measure_qubit(t.states[s], t.low_qubit + 1, qcore::BasisKind::kZ, t.rng);
      t.states[s] = std::move(s2);
      record.push_back({o1, o2});
    }
  }

  bool measured() const { return !left_obs_.empty() && !right_obs_.empty(); }

  // final value of qubits (3,4,5,6) for chunk j, after the endpoints' own
  // keys went on top of what they observed
  std::array<int, 4> final_bits(int j) const {
    const cluster::Chunk lc = left_end_key_.chunk(j);
    const cluster::Chunk rc = right_end_key_.chunk(j);
    return {left_obs_[j].first ^ lc.b1, left_obs_[j].second ^ lc.b2,
            right_obs_[j].first ^ rc.b1, right_obs_[j].second ^ rc.b2};
  }

  const hashmod::KeyString& pivot_key() const { return pivot_key_; }

 private:
  bool measure_;
  hashmod::KeyString pivot_key_, left_end_key_, right_end_key_;
  std::vector<std::pair<int, int>> left_obs_, right_obs_;
};

std::string breakdown_key(const protocol::AbortInfo& a) { return a.phase + "/" + a.check; }

bool matches_signature(const AttackKind& attack, const protocol::AbortInfo& abort) {
  return std::visit(
      [&](const auto& a) -> bool {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, InterceptResend> || std::is_same_v<T, EntangleMeasure>)
          return abort.check == "decoy-check";
        else if constexpr (std::is_same_v<T, WrongStateDistributor>)
          return abort.check == "cluster-correlation";
        else if constexpr (std::is_same_v<T, ForgedDistributorSubmission> ||
                           std::is_same_v<T, ForgedPivotKey>)
          return abort.phase == "tdc-verification";
        else
          return abort.phase == "measurement" || abort.phase == "tdc-verification";
      },
      attack);
}

int transfers_in_run(const protocol::ProtocolConfig& cfg) { return 4 + 2 * (cfg.n - 1); }

std::optional<double> analytic_detection(const protocol::ProtocolConfig& cfg,
                                         const AttackKind& attack) {
  const int d = cfg.decoys_per_transfer;
  return std::visit(
      [&](const auto& a) -> std::optional<double> {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, InterceptResend>) {
          // wrong basis half the time, then a coin flip on the re-measured
          // decoy: 1/4 per decoy under every basis policy
          return 1.0 - std::pow(0.75, d);
        } else if constexpr (std::is_same_v<T, EntangleMeasure>) {
          const double per_x = (1.0 - std::cos(a.theta)) / 2.0;
          return 1.0 - std::pow(1.0 - per_x / 2.0, d);
        } else if constexpr (std::is_same_v<T, WrongStateDistributor>) {
          // verification rounds are all Z basis, so only the Z pass
          // probability of the substituted state matters
          const double pass = z_round_pass_probability(a.substitute);
          return 1.0 - std::pow(pass, cfg.l_verify);
        } else if constexpr (std::is_same_v<T, EndpointCollusion>) {
          return a.measure ? 1.0 - std::pow(0.25, cfg.m) : 0.0;
        } else {
          // forgeries: the digest map is injective on keys, so any tampered
          // field fails its equation
          return 1.0;
        }
      },
      attack);
}

}  // namespace

std::string attack_name(const AttackKind& attack) {
  return std::visit(
      [](const auto& a) -> std::string {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, InterceptResend>)
          return "intercept-resend";
        else if constexpr (std::is_same_v<T, EntangleMeasure>)
          return "entangle-measure";
        else if constexpr (std::is_same_v<T, WrongStateDistributor>)
          return a.label.empty() ? "wrong-state" : "wrong-state(" + a.label + ")";
        else if constexpr (std::is_same_v<T, ForgedDistributorSubmission>) {
          static const char* kFields[] = {"k_b", "k_d", "h_b", "h_d"};
          return std::string("forge-submission(") + kFields[static_cast<int>(a.field)] + ")";
        } else if constexpr (std::is_same_v<T, ForgedPivotKey>)
          return "forge-pivot-key";
        else
          return a.measure ? "collusion" : "collusion(passive)";
      },
      attack);
}

AttackKind parse_attack_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const auto params =
      colon == std::string::npos ? std::map<std::string, std::string>{}
                                 : parse_params(spec.substr(colon + 1));

  if (name == "intercept-resend") {
    reject_unknown_params(params, {"transfer", "basis"});
    InterceptResend a;
    a.target_transfer = param_int(params, "transfer", 0);
    const auto it = params.find("basis");
    if (it != params.end()) {
      if (it->second == "random")
        a.policy = BasisPolicy::kRandom;
      else if (it->second == "z")
        a.policy = BasisPolicy::kZ;
      else if (it->second == "x")
        a.policy = BasisPolicy::kX;
      else
        throw std::invalid_argument("basis must be random, z or x");
    }
    return a;
  }
  if (name == "entangle-measure") {
    reject_unknown_params(params, {"theta", "transfer"});
    EntangleMeasure a;
    a.theta = param_double(params, "theta", 0.0);
    if (a.theta < 0.0 || a.theta > M_PI_2)
      throw std::invalid_argument("theta must lie in [0, pi/2]");
    a.target_transfer = param_int(params, "transfer", 0);
    return a;
  }
  if (name == "wrong-state") {
    reject_unknown_params(params, {"state"});
    const auto it = params.find("state");
    const std::string which = it == params.end() ? "plus" : it->second;
    WrongStateDistributor a;
    a.label = which;
    if (which == "plus")
      a.substitute = plus_state(6);
    else if (which == "zero")
      a.substitute = qcore::basis_state({0, 0, 0, 0, 0, 0});
    else
      throw std::invalid_argument("state must be plus or zero");
    return a;
  }
  if (name == "forge-submission") {
    reject_unknown_params(params, {"field", "bit", "consistent"});
    ForgedDistributorSubmission a;
    const auto it = params.find("field");
    const std::string f = it == params.end() ? "k_b" : it->second;
    if (f == "k_b")
      a.field = DistributorField::kKB;
    else if (f == "k_d")
      a.field = DistributorField::kKD;
    else if (f == "h_b")
      a.field = DistributorField::kHB;
    else if (f == "h_d")
      a.field = DistributorField::kHD;
    else
      throw std::invalid_argument("field must be k_b, k_d, h_b or h_d");
    if (params.count("bit")) a.bit_index = param_int(params, "bit", 0);
    a.consistent_digest = param_int(params, "consistent", 0) != 0;
    return a;
  }
  if (name == "forge-pivot-key") {
    reject_unknown_params(params, {"key"});
    ForgedPivotKey a;
    const auto it = params.find("key");
    if (it != params.end()) a.substitute = hashmod::KeyString::parse(it->second);
    return a;
  }
  if (name == "collusion") {
    reject_unknown_params(params, {"measure"});
    EndpointCollusion a;
    a.measure = param_int(params, "measure", 1) != 0;
    return a;
  }
  throw std::invalid_argument("unknown attack '" + name + "'");
}

std::unique_ptr<protocol::Adversary> make_adversary(const AttackKind& attack) {
  return std::visit(
      [](const auto& a) -> std::unique_ptr<protocol::Adversary> {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, InterceptResend>)
          return std::make_unique<InterceptResendAdversary>(a);
        else if constexpr (std::is_same_v<T, EntangleMeasure>)
          return std::make_unique<EntangleMeasureAdversary>(a);
        else if constexpr (std::is_same_v<T, WrongStateDistributor>)
          return std::make_unique<WrongStateAdversary>(a.substitute);
        else if constexpr (std::is_same_v<T, ForgedDistributorSubmission>)
          return std::make_unique<ForgeSubmissionAdversary>(a);
        else if constexpr (std::is_same_v<T, ForgedPivotKey>)
          return std::make_unique<ForgePivotKeyAdversary>(a);
        else
          return std::make_unique<CollusionAdversary>(a.measure);
      },
      attack);
}

qcore::BitOutcome intercept_resend_tap(qcore::StateVector& s, int qubit, BasisPolicy policy,
                                       RngStream& rng) {
  qcore::BasisKind basis;
  switch (policy) {
    case BasisPolicy::kZ: basis = qcore::BasisKind::kZ; break;
    case BasisPolicy::kX: basis = qcore::BasisKind::kX; break;
    default: basis = rng.next_bit() ? qcore::BasisKind::kX : qcore::BasisKind::kZ; break;
  }
  auto [outcome, post] = qcore::measure_qubit(s, qubit, basis, rng);
  s = std::move(post);  // the collapsed state is the resent state
  return outcome;
}

qcore::Mat4 controlled_rotation(double theta) {
  const double c = std::cos(theta), t = std::sin(theta);
  return qcore::Mat4{{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, c, -t}, {0, 0, t, c}}};
}

qcore::BitOutcome entangle_measure_tap(qcore::StateVector& s, int qubit,
                                       const qcore::Mat4& coupling, RngStream& rng) {
  s = qcore::extend_with_ancilla(s, qcore::basis_state({0}));
  const int ancilla = s.num_qubits;
  s = qcore::apply_two_qubit_unitary(s, qubit, ancilla, coupling);
  auto [outcome, post] = qcore::measure_qubit(s, ancilla, qcore::BasisKind::kZ, rng);
  s = qcore::drop_qubit(post, ancilla);
  return outcome;
}

std::pair<double, double> wilson_interval(int successes, int n) {
  if (n <= 0) return {0.0, 1.0};
  const double z = 1.959963984540054;  // 97.5th normal percentile
  const double p = static_cast<double>(successes) / n;
  const double z2n = z * z / n;
  const double center = (p + z2n / 2.0) / (1.0 + z2n);
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2n / (4.0 * n)) / (1.0 + z2n);
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

json DetectionEstimate::to_json() const {
  json j;
  j["attack"] = attack;
  j["trials"] = trials;
  j["detected"] = detected;
  j["estimate"] = estimate;
  if (analytic)
    j["analytic"] = *analytic;
  else
    j["analytic"] = nullptr;
  j["interval95"] = json::array({wilson_low, wilson_high});
  j["aborted_total"] = aborted_total;
  json b = json::object();
  for (const auto& [key, count] : abort_breakdown) b[key] = count;
  j["abort_breakdown"] = std::move(b);
  return j;
}

std::string DetectionEstimate::to_text() const {
  std::ostringstream os;
  os << "attack " << attack << ": detected " << detected << "/" << trials << " = " << estimate;
  if (analytic) os << " (analytic " << *analytic << ")";
  os << ", 95% interval [" << wilson_low << ", " << wilson_high << "]\n";
  os << "aborts of any cause: " << aborted_total << "\n";
  for (const auto& [key, count] : abort_breakdown)
    os << "  " << key << ": " << count << "\n";
  return os.str();
}

DetectionEstimate estimate_detection(const protocol::ProtocolConfig& cfg,
                                     const AttackKind& attack, int trials,
                                     std::uint64_t base_seed) {
  if (trials < 1) throw std::invalid_argument("estimate_detection needs at least one trial");
  if (const auto* ir = std::get_if<InterceptResend>(&attack);
      ir && (ir->target_transfer < 0 || ir->target_transfer >= transfers_in_run(cfg)))
    throw std::invalid_argument("target transfer out of range for this config");
  if (const auto* em = std::get_if<EntangleMeasure>(&attack);
      em && (em->target_transfer < 0 || em->target_transfer >= transfers_in_run(cfg)))
    throw std::invalid_argument("target transfer out of range for this config");

  DetectionEstimate est;
  est.attack = attack_name(attack);
  est.trials = trials;
  for (int t = 0; t < trials; ++t) {
    RngStream rng(split_seed(base_seed, static_cast<std::uint64_t>(t)));
    const auto adversary = make_adversary(attack);
    const protocol::Transcript tr = protocol::run_protocol(cfg, adversary.get(), rng);
    if (!tr.aborted()) continue;
    ++est.aborted_total;
    ++est.abort_breakdown[breakdown_key(*tr.abort)];
    if (matches_signature(attack, *tr.abort)) ++est.detected;
  }
  est.estimate = static_cast<double>(est.detected) / trials;
  est.analytic = analytic_detection(cfg, attack);
  std::tie(est.wilson_low, est.wilson_high) = wilson_interval(est.detected, trials);
  return est;
}

protocol::Transcript forged_submission_run(const protocol::ProtocolConfig& cfg,
                                           const AttackKind& variant, std::uint64_t seed) {
  if (!std::holds_alternative<ForgedPivotKey>(variant) &&
      !std::holds_alternative<ForgedDistributorSubmission>(variant))
    throw std::invalid_argument("forged_submission_run wants a forgery attack");
  RngStream rng(seed);
  const auto adversary = make_adversary(variant);
  return protocol::run_protocol(cfg, adversary.get(), rng);
}

double z_round_pass_probability(const qcore::StateVector& state) {
  if (state.num_qubits != 6) throw std::invalid_argument("verification acts on six qubits");
  double pass = 0.0;
  for (int w = 0; w < 64; ++w) {
    const double p = std::norm(state.amps[w]);
    if (p == 0.0) continue;
    const auto sym = [&](int hi_shift) {
      return cluster::pair_symbol_z((w >> hi_shift) & 1, (w >> (hi_shift - 1)) & 1);
    };
    if (cluster::check_z_correlation(sym(5), sym(3), sym(1))) pass += p;
  }
  return pass;
}

double x_round_pass_probability(const qcore::StateVector& state) {
  if (state.num_qubits != 6) throw std::invalid_argument("verification acts on six qubits");
  double pass = 0.0;
  for (int pat = 0; pat < 64; ++pat) {  // pattern bit 1 means the |-> outcome
    qcore::Amplitude amp = 0.0;
    for (int w = 0; w < 64; ++w) {
      const int sign = __builtin_popcount(pat & w) & 1;
      amp += (sign ? -1.0 : 1.0) * state.amps[w];
    }
    const double p = std::norm(amp / 8.0);
    if (p == 0.0) continue;
    const int p12 = cluster::pair_symbol_x((pat >> 5) & 1, (pat >> 4) & 1);
    const int p34 = cluster::pair_symbol_x((pat >> 3) & 1, (pat >> 2) & 1);
    const int p56 = cluster::pair_symbol_x((pat >> 1) & 1, pat & 1);
    if (cluster::check_x_correlation(p12, p34, p56)) pass += p;
  }
  return pass;
}

json WrongStateReport::to_json() const {
  json j;
  j["trials"] = trials;
  j["detected"] = detected;
  j["estimate"] = estimate;
  j["analytic"] = analytic;
  j["z_rounds"] = z_rounds;
  j["z_failures"] = z_failures;
  j["z_failure_rate"] = z_failure_rate;
  j["x_rounds"] = x_rounds;
  j["x_failures"] = x_failures;
  j["x_failure_rate"] = x_failure_rate;
  return j;
}

WrongStateReport wrong_state_run(const protocol::ProtocolConfig& cfg,
                                 const qcore::StateVector& substitute, int trials,
                                 std::uint64_t base_seed) {
  WrongStateReport rep;
  rep.trials = trials;
  AttackKind attack = WrongStateDistributor{substitute, ""};
  for (int t = 0; t < trials; ++t) {
    RngStream rng(split_seed(base_seed, static_cast<std::uint64_t>(t)));
    const auto adversary = make_adversary(attack);
    const protocol::Transcript tr = protocol::run_protocol(cfg, adversary.get(), rng);
    if (tr.aborted() && tr.abort->check == "cluster-correlation") ++rep.detected;
    for (const auto& phase : tr.phases) {
      if (phase.at("phase") != "identity-verification") continue;
      for (const auto& round : phase.at("rounds")) {
        const bool is_z = round.at("basis") == "Z";
        const bool failed = !round.at("ok").get<bool>();
        (is_z ? rep.z_rounds : rep.x_rounds) += 1;
        if (failed) (is_z ? rep.z_failures : rep.x_failures) += 1;
      }
    }
  }
  rep.estimate = static_cast<double>(rep.detected) / trials;
  // the engine runs Z-basis verification rounds only; x_rounds stays zero and
  // the analytic uses the Z pass probability alone
  rep.analytic = 1.0 - std::pow(z_round_pass_probability(substitute), cfg.l_verify);
  rep.z_failure_rate = rep.z_rounds ? static_cast<double>(rep.z_failures) / rep.z_rounds : 0.0;
  rep.x_failure_rate = rep.x_rounds ? static_cast<double>(rep.x_failures) / rep.x_rounds : 0.0;
  return rep;
}

json CollusionReport::to_json() const {
  json j;
  j["trials"] = trials;
  j["measure"] = measure;
  j["aborted"] = aborted;
  j["completed"] = completed;
  j["detection_estimate"] = detection_estimate;
  j["detection_analytic"] = detection_analytic;
  j["full_guess_correct"] = full_guess_correct;
  j["full_guess_accuracy"] = full_guess_accuracy;
  j["conditional_analytic"] = conditional_analytic;
  j["baseline_accuracy"] = baseline_accuracy;
  j["parity_chunks"] = parity_chunks;
  j["parity_correct"] = parity_correct;
  j["parity_accuracy"] = parity_accuracy;
  json b = json::object();
  for (const auto& [key, count] : abort_breakdown) b[key] = count;
  j["abort_breakdown"] = std::move(b);
  return j;
}

std::string CollusionReport::to_text() const {
  std::ostringstream os;
  os << "collusion (" << (measure ? "measuring endpoints" : "passive, keys pooled only")
     << "), " << trials << " trials\n";
  os << "  detected (measurement anomaly or failed verification equation): " << aborted << "/"
     << trials << " = " << detection_estimate << " (analytic " << detection_analytic << ")\n";
  os << "  completed runs: " << completed << "\n";
  os << "  full shared-key guesses correct: " << full_guess_correct << "/" << completed << " = "
     << full_guess_accuracy << " (analytic " << conditional_analytic << ", passive baseline "
     << baseline_accuracy << ")\n";
  if (measure)
    os << "  mask parity functionals (f4^f5, f5^f6) read correctly: " << parity_correct << "/"
       << parity_chunks << " = " << parity_accuracy << "\n";
  for (const auto& [key, count] : abort_breakdown)
    os << "  abort " << key << ": " << count << "\n";
  return os.str();
}

CollusionReport collusion_run(const protocol::ProtocolConfig& cfg, int trials,
                              std::uint64_t base_seed, bool measure) {
  if (cfg.n < 3) throw std::invalid_argument("collusion needs at least three participants");
  CollusionReport rep;
  rep.trials = trials;
  rep.measure = measure;
  rep.baseline_accuracy = std::pow(0.25, cfg.m);
  rep.conditional_analytic = measure ? std::pow(0.5, cfg.m) : rep.baseline_accuracy;
  rep.detection_analytic = measure ? 1.0 - std::pow(0.25, cfg.m) : 0.0;

  const int hops = (cfg.n - 1) / 2;
  auto wrap = [&](int x) { return ((x - 1) % cfg.n + cfg.n) % cfg.n + 1; };

  for (int t = 0; t < trials; ++t) {
    RngStream rng(split_seed(base_seed, static_cast<std::uint64_t>(t)));
    CollusionAdversary adv(measure);
    protocol::RunTrace trace;
    const protocol::Transcript tr = protocol::run_protocol(cfg, &adv, rng, &trace);

    // true accumulated flip mask per chunk, for scoring the parity readout
    std::vector<int> true_mask(cfg.m, 0);
    for (int k = 1; k <= hops; ++k) {
      for (int j = 0; j < cfg.m; ++j) {
        const cluster::Chunk lc = trace.keys[wrap(trace.pivot - k) - 1].chunk(j);
        const cluster::Chunk rc = trace.keys[wrap(trace.pivot + k) - 1].chunk(j);
        true_mask[j] ^= (lc.b1 << 3) | (lc.b2 << 2) | (rc.b1 << 1) | rc.b2;
      }
    }

    // the colluders' guess of each chunk of s
    std::vector<cluster::Chunk> guess(cfg.m);
    for (int j = 0; j < cfg.m; ++j) {
      const cluster::Chunk ki = adv.pivot_key().chunk(j);
      if (measure && adv.measured()) {
        const std::array<int, 4> v = adv.final_bits(j);
        const int f45 = v[1] ^ v[2];
        const int f56 = v[2] ^ v[3];
        ++rep.parity_chunks;
        const int want45 = ((true_mask[j] >> 2) & 1) ^ ((true_mask[j] >> 1) & 1);
        const int want56 = ((true_mask[j] >> 1) & 1) ^ (true_mask[j] & 1);
        if (f45 == want45 && f56 == want56) ++rep.parity_correct;
        // second bit of the chunk is pinned by v4^v6; the first is a coin
        guess[j] = cluster::Chunk{static_cast<int>(rng.next_bit()), v[1] ^ v[3] ^ ki.b2};
      } else {
        guess[j] =
            cluster::Chunk{static_cast<int>(rng.next_bit()), static_cast<int>(rng.next_bit())};
      }
    }

    if (tr.aborted()) {
      ++rep.aborted;
      ++rep.abort_breakdown[breakdown_key(*tr.abort)];
      continue;
    }
    ++rep.completed;
    bool all = true;
    for (int j = 0; j < cfg.m; ++j) {
      const cluster::Chunk actual = tr.shared_key->chunk(j);
      all = all && actual.b1 == guess[j].b1 && actual.b2 == guess[j].b2;
    }
    if (all) ++rep.full_guess_correct;
  }

  rep.detection_estimate = static_cast<double>(rep.aborted) / trials;
  rep.full_guess_accuracy =
      rep.completed ? static_cast<double>(rep.full_guess_correct) / rep.completed : 0.0;
  rep.parity_accuracy =
      rep.parity_chunks ? static_cast<double>(rep.parity_correct) / rep.parity_chunks : 0.0;
  return rep;
}

double mutual_information_bits(double theta, int samples, RngStream& rng) {
  if (samples < 1) throw std::invalid_argument("mutual information needs samples");
  const qcore::Mat4 coupling = controlled_rotation(theta);
  long counts[4][2] = {};
  for (int i = 0; i < samples; ++i) {
    const int kind = static_cast<int>(rng.next_below(4));
    qcore::StateVector s = decoy_state(kind);
    const int a = entangle_measure_tap(s, 1, coupling, rng);
    ++counts[kind][a];
  }
  double mi = 0.0;
  long ancilla_total[2] = {};
  long kind_total[4] = {};
  for (int k = 0; k < 4; ++k)
    for (int a = 0; a < 2; ++a) {
      kind_total[k] += counts[k][a];
      ancilla_total[a] += counts[k][a];
    }
  for (int k = 0; k < 4; ++k)
    for (int a = 0; a < 2; ++a) {
      if (!counts[k][a]) continue;
      const double pj = static_cast<double>(counts[k][a]) / samples;
      const double pk = static_cast<double>(kind_total[k]) / samples;
      const double pa = static_cast<double>(ancilla_total[a]) / samples;
      mi += pj * std::log2(pj / (pk * pa));
    }
  return mi;
}

DecoyErrorStats estimate_decoy_errors(double theta, int samples, RngStream& rng) {
  DecoyErrorStats stats;
  const qcore::Mat4 coupling = controlled_rotation(theta);
  for (int i = 0; i < samples; ++i) {
    const int kind = static_cast<int>(rng.next_below(4));
    qcore::StateVector s = decoy_state(kind);
    entangle_measure_tap(s, 1, coupling, rng);
    auto [outcome, post] = qcore::measure_qubit(s, 1, decoy_basis(kind), rng);
    const bool error = outcome != decoy_expected(kind);
    if (decoy_basis(kind) == qcore::BasisKind::kZ) {
      ++stats.z_samples;
      if (error) ++stats.z_errors;
    } else {
      ++stats.x_samples;
      if (error) ++stats.x_errors;
    }
  }
  stats.z_rate = stats.z_samples ? static_cast<double>(stats.z_errors) / stats.z_samples : 0.0;
  stats.x_rate = stats.x_samples ? static_cast<double>(stats.x_errors) / stats.x_samples : 0.0;
  return stats;
}

}  // namespace qka::adversary
