#include <set>
#include <stdexcept>

#include "qka/protocol.hpp"

namespace qka::protocol {

namespace {

const std::set<std::string>& known_message_kinds() {
  static const std::set<std::string> kinds = {
      "tdc_submission", "subsequence_transfer", "receipt_confirm", "decoy_reveal",
      "decoy_results",  "verify_seed_share",    "verify_spec",     "verify_announce",
      "key_announce",   "abort",
  };
  return kinds;
}

void reject_unknown_fields(const json& j, const std::set<std::string>& allowed,
                           const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("unknown field '" + it.key() + "' in " + where);
}

int parse_party(const json& j, const std::string& where) {
  if (!j.is_string()) throw std::invalid_argument(where + " must be a party name");
  const std::string s = j.get<std::string>();
  if (s == "distributor") return kDistributor;
  if (s == "TDC") return kTdc;
  if (s == "all") return kNobody;
  if (s.size() >= 2 && s[0] == 'P') {
    try {
      return std::stoi(s.substr(1));
    } catch (const std::exception&) {
    }
  }
  throw std::invalid_argument("bad party name '" + s + "' in " + where);
}

}  // namespace

std::string party_name(int party) {
  if (party == kDistributor) return "distributor";
  if (party == kTdc) return "TDC";
  if (party == kNobody) return "all";
  return "P" + std::to_string(party);
}

void ProtocolConfig::validate() const {
  if (n < 3 || n % 2 == 0) throw std::invalid_argument("n must be odd and >= 3");
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  if (l_verify < 1) throw std::invalid_argument("l_verify must be >= 1");
  if (decoys_per_transfer < 0) throw std::invalid_argument("decoys_per_transfer must be >= 0");
  if (error_threshold < 0.0 || error_threshold >= 1.0)
    throw std::invalid_argument("error_threshold must be in [0, 1)");
  if (pivot && (*pivot < 1 || *pivot > n))
    throw std::invalid_argument("pivot must name one of P1..P" + std::to_string(n));
  if (hash.mode == hashmod::HashMode::kXorLinear) {
    if (hash.digest_bits < 1 || hash.digest_bits > 64)
      throw std::invalid_argument("digest_bits must be 1..64");
  } else {
    if (!hashmod::is_prime_u64(hash.hash_modulus))
      throw std::invalid_argument("hash_modulus must be prime");
    if (hash.generator < 2) throw std::invalid_argument("generator must be >= 2");
  }
  if (fixed_keys) {
    if (static_cast<int>(fixed_keys->size()) != n)
      throw std::invalid_argument("fixed keys must list one key per participant");
    for (const auto& k : *fixed_keys)
      if (k.num_chunks() != m)
        throw std::invalid_argument("fixed keys must have m chunks each");
  }
}

json ProtocolConfig::to_json() const {
  json j;
  j["n"] = n;
  j["m"] = m;
  j["l_verify"] = l_verify;
  if (pivot)
    j["pivot"] = *pivot;
  else
    j["pivot"] = "random";
  j["decoys_per_transfer"] = decoys_per_transfer;
  j["error_threshold"] = error_threshold;
  json h;
  if (hash.mode == hashmod::HashMode::kXorLinear) {
    h["mode"] = "xor-linear";
    h["digest_bits"] = hash.digest_bits;
  } else {
    h["mode"] = "modexp";
    h["generator"] = hash.generator;
    h["hash_modulus"] = hash.hash_modulus;
  }
  j["hash"] = h;
  j["seed"] = seed;
  if (fixed_keys) {
    json keys = json::array();
    for (const auto& k : *fixed_keys) keys.push_back(k.to_chunked_string());
    j["keys"] = keys;
  }
  return j;
}

ProtocolConfig ProtocolConfig::from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  reject_unknown_fields(j,
                        {"n", "m", "l_verify", "pivot", "decoys_per_transfer",
                         "error_threshold", "hash", "seed", "keys"},
                        "config");
  ProtocolConfig c;
  if (j.contains("n")) c.n = j.at("n").get<int>();
  if (j.contains("m")) c.m = j.at("m").get<int>();
  c.l_verify = c.m;  // default tracks m unless given explicitly
  if (j.contains("l_verify")) c.l_verify = j.at("l_verify").get<int>();
  if (j.contains("pivot")) {
    const auto& p = j.at("pivot");
    if (p.is_string()) {
      if (p.get<std::string>() != "random")
        throw std::invalid_argument("pivot must be an integer or \"random\"");
      c.pivot = std::nullopt;
    } else {
      c.pivot = p.get<int>();
    }
  }
  if (j.contains("decoys_per_transfer"))
    c.decoys_per_transfer = j.at("decoys_per_transfer").get<int>();
  if (j.contains("error_threshold")) c.error_threshold = j.at("error_threshold").get<double>();
  if (j.contains("hash")) {
    const json& h = j.at("hash");
    reject_unknown_fields(h, {"mode", "digest_bits", "generator", "hash_modulus"}, "config.hash");
    const std::string mode = h.value("mode", "xor-linear");
    if (mode == "xor-linear") {
      c.hash.mode = hashmod::HashMode::kXorLinear;
      if (h.contains("generator") || h.contains("hash_modulus"))
        throw std::invalid_argument("generator/hash_modulus only apply to modexp mode");
      if (h.contains("digest_bits")) c.hash.digest_bits = h.at("digest_bits").get<int>();
    } else if (mode == "modexp") {
      c.hash.mode = hashmod::HashMode::kModExp;
      if (h.contains("digest_bits"))
        throw std::invalid_argument("digest_bits only applies to xor-linear mode");
      if (h.contains("generator")) c.hash.generator = h.at("generator").get<std::uint64_t>();
      if (h.contains("hash_modulus"))
        c.hash.hash_modulus = h.at("hash_modulus").get<std::uint64_t>();
    } else {
      throw std::invalid_argument("hash.mode must be 'xor-linear' or 'modexp'");
    }
  }
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("keys")) {
    std::vector<hashmod::KeyString> keys;
    for (const auto& k : j.at("keys")) keys.push_back(hashmod::KeyString::parse(k.get<std::string>()));
    c.fixed_keys = std::move(keys);
  }
  c.validate();
  return c;
}

int VerificationReport::first_failing() const {
  if (!eq1) return 1;
  if (!eq2) return 2;
  if (!eq3) return 3;
  if (!eq4) return 4;
  if (!eq5) return 5;
  return 0;
}

json Transcript::to_json() const {
  json j;
  j["config"] = config;
  json msgs = json::array();
  for (const auto& msg : messages) {
    json mj;
    mj["seq"] = msg.seq;
    mj["kind"] = msg.kind;
    mj["channel"] = msg.channel == Channel::kBroadcast ? "broadcast" : "secure";
    mj["from"] = party_name(msg.from);
    mj["to"] = msg.channel == Channel::kBroadcast ? "all" : party_name(msg.to);
    mj["payload"] = msg.payload;
    msgs.push_back(std::move(mj));
  }
  j["messages"] = std::move(msgs);
  j["phases"] = phases;
  json result;
  if (abort) {
    result["outcome"] = "aborted";
    result["phase"] = abort->phase;
    result["check"] = abort->check;
    if (abort->offender == kNobody)
      result["offender"] = nullptr;
    else
      result["offender"] = party_name(abort->offender);
    result["detail"] = abort->detail;
  } else {
    result["outcome"] = "key-recovered";
    result["shared_key"] = shared_key ? shared_key->to_chunked_string() : "";
  }
  j["result"] = std::move(result);
  return j;
}

std::string Transcript::to_json_string() const { return to_json().dump(2) + "\n"; }

Transcript Transcript::from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("transcript must be a JSON object");
  reject_unknown_fields(j, {"config", "messages", "phases", "result"}, "transcript");
  for (const char* field : {"config", "messages", "phases", "result"})
    if (!j.contains(field))
      throw std::invalid_argument(std::string("transcript missing '") + field + "'");

  Transcript t;
  t.config = j.at("config");
  ProtocolConfig::from_json(t.config);  // must itself be a valid config

  if (!j.at("messages").is_array()) throw std::invalid_argument("messages must be an array");
  int expect_seq = 0;
  for (const auto& mj : j.at("messages")) {
    reject_unknown_fields(mj, {"seq", "kind", "channel", "from", "to", "payload"}, "message");
    Message m;
    m.seq = mj.at("seq").get<int>();
    if (m.seq != expect_seq++)
      throw std::invalid_argument("message sequence numbers must be consecutive from 0");
    m.kind = mj.at("kind").get<std::string>();
    if (!known_message_kinds().count(m.kind))
      throw std::invalid_argument("unknown message kind '" + m.kind + "'");
    const std::string ch = mj.at("channel").get<std::string>();
    if (ch == "broadcast")
      m.channel = Channel::kBroadcast;
    else if (ch == "secure")
      m.channel = Channel::kSecure;
    else
      throw std::invalid_argument("bad channel '" + ch + "'");
    m.from = parse_party(mj.at("from"), "message.from");
    m.to = parse_party(mj.at("to"), "message.to");
    if (!mj.at("payload").is_object()) throw std::invalid_argument("payload must be an object");
    m.payload = mj.at("payload");
    t.messages.push_back(std::move(m));
  }

  if (!j.at("phases").is_array()) throw std::invalid_argument("phases must be an array");
  for (const auto& p : j.at("phases"))
    if (!p.is_object() || !p.contains("phase"))
      throw std::invalid_argument("each phase record needs a 'phase' tag");
  t.phases = j.at("phases");

  const json& result = j.at("result");
  const std::string outcome = result.at("outcome").get<std::string>();
  if (outcome == "key-recovered") {
    reject_unknown_fields(result, {"outcome", "shared_key"}, "result");
    t.shared_key = hashmod::KeyString::parse(result.at("shared_key").get<std::string>());
  } else if (outcome == "aborted") {
    reject_unknown_fields(result, {"outcome", "phase", "check", "offender", "detail"}, "result");
    AbortInfo a;
    a.phase = result.at("phase").get<std::string>();
    a.check = result.at("check").get<std::string>();
    a.offender = result.at("offender").is_null() ? kNobody : parse_party(result.at("offender"), "offender");
    a.detail = result.at("detail").get<std::string>();
    t.abort = std::move(a);
  } else {
    throw std::invalid_argument("result outcome must be 'key-recovered' or 'aborted'");
  }
  return t;
}

}  // namespace qka::protocol
