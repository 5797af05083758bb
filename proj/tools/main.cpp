// qka-sim: drive the key-agreement protocol from the command line.
//
// Exit codes are a contract relied on by the test suite:
//   0  success (key recovered / report produced)
//   1  usage or configuration error
//   2  protocol abort (attack detected)
//   3  selftest failure

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qka/adversary.hpp"
#include "qka/cluster.hpp"
#include "qka/efficiency.hpp"
#include "qka/protocol.hpp"
#include "qka/selftest.hpp"

namespace {

using qka::protocol::ProtocolConfig;
using json = nlohmann::ordered_json;

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty())
    throw std::invalid_argument(what + " wants an unsigned integer, got '" + text + "'");
  return v;
}

struct ConfigFlags {
  std::string config_path;
  std::string seed_text;
  int n = -1, m = -1, l_verify = -1, decoys = -1;
  double threshold = -1.0;
  std::string pivot_text;
  std::string keys_text;

  void add_to(CLI::App* cmd, bool with_keys) {
    cmd->add_option("--config", config_path, "JSON config file; flags override its fields");
    cmd->add_option("--seed", seed_text, "run seed (precedence: flag, config, QKA_SIM_SEED, 0)");
    cmd->add_option("--n", n, "participant count (odd, >= 3)");
    cmd->add_option("--m", m, "key chunks per participant");
    cmd->add_option("--l-verify", l_verify, "verification positions");
    cmd->add_option("--decoys", decoys, "decoys per padded subsequence");
    cmd->add_option("--threshold", threshold, "decoy error rate tolerated before aborting");
    cmd->add_option("--pivot", pivot_text, "pivot participant (1..n) or 'random'");
    if (with_keys)
      cmd->add_option("--keys", keys_text,
                      "fixed keys, one per participant, e.g. '10,11,10;00,01,01;...'");
  }

  ProtocolConfig resolve() const {
    ProtocolConfig cfg;
    bool config_has_seed = false;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::invalid_argument("cannot open config file " + config_path);
      json j = json::parse(in);
      config_has_seed = j.contains("seed");
      cfg = ProtocolConfig::from_json(j);
    }
    if (n >= 0) cfg.n = n;
    if (m >= 0) cfg.m = m;
    if (l_verify >= 0) cfg.l_verify = l_verify;
    else if (m >= 0 && config_path.empty()) cfg.l_verify = m;
    if (decoys >= 0) cfg.decoys_per_transfer = decoys;
    if (threshold >= 0.0) cfg.error_threshold = threshold;
    if (!pivot_text.empty()) {
      if (pivot_text == "random")
        cfg.pivot.reset();
      else
        cfg.pivot = static_cast<int>(parse_u64(pivot_text, "--pivot"));
    }
    if (!keys_text.empty()) {
      std::vector<qka::hashmod::KeyString> keys;
      std::stringstream ss(keys_text);
      std::string part;
      while (std::getline(ss, part, ';')) keys.push_back(qka::hashmod::KeyString::parse(part));
      cfg.fixed_keys = std::move(keys);
    }
    if (!seed_text.empty()) {
      cfg.seed = parse_u64(seed_text, "--seed");
    } else if (!config_has_seed) {
      if (const char* env = std::getenv("QKA_SIM_SEED"))
        cfg.seed = parse_u64(env, "QKA_SIM_SEED");
      else
        cfg.seed = 0;
    }
    cfg.validate();
    return cfg;
  }
};

int cmd_run(const ConfigFlags& flags, const std::string& attack_spec, const std::string& out_path,
            bool as_json, bool with_timings) {
  const ProtocolConfig cfg = flags.resolve();
  std::unique_ptr<qka::protocol::Adversary> adversary;
  std::string attack_label;
  if (!attack_spec.empty()) {
    const auto attack = qka::adversary::parse_attack_spec(attack_spec);
    attack_label = qka::adversary::attack_name(attack);
    adversary = qka::adversary::make_adversary(attack);
  }

  qka::RngStream rng(cfg.seed);
  qka::protocol::ProtocolEngine engine(cfg, adversary.get(), rng);
  struct Step {
    const char* name;
    bool (qka::protocol::ProtocolEngine::*fn)();
  };
  const Step steps[] = {
      {"preparation", &qka::protocol::ProtocolEngine::phase_preparation},
      {"distributor-preparation", &qka::protocol::ProtocolEngine::phase_distributor_preparation},
      {"identity-verification", &qka::protocol::ProtocolEngine::phase_identity_verification},
      {"chain", &qka::protocol::ProtocolEngine::phase_participant_chain},
      {"measurement", &qka::protocol::ProtocolEngine::phase_measurement},
      {"tdc-verification", &qka::protocol::ProtocolEngine::phase_tdc},
  };
  std::vector<std::pair<std::string, double>> timings;
  for (const Step& step : steps) {
    const auto t0 = std::chrono::steady_clock::now();
    (engine.*step.fn)();
    const auto t1 = std::chrono::steady_clock::now();
    timings.emplace_back(step.name, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  const qka::protocol::Transcript tr = engine.take_transcript();

  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write transcript to " + out_path);
    out << tr.to_json_string();
  }

  if (as_json) {
    std::cout << tr.to_json_string();
  } else {
    if (!attack_label.empty()) std::cout << "adversary: " << attack_label << "\n";
    if (tr.aborted()) {
      std::cout << "outcome: aborted in " << tr.abort->phase << " (" << tr.abort->check << ")\n";
      std::cout << "offender: "
                << (tr.abort->offender == qka::protocol::kNobody
                        ? "unknown"
                        : qka::protocol::party_name(tr.abort->offender))
                << "\n";
      std::cout << "detail: " << tr.abort->detail << "\n";
    } else {
      std::cout << "outcome: key recovered\n";
      std::cout << "s = " << tr.shared_key->to_chunked_string() << "\n";
    }
    if (with_timings)
      for (const auto& [name, ms] : timings)
        std::cout << "timing " << name << ": " << ms << " ms\n";
    if (!out_path.empty()) std::cout << "transcript: " << out_path << "\n";
  }
  return tr.aborted() ? 2 : 0;
}

int cmd_verify_table(bool as_json) {
  const auto rows = qka::cluster::compare_reference_table();
  int agreements = 0;
  for (const auto& row : rows) agreements += row.agree ? 1 : 0;

  if (as_json) {
    json out;
    out["rows"] = json::array();
    for (const auto& row : rows) {
      json r;
      r["k_b"] = std::to_string(row.kb.b1) + std::to_string(row.kb.b2);
      r["k_d"] = std::to_string(row.kd.b1) + std::to_string(row.kd.b2);
      r["derived"] = row.derived_index;
      r["reference"] = row.reference_index;
      r["agree"] = row.agree;
      out["rows"].push_back(std::move(r));
    }
    out["agreements"] = agreements;
    std::cout << out.dump(2) << "\n";
    return 0;
  }

  std::cout << "K_B K_D  derived  reference  verdict\n";
  for (const auto& row : rows) {
    std::ostringstream line;
    line << " " << row.kb.b1 << row.kb.b2 << "  " << row.kd.b1 << row.kd.b2 << "   C"
         << row.derived_index;
    std::string s = line.str();
    s.resize(22, ' ');
    std::cout << s << "C" << row.reference_index << (row.reference_index < 10 ? " " : "")
              << "        " << (row.agree ? "AGREE" : "DISAGREE") << "\n";
  }
  std::cout << agreements << "/16 rows agree with the reference table; the derived codebook "
            << "follows the state list on the remaining rows.\n";
  return 0;
}

int cmd_attack(const ConfigFlags& flags, const std::string& spec, int trials,
               bool as_text) {
  if (trials < 1000) throw std::invalid_argument("--trials must be at least 1000");
  const ProtocolConfig cfg = flags.resolve();
  const auto attack = qka::adversary::parse_attack_spec(spec);

  if (const auto* col = std::get_if<qka::adversary::EndpointCollusion>(&attack)) {
    const auto report = qka::adversary::collusion_run(cfg, trials, cfg.seed, col->measure);
    if (as_text)
      std::cout << report.to_text();
    else
      std::cout << report.to_json().dump(2) << "\n";
    return 0;
  }

  const auto report = qka::adversary::estimate_detection(cfg, attack, trials, cfg.seed);
  if (as_text)
    std::cout << report.to_text();
  else
    std::cout << report.to_json().dump(2) << "\n";
  return 0;
}

int cmd_efficiency(int n, int m, int l_verify, bool as_json) {
  const auto result =
      qka::efficiency::compute(n, m, l_verify >= 0 ? std::optional<int>(l_verify) : std::nullopt);
  if (as_json)
    std::cout << result.to_json().dump(2) << "\n";
  else
    std::cout << result.to_text();
  return 0;
}

int cmd_selftest(const std::string& inject) {
  const auto results = qka::selftest::run_selftest(inject);
  bool all = true;
  for (const auto& check : results) {
    if (check.pass) {
      std::cout << "ok   " << check.name << "\n";
    } else {
      std::cout << "FAIL " << check.name << ": " << check.detail << "\n";
      all = false;
    }
  }
  return all ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"six-qubit cluster-state key agreement simulator"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  std::string run_attack, run_out = "qka-transcript.json";
  bool run_json = false, run_timings = false;
  CLI::App* run = app.add_subcommand("run", "run the protocol once and write a transcript");
  run_flags.add_to(run, true);
  run->add_option("--adversary,--attack", run_attack, "attack spec, e.g. intercept-resend:transfer=0");
  run->add_option("--out", run_out, "transcript output path ('' to skip)");
  run->add_flag("--json", run_json, "print the transcript JSON to stdout");
  run->add_flag("--timings", run_timings, "print per-phase wall times (text output only)");

  bool table_json = false;
  CLI::App* table = app.add_subcommand("verify-table", "print the derived codebook against the reference table");
  table->add_flag("--json", table_json, "emit JSON");

  ConfigFlags attack_flags;
  std::string attack_spec;
  int attack_trials = 10000;
  bool attack_text = false;
  CLI::App* attack = app.add_subcommand("attack", "Monte Carlo detection estimate for an attack");
  attack->add_option("spec", attack_spec, "attack spec, e.g. intercept-resend or entangle-measure:theta=0.5")
      ->required();
  attack_flags.add_to(attack, false);
  attack->add_option("--trials", attack_trials, "trial count (>= 1000)");
  attack->add_flag("--text", attack_text, "human-readable report instead of JSON");

  int eff_n = 0, eff_m = 1, eff_l = -1;
  bool eff_json = false;
  CLI::App* eff = app.add_subcommand("efficiency", "key bits per channel bit for a configuration");
  eff->add_option("--n", eff_n, "participant count")->required();
  eff->add_option("--m", eff_m, "key chunks");
  eff->add_option("--l-verify", eff_l, "verification positions (default m)");
  eff->add_flag("--json", eff_json, "emit JSON");

  std::string inject;
  CLI::App* selftest = app.add_subcommand("selftest", "run the embedded sanity checks");
  selftest->add_option("--inject-fault", inject,
                       "deliberately break the named check (harness test hook)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (run->parsed()) return cmd_run(run_flags, run_attack, run_out, run_json, run_timings);
    if (table->parsed()) return cmd_verify_table(table_json);
    if (attack->parsed()) return cmd_attack(attack_flags, attack_spec, attack_trials, attack_text);
    if (eff->parsed()) return cmd_efficiency(eff_n, eff_m, eff_l, eff_json);
    if (selftest->parsed()) return cmd_selftest(inject);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
