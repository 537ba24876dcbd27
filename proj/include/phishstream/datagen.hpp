#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "phishstream/ingest.hpp"

namespace phishstream {

/// Synthetic stream parameters. Node pools are carved out of n_nodes:
/// phishing accounts and their gang collectors, legitimate burst accounts
/// (merchants, token sales) and their group treasuries, a pool of light
/// users who make the deposits into both kinds of burst, and background.
struct GenConfig {
  std::size_t n_nodes = 2000;
  std::size_t n_events = 20000;
  std::size_t n_phishing = 50;
  std::uint64_t seed = 7;
  Timestamp start_time = 1561939200;  // 2019-07-01
  Timestamp end_time = 1561939200 + 150 * 86400;
  std::uint64_t start_block = 8000000;
  double seconds_per_block = 13.0;

  // Background value in ETH ~ LogNormal(mu, sigma).
  double value_log_mu = -1.0;
  double value_log_sigma = 1.8;
  // Pareto shape of per-node background activity; smaller is heavier-tailed.
  double activity_shape = 1.2;
  // Fraction of background accounts that are contracts.
  double contract_fraction = 0.05;

  // Burst motif, shared by phishing and legitimate burst accounts.
  std::size_t burst_size = 6;           // distinct depositors per burst
  Timestamp burst_window = 6 * 3600;    // seconds over which deposits arrive
  std::size_t funnel_count = 2;         // outbound sweeps per burst account
  Timestamp funnel_delay = 1800;        // max delay of a sweep after the preceding deposit
  std::size_t prior_txs = 4;            // ordinary transactions in the week before the first burst
  std::size_t campaigns = 3;            // bursts per account, spread over the span
  double victim_value_log_mu = 0.0;     // ~1 ETH
  double victim_value_log_sigma = 0.5;

  // Phishing gangs share one collector per gang that forwards every sweep
  // to an exchange-like hub within forward_delay seconds.
  std::size_t gang_size = 3;
  std::size_t collectors_per_gang = 1;
  Timestamp forward_delay = 600;

  // Legitimate burst accounts, grouped gang_size to a treasury that holds
  // funds and cashes out once, days later.
  std::size_t n_decoys = 200;
  // Low-activity accounts that make the burst deposits.
  std::size_t n_light_users = 800;
  double light_activity = 0.2;

  void validate() const;
  std::size_t gang_count() const;
  std::size_t treasury_count() const;
  std::size_t reserved_node_count() const;
  std::size_t motif_event_count() const;
};

nlohmann::json to_json(const GenConfig& c);

/// One burst of one phishing account.
struct PlantedPhisher {
  std::string address;
  Timestamp burst_start = 0;
  Timestamp burst_end = 0;
};

struct GeneratedStream {
  std::vector<RawTransaction> records;  // sorted by (timestamp, block, hash)
  LabelSet labels;
  std::vector<PlantedPhisher> phishers;  // one entry per burst
  std::size_t event_count = 0;          // distinct tx hashes
};

/// Deterministic in `config.seed`. Throws InvalidConfig.
GeneratedStream generate_stream(const GenConfig& config);

}  // namespace phishstream
