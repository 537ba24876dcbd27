#include "phishstream/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

namespace phishstream {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string hex_words(std::uint64_t salt, std::size_t hex_chars) {
  std::string out = "0x";
  char buf[17];
  for (std::uint64_t w = 0; out.size() < hex_chars + 2; ++w) {
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(splitmix64(salt + w * 0x632be59bd9b4e019ULL)));
    out += buf;
  }
  out.resize(hex_chars + 2);
  return out;
}

Wei eth_to_wei(double eth) {
  if (!(eth > 0.0)) return 0;
  // Split to keep precision for amounts beyond 2^64 wei (~18.4 ETH).
  const double whole = std::floor(eth);
  const double frac = eth - whole;
  return static_cast<Wei>(whole) * static_cast<Wei>(1000000000000000000ULL) +
         static_cast<Wei>(frac * 1e18);
}

class Builder {
 public:
  Builder(const GenConfig& c) : c_(c), rng_(c.seed) {}

  std::mt19937_64& rng() { return rng_; }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  Timestamp uniform_time(Timestamp lo, Timestamp hi) {
    return std::uniform_int_distribution<Timestamp>(lo, std::max(lo, hi))(rng_);
  }
  double lognormal(double mu, double sigma) {
    return std::lognormal_distribution<double>(mu, sigma)(rng_);
  }

  std::uint64_t block_at(Timestamp t) const {
    return c_.start_block +
           static_cast<std::uint64_t>(static_cast<double>(t - c_.start_time) / c_.seconds_per_block);
  }

  std::string next_hash() { return hex_words(c_.seed * 0x9e37ULL + (hash_counter_++ << 20), 64); }

  RawTransaction transfer(const std::string& from, const std::string& to, Timestamp t, double eth,
                          bool from_contract, bool to_contract) {
    RawTransaction tx;
    tx.sender = from;
    tx.recipient = to;
    tx.value_wei = eth_to_wei(eth);
    if (to_contract || from_contract || uniform(0, 1) < 0.15) {
      tx.gas_limit = std::uniform_int_distribution<std::uint64_t>(50000, 300000)(rng_);
      tx.gas_used = static_cast<std::uint64_t>(static_cast<double>(tx.gas_limit) * uniform(0.4, 1.0));
    } else {
      tx.gas_limit = 21000;
      tx.gas_used = 21000;
    }
    const double gwei = lognormal(std::log(10.0), 0.6);
    tx.gas_price = static_cast<std::uint64_t>(gwei * 1e9);
    tx.tx_hash = next_hash();
    tx.timestamp = t;
    tx.block_number = block_at(t);
    tx.sender_is_contract = from_contract;
    tx.recipient_is_contract = to_contract;
    return tx;
  }

 private:
  const GenConfig& c_;
  std::mt19937_64 rng_;
  std::uint64_t hash_counter_ = 0;
};

}  // namespace

namespace {
constexpr Timestamp kPriorWindow = 7 * 86400;
constexpr Timestamp kTreasuryHold = 3 * 86400;
}  // namespace

void GenConfig::validate() const {
  if (n_nodes == 0 || n_events == 0) throw InvalidConfig("n_nodes and n_events must be positive");
  if (n_phishing >= n_nodes) throw InvalidConfig("n_phishing must be smaller than n_nodes");
  if (n_events < n_nodes) throw InvalidConfig("n_events must be at least n_nodes");
  if (end_time <= start_time) throw InvalidConfig("end_time must follow start_time");
  if (!(seconds_per_block > 0) || !(value_log_sigma > 0) || !(activity_shape > 0) ||
      !(victim_value_log_sigma > 0) || !(light_activity > 0)) {
    throw InvalidConfig("rates and spreads must be positive");
  }
  if (contract_fraction < 0 || contract_fraction >= 1) {
    throw InvalidConfig("contract_fraction must lie in [0, 1)");
  }
  if (n_phishing + n_decoys > 0) {
    if (burst_size == 0 || funnel_count == 0 || gang_size == 0 || collectors_per_gang == 0 ||
        campaigns == 0 || burst_window <= 0 || funnel_delay <= 0 || forward_delay <= 0) {
      throw InvalidConfig("burst motif parameters must be positive");
    }
    if (funnel_count > burst_size) throw InvalidConfig("funnel_count cannot exceed burst_size");
    if (n_light_users < burst_size) {
      throw InvalidConfig("n_light_users must be at least burst_size");
    }
  }
  if (reserved_node_count() + 2 > n_nodes) {
    throw InvalidConfig("n_nodes too small for the planted motifs (" +
                        std::to_string(reserved_node_count()) + " motif accounts)");
  }
  if (motif_event_count() >= n_events) {
    throw InvalidConfig("n_events too small for the planted motifs");
  }
  const Timestamp needed = kPriorWindow + static_cast<Timestamp>(gang_size) * burst_window +
                           2 * funnel_delay + forward_delay + kTreasuryHold;
  if (n_phishing + n_decoys > 0 && needed >= end_time - start_time) {
    throw InvalidConfig("time span too short for the bursts");
  }
}

std::size_t GenConfig::gang_count() const {
  return n_phishing == 0 ? 0 : (n_phishing + gang_size - 1) / gang_size;
}

std::size_t GenConfig::treasury_count() const {
  return n_decoys == 0 ? 0 : (n_decoys + gang_size - 1) / gang_size;
}

std::size_t GenConfig::reserved_node_count() const {
  return n_phishing + gang_count() * collectors_per_gang + n_decoys + treasury_count() +
         n_light_users;
}

std::size_t GenConfig::motif_event_count() const {
  const auto burst_events = burst_size + funnel_count;
  return n_phishing * (prior_txs + campaigns * (burst_events + funnel_count)) +
         n_decoys * (prior_txs + campaigns * burst_events) + treasury_count() * campaigns;
}

nlohmann::json to_json(const GenConfig& c) {
  return {{"n_nodes", c.n_nodes},
          {"n_events", c.n_events},
          {"n_phishing", c.n_phishing},
          {"seed", c.seed},
          {"start_time", c.start_time},
          {"end_time", c.end_time},
          {"start_block", c.start_block},
          {"seconds_per_block", c.seconds_per_block},
          {"value_log_mu", c.value_log_mu},
          {"value_log_sigma", c.value_log_sigma},
          {"activity_shape", c.activity_shape},
          {"contract_fraction", c.contract_fraction},
          {"burst_size", c.burst_size},
          {"burst_window", c.burst_window},
          {"funnel_count", c.funnel_count},
          {"funnel_delay", c.funnel_delay},
          {"prior_txs", c.prior_txs},
          {"campaigns", c.campaigns},
          {"victim_value_log_mu", c.victim_value_log_mu},
          {"victim_value_log_sigma", c.victim_value_log_sigma},
          {"gang_size", c.gang_size},
          {"collectors_per_gang", c.collectors_per_gang},
          {"forward_delay", c.forward_delay},
          {"n_decoys", c.n_decoys},
          {"n_light_users", c.n_light_users},
          {"light_activity", c.light_activity}};
}

GeneratedStream generate_stream(const GenConfig& config) {
  config.validate();
  Builder b(config);
  auto& rng = b.rng();

  // Addresses are unique by construction: splitmix64 is a bijection.
  std::vector<std::string> address(config.n_nodes);
  for (std::size_t i = 0; i < config.n_nodes; ++i) {
    address[i] = hex_words(splitmix64(config.seed) ^ (static_cast<std::uint64_t>(i) << 24), 40);
  }
  std::vector<std::size_t> order(config.n_nodes);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::size_t cursor = 0;
  const auto take = [&](std::size_t n) {
    std::vector<std::size_t> out(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                                 order.begin() + static_cast<std::ptrdiff_t>(cursor + n));
    cursor += n;
    return out;
  };
  const auto phishers = take(config.n_phishing);
  const auto collectors = take(config.gang_count() * config.collectors_per_gang);
  const auto decoys = take(config.n_decoys);
  const auto treasuries = take(config.treasury_count());
  const auto light = take(config.n_light_users);
  const auto background = take(config.n_nodes - cursor);

  // Background traffic runs over background accounts and light users.
  std::vector<std::size_t> population = background;
  population.insert(population.end(), light.begin(), light.end());
  std::vector<bool> is_contract(config.n_nodes, false);
  std::vector<double> activity(population.size());
  {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < background.size(); ++i) {
      activity[i] = std::pow(1.0 - u(rng), -1.0 / config.activity_shape);  // Pareto(1, shape)
      is_contract[background[i]] = u(rng) < config.contract_fraction;
    }
    for (std::size_t i = background.size(); i < population.size(); ++i) {
      activity[i] = config.light_activity;
    }
  }
  std::discrete_distribution<std::size_t> pick(activity.begin(), activity.end());
  std::vector<std::size_t> by_activity(background.size());
  std::iota(by_activity.begin(), by_activity.end(), 0);
  std::sort(by_activity.begin(), by_activity.end(),
            [&](std::size_t a, std::size_t b) { return activity[a] > activity[b]; });
  // Exchange-like hubs: the most active background accounts.
  const auto hub = [&](std::size_t i) {
    return background[by_activity[i % std::min<std::size_t>(5, by_activity.size())]];
  };

  GeneratedStream out;
  auto& records = out.records;
  const auto addr = [&](std::size_t node) -> const std::string& { return address[node]; };

  // Background traffic: exponential inter-arrival times rescaled onto the span.
  const auto n_background = config.n_events - config.motif_event_count();
  {
    std::exponential_distribution<double> gap(1.0);
    std::vector<double> cumulative(n_background);
    double acc = 0.0;
    for (auto& c : cumulative) c = (acc += gap(rng));
    acc += gap(rng);
    const double span = static_cast<double>(config.end_time - config.start_time);
    for (double c : cumulative) {
      const auto t = config.start_time + static_cast<Timestamp>(c / acc * span);
      const auto s = population[pick(rng)];
      auto r = population[pick(rng)];
      while (r == s && population.size() > 1) r = population[pick(rng)];
      const double eth = b.lognormal(config.value_log_mu, config.value_log_sigma);
      auto tx = b.transfer(addr(s), addr(r), t, eth, is_contract[s], is_contract[r]);
      records.push_back(tx);
      // Calls into contracts fan out into internal records under the same hash.
      if (is_contract[r]) {
        const auto internal = std::uniform_int_distribution<int>(0, 3)(rng);
        for (int k = 0; k < internal; ++k) {
          auto inner = tx;
          inner.sender = addr(r);
          inner.sender_is_contract = true;
          const auto target = background[pick(rng) % background.size()];
          inner.recipient = addr(target);
          inner.recipient_is_contract = is_contract[target];
          inner.value_wei = tx.value_wei / static_cast<Wei>(internal + 1);
          records.push_back(std::move(inner));
        }
      }
    }
  }

  // Optional ordinary activity in the week before a burst, then deposits from
  // distinct light users, swept out to `sinks` after every
  // burst_size / funnel_count deposits. Calls on_sweep(sink, time, eth).
  const auto run_burst = [&](std::size_t account, Timestamp start, bool prior,
                             std::span<const std::size_t> sinks, auto&& on_sweep) {
    for (std::size_t i = 0; prior && i < config.prior_txs; ++i) {
      const auto other = background[pick(rng) % background.size()];
      const Timestamp t = b.uniform_time(start - kPriorWindow, start - 1);
      const double eth = b.lognormal(config.value_log_mu, config.value_log_sigma);
      records.push_back(i % 2 == 0
                            ? b.transfer(addr(other), addr(account), t, eth, is_contract[other], false)
                            : b.transfer(addr(account), addr(other), t, eth, false, is_contract[other]));
    }
    std::vector<std::size_t> depositors(light);
    std::vector<std::size_t> chosen;
    std::sample(depositors.begin(), depositors.end(), std::back_inserter(chosen), config.burst_size,
                rng);
    std::shuffle(chosen.begin(), chosen.end(), rng);

    const Timestamp end = start + config.burst_window;
    std::vector<Timestamp> arrivals(config.burst_size);
    for (auto& t : arrivals) t = b.uniform_time(start, end);
    std::sort(arrivals.begin(), arrivals.end());
    double pending = 0.0;
    std::size_t sweeps = 0;
    Timestamp done = start;
    for (std::size_t v = 0; v < config.burst_size; ++v) {
      const double eth = b.lognormal(config.victim_value_log_mu, config.victim_value_log_sigma);
      pending += eth;
      records.push_back(b.transfer(addr(chosen[v]), addr(account), arrivals[v], eth, false, false));
      const auto due = (v + 1) * config.funnel_count / config.burst_size;
      while (sweeps < due) {
        const auto sink = sinks[static_cast<std::size_t>(
            b.uniform_time(0, static_cast<Timestamp>(sinks.size()) - 1))];
        const Timestamp t = arrivals[v] + b.uniform_time(1, config.funnel_delay);
        const double swept = pending * 0.995;
        records.push_back(b.transfer(addr(account), addr(sink), t, swept, false, false));
        on_sweep(sink, t, swept);
        done = std::max(done, t);
        pending = 0.0;
        ++sweeps;
      }
    }
    return done;
  };

  const Timestamp half_window = config.burst_window / 2;
  const auto group_span = [&](std::size_t members) {
    return static_cast<Timestamp>(members) * half_window + config.burst_window +
           2 * config.funnel_delay;
  };

  // Groups are spread evenly over the span: group i of n starts at a random
  // point of the i-th of n equal slots.
  const auto slot_start = [&](std::size_t i, std::size_t n, Timestamp tail) {
    const Timestamp lo = config.start_time + kPriorWindow;
    const Timestamp span = config.end_time - tail - lo;
    const Timestamp a = lo + span * static_cast<Timestamp>(i) / static_cast<Timestamp>(n);
    const Timestamp z = lo + span * static_cast<Timestamp>(i + 1) / static_cast<Timestamp>(n);
    return b.uniform_time(a, std::max(a, z - 1));
  };

  // Phishing gangs: staggered, overlapping bursts sweeping into shared
  // collectors that forward each sweep to a hub at once. Campaign c of
  // group g occupies slot c * groups + g.
  const auto gangs = config.gang_count();
  for (std::size_t c = 0; c < config.campaigns; ++c) {
    for (std::size_t g = 0; g < gangs; ++g) {
      const auto first = g * config.gang_size;
      const auto last = std::min(config.n_phishing, first + config.gang_size);
      const Timestamp gang_start = slot_start(c * gangs + g, config.campaigns * gangs,
                                              group_span(last - first) + config.forward_delay);
      const std::span<const std::size_t> sinks(&collectors[g * config.collectors_per_gang],
                                               config.collectors_per_gang);
      for (std::size_t p = first; p < last; ++p) {
        const Timestamp bs = gang_start + static_cast<Timestamp>(p - first) * half_window;
        run_burst(phishers[p], bs, c == 0, sinks, [&](std::size_t sink, Timestamp t, double eth) {
          const Timestamp ft = t + b.uniform_time(1, config.forward_delay);
          const auto to = hub(g);
          records.push_back(
              b.transfer(addr(sink), addr(to), ft, eth * 0.99, false, is_contract[to]));
        });
        out.phishers.push_back({addr(phishers[p]), bs, bs + config.burst_window});
      }
    }
  }

  // Legitimate burst accounts: same shape, the treasury holds and cashes
  // out days after each campaign.
  const auto groups = config.treasury_count();
  for (std::size_t c = 0; c < config.campaigns; ++c) {
    for (std::size_t g = 0; g < groups; ++g) {
      const auto first = g * config.gang_size;
      const auto last = std::min(config.n_decoys, first + config.gang_size);
      const Timestamp group_start = slot_start(c * groups + g, config.campaigns * groups,
                                               group_span(last - first) + kTreasuryHold);
      const std::span<const std::size_t> sink(&treasuries[g], 1);
      double held = 0.0;
      Timestamp done = group_start;
      for (std::size_t d = first; d < last; ++d) {
        const Timestamp bs = group_start + static_cast<Timestamp>(d - first) * half_window;
        done = std::max(done, run_burst(decoys[d], bs, c == 0, sink,
                                        [&](std::size_t, Timestamp, double eth) { held += eth; }));
      }
      const Timestamp t = done + b.uniform_time(kTreasuryHold / 3, kTreasuryHold);
      const auto to = hub(g);
      records.push_back(b.transfer(addr(treasuries[g]), addr(to), t, held * 0.99, false,
                                   is_contract[to]));
    }
  }

  std::stable_sort(records.begin(), records.end(),
                   [](const RawTransaction& a, const RawTransaction& b) {
                     if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                     if (a.block_number != b.block_number) return a.block_number < b.block_number;
                     return a.tx_hash < b.tx_hash;
                   });

  std::vector<bool> phishing(config.n_nodes, false);
  for (auto p : phishers) phishing[p] = true;
  for (std::size_t i = 0; i < config.n_nodes; ++i) {
    out.labels.add(address[i], phishing[i] ? Label::kPhishing : Label::kNonPhishing);
  }
  out.event_count = config.n_events;
  return out;
}

}  // namespace phishstream
