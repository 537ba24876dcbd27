#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "phishstream/ingest.hpp"

using namespace phishstream;

namespace {

std::string hash_of(int n) {
  std::ostringstream s;
  s << "0x" << std::string(64 - std::to_string(n).size(), '0') << n;
  return s.str();
}

std::string addr_of(int n) {
  std::string digits = std::to_string(n);
  return "0x" + std::string(40 - digits.size(), 'a') + digits;
}

RawTransaction tx(int from, int to, Timestamp t, std::uint64_t block, int hash,
                  bool sender_contract = false) {
  RawTransaction r;
  r.sender = addr_of(from);
  r.recipient = addr_of(to);
  r.value_wei = 1000;
  r.gas_limit = 21000;
  r.gas_used = 21000;
  r.gas_price = 1000000000;
  r.tx_hash = hash_of(hash);
  r.timestamp = t;
  r.block_number = block;
  r.sender_is_contract = sender_contract;
  return r;
}

const std::string kLine =
    "0xAbCd000000000000000000000000000000000001,0x00000000000000000000000000000000000000ff,"
    "1000000000000000000,21000,21000,2000000000,"
    "0x00000000000000000000000000000000000000000000000000000000000000aa,1561939200,8000000,"
    "false,TRUE";

}  // namespace

TEST_CASE("value of 10^18 wei parses exactly") {
  const auto r = parse_raw_record(kLine, RecordSchema::canonical());
  CHECK(r.value_wei == static_cast<Wei>(1000000000000000000ULL));
  CHECK(wei_to_string(r.value_wei) == "1000000000000000000");
}

TEST_CASE("addresses are lowercased and booleans parse case-insensitively") {
  const auto r = parse_raw_record(kLine, RecordSchema::canonical());
  CHECK(r.sender == "0xabcd000000000000000000000000000000000001");
  CHECK_FALSE(r.sender_is_contract);
  CHECK(r.recipient_is_contract);
  for (std::string b : {"0", "1", "true", "false", "True", "FALSE"}) {
    std::string line = kLine.substr(0, kLine.rfind(',') + 1) + b;
    CHECK_NOTHROW(parse_raw_record(line, RecordSchema::canonical()));
  }
  CHECK_THROWS_AS(parse_raw_record(kLine.substr(0, kLine.rfind(',') + 1) + "yes",
                                   RecordSchema::canonical()),
                  MalformedRecord);
}

TEST_CASE("gas_used equal to gas_limit is accepted") {
  const auto r = parse_raw_record(kLine, RecordSchema::canonical());
  CHECK(r.gas_used == r.gas_limit);
}

TEST_CASE("malformed records are rejected") {
  const auto schema = RecordSchema::canonical();
  SUBCASE("ten fields") {
    const auto ten = kLine.substr(0, kLine.rfind(','));
    CHECK_THROWS_AS(parse_raw_record(ten, schema), MalformedRecord);
  }
  SUBCASE("non-numeric value") {
    auto line = kLine;
    line.replace(line.find("1000000000000000000"), 19, "12e4");
    CHECK_THROWS_AS(parse_raw_record(line, schema), MalformedRecord);
  }
  SUBCASE("short hash") {
    auto line = kLine;
    line.replace(line.find("0x0000000000000000000000000000000000000000000000000000000000000"), 4,
                 "0x");
    CHECK_THROWS_AS(parse_raw_record(line, schema), MalformedRecord);
  }
  SUBCASE("gas_used above gas_limit") {
    auto line = kLine;
    line.replace(line.find(",21000,21000,"), 13, ",21000,21001,");
    CHECK_THROWS_AS(parse_raw_record(line, schema), MalformedRecord);
  }
}

TEST_CASE("malformed rows are skipped and counted") {
  std::istringstream in(canonical_header_line() + "\n" + kLine + "\nnot,a,record\n" + kLine + "\n");
  const auto batch = read_transactions(in, "mem");
  CHECK(batch.records.size() == 2);
  CHECK(batch.report.accepted == 2);
  CHECK(batch.report.malformed == 1);
  REQUIRE(batch.report.errors.size() == 1);
  CHECK(batch.report.errors[0].rfind("mem:3:", 0) == 0);
}

TEST_CASE("tab-delimited input with an aliased header is detected") {
  std::string header = "from\tto\tvalue\tgas\tgas_used\tgas_price\thash\ttimestamp\tblock_number\t"
                       "sender_is_contract\trecipient_is_contract";
  std::string line = kLine;
  std::replace(line.begin(), line.end(), ',', '\t');
  std::istringstream in(header + "\n" + line + "\n");
  const auto batch = read_transactions(in, "mem");
  REQUIRE(batch.records.size() == 1);
  CHECK(batch.records[0] == parse_raw_record(kLine, RecordSchema::canonical()));
}

TEST_CASE("serialization round-trips all eleven fields") {
  std::mt19937_64 rng(3);
  std::vector<RawTransaction> records;
  for (int i = 0; i < 200; ++i) {
    auto r = tx(static_cast<int>(rng() % 50), static_cast<int>(rng() % 50),
                static_cast<Timestamp>(rng() % 2000000000), rng() % 20000000, i, rng() % 2);
    r.value_wei = (static_cast<Wei>(rng()) << 40) | rng();
    r.gas_limit = rng() % 10000000 + 1;
    r.gas_used = rng() % (r.gas_limit + 1);
    r.gas_price = rng();
    r.recipient_is_contract = rng() % 2;
    records.push_back(r);
  }
  std::ostringstream out;
  write_transactions(out, records);
  std::istringstream in(out.str());
  const auto batch = read_transactions(in, "mem");
  CHECK(batch.report.malformed == 0);
  CHECK(batch.records == records);
}

TEST_CASE("coalescing") {
  SUBCASE("single external transfer") {
    const auto r = tx(1, 2, 100, 5, 1);
    const auto c = coalesce_internal(std::span(&r, 1));
    CHECK(c.internal_call_count == 1);
    CHECK(c.root == r);
  }
  SUBCASE("one external plus three internal records") {
    // Contract records first, so the root must be found by the rule, not by position.
    std::vector<RawTransaction> group;
    for (int i = 0; i < 3; ++i) {
      auto inner = tx(20, 30 + i, 100, 5, 7, true);
      inner.value_wei = 5;
      group.push_back(inner);
    }
    auto root = tx(1, 20, 100, 5, 7);
    root.value_wei = static_cast<Wei>(2000000000000000000ULL);
    group.insert(group.begin() + 1, root);
    const auto c = coalesce_internal(group);
    CHECK(c.internal_call_count == 4);
    CHECK(c.root.sender == addr_of(1));
    CHECK(c.root.recipient == addr_of(20));
    CHECK(c.root.value_wei == static_cast<Wei>(2000000000000000000ULL));
  }
  SUBCASE("all contract senders falls back to the first record") {
    std::vector<RawTransaction> group{tx(3, 4, 100, 5, 9, true), tx(5, 6, 100, 5, 9, true)};
    CHECK(coalesce_internal(group).root == group[0]);
  }
  SUBCASE("empty group") {
    CHECK_THROWS_AS(coalesce_internal(std::span<const RawTransaction>{}), EmptyGroup);
  }
  SUBCASE("mixed hashes") {
    std::vector<RawTransaction> group{tx(1, 2, 100, 5, 1), tx(1, 2, 100, 5, 2)};
    CHECK_THROWS_AS(coalesce_internal(group), MalformedRecord);
  }
}

TEST_CASE("labels") {
  SUBCASE("class counts 426 / 34960") {
    std::ostringstream s;
    s << "address,label\n";
    for (int i = 0; i < 426 + 34960; ++i) {
      s << addr_of(i) << ',' << (i < 426 ? "phishing" : "non_phishing") << '\n';
    }
    std::istringstream in(s.str());
    const auto labels = parse_labels(in, "mem");
    CHECK(labels.phishing_count() == 426);
    CHECK(labels.non_phishing_count() == 34960);
    CHECK(labels.find(addr_of(0)) == Label::kPhishing);
    CHECK(labels.find(addr_of(999999)) == std::nullopt);
  }
  SUBCASE("duplicate address") {
    std::istringstream in(addr_of(1) + ",phishing\n" + addr_of(1) + ",non_phishing\n");
    CHECK_THROWS_AS(parse_labels(in, "mem"), DuplicateAddress);
  }
  SUBCASE("empty file") {
    std::istringstream in("");
    CHECK_THROWS_AS(parse_labels(in, "mem"), EmptyFile);
  }
  SUBCASE("unknown label") {
    std::istringstream in(addr_of(1) + ",scam\n");
    CHECK_THROWS_AS(parse_labels(in, "mem"), UnknownLabelString);
  }
  SUBCASE("round trip") {
    LabelSet set;
    set.add(addr_of(1), Label::kPhishing);
    set.add(addr_of(2), Label::kNonPhishing);
    std::ostringstream out;
    write_labels(out, set);
    std::istringstream in(out.str());
    const auto back = parse_labels(in, "mem");
    CHECK(back.entries() == set.entries());
  }
}

TEST_CASE("stream ordering") {
  const std::vector<RawTransaction> late_first{tx(1, 2, 100, 10, 1), tx(3, 4, 90, 9, 2)};
  SUBCASE("loose mode sorts") {
    const auto s = stream_events(late_first);
    REQUIRE(s.size() == 2);
    CHECK(s[0].timestamp == 90);
    CHECK(s[1].timestamp == 100);
  }
  SUBCASE("strict mode rejects") {
    CHECK_THROWS_AS(stream_events(late_first, {.strict_order = true}), OutOfOrderInput);
  }
  SUBCASE("equal timestamps break ties by block") {
    const std::vector<RawTransaction> r{tx(1, 2, 100, 8000001, 1), tx(3, 4, 100, 8000000, 2)};
    const auto s = stream_events(r);
    CHECK(s[0].root.block_number == 8000000);
    CHECK(s[1].root.block_number == 8000001);
  }
  SUBCASE("then by hash") {
    const std::vector<RawTransaction> r{tx(1, 2, 100, 7, 9), tx(3, 4, 100, 7, 3)};
    const auto s = stream_events(r);
    CHECK(s[0].root.tx_hash == hash_of(3));
  }
  SUBCASE("addresses are interned in stream order") {
    const auto s = stream_events(late_first);
    CHECK(s[0].src == 0);
    CHECK(s[0].dst == 1);
    CHECK(s[1].src == 2);
    CHECK(s.addresses().address(0) == addr_of(3));
  }
}

TEST_CASE("random streams: ids have no gaps, time is ordered, coalescing partitions") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RawTransaction> records;
    const int groups = 1 + static_cast<int>(rng() % 60);
    for (int g = 0; g < groups; ++g) {
      const auto t = static_cast<Timestamp>(rng() % 30);
      const auto block = rng() % 5;
      const int size = 1 + static_cast<int>(rng() % 4);
      for (int i = 0; i < size; ++i) {
        records.push_back(tx(static_cast<int>(rng() % 20), static_cast<int>(rng() % 20), t, block,
                             g, i > 0));
      }
    }
    std::shuffle(records.begin(), records.end(), rng);
    const auto s = stream_events(records);
    std::size_t covered = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s[i].event_id == i);
      covered += s[i].internal_call_count;
      if (i > 0) CHECK(s[i - 1].timestamp <= s[i].timestamp);
    }
    CHECK(s.size() == static_cast<std::size_t>(groups));
    CHECK(covered == records.size());
  }
}
