#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "phishstream/types.hpp"

namespace phishstream {

// Wei amounts routinely exceed 2^64 (1 ETH = 10^18 wei).
using Wei = unsigned __int128;

std::string wei_to_string(Wei value);
std::optional<Wei> parse_wei(std::string_view text);
double wei_to_double(Wei value);

/// One raw transaction record as exported by a block explorer.
struct RawTransaction {
  std::string sender;
  std::string recipient;
  Wei value_wei = 0;
  std::uint64_t gas_limit = 0;
  std::uint64_t gas_used = 0;
  std::uint64_t gas_price = 0;
  std::string tx_hash;
  Timestamp timestamp = 0;
  std::uint64_t block_number = 0;
  bool sender_is_contract = false;
  bool recipient_is_contract = false;

  bool operator==(const RawTransaction&) const = default;
};

enum class RawField : int {
  kSender = 0,
  kRecipient,
  kValueWei,
  kGasLimit,
  kGasUsed,
  kGasPrice,
  kTxHash,
  kTimestamp,
  kBlockNumber,
  kSenderIsContract,
  kRecipientIsContract,
};

inline constexpr std::size_t kRawFieldCount = 11;

/// Maps each of the eleven fields to its column index in a delimited line.
struct RecordSchema {
  std::array<std::size_t, kRawFieldCount> column{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  char delimiter = ',';

  static RecordSchema canonical(char delimiter = ',');
  std::size_t column_of(RawField f) const { return column[static_cast<int>(f)]; }
};

/// Canonical header names, in canonical column order.
const std::array<std::string_view, kRawFieldCount>& canonical_header_names();
std::string canonical_header_line(char delimiter = ',');

char detect_delimiter(std::string_view line);

/// Returns a schema when `line` is a header row naming all eleven fields
/// (canonical names or common explorer aliases, case-insensitive).
std::optional<RecordSchema> parse_header(std::string_view line, char delimiter);

/// Throws MalformedRecord on wrong field count, non-numeric fields, a bad
/// hash, unparseable booleans, or gas_used > gas_limit.
RawTransaction parse_raw_record(std::string_view line, const RecordSchema& schema);
std::string format_raw_record(const RawTransaction& tx, const RecordSchema& schema);

struct IngestReport {
  std::size_t lines_read = 0;
  std::size_t accepted = 0;
  std::size_t malformed = 0;
  // First few parse errors, "source:line: message".
  std::vector<std::string> errors;
};

struct RawBatch {
  std::vector<RawTransaction> records;
  IngestReport report;
};

/// Reads a delimited transaction file. Malformed rows are skipped and
/// counted in the report; they never abort the read.
RawBatch read_transactions(std::istream& in, const std::string& source_name);
RawBatch read_transactions_file(const std::string& path);
void write_transactions(std::ostream& out, std::span<const RawTransaction> records,
                        char delimiter = ',');

/// A group of records sharing one tx hash, reduced to its root record.
struct CoalescedTransaction {
  RawTransaction root;
  std::uint32_t internal_call_count = 1;
};

/// Root is the first record whose sender is not a contract, else the first
/// record. Throws EmptyGroup for an empty span and MalformedRecord when the
/// records disagree on hash or timestamp.
CoalescedTransaction coalesce_internal(std::span<const RawTransaction> records);

/// Dense node ids assigned on first sight.
class AddressBook {
 public:
  NodeId intern(const std::string& address);
  std::optional<NodeId> find(const std::string& address) const;
  const std::string& address(NodeId id) const { return addresses_.at(id); }
  std::size_t size() const { return addresses_.size(); }
  const std::vector<std::string>& addresses() const { return addresses_; }

 private:
  std::vector<std::string> addresses_;
  std::unordered_map<std::string, NodeId> ids_;
};

/// Sixteen raw feature values plus their causally normalized counterpart.
struct EdgeFeatureVector {
  std::array<double, kEdgeFeatureDim> raw{};
  std::array<double, kEdgeFeatureDim> normalized{};
};

struct TransactionEvent {
  std::uint64_t event_id = 0;
  NodeId src = 0;
  NodeId dst = 0;
  Timestamp timestamp = 0;
  std::uint32_t internal_call_count = 1;
  RawTransaction root;
  EdgeFeatureVector edge_features;
};

struct StreamOptions {
  // Reject input whose groups are not already in non-decreasing time order.
  bool strict_order = false;
};

/// A finite, fully ordered event stream plus the address interning table.
class EventStream {
 public:
  EventStream() = default;
  EventStream(std::vector<TransactionEvent> events, AddressBook addresses);

  auto begin() const { return events_.begin(); }
  auto end() const { return events_.end(); }
  auto begin() { return events_.begin(); }
  auto end() { return events_.end(); }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  const TransactionEvent& operator[](std::size_t i) const { return events_[i]; }
  TransactionEvent& operator[](std::size_t i) { return events_[i]; }
  std::span<const TransactionEvent> events() const { return events_; }
  const AddressBook& addresses() const { return addresses_; }
  std::size_t node_count() const { return addresses_.size(); }

 private:
  std::vector<TransactionEvent> events_;
  AddressBook addresses_;
};

/// Coalesces by tx hash, orders by (timestamp, block_number, tx_hash),
/// interns addresses in stream order and assigns event ids 0, 1, 2, ...
/// In strict mode, a decrease in timestamp across input groups throws
/// OutOfOrderInput.
EventStream stream_events(std::span<const RawTransaction> records,
                          const StreamOptions& options = {});
EventStream stream_events_from_files(const std::vector<std::string>& paths,
                                     const StreamOptions& options, IngestReport* report);

class LabelSet {
 public:
  void add(const std::string& address, Label label);
  std::optional<Label> find(const std::string& address) const;
  std::size_t phishing_count() const { return phishing_; }
  std::size_t non_phishing_count() const { return non_phishing_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, Label>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, Label>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t phishing_ = 0;
  std::size_t non_phishing_ = 0;
};

std::string_view label_name(Label label);
LabelSet parse_labels(std::istream& in, const std::string& source_name);
LabelSet load_labels(const std::string& path);
void write_labels(std::ostream& out, const LabelSet& labels);

std::string to_lower(std::string_view s);

}  // namespace phishstream
