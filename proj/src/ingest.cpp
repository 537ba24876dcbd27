#include "phishstream/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace phishstream {
namespace {

constexpr std::size_t kMaxReportedErrors = 20;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\n' ||
                        s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\n' ||
                        s.back() == '\t'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char delimiter) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

bool is_hex(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
  });
}

template <typename T>
T parse_unsigned(std::string_view text, std::string_view field) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc{} || ptr != last) {
    throw MalformedRecord("non-numeric " + std::string(field) + " '" + std::string(text) + "'");
  }
  return value;
}

bool parse_bool(std::string_view text, std::string_view field) {
  const auto lower = to_lower(text);
  if (lower == "1" || lower == "true") return true;
  if (lower == "0" || lower == "false") return false;
  throw MalformedRecord("bad boolean " + std::string(field) + " '" + std::string(text) + "'");
}

std::string parse_address(std::string_view text, std::string_view field) {
  if (text.empty()) throw MalformedRecord("empty " + std::string(field));
  return to_lower(text);
}

bool event_order_less(const CoalescedTransaction& a, const CoalescedTransaction& b) {
  if (a.root.timestamp != b.root.timestamp) return a.root.timestamp < b.root.timestamp;
  if (a.root.block_number != b.root.block_number) return a.root.block_number < b.root.block_number;
  return a.root.tx_hash < b.root.tx_hash;
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string wei_to_string(Wei value) {
  if (value == 0) return "0";
  std::string digits;
  while (value > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(value % 10)));
    value /= 10;
  }
  std::reverse(digits.begin(), digits.end());
  return digits;
}

std::optional<Wei> parse_wei(std::string_view text) {
  if (text.empty() || text.size() > 39) return std::nullopt;
  Wei value = 0;
  constexpr Wei kMax = ~static_cast<Wei>(0);
  for (char c : text) {
    if (c < '0' || c > '9') return std::nullopt;
    const auto digit = static_cast<Wei>(c - '0');
    if (value > (kMax - digit) / 10) return std::nullopt;
    value = value * 10 + digit;
  }
  return value;
}

double wei_to_double(Wei value) { return static_cast<double>(value); }

RecordSchema RecordSchema::canonical(char delimiter) {
  RecordSchema schema;
  schema.delimiter = delimiter;
  return schema;
}

const std::array<std::string_view, kRawFieldCount>& canonical_header_names() {
  static const std::array<std::string_view, kRawFieldCount> names{
      "sender",    "recipient", "value_wei",    "gas_limit",          "gas_used",
      "gas_price", "tx_hash",   "timestamp",    "block_number",       "sender_is_contract",
      "recipient_is_contract"};
  return names;
}

std::string canonical_header_line(char delimiter) {
  std::string line;
  for (const auto name : canonical_header_names()) {
    if (!line.empty()) line.push_back(delimiter);
    line.append(name);
  }
  return line;
}

char detect_delimiter(std::string_view line) {
  return line.find('\t') != std::string_view::npos ? '\t' : ',';
}

std::optional<RecordSchema> parse_header(std::string_view line, char delimiter) {
  static const std::unordered_map<std::string, RawField> aliases{
      {"sender", RawField::kSender},
      {"from", RawField::kSender},
      {"from_address", RawField::kSender},
      {"recipient", RawField::kRecipient},
      {"to", RawField::kRecipient},
      {"to_address", RawField::kRecipient},
      {"value_wei", RawField::kValueWei},
      {"value", RawField::kValueWei},
      {"gas_limit", RawField::kGasLimit},
      {"gas", RawField::kGasLimit},
      {"gaslimit", RawField::kGasLimit},
      {"gas_used", RawField::kGasUsed},
      {"gasused", RawField::kGasUsed},
      {"gas_price", RawField::kGasPrice},
      {"gasprice", RawField::kGasPrice},
      {"tx_hash", RawField::kTxHash},
      {"hash", RawField::kTxHash},
      {"transactionhash", RawField::kTxHash},
      {"timestamp", RawField::kTimestamp},
      {"block_number", RawField::kBlockNumber},
      {"blocknumber", RawField::kBlockNumber},
      {"sender_is_contract", RawField::kSenderIsContract},
      {"fromiscontract", RawField::kSenderIsContract},
      {"recipient_is_contract", RawField::kRecipientIsContract},
      {"toiscontract", RawField::kRecipientIsContract},
  };
  const auto cells = split(line, delimiter);
  if (cells.size() != kRawFieldCount) return std::nullopt;
  RecordSchema schema;
  schema.delimiter = delimiter;
  std::array<bool, kRawFieldCount> seen{};
  for (std::size_t col = 0; col < cells.size(); ++col) {
    const auto it = aliases.find(to_lower(cells[col]));
    if (it == aliases.end()) return std::nullopt;
    const auto f = static_cast<std::size_t>(it->second);
    if (seen[f]) return std::nullopt;
    seen[f] = true;
    schema.column[f] = col;
  }
  return schema;
}

RawTransaction parse_raw_record(std::string_view line, const RecordSchema& schema) {
  const auto cells = split(trim(line), schema.delimiter);
  if (cells.size() != kRawFieldCount) {
    throw MalformedRecord("expected 11 fields, got " + std::to_string(cells.size()));
  }
  const auto cell = [&](RawField f) { return cells[schema.column_of(f)]; };

  RawTransaction tx;
  tx.sender = parse_address(cell(RawField::kSender), "sender");
  tx.recipient = parse_address(cell(RawField::kRecipient), "recipient");
  const auto value = parse_wei(cell(RawField::kValueWei));
  if (!value) {
    throw MalformedRecord("non-numeric value_wei '" + std::string(cell(RawField::kValueWei)) + "'");
  }
  tx.value_wei = *value;
  tx.gas_limit = parse_unsigned<std::uint64_t>(cell(RawField::kGasLimit), "gas_limit");
  tx.gas_used = parse_unsigned<std::uint64_t>(cell(RawField::kGasUsed), "gas_used");
  tx.gas_price = parse_unsigned<std::uint64_t>(cell(RawField::kGasPrice), "gas_price");
  if (tx.gas_used > tx.gas_limit) throw MalformedRecord("gas_used exceeds gas_limit");

  const auto hash = cell(RawField::kTxHash);
  if (hash.size() != 66 || hash.substr(0, 2) != "0x" || !is_hex(hash.substr(2))) {
    throw MalformedRecord("bad tx_hash '" + std::string(hash) + "'");
  }
  tx.tx_hash = to_lower(hash);
  tx.timestamp = static_cast<Timestamp>(
      parse_unsigned<std::uint64_t>(cell(RawField::kTimestamp), "timestamp"));
  tx.block_number = parse_unsigned<std::uint64_t>(cell(RawField::kBlockNumber), "block_number");
  tx.sender_is_contract = parse_bool(cell(RawField::kSenderIsContract), "sender_is_contract");
  tx.recipient_is_contract =
      parse_bool(cell(RawField::kRecipientIsContract), "recipient_is_contract");
  return tx;
}

std::string format_raw_record(const RawTransaction& tx, const RecordSchema& schema) {
  std::array<std::string, kRawFieldCount> cells;
  const auto set = [&](RawField f, std::string v) { cells[schema.column_of(f)] = std::move(v); };
  set(RawField::kSender, tx.sender);
  set(RawField::kRecipient, tx.recipient);
  set(RawField::kValueWei, wei_to_string(tx.value_wei));
  set(RawField::kGasLimit, std::to_string(tx.gas_limit));
  set(RawField::kGasUsed, std::to_string(tx.gas_used));
  set(RawField::kGasPrice, std::to_string(tx.gas_price));
  set(RawField::kTxHash, tx.tx_hash);
  set(RawField::kTimestamp, std::to_string(tx.timestamp));
  set(RawField::kBlockNumber, std::to_string(tx.block_number));
  set(RawField::kSenderIsContract, tx.sender_is_contract ? "1" : "0");
  set(RawField::kRecipientIsContract, tx.recipient_is_contract ? "1" : "0");
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line.push_back(schema.delimiter);
    line += cells[i];
  }
  return line;
}

RawBatch read_transactions(std::istream& in, const std::string& source_name) {
  RawBatch batch;
  std::optional<RecordSchema> schema;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (!schema) {
      const char delimiter = detect_delimiter(line);
      schema = parse_header(line, delimiter);
      if (schema) continue;
      schema = RecordSchema::canonical(delimiter);
    }
    ++batch.report.lines_read;
    try {
      batch.records.push_back(parse_raw_record(line, *schema));
      ++batch.report.accepted;
    } catch (const MalformedRecord& e) {
      ++batch.report.malformed;
      if (batch.report.errors.size() < kMaxReportedErrors) {
        batch.report.errors.push_back(source_name + ":" + std::to_string(line_no) + ": " +
                                      e.what());
      }
    }
  }
  return batch;
}

RawBatch read_transactions_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open transaction file '" + path + "'");
  return read_transactions(in, path);
}

void write_transactions(std::ostream& out, std::span<const RawTransaction> records,
                        char delimiter) {
  const auto schema = RecordSchema::canonical(delimiter);
  out << canonical_header_line(delimiter) << '\n';
  for (const auto& tx : records) out << format_raw_record(tx, schema) << '\n';
}

CoalescedTransaction coalesce_internal(std::span<const RawTransaction> records) {
  if (records.empty()) throw EmptyGroup("cannot coalesce an empty record group");
  for (const auto& r : records) {
    if (r.tx_hash != records.front().tx_hash || r.timestamp != records.front().timestamp) {
      throw MalformedRecord("inconsistent internal records for " + records.front().tx_hash);
    }
  }
  const auto root = std::find_if(records.begin(), records.end(),
                                 [](const RawTransaction& r) { return !r.sender_is_contract; });
  CoalescedTransaction out;
  out.root = root != records.end() ? *root : records.front();
  out.internal_call_count = static_cast<std::uint32_t>(records.size());
  return out;
}

NodeId AddressBook::intern(const std::string& address) {
  const auto [it, inserted] = ids_.try_emplace(address, static_cast<NodeId>(addresses_.size()));
  if (inserted) addresses_.push_back(address);
  return it->second;
}

std::optional<NodeId> AddressBook::find(const std::string& address) const {
  const auto it = ids_.find(address);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

EventStream::EventStream(std::vector<TransactionEvent> events, AddressBook addresses)
    : events_(std::move(events)), addresses_(std::move(addresses)) {}

EventStream stream_events(std::span<const RawTransaction> records, const StreamOptions& options) {
  // Group by hash, keeping first-appearance order of groups.
  std::unordered_map<std::string_view, std::size_t> group_of;
  std::vector<std::vector<RawTransaction>> groups;
  for (const auto& r : records) {
    const auto [it, inserted] = group_of.try_emplace(r.tx_hash, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(r);
  }

  std::vector<CoalescedTransaction> coalesced;
  coalesced.reserve(groups.size());
  for (const auto& g : groups) coalesced.push_back(coalesce_internal(g));

  if (options.strict_order) {
    for (std::size_t i = 1; i < coalesced.size(); ++i) {
      if (coalesced[i].root.timestamp < coalesced[i - 1].root.timestamp) {
        throw OutOfOrderInput("transaction " + coalesced[i].root.tx_hash + " at t=" +
                              std::to_string(coalesced[i].root.timestamp) +
                              " follows t=" + std::to_string(coalesced[i - 1].root.timestamp));
      }
    }
  }
  std::stable_sort(coalesced.begin(), coalesced.end(), event_order_less);

  AddressBook book;
  std::vector<TransactionEvent> events;
  events.reserve(coalesced.size());
  for (auto& c : coalesced) {
    TransactionEvent ev;
    ev.event_id = events.size();
    ev.src = book.intern(c.root.sender);
    ev.dst = book.intern(c.root.recipient);
    ev.timestamp = c.root.timestamp;
    ev.internal_call_count = c.internal_call_count;
    ev.root = std::move(c.root);
    events.push_back(std::move(ev));
  }
  return EventStream(std::move(events), std::move(book));
}

EventStream stream_events_from_files(const std::vector<std::string>& paths,
                                     const StreamOptions& options, IngestReport* report) {
  std::vector<RawTransaction> all;
  IngestReport total;
  for (const auto& path : paths) {
    auto batch = read_transactions_file(path);
    total.lines_read += batch.report.lines_read;
    total.accepted += batch.report.accepted;
    total.malformed += batch.report.malformed;
    for (auto& e : batch.report.errors) {
      if (total.errors.size() < kMaxReportedErrors) total.errors.push_back(std::move(e));
    }
    std::move(batch.records.begin(), batch.records.end(), std::back_inserter(all));
  }
  if (report) *report = std::move(total);
  return stream_events(all, options);
}

void LabelSet::add(const std::string& address, Label label) {
  const auto [it, inserted] = index_.try_emplace(address, entries_.size());
  if (!inserted) throw DuplicateAddress("address listed twice: " + address);
  entries_.emplace_back(address, label);
  (label == Label::kPhishing ? phishing_ : non_phishing_) += 1;
}

std::optional<Label> LabelSet::find(const std::string& address) const {
  const auto it = index_.find(address);
  if (it == index_.end()) return std::nullopt;
  return entries_[it->second].second;
}

std::string_view label_name(Label label) {
  return label == Label::kPhishing ? "phishing" : "non_phishing";
}

LabelSet parse_labels(std::istream& in, const std::string& source_name) {
  LabelSet labels;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(trim(line), detect_delimiter(line));
    if (first) {
      first = false;
      if (cells.size() == 2 && to_lower(cells[0]) == "address" && to_lower(cells[1]) == "label") {
        continue;
      }
    }
    const auto where = source_name + ":" + std::to_string(line_no);
    if (cells.size() != 2) throw UnknownLabelString(where + ": expected 'address,label'");
    const auto name = to_lower(cells[1]);
    Label label;
    if (name == "phishing") {
      label = Label::kPhishing;
    } else if (name == "non_phishing") {
      label = Label::kNonPhishing;
    } else {
      throw UnknownLabelString(where + ": unknown label '" + std::string(cells[1]) + "'");
    }
    try {
      labels.add(to_lower(cells[0]), label);
    } catch (const DuplicateAddress& e) {
      throw DuplicateAddress(where + ": " + e.what());
    }
  }
  if (labels.size() == 0) throw EmptyFile("label file has no rows: " + source_name);
  return labels;
}

LabelSet load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open label file '" + path + "'");
  return parse_labels(in, path);
}

void write_labels(std::ostream& out, const LabelSet& labels) {
  out << "address,label\n";
  for (const auto& [address, label] : labels.entries()) {
    out << address << ',' << label_name(label) << '\n';
  }
}

}  // namespace phishstream
