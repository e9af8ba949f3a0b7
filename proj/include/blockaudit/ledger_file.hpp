#pragma once

// On-disk ledger: one record per block, appended in height order.
//
//   <decimal byte length>\n<canonical block JSON>\n
//
// The block JSON is
//   {"hash":"<block digest>","header":{..sorted..},"txns":[<canonical txn>,..]}
// Loading is strict: a record must re-encode to exactly the bytes read, so
// any change to the file either fails to decode or changes a hashed field.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "blockaudit/error.hpp"
#include "blockaudit/ledger.hpp"
#include "blockaudit/txn_codec.hpp"

namespace blockaudit {

inline std::string encode_block_json(const Block& block, const Hash256& hash) {
  std::string json = "{\"hash\":\"" + hash.hex() +
                     "\",\"header\":" + canonical_header(block.header) + ",\"txns\":[";
  bool first = true;
  for (const auto& t : block.txns) {
    if (!first) json += ',';
    first = false;
    json += canonical_encoding(t.get());
  }
  json += "]}";
  return json;
}

inline std::string encode_block_record(const Block& block) {
  std::string json = encode_block_json(block, block_digest(block));
  return std::to_string(json.size()) + "\n" + json + "\n";
}

inline std::string encode_ledger(const Ledger& ledger) {
  std::string out;
  for (const auto& b : ledger.blocks()) out += encode_block_record(b);
  return out;
}

struct DecodedBlock {
  Block block;
  Hash256 stored_hash;
};

namespace detail {

inline Hash256 require_hash(const nlohmann::json& obj, const char* key) {
  auto text = require_string(obj, key);
  auto h = Hash256::from_hex(text);
  if (!h) throw Error(ErrorCode::MalformedRecord, std::string(key) + " is not a lowercase hash");
  return *h;
}

inline std::uint64_t require_uint(const nlohmann::json& obj, const char* key) {
  const auto& v = require(obj, key);
  if (!v.is_number_unsigned())
    throw Error(ErrorCode::MalformedRecord, std::string(key) + " must be unsigned");
  return v.get<std::uint64_t>();
}

inline DecodedBlock decode_block_json(std::string_view json) {
  auto doc = parse_json(json);
  if (!doc.is_object()) throw Error(ErrorCode::MalformedRecord, "block record is not an object");
  reject_unknown(doc, {"hash", "header", "txns"});
  DecodedBlock out;
  out.stored_hash = require_hash(doc, "hash");
  const auto& h = require(doc, "header");
  if (!h.is_object()) throw Error(ErrorCode::MalformedRecord, "header is not an object");
  reject_unknown(h, {"height", "prev_hash", "proposer", "timestamp", "txn_root"});
  out.block.header.height = require_uint(h, "height");
  out.block.header.prev_hash = require_hash(h, "prev_hash");
  auto proposer = require_uint(h, "proposer");
  if (proposer > 0xffffffffu) throw Error(ErrorCode::MalformedRecord, "proposer out of range");
  out.block.header.proposer = static_cast<NodeId>(proposer);
  out.block.header.timestamp = require_int(h, "timestamp");
  out.block.header.txn_root = require_hash(h, "txn_root");
  const auto& txns = require(doc, "txns");
  if (!txns.is_array()) throw Error(ErrorCode::MalformedRecord, "txns is not an array");
  for (const auto& t : txns) out.block.txns.emplace_back(transaction_from_json(t));
  return out;
}

}  // namespace detail

// Decodes records in order, stopping at the first malformed one.
struct LedgerFileScan {
  std::vector<DecodedBlock> blocks;
  bool malformed = false;  // the record at index blocks.size() could not be read
  std::string error;
};

inline LedgerFileScan scan_ledger_file(std::string_view bytes) {
  LedgerFileScan scan;
  std::size_t pos = 0;
  auto fail = [&](std::string why) {
    scan.malformed = true;
    scan.error = "record " + std::to_string(scan.blocks.size()) + ": " + std::move(why);
    return scan;
  };
  while (pos < bytes.size()) {
    std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos || nl == pos || nl - pos > 12) return fail("bad length prefix");
    std::string_view digits = bytes.substr(pos, nl - pos);
    if (!detail::all_digits(digits) || (digits.size() > 1 && digits[0] == '0'))
      return fail("bad length prefix");
    std::size_t len = std::stoull(std::string(digits));
    std::size_t start = nl + 1;
    if (len > bytes.size() - start || bytes.size() - start - len < 1 || bytes[start + len] != '\n')
      return fail("truncated record");
    std::string_view json = bytes.substr(start, len);
    try {
      DecodedBlock decoded = detail::decode_block_json(json);
      if (encode_block_json(decoded.block, decoded.stored_hash) != json)
        return fail("record is not in canonical form");
      scan.blocks.push_back(std::move(decoded));
    } catch (const Error& e) {
      return fail(e.what());
    }
    pos = start + len + 1;
  }
  return scan;
}

// Verifies the file: record framing and canonical form, stored block hashes
// and the chain itself. Reports the lowest failing height.
inline VerificationReport verify_ledger_file(std::string_view bytes) {
  auto scan = scan_ledger_file(bytes);
  VerificationReport report;
  if (scan.malformed)
    report = VerificationReport::failure(scan.blocks.size(), VerifyCause::RecordMalformed);
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < scan.blocks.size(); ++i) {
    if (block_digest(scan.blocks[i].block) != scan.blocks[i].stored_hash) {
      report = report.merge(VerificationReport::failure(i, VerifyCause::HashMismatch));
      break;
    }
  }
  for (auto& d : scan.blocks) blocks.push_back(std::move(d.block));
  if (blocks.empty()) return report.merge(VerificationReport::failure(0, VerifyCause::RecordMalformed));
  return report.merge(verify_chain(Ledger::from_blocks_unchecked(std::move(blocks))));
}

// Strict load: throws unless the whole file verifies.
inline Ledger decode_ledger(std::string_view bytes) {
  auto report = verify_ledger_file(bytes);
  if (!report.ok)
    throw Error(ErrorCode::MalformedRecord,
                "ledger fails verification at height " + std::to_string(*report.first_bad_height) +
                    " (" + to_string(*report.cause) + ")");
  auto scan = scan_ledger_file(bytes);
  std::vector<Block> blocks;
  for (auto& d : scan.blocks) blocks.push_back(std::move(d.block));
  return Ledger::from_blocks_unchecked(std::move(blocks));
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace blockaudit
