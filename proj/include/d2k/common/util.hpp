#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>

namespace d2k {

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);
std::string content_hash(std::string_view data);

/// Derive an independent stream seed from (seed, index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

/// Random (version 4) UUID string.
std::string make_uuid();

/// UTC ISO-8601 timestamp with millisecond precision, e.g. 2026-10-18T02:00:00.000Z.
std::string format_utc(std::chrono::system_clock::time_point tp);
std::string utc_now();

/// Strict parse of the format produced by format_utc. Returns false on mismatch.
bool is_iso8601_utc(std::string_view text);

/// Write to a temporary sibling, fsync, then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

/// Commit hash of the build, stamped into generated records.
std::string software_commit();

}  // namespace d2k
