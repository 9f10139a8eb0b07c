#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mcqdiff {

/// Hex-encoded SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

uint64_t fnv1a64(const std::string& s);

/// splitmix64 finalizer; decorrelates nearby integer seeds.
uint64_t mix64(uint64_t x);

/// Fixed-point decimal formatting, e.g. format_fixed(0.13594, 4) == "0.1359".
std::string format_fixed(double v, int digits);

/// Shortest decimal string that round-trips the double exactly.
std::string format_full(double v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);

/// Uniform draw in [0, n) without the implementation-defined behaviour of
/// std::uniform_int_distribution, so seeded runs match across platforms.
uint64_t uniform_below(std::mt19937_64& rng, uint64_t n);

/// Deterministic Fisher-Yates shuffle (same caveat as uniform_below).
template <typename T>
void deterministic_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(uniform_below(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

std::string lowercase_ascii(const std::string& s);

std::vector<std::string> split_string(const std::string& s, char sep);

}  // namespace mcqdiff
