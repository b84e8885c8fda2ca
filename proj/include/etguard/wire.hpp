#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace etguard::wire {

// Little-endian fixed-width primitives for model/buffer files; byte packing
// is explicit so files are portable across hosts. Readers throw
// std::runtime_error on truncation or implausible sizes.
void write_u64(std::ostream& out, uint64_t v);
uint64_t read_u64(std::istream& in);

void write_f64(std::ostream& out, double v);
double read_f64(std::istream& in);

void write_f64_block(std::ostream& out, const std::vector<double>& xs);
void read_f64_block(std::istream& in, std::vector<double>& xs);

void write_string(std::ostream& out, const std::string& s);
std::string read_string(std::istream& in);

} // namespace etguard::wire
