#include "etguard/wire.hpp"

#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace etguard::wire {

void write_u64(std::ostream& out, uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

uint64_t read_u64(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (in.gcount() != 8) throw std::runtime_error("wire: truncated input");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return v;
}

void write_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
}

double read_f64(std::istream& in) {
    const uint64_t bits = read_u64(in);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void write_f64_block(std::ostream& out, const std::vector<double>& xs) {
    for (double x : xs) write_f64(out, x);
}

void read_f64_block(std::istream& in, std::vector<double>& xs) {
    for (double& x : xs) x = read_f64(in);
}

void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const uint64_t n = read_u64(in);
    if (n > (1u << 20)) throw std::runtime_error("wire: implausible string length");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (static_cast<uint64_t>(in.gcount()) != n) throw std::runtime_error("wire: truncated input");
    return s;
}

} // namespace etguard::wire
