#ifndef GASJITTER_NETWORK_IO_HPP
#define GASJITTER_NETWORK_IO_HPP

#include <iosfwd>
#include <string>

#include "gasjitter/network.hpp"

namespace gasjitter {

// Parses the sectioned network document format (see docs/network-format.md).
// Unit suffixes (psi, MPa, kPa, km, mi, min, h) are converted to SI here;
// everything downstream is strictly SI.
Network parse_network(const std::string& text);
Network load_network(const std::string& path);

// Emits a document that parse_network() round-trips field-for-field.
std::string serialize_network(const Network& net);

}  // namespace gasjitter

#endif
