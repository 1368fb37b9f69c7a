#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "sosupo/sos.hpp"

namespace sosupo {

struct CertificateMeta {
  std::string system;
  std::map<std::string, double> parameters;
  std::string observable;  // name or polynomial text
  int dimension = 0;
};

struct CertificateFile {
  CertificateMeta meta;
  BoundCertificate certificate;
  bool external = false;  // no solver record; only lambda, sense and V were supplied
};

/// Schema "sosupo-certificate/1". Polynomials are stored as text with %.17g coefficients.
void write_certificate_json(std::ostream& out, const BoundCertificate& cert, const CertificateMeta& meta);

/// Requires dimension, sense, lambda and V. Throws ParseError on malformed input.
CertificateFile read_certificate_json(std::istream& in);

SdpStatus sdp_status_from_string(const std::string& text);
BoundSense bound_sense_from_string(const std::string& text);

}  // namespace sosupo
