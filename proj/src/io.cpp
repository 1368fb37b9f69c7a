#include "sosupo/io.hpp"

#include <istream>
#include <ostream>

#include "json.hpp"
#include "sosupo/errors.hpp"

namespace sosupo {

SdpStatus sdp_status_from_string(const std::string& text) {
  for (auto s : {SdpStatus::optimal, SdpStatus::near_optimal, SdpStatus::primal_infeasible, SdpStatus::dual_infeasible,
                 SdpStatus::iteration_limit, SdpStatus::numerical_failure}) {
    if (to_string(s) == text) return s;
  }
  throw ParseError("unknown solver status '" + text + "'");
}

BoundSense bound_sense_from_string(const std::string& text) {
  if (text == "max" || text == to_string(BoundSense::upper_bound_of_max)) return BoundSense::upper_bound_of_max;
  if (text == "min" || text == to_string(BoundSense::lower_bound_of_min)) return BoundSense::lower_bound_of_min;
  throw ParseError("unknown bound sense '" + text + "' (expected max or min)");
}

void write_certificate_json(std::ostream& out, const BoundCertificate& cert, const CertificateMeta& meta) {
  nlohmann::ordered_json j;
  j["schema"] = "sosupo-certificate/1";
  j["system"] = meta.system;
  j["parameters"] = meta.parameters;
  j["observable"] = meta.observable;
  j["dimension"] = meta.dimension;
  j["sense"] = cert.sense == BoundSense::upper_bound_of_max ? "max" : "min";
  j["lambda"] = cert.lambda;
  j["raw_lambda"] = cert.raw_lambda;
  j["degree"] = cert.degree;
  j["V"] = cert.V.to_string();
  j["identity_residual"] = cert.identity_residual;
  j["identity_residual_unscaled"] = cert.identity_residual_unscaled;
  j["gram_min_eig"] = cert.gram_min_eig;
  j["solver_status"] = to_string(cert.solver_status);
  j["solver_gap"] = cert.solver_gap;
  j["solve_seconds"] = cert.solve_seconds;
  auto mult = nlohmann::ordered_json::array();
  for (const auto& m : cert.multipliers) mult.push_back({{"weight", m.weight.to_string()}, {"sigma", m.sigma.to_string()}});
  j["multipliers"] = std::move(mult);
  out << j.dump(1) << "\n";
}

CertificateFile read_certificate_json(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("certificate: ") + e.what());
  }
  CertificateFile file;
  try {
    for (const char* key : {"dimension", "sense", "lambda", "V"}) {
      if (!j.contains(key)) throw ParseError(std::string("certificate: missing '") + key + "'");
    }
    const int n = j.at("dimension").get<int>();
    if (n < 1) throw ParseError("certificate: dimension must be positive");
    file.meta.dimension = n;
    file.meta.system = j.value("system", std::string());
    file.meta.observable = j.value("observable", std::string());
    if (j.contains("parameters")) file.meta.parameters = j.at("parameters").get<std::map<std::string, double>>();
    auto& c = file.certificate;
    c.sense = bound_sense_from_string(j.at("sense").get<std::string>());
    c.lambda = j.at("lambda").get<double>();
    c.raw_lambda = c.sense == BoundSense::upper_bound_of_max ? c.lambda : -c.lambda;
    c.V = Polynomial::parse(j.at("V").get<std::string>(), n);
    c.degree = j.value("degree", std::max(0, c.V.degree()));
    file.external = !j.contains("solver_status");
    if (!file.external) {
      c.solver_status = sdp_status_from_string(j.at("solver_status").get<std::string>());
      c.identity_residual = j.value("identity_residual", 0.0);
      c.identity_residual_unscaled = j.value("identity_residual_unscaled", 0.0);
      c.gram_min_eig = j.value("gram_min_eig", 0.0);
      c.solver_gap = j.value("solver_gap", 0.0);
      c.solve_seconds = j.value("solve_seconds", 0.0);
    }
    if (j.contains("multipliers")) {
      for (const auto& m : j.at("multipliers")) {
        SosMultiplier s;
        s.weight = Polynomial::parse(m.at("weight").get<std::string>(), n);
        s.sigma = Polynomial::parse(m.at("sigma").get<std::string>(), n);
        c.multipliers.push_back(std::move(s));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("certificate: ") + e.what());
  }
  return file;
}

}  // namespace sosupo
