#include "asmpc/config.hpp"

#include "asmpc/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace asmpc::sim {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_real(const std::string& text, const std::string& key) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("config: bad number for '" + key + "': " + text);
  }
  if (trim(text.substr(used)) != "")
    throw InvalidArgument("config: trailing characters for '" + key + "': " + text);
  return value;
}

Eigen::VectorXd parse_vector(const std::string& text, const std::string& key) {
  std::string body = trim(text);
  if (body.size() < 2 || body.front() != '[' || body.back() != ']')
    throw InvalidArgument("config: '" + key + "' expects [a, b, ...]");
  body = body.substr(1, body.size() - 2);
  std::vector<double> values;
  std::string item;
  std::stringstream ss(body);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw InvalidArgument("config: empty entry in '" + key + "'");
    values.push_back(parse_real(item, key));
  }
  Eigen::VectorXd out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out(i) = values[i];
  return out;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_vector(const Eigen::VectorXd& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_real(v(i));
  }
  return out + "]";
}

}  // namespace

void ExperimentConfig::finalize_defaults() {
  const int d = n_u * m;
  if (truth.size() == 0) {
    truth = Eigen::VectorXd::Zero(n_y * d);
    truth(0) = -1.0;
    if (d > 8) truth(8) = -2.0;
  }
  if (w_bar.size() == 0) w_bar = Eigen::VectorXd::Constant(n_y, 0.1);
  if (E.size() == 0) E = Eigen::VectorXd::Ones(n_y);
  if (C.size() == 0 && n_u == 1) {
    C = Eigen::VectorXd(2);
    C << 1.0, -1.0;
    g = Eigen::VectorXd::Ones(2);
  }
  if (Q.size() == 0) Q = 20.0 * Eigen::VectorXd::Ones(n_y * n_y);
  if (S.size() == 0) S = 2.0 * Eigen::VectorXd::Ones(n_u * n_u);
  if (mu0.size() == 0) mu0 = Eigen::VectorXd::Ones(n_y * d);
  if (phi0.size() == 0) phi0 = Eigen::VectorXd::Constant(d, 0.1);
}

void ExperimentConfig::validate() const {
  const int d = n_u * m;
  if (m < 1 || n_u < 1 || n_y < 1) throw InvalidArgument("config: m, n_u, n_y must be >= 1");
  if (horizon <= m) throw InvalidArgument("config: horizon must exceed m");
  if (t_end < 1) throw InvalidArgument("config: t_end must be >= 1");
  if (runs < 1) throw InvalidArgument("config: runs must be >= 1");
  if (epsilon <= 0.0 || epsilon >= 1.0) throw InvalidArgument("config: epsilon outside (0,1)");
  if (sigma0 <= 0.0) throw InvalidArgument("config: sigma0 must be positive");
  if (fps_lower >= fps_upper) throw InvalidArgument("config: fps_lower must be below fps_upper");
  if (fps_cap < 2 * n_y * d) throw InvalidArgument("config: fps_cap below the box row count");
  if (truth.size() != n_y * d) throw InvalidArgument("config: truth length != n_y*n_u*m");
  if (w_bar.size() != n_y) throw InvalidArgument("config: w_bar length != n_y");
  if ((w_bar.array() <= 0.0).any()) throw InvalidArgument("config: w_bar must be positive");
  if (E.size() != n_y) throw InvalidArgument("config: E length != n_y");
  if (Q.size() != n_y * n_y) throw InvalidArgument("config: Q length != n_y*n_y");
  if (S.size() != n_u * n_u) throw InvalidArgument("config: S length != n_u*n_u");
  if (g.size() * n_u != C.size()) throw InvalidArgument("config: C length != rows(g)*n_u");
  if (mu0.size() != n_y * d) throw InvalidArgument("config: mu0 length != n_y*n_u*m");
  if (phi0.size() != d) throw InvalidArgument("config: phi0 length != n_u*m");
  if (solver_max_iterations < 10) throw InvalidArgument("config: solver_max_iterations too small");
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open " + path);
  ExperimentConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config: line " + std::to_string(line_no) + " has no '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "m") cfg.m = static_cast<int>(parse_real(value, key));
    else if (key == "n_u") cfg.n_u = static_cast<int>(parse_real(value, key));
    else if (key == "n_y") cfg.n_y = static_cast<int>(parse_real(value, key));
    else if (key == "truth") cfg.truth = parse_vector(value, key);
    else if (key == "w_bar") cfg.w_bar = parse_vector(value, key);
    else if (key == "horizon") cfg.horizon = static_cast<int>(parse_real(value, key));
    else if (key == "epsilon") cfg.epsilon = parse_real(value, key);
    else if (key == "E") cfg.E = parse_vector(value, key);
    else if (key == "p") cfg.p = parse_real(value, key);
    else if (key == "C") cfg.C = parse_vector(value, key);
    else if (key == "g") cfg.g = parse_vector(value, key);
    else if (key == "Q") cfg.Q = parse_vector(value, key);
    else if (key == "S") cfg.S = parse_vector(value, key);
    else if (key == "mu0") cfg.mu0 = parse_vector(value, key);
    else if (key == "sigma0") cfg.sigma0 = parse_real(value, key);
    else if (key == "phi0") cfg.phi0 = parse_vector(value, key);
    else if (key == "fps_lower") cfg.fps_lower = parse_real(value, key);
    else if (key == "fps_upper") cfg.fps_upper = parse_real(value, key);
    else if (key == "fps_cap") cfg.fps_cap = static_cast<int>(parse_real(value, key));
    else if (key == "k_bar") cfg.k_bar = static_cast<int>(parse_real(value, key));
    else if (key == "delta_bar") cfg.delta_bar = parse_real(value, key);
    else if (key == "c_tilde") cfg.c_tilde = parse_real(value, key);
    else if (key == "c_bar") cfg.c_bar = parse_real(value, key);
    else if (key == "q_override") cfg.q_override = static_cast<int>(parse_real(value, key));
    else if (key == "offline_seed") cfg.offline_seed = static_cast<std::uint64_t>(parse_real(value, key));
    else if (key == "t_end") cfg.t_end = static_cast<int>(parse_real(value, key));
    else if (key == "runs") cfg.runs = static_cast<int>(parse_real(value, key));
    else if (key == "run_seed_base") cfg.run_seed_base = static_cast<std::uint64_t>(parse_real(value, key));
    else if (key == "solver_max_iterations") cfg.solver_max_iterations = static_cast<int>(parse_real(value, key));
    else if (key == "exact_ball") cfg.exact_ball = parse_real(value, key) != 0.0;
    else if (key == "threads") cfg.threads = static_cast<int>(parse_real(value, key));
    else throw InvalidArgument("config: unknown key '" + key + "'");
  }
  cfg.finalize_defaults();
  cfg.validate();
  return cfg;
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("config: cannot write " + path);
  os << "m = " << m << "\n";
  os << "n_u = " << n_u << "\n";
  os << "n_y = " << n_y << "\n";
  os << "truth = " << format_vector(truth) << "\n";
  os << "w_bar = " << format_vector(w_bar) << "\n";
  os << "horizon = " << horizon << "\n";
  os << "epsilon = " << format_real(epsilon) << "\n";
  os << "E = " << format_vector(E) << "\n";
  os << "p = " << format_real(p) << "\n";
  os << "C = " << format_vector(C) << "\n";
  os << "g = " << format_vector(g) << "\n";
  os << "Q = " << format_vector(Q) << "\n";
  os << "S = " << format_vector(S) << "\n";
  os << "mu0 = " << format_vector(mu0) << "\n";
  os << "sigma0 = " << format_real(sigma0) << "\n";
  os << "phi0 = " << format_vector(phi0) << "\n";
  os << "fps_lower = " << format_real(fps_lower) << "\n";
  os << "fps_upper = " << format_real(fps_upper) << "\n";
  os << "fps_cap = " << fps_cap << "\n";
  os << "k_bar = " << k_bar << "\n";
  os << "delta_bar = " << format_real(delta_bar) << "\n";
  os << "c_tilde = " << format_real(c_tilde) << "\n";
  os << "c_bar = " << format_real(c_bar) << "\n";
  os << "q_override = " << q_override << "\n";
  os << "offline_seed = " << offline_seed << "\n";
  os << "t_end = " << t_end << "\n";
  os << "runs = " << runs << "\n";
  os << "run_seed_base = " << run_seed_base << "\n";
  os << "solver_max_iterations = " << solver_max_iterations << "\n";
  os << "exact_ball = " << (exact_ball ? 1 : 0) << "\n";
  os << "threads = " << threads << "\n";
  if (!os) throw IoError("config: write failed for " + path);
}

}  // namespace asmpc::sim
