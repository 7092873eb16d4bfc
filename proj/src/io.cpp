#include "multimix/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "multimix/version.hpp"

namespace multimix::io {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw invalid_input_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw invalid_input_error("cannot open for reading: " + path.string());
  return in;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw invalid_input_error("cannot parse number '" + s + "' in " + context);
  }
}

long parse_long(const std::string& s, const std::string& context) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw invalid_input_error("cannot parse integer '" + s + "' in " + context);
  }
}

bool parse_bool(const std::string& s, const std::string& context) {
  if (s == "true" || s == "TRUE" || s == "1") return true;
  if (s == "false" || s == "FALSE" || s == "0") return false;
  throw invalid_input_error("cannot parse boolean '" + s + "' in " + context);
}

Matrix read_matrix_csv(const fs::path& path, const std::string& what) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw invalid_input_error(what + " file is empty: " + path.string());
  const std::size_t cols = split_csv(line).size();
  if (cols == 0) throw invalid_input_error(what + " file has no columns");
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    auto fields = split_csv(t);
    if (fields.size() != cols)
      throw invalid_input_error(what + " row " + std::to_string(rows + 1) +
                                " has " + std::to_string(fields.size()) +
                                " fields, expected " + std::to_string(cols));
    for (const auto& f : fields) values.push_back(parse_double(f, what));
    ++rows;
  }
  if (rows == 0) throw invalid_input_error(what + " file has no data rows");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = values[i * cols + j];
  return m;
}

}  // namespace

void write_counts_csv(const fs::path& path, const Matrix& y) {
  std::ofstream out = open_out(path);
  for (int j = 0; j < y.cols(); ++j)
    out << (j ? "," : "") << "y" << (j + 1);
  out << "\n";
  for (int i = 0; i < y.rows(); ++i) {
    for (int j = 0; j < y.cols(); ++j)
      out << (j ? "," : "") << format_double(y(i, j));
    out << "\n";
  }
}

Matrix read_counts_csv(const fs::path& path) {
  return read_matrix_csv(path, "counts");
}

void write_covariates_csv(const fs::path& path, const Matrix& x) {
  std::ofstream out = open_out(path);
  for (int j = 0; j < x.cols(); ++j)
    out << (j ? "," : "") << "x" << (j + 1);
  out << "\n";
  for (int i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < x.cols(); ++j)
      out << (j ? "," : "") << format_double(x(i, j));
    out << "\n";
  }
}

Matrix read_covariates_csv(const fs::path& path) {
  return read_matrix_csv(path, "covariates");
}

void write_labels_csv(const fs::path& path, const AllocationVector& labels) {
  std::ofstream out = open_out(path);
  out << "label\n";
  for (int zi : labels.z) out << (zi + 1) << "\n";
}

AllocationVector read_labels_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw invalid_input_error("labels file is empty: " + path.string());
  AllocationVector out;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    long v = parse_long(t, "labels");
    if (v < 1) throw invalid_input_error("labels must be >= 1");
    out.z.push_back(static_cast<int>(v - 1));
  }
  if (out.z.empty()) throw invalid_input_error("labels file has no data rows");
  return out;
}

void write_responsibilities_csv(const fs::path& path, const Responsibilities& w) {
  std::ofstream out = open_out(path);
  for (int k = 0; k < w.K(); ++k) out << (k ? "," : "") << "w" << (k + 1);
  out << "\n";
  for (int i = 0; i < w.n(); ++i) {
    for (int k = 0; k < w.K(); ++k)
      out << (k ? "," : "") << format_double(w.w(i, k));
    out << "\n";
  }
}

Responsibilities read_responsibilities_csv(const fs::path& path) {
  Responsibilities w;
  w.w = read_matrix_csv(path, "responsibilities");
  return w;
}

void write_selection_csv(const fs::path& path, const em::SelectionScores& scores) {
  std::ofstream out = open_out(path);
  out << "K,loglik,d_K,BIC,ICL\n";
  for (const auto& row : scores.rows)
    out << row.K << "," << format_double(row.loglik) << "," << row.d_K << ","
        << format_double(row.bic) << "," << format_double(row.icl) << "\n";
}

void write_params_json(const fs::path& path, const MixtureParams& params) {
  ordered_json doc;
  const int K = params.K();
  const int J = K > 0 ? static_cast<int>(params.beta[0].rows()) : 0;
  const int P = K > 0 ? static_cast<int>(params.beta[0].cols()) : 0;
  doc["K"] = K;
  doc["J"] = J;
  doc["P"] = P;
  doc["pi"] = std::vector<double>(params.pi.data(), params.pi.data() + K);
  ordered_json beta = ordered_json::array();
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < J; ++j)
      for (int p = 0; p < P; ++p)
        beta.push_back({{"k", k + 1}, {"j", j + 1}, {"p", p + 1},
                        {"value", params.beta[k](j, p)}});
  doc["beta"] = std::move(beta);
  std::ofstream out = open_out(path);
  out << doc.dump(2) << "\n";
}

MixtureParams read_params_json(const fs::path& path) {
  std::ifstream in = open_in(path);
  ordered_json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw invalid_input_error("cannot parse " + path.string() + ": " + e.what());
  }
  MixtureParams params;
  const int K = doc.at("K").get<int>();
  const int J = doc.at("J").get<int>();
  const int P = doc.at("P").get<int>();
  auto pi = doc.at("pi").get<std::vector<double>>();
  if (static_cast<int>(pi.size()) != K)
    throw invalid_input_error("params: pi length != K");
  params.pi = Eigen::Map<Vector>(pi.data(), K);
  params.beta.assign(K, Matrix::Zero(J, P));
  for (const auto& item : doc.at("beta"))
    params.beta.at(item.at("k").get<int>() - 1)(item.at("j").get<int>() - 1,
                                                item.at("p").get<int>() - 1) =
        item.at("value").get<double>();
  return params;
}

void write_true_params_json(const fs::path& path, const sim::SimResult& sim) {
  ordered_json doc;
  const int K = sim.truth.K();
  const int J = static_cast<int>(sim.truth.beta[0].rows());
  const int P = static_cast<int>(sim.truth.beta[0].cols());
  doc["K"] = K;
  doc["J"] = J;
  doc["P"] = P;
  doc["sigma"] = sim.sigma;
  doc["pi"] = std::vector<double>(sim.truth.pi.data(), sim.truth.pi.data() + K);
  ordered_json beta = ordered_json::array();
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < J; ++j)
      for (int p = 0; p < P; ++p)
        beta.push_back({{"k", k + 1}, {"j", j + 1}, {"p", p + 1},
                        {"value", sim.truth.beta[k](j, p)}});
  doc["beta"] = std::move(beta);
  std::ofstream out = open_out(path);
  out << doc.dump(2) << "\n";
}

void write_trace_csv(const fs::path& path,
                     const std::vector<mcmc::TraceRecord>& records, int k_max,
                     int n, int J, int P) {
  std::ofstream out = open_out(path);
  out << "iteration,kind,k,j,p,value\n";
  for (std::size_t t = 0; t < records.size(); ++t) {
    const auto& rec = records[t];
    const std::string it = std::to_string(t + 1);
    out << it << ",k0,0,0,0," << rec.k0 << "\n";
    out << it << ",logtarget,0,0,0," << format_double(rec.log_target) << "\n";
    for (int k = 0; k < k_max; ++k)
      out << it << ",pi," << (k + 1) << ",0,0," << format_double(rec.pi(k)) << "\n";
    for (int k = 0; k < k_max; ++k)
      for (int j = 0; j < J; ++j)
        for (int p = 0; p < P; ++p)
          out << it << ",beta," << (k + 1) << "," << (j + 1) << "," << (p + 1)
              << "," << format_double(rec.beta[k](j, p)) << "\n";
    for (int i = 0; i < n; ++i)
      out << it << ",z," << (i + 1) << ",0,0," << (rec.z.z[i] + 1) << "\n";
  }
}

mcmc::SamplerTrace read_trace_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line))
    throw invalid_input_error("trace file is empty: " + path.string());
  struct Row {
    long it;
    std::string kind;
    int k, j, p;
    double value;
  };
  std::vector<Row> rows;
  long max_it = 0;
  int k_max = 0, n = 0, J = 0, P = 0;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    auto f = split_csv(t);
    if (f.size() != 6)
      throw invalid_input_error("trace row must have 6 fields: " + t);
    Row r{parse_long(f[0], "trace"), f[1], static_cast<int>(parse_long(f[2], "trace")),
          static_cast<int>(parse_long(f[3], "trace")),
          static_cast<int>(parse_long(f[4], "trace")), parse_double(f[5], "trace")};
    max_it = std::max(max_it, r.it);
    if (r.kind == "pi") k_max = std::max(k_max, r.k);
    if (r.kind == "z") n = std::max(n, r.k);
    if (r.kind == "beta") {
      J = std::max(J, r.j);
      P = std::max(P, r.p);
    }
    rows.push_back(std::move(r));
  }
  if (max_it == 0 || k_max == 0 || n == 0)
    throw invalid_input_error("trace file is incomplete: " + path.string());
  mcmc::SamplerTrace trace;
  trace.k_max = k_max;
  trace.n = n;
  trace.J = J;
  trace.P = P;
  trace.records.resize(max_it);
  for (auto& rec : trace.records) {
    rec.z.z.assign(n, 0);
    rec.pi = Vector::Zero(k_max);
    rec.beta.assign(k_max, Matrix::Zero(J, P));
  }
  for (const auto& r : rows) {
    auto& rec = trace.records[r.it - 1];
    if (r.kind == "pi") {
      rec.pi(r.k - 1) = r.value;
    } else if (r.kind == "beta") {
      rec.beta[r.k - 1](r.j - 1, r.p - 1) = r.value;
    } else if (r.kind == "z") {
      rec.z.z[r.k - 1] = static_cast<int>(r.value) - 1;
    } else if (r.kind == "k0") {
      rec.k0 = static_cast<int>(r.value);
    } else if (r.kind == "logtarget") {
      rec.log_target = r.value;
    } else {
      throw invalid_input_error("trace file has unknown kind '" + r.kind + "'");
    }
  }
  for (const auto& rec : trace.records) trace.k0.push_back(rec.k0);
  return trace;
}

void write_permutations_csv(const fs::path& path,
                            const std::vector<std::vector<int>>& permutations) {
  std::ofstream out = open_out(path);
  out << "iteration,from,to\n";
  for (std::size_t t = 0; t < permutations.size(); ++t)
    for (std::size_t k = 0; k < permutations[t].size(); ++k)
      out << (t + 1) << "," << (k + 1) << "," << (permutations[t][k] + 1) << "\n";
}

void write_posterior_summary_json(const fs::path& path,
                                  const relabel::PosteriorSummary& summary) {
  ordered_json doc;
  doc["level"] = summary.level;
  ordered_json dist;
  for (const auto& [k0, p] : summary.k0_distribution)
    dist[std::to_string(k0)] = p;
  doc["k0_distribution"] = std::move(dist);
  doc["modal_k0"] = summary.modal_k0;
  doc["n_used_iterations"] = summary.n_used_iterations;
  ordered_json alive = ordered_json::array();
  for (int k : summary.alive_labels) alive.push_back(k + 1);
  doc["alive_components"] = std::move(alive);
  ordered_json clustering = ordered_json::array();
  for (int zi : summary.best_clustering.z) clustering.push_back(zi + 1);
  doc["best_clustering"] = std::move(clustering);
  ordered_json pis = ordered_json::array();
  for (std::size_t a = 0; a < summary.alive_labels.size(); ++a)
    pis.push_back({{"k", summary.alive_labels[a] + 1},
                   {"mean", summary.pi_summary[a].mean},
                   {"lower", summary.pi_summary[a].lower},
                   {"upper", summary.pi_summary[a].upper}});
  doc["pi"] = std::move(pis);
  ordered_json betas = ordered_json::array();
  for (std::size_t a = 0; a < summary.alive_labels.size(); ++a)
    for (std::size_t j = 0; j < summary.beta_summary[a].size(); ++j)
      for (std::size_t p = 0; p < summary.beta_summary[a][j].size(); ++p)
        betas.push_back({{"k", summary.alive_labels[a] + 1},
                         {"j", static_cast<int>(j) + 1},
                         {"p", static_cast<int>(p) + 1},
                         {"mean", summary.beta_summary[a][j][p].mean},
                         {"lower", summary.beta_summary[a][j][p].lower},
                         {"upper", summary.beta_summary[a][j][p].upper}});
  doc["beta"] = std::move(betas);
  ordered_json membership = ordered_json::array();
  for (int i = 0; i < summary.membership.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (int a = 0; a < summary.membership.cols(); ++a)
      row.push_back(summary.membership(i, a));
    membership.push_back(std::move(row));
  }
  doc["membership_probabilities"] = std::move(membership);
  std::ofstream out = open_out(path);
  out << doc.dump(2) << "\n";
}

void write_diagnostics_json(const fs::path& path,
                            const mcmc::SamplerTrace& trace) {
  ordered_json doc;
  doc["mala_acceptance"] = trace.mala_acceptance;
  doc["swap_acceptance"] = trace.swap_acceptance;
  doc["final_taus"] = trace.final_taus;
  doc["nonfinite_proposals"] = trace.nonfinite_proposals;
  doc["retained_iterations"] = trace.records.size();
  std::ofstream out = open_out(path);
  out << doc.dump(2) << "\n";
}

namespace {

void apply_em_key(em::EMConfig& em, const std::string& key,
                  const std::string& value) {
  if (key == "maxIter") em.max_iter = static_cast<int>(parse_long(value, key));
  else if (key == "emthreshold") em.threshold = parse_double(value, key);
  else if (key == "maxNR") em.max_nr = static_cast<int>(parse_long(value, key));
  else if (key == "tsplit") em.t_split = static_cast<int>(parse_long(value, key));
  else if (key == "msplit") em.m_split = static_cast<int>(parse_long(value, key));
  else if (key == "split") em.use_split_schemes = parse_bool(value, key);
  else if (key == "R0") em.r0 = parse_double(value, key);
  else
    throw invalid_input_error("unknown key '" + key + "' in [em_parameters]");
}

void apply_mcmc_key(FileConfig& config, const std::string& key,
                    const std::string& value) {
  auto& m = config.mcmc;
  if (key == "tau") m.tau0 = parse_double(value, key);
  else if (key == "nu2") config.nu2 = parse_double(value, key);
  else if (key == "mcmc_cycles") m.cycles = static_cast<int>(parse_long(value, key));
  else if (key == "iter_per_cycle") m.iter_per_cycle = static_cast<int>(parse_long(value, key));
  else if (key == "nChains") m.n_chains = static_cast<int>(parse_long(value, key));
  else if (key == "dirPriorAlphas") {
    config.alphas.clear();
    for (const auto& field : split_csv(value))
      config.alphas.push_back(parse_double(field, key));
  } else if (key == "warm_up") m.warm_up = parse_long(value, key);
  else if (key == "checkAR") m.check_ar = static_cast<int>(parse_long(value, key));
  else if (key == "ar_low") m.ar_low = parse_double(value, key);
  else if (key == "ar_up") m.ar_high = parse_double(value, key);
  else if (key == "burn") m.burn_cycles = static_cast<int>(parse_long(value, key));
  else if (key == "withRandom") m.with_random_permutation = parse_bool(value, key);
  else
    throw invalid_input_error("unknown key '" + key + "' in [mcmc_parameters]");
}

}  // namespace

FileConfig parse_config_file(const fs::path& path) {
  std::ifstream in = open_in(path);
  FileConfig config;
  std::string line;
  enum class Section { kNone, kEm, kMcmc } section = Section::kNone;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      std::string name = trim(t.substr(1, t.size() - 2));
      if (name == "em_parameters") section = Section::kEm;
      else if (name == "mcmc_parameters") section = Section::kMcmc;
      else
        throw invalid_input_error("unknown config section '" + name + "'");
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw invalid_input_error("config line " + std::to_string(lineno) +
                                " is not key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (section == Section::kNone)
      throw invalid_input_error("config key '" + key + "' outside a section");
    if (section == Section::kEm) apply_em_key(config.em, key, value);
    else apply_mcmc_key(config, key, value);
  }
  return config;
}

std::string config_snapshot_json(const FileConfig& config) {
  ordered_json doc;
  ordered_json em;
  em["maxIter"] = config.em.max_iter;
  em["emthreshold"] = config.em.threshold;
  em["maxNR"] = config.em.max_nr;
  em["tsplit"] = config.em.t_split;
  em["msplit"] = config.em.m_split;
  em["split"] = config.em.use_split_schemes;
  em["R0"] = config.em.r0;
  doc["em_parameters"] = std::move(em);
  ordered_json mc;
  mc["tau"] = config.mcmc.tau0;
  mc["nu2"] = config.nu2;
  mc["mcmc_cycles"] = config.mcmc.cycles;
  mc["iter_per_cycle"] = config.mcmc.iter_per_cycle;
  mc["nChains"] = config.mcmc.n_chains;
  if (!config.alphas.empty()) mc["dirPriorAlphas"] = config.alphas;
  mc["warm_up"] = config.mcmc.warm_up;
  mc["checkAR"] = config.mcmc.check_ar;
  mc["ar_low"] = config.mcmc.ar_low;
  mc["ar_up"] = config.mcmc.ar_high;
  mc["burn"] = config.mcmc.burn_cycles;
  mc["withRandom"] = config.mcmc.with_random_permutation;
  doc["mcmc_parameters"] = std::move(mc);
  return doc.dump();
}

sim::SimConfig parse_sim_config_file(const fs::path& path) {
  std::ifstream in = open_in(path);
  sim::SimConfig config;
  std::string line;
  bool in_section = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      std::string name = trim(t.substr(1, t.size() - 2));
      if (name != "simulate")
        throw invalid_input_error("unknown config section '" + name + "'");
      in_section = true;
      continue;
    }
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw invalid_input_error("config line " + std::to_string(lineno) +
                                " is not key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (!in_section)
      throw invalid_input_error("config key '" + key + "' outside a section");
    if (key == "n") config.n = static_cast<int>(parse_long(value, key));
    else if (key == "K") config.K = static_cast<int>(parse_long(value, key));
    else if (key == "P") config.P = static_cast<int>(parse_long(value, key));
    else if (key == "categories") config.n_categories = static_cast<int>(parse_long(value, key));
    else if (key == "nb_r") config.nb_r = parse_double(value, key);
    else if (key == "nb_p") config.nb_p = parse_double(value, key);
    else if (key == "sigma_min") config.sigma_min = parse_double(value, key);
    else if (key == "sigma_max") config.sigma_max = parse_double(value, key);
    else if (key == "spike_prob") config.spike_prob = parse_double(value, key);
    else
      throw invalid_input_error("unknown key '" + key + "' in [simulate]");
  }
  return config;
}

std::string fnv1a_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw invalid_input_error("cannot digest missing file: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + hex;
}

void write_manifest(const fs::path& path, const std::string& command,
                    std::uint64_t seed, int threads,
                    const std::string& config_snapshot,
                    const std::map<std::string, std::string>& input_digests,
                    double duration_seconds) {
  ordered_json doc;
  doc["command"] = command;
  doc["version"] = kVersion;
  doc["seed"] = seed;
  doc["threads"] = threads;
  doc["config"] = ordered_json::parse(config_snapshot);
  ordered_json inputs = ordered_json::object();
  for (const auto& [file, digest] : input_digests) inputs[file] = digest;
  doc["inputs"] = std::move(inputs);
  doc["duration_seconds"] = duration_seconds;
  std::ofstream out = open_out(path);
  out << doc.dump(2) << "\n";
}

Dataset load_dataset(const fs::path& counts_path, const fs::path& covariates_path,
                     const LoadOptions& options) {
  Matrix y = read_counts_csv(counts_path);
  if (options.baseline != 0) {
    const int C = static_cast<int>(y.cols());
    if (options.baseline < 1 || options.baseline > C)
      throw invalid_input_error("baseline category out of range");
    if (options.baseline != C) {
      Matrix rotated(y.rows(), C);
      int col = 0;
      for (int j = 0; j < C; ++j)
        if (j != options.baseline - 1) rotated.col(col++) = y.col(j);
      rotated.col(C - 1) = y.col(options.baseline - 1);
      y = std::move(rotated);
    }
  }
  Matrix design;
  if (covariates_path.empty()) {
    design = Matrix::Ones(y.rows(), 1);
  } else {
    Matrix x = read_covariates_csv(covariates_path);
    if (x.rows() != y.rows())
      throw invalid_input_error("counts and covariates row counts differ");
    if (options.standardize) {
      const int n = static_cast<int>(x.rows());
      for (int p = 0; p < x.cols(); ++p) {
        double mean = x.col(p).mean();
        double sd = std::sqrt((x.col(p).array() - mean).square().sum() / n);
        if (sd > 0.0) x.col(p) = (x.col(p).array() - mean) / sd;
        else x.col(p).array() -= mean;
      }
    }
    if (options.add_intercept) {
      design.resize(x.rows(), x.cols() + 1);
      design.col(0).setOnes();
      design.rightCols(x.cols()) = x;
    } else {
      design = std::move(x);
    }
  }
  return Dataset::build(std::move(y), std::move(design));
}

}  // namespace multimix::io
