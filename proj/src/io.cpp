#include "mim/io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/sha.h>

#include "mim/errors.hpp"

namespace mim {

namespace fs = std::filesystem;

std::string format_double(double v) { return fmt::format("{}", v); }

std::string git_blob_hash(const std::string& content) {
  std::string blob = fmt::format("blob {}", content.size());
  blob.push_back('\0');
  blob += content;
  unsigned char md[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), md);
  std::string hex;
  for (unsigned char c : md) hex += fmt::format("{:02x}", c);
  return hex;
}

void write_text(const std::string& path, const std::string& content) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ResourceError(fmt::format("cannot write {}", path));
  os << content;
  if (!os) throw ResourceError(fmt::format("write failed for {}", path));
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError(fmt::format("cannot read {}", path));
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) buf_ += (i ? "," : "") + header[i];
  buf_ += "\n";
}

CsvWriter& CsvWriter::cell(const std::string& s) {
  if (in_row_) buf_ += ",";
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    buf_ += q + "\"";
  } else {
    buf_ += s;
  }
  ++in_row_;
  return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }
CsvWriter& CsvWriter::cell(std::size_t v) { return cell(std::to_string(v)); }
CsvWriter& CsvWriter::cell(int v) { return cell(std::to_string(v)); }

void CsvWriter::end_row() {
  if (in_row_ != columns_) throw DomainError(fmt::format("{}: row has {} cells, header {}", path_, in_row_, columns_));
  buf_ += "\n";
  in_row_ = 0;
}

void CsvWriter::close() {
  if (closed_) return;
  closed_ = true;
  write_text(path_, buf_);
}

CsvWriter::~CsvWriter() {
  try {
    close();
  } catch (...) {
  }
}

void write_moments_csv(const std::string& path, const std::vector<MomentRow>& rows) {
  CsvWriter w(path, {"beta", "radius", "p", "estimate", "stderr", "n"});
  for (const auto& r : rows) {
    w.cell(r.beta).cell(r.radius).cell(r.p).cell(r.estimate.value).cell(r.estimate.stderr_).cell(r.estimate.n);
    w.end_row();
  }
  w.close();
}

void write_exponents_csv(const std::string& path, const std::vector<std::pair<std::string, ExponentFit>>& fits) {
  CsvWriter w(path, {"beta", "slope", "stderr", "r2"});
  for (const auto& [name, f] : fits) {
    w.cell(name).cell(f.slope).cell(f.stderr_).cell(f.r2);
    w.end_row();
  }
  w.close();
}

void write_cauchy_csv(const std::string& path, const CauchyReport& rep) {
  CsvWriter w(path, {"beta", "tau", "tau_prime", "distance", "stderr"});
  for (const auto& r : rep.rows) {
    w.cell(r.beta.to_string()).cell(r.tau).cell(r.tau_prime).cell(r.distance.value).cell(r.distance.stderr_);
    w.end_row();
  }
  w.close();
}

void write_universality_csv(const std::string& path, const UniversalityReport& rep) {
  CsvWriter w(path, {"beta", "tau", "radius", "ensemble_a", "moment_a", "stderr_a", "ensemble_b", "moment_b",
                     "stderr_b", "std_diff", "triple_norm", "n"});
  for (const auto& r : rep.rows) {
    w.cell(r.beta.to_string()).cell(r.tau).cell(r.radius);
    w.cell(rep.ensemble_a).cell(r.moment_a.value).cell(r.moment_a.stderr_);
    w.cell(rep.ensemble_b).cell(r.moment_b.value).cell(r.moment_b.stderr_);
    w.cell(r.std_diff).cell(r.triple_norm).cell(r.moment_a.n);
    w.end_row();
  }
  w.close();
}

void write_sg_csv(const std::string& path, const std::vector<SgRow>& rows) {
  CsvWriter w(path, {"ensemble", "functional", "variance", "variance_stderr", "dirichlet", "dirichlet_stderr",
                     "ratio", "ratio_stderr", "n"});
  for (const auto& r : rows) {
    w.cell(r.ensemble).cell(r.functional).cell(r.variance.value).cell(r.variance.stderr_);
    w.cell(r.dirichlet.value).cell(r.dirichlet.stderr_).cell(r.ratio).cell(r.ratio_stderr).cell(r.variance.n);
    w.end_row();
  }
  w.close();
}

void write_counterterms_csv(const std::string& path, const CalibratedLadder& ladder) {
  CsvWriter w(path, {"beta", "tau", "value", "stderr", "n"});
  for (std::size_t j = 0; j < ladder.taus.size(); ++j)
    for (const auto& [beta, e] : ladder.counterterms[j].entries) {
      w.cell(beta.to_string()).cell(ladder.taus[j]).cell(e.value).cell(e.stderr_).cell(e.n);
      w.end_row();
    }
  w.close();
}

void write_manifest(const std::string& dir, const std::string& command, const nlohmann::json& config,
                    const nlohmann::json& extra) {
  const std::string echo = config.dump(2) + "\n";
  write_text((fs::path(dir) / "config.json").string(), echo);
  nlohmann::json files = nlohmann::json::object();
  std::vector<fs::path> paths;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  for (const auto& p : paths) files[fs::relative(p, dir).generic_string()] = git_blob_hash(read_text(p.string()));
  nlohmann::json m{{"command", command}, {"config_hash", git_blob_hash(echo)}, {"config", config}, {"files", files}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_text((fs::path(dir) / "manifest.json").string(), m.dump(2) + "\n");
}

}  // namespace mim
