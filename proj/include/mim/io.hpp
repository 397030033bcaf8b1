#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "mim/studies.hpp"

namespace mim {

/// Shortest round-trip representation; the only float format used in CSV output.
std::string format_double(double v);

/// SHA-1 of "blob <size>\0" + content, as git computes it.
std::string git_blob_hash(const std::string& content);

class CsvWriter {
public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  CsvWriter& cell(const std::string& s);
  CsvWriter& cell(double v);
  CsvWriter& cell(std::size_t v);
  CsvWriter& cell(int v);
  void end_row();
  void close();
  ~CsvWriter();

private:
  std::string path_;
  std::string buf_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
  bool closed_ = false;
};

void write_moments_csv(const std::string& path, const std::vector<MomentRow>& rows);
void write_exponents_csv(const std::string& path, const std::vector<std::pair<std::string, ExponentFit>>& fits);
void write_cauchy_csv(const std::string& path, const CauchyReport& rep);
void write_universality_csv(const std::string& path, const UniversalityReport& rep);
void write_sg_csv(const std::string& path, const std::vector<SgRow>& rows);
void write_counterterms_csv(const std::string& path, const CalibratedLadder& ladder);

/// Writes config.json (the resolved config) and manifest.json (command, config
/// hash, hashes of every regular file in dir).
void write_manifest(const std::string& dir, const std::string& command, const nlohmann::json& config,
                    const nlohmann::json& extra = nlohmann::json::object());

/// Writes `content` to path, creating parent directories.
void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

}  // namespace mim
