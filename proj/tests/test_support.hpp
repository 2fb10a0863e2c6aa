#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

#include "agentmem/common.hpp"
#include "agentmem/config.hpp"
#include "agentmem/engine.hpp"

namespace agentmem::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "agentmem-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// 2026-01-01T00:00:00Z
inline Timestamp epoch() { return from_epoch_ms(1'767'225'600'000); }

inline Config config_in(const TempDir& dir) {
  Config c;
  c.memory_db = dir / "memories.db";
  return c;
}

inline AgentContext agent(const std::string& id, Protocol p = Protocol::CLI) { return {id, p}; }

}  // namespace agentmem::testing
