#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

#include "rankgan/nn.hpp"
#include "rankgan/tensor.hpp"

namespace testing_support {

inline std::vector<double> to_vec(const rankgan::Tensor& t) { return {t.data().begin(), t.data().end()}; }

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("rankgan-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Parameters of `model` flattened in entry order.
inline std::vector<double> flatten(const rankgan::ModelParams& params) {
  std::vector<double> out;
  for (const auto& e : params.entries()) out.insert(out.end(), e.value.data().begin(), e.value.data().end());
  return out;
}

// Overwrites every parameter of `params` from `flat`, in entry order.
inline void assign(rankgan::ModelParams& params, const std::vector<double>& flat) {
  std::size_t k = 0;
  for (const auto& e : params.entries()) {
    rankgan::Tensor& t = params.mutable_at(e.name);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = flat[k++];
  }
}

}  // namespace testing_support
