#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include "mcqdiff/dataset.hpp"

namespace mcqtest {

/// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& hint) {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("mcqdiff_" + hint + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline mcqdiff::MCQItem make_item(std::string id, std::string stem,
                                  std::vector<std::string> choices, int correct_index,
                                  double p_value) {
    mcqdiff::MCQItem item;
    item.id = std::move(id);
    item.stem = std::move(stem);
    item.choices = std::move(choices);
    item.correct_index = correct_index;
    item.labels["p_value"] = p_value;
    return item;
}

}  // namespace mcqtest
