#pragma once

#include <filesystem>
#include <string>

#include "pepeval/pepeval.hpp"

#ifndef PEPEVAL_GOLDEN_DIR
#define PEPEVAL_GOLDEN_DIR "tests/golden"
#endif
#ifndef PEPEVAL_TEST_DATA_DIR
#define PEPEVAL_TEST_DATA_DIR "tests/data"
#endif
#ifndef PEPEVAL_ASSETS_DIR
#define PEPEVAL_ASSETS_DIR "assets"
#endif

namespace pepeval::testing {

inline std::filesystem::path golden_dir() { return PEPEVAL_GOLDEN_DIR; }
inline std::filesystem::path data_dir() { return PEPEVAL_TEST_DATA_DIR; }
inline std::filesystem::path assets_dir() { return PEPEVAL_ASSETS_DIR; }

inline std::string golden(const std::string& name) {
    return read_file(golden_dir() / (name + ".txt"));
}

inline Problem make_problem(std::string id, std::string question, const std::string& gold) {
    Problem p;
    p.id = std::move(id);
    p.question = std::move(question);
    p.gold = GoldAnswer::number(*Decimal::parse(gold));
    return p;
}

/// Fresh scratch directory under the build tree; callers own cleanup.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("pepeval-test-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace pepeval::testing
