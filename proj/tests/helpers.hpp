#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "temba/corpus.hpp"

namespace temba::testing {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("temba-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// The three smart-home sentences with DEVICE/ROOM spans.
inline Corpus smart_home_corpus() {
  Corpus c;
  c.intent_set = {"turn_on"};
  auto add = [&](const std::string& id, const std::string& device,
                 const std::string& room) {
    Utterance u;
    u.id = id;
    u.tokens = {"Turn", "on", device, "in", room, "."};
    u.slots = {{2, 3, "DEVICE"}, {4, 5, "ROOM"}};
    u.intent = "turn_on";
    c.utterances.push_back(std::move(u));
  };
  add("s1", "television", "lounge");
  add("s2", "lamp", "bedroom");
  add("s3", "fan", "study");
  return c;
}

}  // namespace temba::testing
