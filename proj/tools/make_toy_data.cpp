// Copyright 2026 The Roofer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Writes the toy corpora: qa.jsonl, cls.jsonl, kb.tsv and paragraphs.txt.
//
//   roofer_toydata OUT_DIR [--qa N] [--cls N] [--seed S]

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "roofer/toy_data.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate toy QA and classification corpora"};
  std::string out_dir;
  std::size_t n_qa = 32, n_cls = 64;
  std::uint64_t seed = 7;
  app.add_option("out_dir", out_dir)->required();
  app.add_option("--qa", n_qa, "number of QA examples");
  app.add_option("--cls", n_cls, "number of classification examples");
  app.add_option("--seed", seed);
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);
    const auto dir = std::filesystem::path(out_dir);
    const auto qa = roofer::toy::make_qa(n_qa, seed);
    roofer::toy::write_qa_jsonl(qa.records, (dir / "qa.jsonl").string());
    roofer::toy::write_kb(qa.triples, (dir / "kb.tsv").string());
    roofer::toy::write_cls_jsonl(roofer::toy::make_cls(n_cls, seed), (dir / "cls.jsonl").string());
    std::ofstream paragraphs(dir / "paragraphs.txt", std::ios::binary);
    for (const auto& r : qa.records) paragraphs << r.paragraph << '\n';
  } catch (const std::exception& e) {
    std::cerr << "roofer_toydata: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
