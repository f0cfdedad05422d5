// Writes the sample corpora under data/toy/ used in the README walkthrough.

#include "toy_corpus.hpp"

#include "statemem/io.hpp"

#include <filesystem>
#include <iostream>

int main(int argc, char** argv)
{
    const std::filesystem::path dir = argc > 1 ? argv[1] : "data/toy";
    std::filesystem::create_directories(dir);
    const auto train = statemem::testing::make_toy_corpus(2000, 7);
    const auto valid = statemem::testing::make_toy_corpus(200, 8);
    statemem::write_file_atomic((dir / "train.txt").string(), statemem::testing::join_lines(train.raw_lines));
    statemem::write_file_atomic((dir / "valid.txt").string(), statemem::testing::join_lines(valid.raw_lines));
    statemem::save_tagged_corpus((dir / "tagged.tsv").string(), train.tagged);
    std::cout << "wrote " << dir.string() << '\n';
    return 0;
}
