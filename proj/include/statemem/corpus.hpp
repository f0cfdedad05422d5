#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace statemem {

using WordId = std::size_t;

// PTB-style normalization of one raw token: numbers become "N", hyphenated
// compounds are split, everything else is lowercased (ASCII only).
std::vector<std::string> normalize_token(std::string_view raw);
std::vector<std::string> normalize_line(std::string_view line);

bool is_number_token(std::string_view token);

class Vocabulary {
public:
    static constexpr std::string_view kUnk = "<unk>";
    static constexpr std::string_view kEos = "<eos>";

    // Only the two special tokens.
    Vocabulary();

    WordId unk() const { return 0; }
    WordId eos() const { return 1; }
    std::size_t size() const { return tokens_.size(); }

    // Token -> index, falling back to unk.
    WordId encode(std::string_view token) const;
    bool contains(std::string_view token) const;
    const std::string& decode(WordId id) const;
    std::size_t count(WordId id) const { return counts_.at(id); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    // Appends a token (no-op if present) and returns its index.
    WordId add(std::string token, std::size_t count);
    void add_count(WordId id, std::size_t count) { counts_.at(id) += count; }

    std::uint64_t hash() const;

private:
    std::vector<std::string> tokens_;
    std::vector<std::size_t> counts_;
    std::unordered_map<std::string, WordId> index_;
};

// Sentences are lists of (already normalized) tokens.
using Sentences = std::vector<std::vector<std::string>>;

// Specials first, then tokens with count >= min_count by descending count,
// ties lexicographic. max_size caps the total size (0 = unlimited); dropped
// tokens are accounted to unk.
Vocabulary build_vocab(const Sentences& sentences, std::size_t min_count, std::size_t max_size);

// Encodes sentences into one index stream with an eos token after each.
std::vector<WordId> encode_sentences(const Sentences& sentences, const Vocabulary& vocab);

Sentences read_plain_corpus(const std::string& path);
void save_vocab(const std::string& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::string& path);

// B parallel contiguous streams, each cut into length-L windows.
class BatchPlan {
public:
    BatchPlan(std::vector<std::vector<WordId>> streams, std::size_t seq_len);

    std::size_t batch_size() const { return streams_.size(); }
    std::size_t seq_len() const { return seq_len_; }
    std::size_t num_windows() const { return windows_; }
    const std::vector<WordId>& stream(std::size_t b) const { return streams_.at(b); }
    const std::vector<std::vector<WordId>>& streams() const { return streams_; }

    // Token at position i of window w in stream b.
    WordId token(std::size_t b, std::size_t w, std::size_t i) const { return streams_[b][w * seq_len_ + i]; }
    // The next-word target exists for every position except the very last of a stream.
    bool has_target(std::size_t w, std::size_t i) const { return w * seq_len_ + i + 1 < stream_length(); }
    WordId target(std::size_t b, std::size_t w, std::size_t i) const { return streams_[b][w * seq_len_ + i + 1]; }
    std::size_t stream_length() const { return windows_ * seq_len_; }
    std::size_t num_targets() const { return batch_size() * (stream_length() - 1); }

private:
    std::vector<std::vector<WordId>> streams_;
    std::size_t seq_len_;
    std::size_t windows_;
};

BatchPlan batchify(const std::vector<WordId>& indices, std::size_t batch, std::size_t seq_len);

struct TaggedToken {
    std::string token;
    std::string tag;
    friend bool operator==(const TaggedToken&, const TaggedToken&) = default;
};

struct TaggedCorpus {
    std::vector<TaggedToken> pairs;
    // Index one past the last pair of each sentence.
    std::vector<std::size_t> sentence_ends;

    std::set<std::string> tag_set() const;
};

TaggedCorpus load_tagged_corpus(const std::string& path);
TaggedCorpus parse_tagged_corpus(std::string_view text);
void save_tagged_corpus(const std::string& path, const TaggedCorpus& corpus);

// Normalizes every token; split parts inherit the tag of the original token.
TaggedCorpus normalize_tagged(const TaggedCorpus& corpus);

struct ClassSpec {
    std::string name;
    std::set<std::string> tags;
};

bool disjoint(const ClassSpec& a, const ClassSpec& b);

// Built-in POS groupings (nouns, verbs, ..., sg-noun, pl-noun, common, proper).
std::vector<ClassSpec> default_class_specs();
const ClassSpec& find_class(const std::vector<ClassSpec>& specs, std::string_view name);

// Most frequent tag per vocabulary word type (ties: lexicographically smallest tag).
std::map<WordId, std::string> dominant_tags(const TaggedCorpus& corpus, const Vocabulary& vocab);

// Vocabulary indices whose dominant tag is in spec.tags; unk excluded.
std::set<WordId> class_members(const TaggedCorpus& corpus, const ClassSpec& spec, const Vocabulary& vocab);

}  // namespace statemem
