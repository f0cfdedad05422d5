#include "statemem/corpus.hpp"

#include "statemem/io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace statemem {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string lowercase(std::string_view s)
{
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string normalize_part(std::string_view part)
{
    if (part == "N") return "N";
    if (is_number_token(part)) return "N";
    return lowercase(part);
}

}  // namespace

bool is_number_token(std::string_view token)
{
    std::size_t i = 0;
    if (!token.empty() && (token[0] == '+' || token[0] == '-')) i = 1;
    bool any_digit = false;
    for (; i < token.size(); ++i) {
        const char c = token[i];
        if (c == ',' || c == '.') continue;
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
        any_digit = true;
    }
    return any_digit;
}

std::vector<std::string> normalize_token(std::string_view raw)
{
    if (raw.empty()) return {};
    if (is_number_token(raw)) return {"N"};

    // Split at hyphens whose neighbours are both alphanumeric.
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
        if (raw[i] == '-' && is_alnum(raw[i - 1]) && is_alnum(raw[i + 1])) {
            out.push_back(normalize_part(raw.substr(start, i - start)));
            start = i + 1;
        }
    }
    out.push_back(normalize_part(raw.substr(start)));
    return out;
}

std::vector<std::string> normalize_line(std::string_view line)
{
    std::vector<std::string> out;
    for (const auto& raw : split_whitespace(line)) {
        for (auto& t : normalize_token(raw)) out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary()
{
    add(std::string(kUnk), 0);
    add(std::string(kEos), 0);
}

WordId Vocabulary::add(std::string token, std::size_t count)
{
    if (auto it = index_.find(token); it != index_.end()) return it->second;
    const WordId id = tokens_.size();
    index_.emplace(token, id);
    tokens_.push_back(std::move(token));
    counts_.push_back(count);
    return id;
}

WordId Vocabulary::encode(std::string_view token) const
{
    auto it = index_.find(std::string(token));
    return it == index_.end() ? unk() : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

const std::string& Vocabulary::decode(WordId id) const
{
    if (id >= tokens_.size()) throw std::out_of_range("vocabulary index " + std::to_string(id) + " out of range");
    return tokens_[id];
}

std::uint64_t Vocabulary::hash() const
{
    std::string joined;
    for (const auto& t : tokens_) {
        joined += t;
        joined += '\n';
    }
    return fnv1a64(joined);
}

Vocabulary build_vocab(const Sentences& sentences, std::size_t min_count, std::size_t max_size)
{
    std::size_t total = 0;
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& s : sentences) {
        for (const auto& t : s) {
            ++freq[t];
            ++total;
        }
    }
    if (total == 0) throw std::invalid_argument("build_vocab: empty token stream");

    Vocabulary vocab;
    std::vector<std::pair<std::string, std::size_t>> entries;
    for (auto& [tok, n] : freq) {
        if (tok == Vocabulary::kUnk) vocab.add_count(vocab.unk(), n);
        else if (tok == Vocabulary::kEos) vocab.add_count(vocab.eos(), n);
        else entries.emplace_back(tok, n);
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });

    for (auto& [tok, n] : entries) {
        const bool room = max_size == 0 || vocab.size() < max_size;
        if (n >= min_count && room) vocab.add(tok, n);
        else vocab.add_count(vocab.unk(), n);
    }
    return vocab;
}

std::vector<WordId> encode_sentences(const Sentences& sentences, const Vocabulary& vocab)
{
    std::vector<WordId> out;
    for (const auto& s : sentences) {
        for (const auto& t : s) out.push_back(vocab.encode(t));
        out.push_back(vocab.eos());
    }
    return out;
}

Sentences read_plain_corpus(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open corpus " + path);
    Sentences out;
    std::string line;
    while (std::getline(is, line)) {
        auto toks = split_whitespace(line);
        if (!toks.empty()) out.push_back(std::move(toks));
    }
    return out;
}

void save_vocab(const std::string& path, const Vocabulary& vocab)
{
    std::ostringstream os;
    for (WordId i = 0; i < vocab.size(); ++i) os << vocab.decode(i) << ' ' << vocab.count(i) << '\n';
    write_file_atomic(path, os.str());
}

Vocabulary load_vocab(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open vocabulary " + path);
    Vocabulary vocab;
    std::string line;
    std::size_t lineno = 0;
    std::size_t entries = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto f = split_whitespace(line);
        if (f.empty()) continue;
        if (f.size() != 2) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 'token count'");
        const std::size_t n = std::stoull(f[1]);
        const std::size_t expected = vocab.size();
        if (entries < 2) {
            // specials are pre-seeded at indices 0 and 1
            if (f[0] != vocab.decode(entries))
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected special token " +
                                         vocab.decode(entries));
            vocab.add_count(entries, n);
        } else if (vocab.add(f[0], n) != expected) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": duplicate token '" + f[0] + "'");
        }
        ++entries;
    }
    return vocab;
}

// ---------------------------------------------------------------------------
// Batching

BatchPlan::BatchPlan(std::vector<std::vector<WordId>> streams, std::size_t seq_len)
    : streams_(std::move(streams)), seq_len_(seq_len), windows_(0)
{
    if (streams_.empty() || seq_len_ == 0) throw std::invalid_argument("BatchPlan: empty plan");
    const std::size_t len = streams_.front().size();
    for (const auto& s : streams_) {
        if (s.size() != len) throw std::invalid_argument("BatchPlan: streams differ in length");
    }
    windows_ = len / seq_len_;
    if (windows_ == 0) throw std::invalid_argument("BatchPlan: stream shorter than one window");
    for (auto& s : streams_) s.resize(windows_ * seq_len_);
}

BatchPlan batchify(const std::vector<WordId>& indices, std::size_t batch, std::size_t seq_len)
{
    if (batch == 0 || seq_len == 0) throw std::invalid_argument("batchify: batch and sequence length must be positive");
    if (indices.size() < batch * seq_len)
        throw std::invalid_argument("batchify: stream of " + std::to_string(indices.size()) +
                                    " tokens is shorter than batch*seq_len = " + std::to_string(batch * seq_len));
    const std::size_t segment = indices.size() / batch;
    const std::size_t used = (segment / seq_len) * seq_len;
    std::vector<std::vector<WordId>> streams(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const auto first = indices.begin() + static_cast<std::ptrdiff_t>(b * segment);
        streams[b].assign(first, first + static_cast<std::ptrdiff_t>(used));
    }
    return BatchPlan(std::move(streams), seq_len);
}

// ---------------------------------------------------------------------------
// Tagged corpora

std::set<std::string> TaggedCorpus::tag_set() const
{
    std::set<std::string> tags;
    for (const auto& p : pairs) tags.insert(p.tag);
    return tags;
}

TaggedCorpus parse_tagged_corpus(std::string_view text)
{
    TaggedCorpus corpus;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    auto close_sentence = [&] {
        if (corpus.pairs.size() > (corpus.sentence_ends.empty() ? 0 : corpus.sentence_ends.back()))
            corpus.sentence_ends.push_back(corpus.pairs.size());
    };
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (trim(line).empty()) {
            close_sentence();
            continue;
        }
        const auto fields = split(line, '\t');
        if (fields.size() != 2 || trim(fields[0]).empty() || trim(fields[1]).empty())
            throw std::runtime_error("tagged corpus line " + std::to_string(lineno) + ": expected 'token<TAB>tag'");
        corpus.pairs.push_back({trim(fields[0]), trim(fields[1])});
    }
    close_sentence();
    return corpus;
}

TaggedCorpus load_tagged_corpus(const std::string& path) { return parse_tagged_corpus(read_file(path)); }

void save_tagged_corpus(const std::string& path, const TaggedCorpus& corpus)
{
    std::ostringstream os;
    std::size_t next_end = 0;
    for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
        os << corpus.pairs[i].token << '\t' << corpus.pairs[i].tag << '\n';
        if (next_end < corpus.sentence_ends.size() && corpus.sentence_ends[next_end] == i + 1) {
            os << '\n';
            ++next_end;
        }
    }
    write_file_atomic(path, os.str());
}

TaggedCorpus normalize_tagged(const TaggedCorpus& corpus)
{
    TaggedCorpus out;
    std::size_t next_end = 0;
    for (std::size_t i = 0; i < corpus.pairs.size(); ++i) {
        for (auto& t : normalize_token(corpus.pairs[i].token)) out.pairs.push_back({std::move(t), corpus.pairs[i].tag});
        if (next_end < corpus.sentence_ends.size() && corpus.sentence_ends[next_end] == i + 1) {
            out.sentence_ends.push_back(out.pairs.size());
            ++next_end;
        }
    }
    return out;
}

bool disjoint(const ClassSpec& a, const ClassSpec& b)
{
    for (const auto& t : a.tags) {
        if (b.tags.count(t)) return false;
    }
    return true;
}

std::vector<ClassSpec> default_class_specs()
{
    return {
        {"nouns", {"NN", "NNS", "NNP", "NNPS"}},
        {"verbs", {"VB", "VBD", "VBG", "VBN", "VBP", "VBZ"}},
        {"adjectives", {"JJ", "JJR", "JJS"}},
        {"adverbs", {"RB", "RBR", "RBS"}},
        {"pronouns", {"PRP", "PRP$"}},
        {"conj-prep", {"CC", "IN"}},
        {"sg-noun", {"NN", "NNP"}},
        {"pl-noun", {"NNS", "NNPS"}},
        {"common", {"NN", "NNS"}},
        {"proper", {"NNP", "NNPS"}},
    };
}

const ClassSpec& find_class(const std::vector<ClassSpec>& specs, std::string_view name)
{
    for (const auto& s : specs) {
        if (s.name == name) return s;
    }
    throw std::invalid_argument("unknown word class '" + std::string(name) + "'");
}

std::map<WordId, std::string> dominant_tags(const TaggedCorpus& corpus, const Vocabulary& vocab)
{
    std::map<WordId, std::map<std::string, std::size_t>> counts;
    for (const auto& p : corpus.pairs) {
        const WordId id = vocab.encode(p.token);
        if (id == vocab.unk()) continue;
        ++counts[id][p.tag];
    }
    std::map<WordId, std::string> out;
    for (const auto& [id, tags] : counts) {
        // std::map iterates tags in lexicographic order, so ">" keeps the smallest on ties.
        const std::pair<const std::string, std::size_t>* best = nullptr;
        for (const auto& entry : tags) {
            if (!best || entry.second > best->second) best = &entry;
        }
        out.emplace(id, best->first);
    }
    return out;
}

std::set<WordId> class_members(const TaggedCorpus& corpus, const ClassSpec& spec, const Vocabulary& vocab)
{
    if (spec.tags.empty()) throw std::invalid_argument("class '" + spec.name + "' has no tags");
    std::set<WordId> members;
    for (const auto& [id, tag] : dominant_tags(corpus, vocab)) {
        if (spec.tags.count(tag)) members.insert(id);
    }
    if (members.empty()) throw std::invalid_argument("class '" + spec.name + "' has no member words");
    return members;
}

}  // namespace statemem
