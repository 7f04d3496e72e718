#pragma once
// Corpus generation and serialization: one Example per realizable factor
// assignment, deterministically shuffled, with a dense vocabulary.

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dctc/grammar.hpp"
#include "dctc/rng.hpp"

namespace dctc {

struct Vocabulary {
    static constexpr int kPad = 0, kBos = 1, kEos = 2, kUnk = 3;

    std::vector<std::string> id_to_token = {"<pad>", "<bos>", "<eos>", "<unk>"};
    std::map<std::string, int> token_to_id = {{"<pad>", 0}, {"<bos>", 1}, {"<eos>", 2}, {"<unk>", 3}};

    int add(const std::string& tok) {
        auto it = token_to_id.find(tok);
        if (it != token_to_id.end()) return it->second;
        const int id = static_cast<int>(id_to_token.size());
        id_to_token.push_back(tok);
        token_to_id.emplace(tok, id);
        return id;
    }

    int id(const std::string& tok) const {
        auto it = token_to_id.find(tok);
        return it == token_to_id.end() ? kUnk : it->second;
    }

    const std::string& token(int id) const {
        if (id < 0 || id >= static_cast<int>(id_to_token.size()))
            throw std::out_of_range("Vocabulary: id " + std::to_string(id) + " out of range");
        return id_to_token[static_cast<std::size_t>(id)];
    }

    int size() const { return static_cast<int>(id_to_token.size()); }
};

struct Example {
    std::vector<int> tokens;   // BOS ... EOS
    std::vector<int> factors;  // ground-truth assignment
};

struct Corpus {
    std::vector<Example> examples;
    Vocabulary vocab;
    int max_tokens = 0;  // including BOS/EOS
};

struct DuplicateSentenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string join(const std::vector<std::string>& ts, const char* sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (i) out += sep;
        out += ts[i];
    }
    return out;
}

inline std::string assignment_str(const std::vector<int>& a, const GrammarSpec& g) {
    std::string out = "(";
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (i) out += ", ";
        out += g.factors[i].name + "=" +
               (a[i] == kUnknownFactor ? std::string("?") : g.factors[i].value_labels[static_cast<std::size_t>(a[i])]);
    }
    return out + ")";
}

}  // namespace detail

inline Corpus generate_corpus(const GrammarSpec& g, std::uint64_t seed) {
    g.validate();
    Corpus corpus;

    const auto assignments = enumerate_assignments(g);
    std::vector<std::vector<std::string>> sentences;
    sentences.reserve(assignments.size());
    std::map<std::string, std::size_t> seen;
    std::set<std::string> tokens;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        auto sent = realize_sentence(assignments[i], g);
        const std::string key = detail::join(sent);
        auto [it, fresh] = seen.emplace(key, i);
        if (!fresh)
            throw DuplicateSentenceError("template collision: assignments " +
                                         detail::assignment_str(assignments[it->second], g) + " and " +
                                         detail::assignment_str(assignments[i], g) + " both realize \"" + key + "\"");
        for (const auto& t : sent) tokens.insert(t);
        sentences.push_back(std::move(sent));
    }

    for (const auto& t : tokens) corpus.vocab.add(t);  // sorted -> stable ids

    corpus.examples.reserve(assignments.size());
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        Example ex;
        ex.factors = assignments[i];
        ex.tokens.push_back(Vocabulary::kBos);
        for (const auto& t : sentences[i]) ex.tokens.push_back(corpus.vocab.id(t));
        ex.tokens.push_back(Vocabulary::kEos);
        corpus.max_tokens = std::max(corpus.max_tokens, static_cast<int>(ex.tokens.size()));
        corpus.examples.push_back(std::move(ex));
    }

    Rng rng = Rng::stream(seed, 0x5A17);
    rng.shuffle(corpus.examples);
    return corpus;
}

inline std::vector<std::string> example_surface(const Example& ex, const Vocabulary& vocab) {
    std::vector<std::string> out;
    for (int id : ex.tokens)
        if (id != Vocabulary::kBos && id != Vocabulary::kEos && id != Vocabulary::kPad)
            out.push_back(vocab.token(id));
    return out;
}

// ------------------------------------------------------------------ file io

inline void save_corpus(const Corpus& corpus, const std::string& corpus_path, const std::string& vocab_path) {
    std::ofstream cf(corpus_path, std::ios::binary);
    if (!cf) throw std::runtime_error("cannot write " + corpus_path);
    for (const auto& ex : corpus.examples) {
        cf << detail::join(example_surface(ex, corpus.vocab)) << '\t';
        for (std::size_t i = 0; i < ex.factors.size(); ++i) {
            if (i) cf << ',';
            cf << ex.factors[i];
        }
        cf << '\n';
    }
    std::ofstream vf(vocab_path, std::ios::binary);
    if (!vf) throw std::runtime_error("cannot write " + vocab_path);
    for (int i = 0; i < corpus.vocab.size(); ++i) vf << corpus.vocab.token(i) << '\t' << i << '\n';
}

inline Corpus load_corpus(const std::string& corpus_path, const std::string& vocab_path) {
    Corpus corpus;

    std::ifstream vf(vocab_path);
    if (!vf) throw std::runtime_error("cannot read " + vocab_path);
    std::string line;
    int expect = 0;
    while (std::getline(vf, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw std::runtime_error(vocab_path + ": malformed line \"" + line + "\"");
        const std::string tok = line.substr(0, tab);
        const int id = std::stoi(line.substr(tab + 1));
        if (id != expect) throw std::runtime_error(vocab_path + ": ids must be dense, got " + std::to_string(id));
        if (id > Vocabulary::kUnk) {
            const int got = corpus.vocab.add(tok);
            if (got != id) throw std::runtime_error(vocab_path + ": unexpected id for token '" + tok + "'");
        } else if (tok != corpus.vocab.token(id)) {
            throw std::runtime_error(vocab_path + ": reserved id " + std::to_string(id) + " must be '" +
                                     corpus.vocab.token(id) + "'");
        }
        ++expect;
    }

    std::ifstream cf(corpus_path);
    if (!cf) throw std::runtime_error("cannot read " + corpus_path);
    while (std::getline(cf, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw std::runtime_error(corpus_path + ": malformed line \"" + line + "\"");
        Example ex;
        ex.tokens.push_back(Vocabulary::kBos);
        std::istringstream ts(line.substr(0, tab));
        std::string tok;
        while (ts >> tok) ex.tokens.push_back(corpus.vocab.id(tok));
        ex.tokens.push_back(Vocabulary::kEos);
        std::istringstream fs(line.substr(tab + 1));
        std::string field;
        while (std::getline(fs, field, ',')) ex.factors.push_back(std::stoi(field));
        corpus.max_tokens = std::max(corpus.max_tokens, static_cast<int>(ex.tokens.size()));
        corpus.examples.push_back(std::move(ex));
    }
    return corpus;
}

}  // namespace dctc
