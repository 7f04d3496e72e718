#pragma once
// Synthetic sentence grammar: named generative factors, a closed verb/object
// inventory with explicit surface forms, deterministic realization of factor
// assignments, and the rule-table extractor that inverts it.

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace dctc {

constexpr int kUnknownFactor = -1;

struct FactorSpec {
    std::string name;
    int cardinality = 0;
    std::vector<std::string> value_labels;
};

struct VerbEntry {
    std::string lemma;
    std::string base;      // attend
    std::string pres3sg;   // attends
    std::string past;      // attended
    std::string gerund;    // attending
    std::string object_sg; // party   (always preceded by "the")
    std::string object_pl; // parties
};

// Factor value indices, fixed by the value_labels order below.
namespace factor_value {
inline constexpr int kTensePresent = 0, kTenseFuture = 1, kTensePast = 2;
inline constexpr int kAffirmative = 0, kNegative = 1;
inline constexpr int kSingular = 0, kPlural = 1;
inline constexpr int kFirst = 0, kSecond = 1, kThird = 2;
inline constexpr int kMale = 0, kFemale = 1;
inline constexpr int kInterrogative = 0, kDeclarative = 1;
inline constexpr int kGerund = 0, kInfinitive = 1;
}  // namespace factor_value

struct GrammarSpec {
    std::vector<FactorSpec> factors;
    std::vector<VerbEntry> verbs;

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < factors.size(); ++i)
            if (factors[i].name == name) return static_cast<int>(i);
        return -1;
    }

    int value(const std::vector<int>& assignment, const std::string& name, int fallback) const {
        const int i = index_of(name);
        return i < 0 ? fallback : assignment[static_cast<std::size_t>(i)];
    }

    long assignment_space_size() const {
        long n = 1;
        for (const auto& f : factors) n *= f.cardinality;
        return n;
    }

    void validate() const {
        if (factors.empty()) throw std::invalid_argument("GrammarSpec: no factors");
        for (const auto& f : factors) {
            if (f.cardinality < 1 || static_cast<int>(f.value_labels.size()) != f.cardinality)
                throw std::invalid_argument("GrammarSpec: factor '" + f.name + "' has inconsistent labels");
            std::unordered_set<std::string> seen(f.value_labels.begin(), f.value_labels.end());
            if (static_cast<int>(seen.size()) != f.cardinality)
                throw std::invalid_argument("GrammarSpec: factor '" + f.name + "' has duplicate labels");
        }
        const int vo = index_of("verb_obj");
        if (vo >= 0 && factors[static_cast<std::size_t>(vo)].cardinality != static_cast<int>(verbs.size()))
            throw std::invalid_argument("GrammarSpec: verb_obj cardinality does not match inventory size");
        std::unordered_set<std::string> nouns;
        for (const auto& v : verbs) {
            // sg == pl within one entry is allowed (invariant plurals); the
            // generate-time duplicate check reports any sentence collision.
            std::unordered_set<std::string> entry = {v.object_sg, v.object_pl};
            for (const auto& n : entry)
                if (!nouns.insert(n).second)
                    throw std::invalid_argument("GrammarSpec: object noun '" + n + "' is not unique");
        }
    }

    static GrammarSpec desk(int verb_count = 8);
    static GrammarSpec full_table(int verb_count = 24);
};

namespace detail {

inline const std::vector<VerbEntry>& verb_inventory() {
    static const std::vector<VerbEntry> inv = {
        {"attend", "attend", "attends", "attended", "attending", "party", "parties"},
        {"sign", "sign", "signs", "signed", "signing", "paper", "papers"},
        {"join", "join", "joins", "joined", "joining", "wedding", "weddings"},
        {"watch", "watch", "watches", "watched", "watching", "movie", "movies"},
        {"visit", "visit", "visits", "visited", "visiting", "museum", "museums"},
        {"clean", "clean", "cleans", "cleaned", "cleaning", "house", "houses"},
        {"play", "play", "plays", "played", "playing", "game", "games"},
        {"call", "call", "calls", "called", "calling", "doctor", "doctors"},
        {"answer", "answer", "answers", "answered", "answering", "question", "questions"},
        {"bake", "bake", "bakes", "baked", "baking", "cake", "cakes"},
        {"carry", "carry", "carries", "carried", "carrying", "box", "boxes"},
        {"climb", "climb", "climbs", "climbed", "climbing", "mountain", "mountains"},
        {"cook", "cook", "cooks", "cooked", "cooking", "dinner", "dinners"},
        {"cross", "cross", "crosses", "crossed", "crossing", "street", "streets"},
        {"deliver", "deliver", "delivers", "delivered", "delivering", "package", "packages"},
        {"enjoy", "enjoy", "enjoys", "enjoyed", "enjoying", "show", "shows"},
        {"finish", "finish", "finishes", "finished", "finishing", "race", "races"},
        {"follow", "follow", "follows", "followed", "following", "road", "roads"},
        {"guard", "guard", "guards", "guarded", "guarding", "castle", "castles"},
        {"lock", "lock", "locks", "locked", "locking", "door", "doors"},
        {"order", "order", "orders", "ordered", "ordering", "pizza", "pizzas"},
        {"paint", "paint", "paints", "painted", "painting", "wall", "walls"},
        {"plant", "plant", "plants", "planted", "planting", "tree", "trees"},
        {"wash", "wash", "washes", "washed", "washing", "dish", "dishes"},
    };
    return inv;
}

inline std::vector<VerbEntry> take_verbs(int count) {
    const auto& inv = verb_inventory();
    if (count < 1 || count > static_cast<int>(inv.size()))
        throw std::invalid_argument("verb inventory holds 1.." + std::to_string(inv.size()) + " entries, asked for " +
                                    std::to_string(count));
    return {inv.begin(), inv.begin() + count};
}

inline std::vector<std::string> verb_labels(const std::vector<VerbEntry>& verbs) {
    std::vector<std::string> labels;
    labels.reserve(verbs.size());
    for (const auto& v : verbs) labels.push_back(v.lemma);
    return labels;
}

}  // namespace detail

inline GrammarSpec GrammarSpec::desk(int verb_count) {
    GrammarSpec g;
    g.verbs = detail::take_verbs(verb_count);
    g.factors = {
        {"tense", 3, {"present", "future", "past"}},
        {"negation", 2, {"affirmative", "negative"}},
        {"subject_number", 2, {"singular", "plural"}},
        {"person", 3, {"1st", "2nd", "3rd"}},
        {"verb_obj", verb_count, detail::verb_labels(g.verbs)},
    };
    g.validate();
    return g;
}

inline GrammarSpec GrammarSpec::full_table(int verb_count) {
    GrammarSpec g;
    g.verbs = detail::take_verbs(verb_count);
    g.factors = {
        {"verb_obj", verb_count, detail::verb_labels(g.verbs)},
        {"gender", 2, {"male", "female"}},
        {"negation", 2, {"affirmative", "negative"}},
        {"tense", 3, {"present", "future", "past"}},
        {"subject_number", 2, {"singular", "plural"}},
        {"object_number", 2, {"singular", "plural"}},
        {"sentence_type", 2, {"interrogative", "declarative"}},
        {"person", 3, {"1st", "2nd", "3rd"}},
        {"verb_style", 2, {"gerund", "infinitive"}},
    };
    g.validate();
    return g;
}

// Gender only surfaces on 3rd-person-singular subjects (he/she). Assignments
// that cannot realize it carry the canonical value 0 so that every listed
// assignment maps to a distinct sentence.
inline bool gender_realizable(const std::vector<int>& a, const GrammarSpec& g) {
    using namespace factor_value;
    return g.value(a, "person", kThird) == kThird && g.value(a, "subject_number", kSingular) == kSingular;
}

inline std::vector<std::vector<int>> enumerate_assignments(const GrammarSpec& g) {
    const int gender_idx = g.index_of("gender");
    std::vector<std::vector<int>> out;
    std::vector<int> a(g.factors.size(), 0);
    while (true) {
        if (gender_idx < 0 || a[static_cast<std::size_t>(gender_idx)] == 0 || gender_realizable(a, g))
            out.push_back(a);
        int i = static_cast<int>(a.size()) - 1;
        for (; i >= 0; --i) {
            if (++a[static_cast<std::size_t>(i)] < g.factors[static_cast<std::size_t>(i)].cardinality) break;
            a[static_cast<std::size_t>(i)] = 0;
        }
        if (i < 0) break;
    }
    return out;
}

inline std::vector<std::string> realize_sentence(const std::vector<int>& assignment, const GrammarSpec& g) {
    using namespace factor_value;
    if (assignment.size() != g.factors.size())
        throw std::invalid_argument("realize_sentence: assignment has " + std::to_string(assignment.size()) +
                                    " entries for " + std::to_string(g.factors.size()) + " factors");
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] < 0 || assignment[i] >= g.factors[i].cardinality)
            throw std::out_of_range("realize_sentence: factor '" + g.factors[i].name + "' value " +
                                    std::to_string(assignment[i]) + " out of range");

    const int tense = g.value(assignment, "tense", kTensePresent);
    const bool negated = g.value(assignment, "negation", kAffirmative) == kNegative;
    const int subj_num = g.value(assignment, "subject_number", kSingular);
    const int person = g.value(assignment, "person", kSecond);
    const int gender = g.value(assignment, "gender", kMale);
    const int obj_num = g.value(assignment, "object_number", kSingular);
    const bool question = g.value(assignment, "sentence_type", kDeclarative) == kInterrogative;
    const bool gerund = g.value(assignment, "verb_style", kInfinitive) == kGerund;
    const VerbEntry& verb = g.verbs[static_cast<std::size_t>(g.value(assignment, "verb_obj", 0))];

    std::vector<std::string> subject;
    if (person == kFirst) subject = subj_num == kSingular ? std::vector<std::string>{"i"} : std::vector<std::string>{"we"};
    else if (person == kSecond) subject = subj_num == kSingular ? std::vector<std::string>{"you"} : std::vector<std::string>{"you", "all"};
    else if (subj_num == kPlural) subject = {"they"};
    else subject = {gender == kFemale ? "she" : "he"};

    const bool first_sg = person == kFirst && subj_num == kSingular;
    const bool third_sg = person == kThird && subj_num == kSingular;

    std::string aux_head;               // fronted in questions
    std::vector<std::string> aux_tail;  // stays with the verb
    std::string verb_form;
    if (gerund) {
        if (tense == kTenseFuture) {
            aux_head = "will";
            aux_tail = {"be"};
        } else if (tense == kTensePast) {
            aux_head = (first_sg || third_sg) ? "was" : "were";
        } else {
            aux_head = first_sg ? "am" : (third_sg ? "is" : "are");
        }
        verb_form = verb.gerund;
    } else {
        if (tense == kTenseFuture) {
            aux_head = "will";
            verb_form = verb.base;
        } else if (negated || question) {
            aux_head = tense == kTensePast ? "did" : (third_sg ? "does" : "do");
            verb_form = verb.base;
        } else {
            verb_form = tense == kTensePast ? verb.past : (third_sg ? verb.pres3sg : verb.base);
        }
    }

    std::vector<std::string> out;
    auto append = [&out](const std::vector<std::string>& ts) { out.insert(out.end(), ts.begin(), ts.end()); };
    if (question) {
        out.push_back(aux_head);
        append(subject);
        if (negated) out.push_back("not");
        append(aux_tail);
    } else {
        append(subject);
        if (!aux_head.empty()) out.push_back(aux_head);
        if (negated) out.push_back("not");
        append(aux_tail);
    }
    out.push_back(verb_form);
    out.push_back("the");
    out.push_back(obj_num == kPlural ? verb.object_pl : verb.object_sg);
    return out;
}

// Rule-table inverse of realize_sentence. Unrecognized evidence yields
// kUnknownFactor per factor, never a throw.
inline std::vector<int> extract_factors(const std::vector<std::string>& tokens, const GrammarSpec& g) {
    using namespace factor_value;
    std::unordered_map<std::string, int> base, pres3sg, past, gerund_tbl, noun_sg, noun_pl;
    for (std::size_t i = 0; i < g.verbs.size(); ++i) {
        const auto& v = g.verbs[i];
        base[v.base] = static_cast<int>(i);
        pres3sg[v.pres3sg] = static_cast<int>(i);
        past[v.past] = static_cast<int>(i);
        gerund_tbl[v.gerund] = static_cast<int>(i);
        noun_sg[v.object_sg] = static_cast<int>(i);
        noun_pl[v.object_pl] = static_cast<int>(i);
    }
    static const std::unordered_set<std::string> aux_set = {"do", "does", "did", "will", "am",
                                                            "is", "are", "was", "were"};

    auto contains = [&tokens](const std::string& w) {
        return std::find(tokens.begin(), tokens.end(), w) != tokens.end();
    };
    auto find_in = [&tokens](const std::unordered_map<std::string, int>& tbl) {
        for (const auto& t : tokens) {
            auto it = tbl.find(t);
            if (it != tbl.end()) return it->second;
        }
        return kUnknownFactor;
    };

    // tense
    int tense = kUnknownFactor;
    if (contains("will")) tense = kTenseFuture;
    else if (contains("did") || contains("was") || contains("were") || find_in(past) >= 0) tense = kTensePast;
    else if (contains("do") || contains("does") || contains("am") || contains("is") || contains("are") ||
             find_in(pres3sg) >= 0 || find_in(base) >= 0 || find_in(gerund_tbl) >= 0)
        tense = kTensePresent;

    // negation: "not" marks negative; affirmative needs verb evidence
    int negation = kUnknownFactor;
    if (contains("not")) negation = kNegative;
    else if (tense != kUnknownFactor) negation = kAffirmative;

    // verb/object pairing
    int verb = find_in(base);
    if (verb < 0) verb = find_in(pres3sg);
    if (verb < 0) verb = find_in(past);
    if (verb < 0) verb = find_in(gerund_tbl);
    int obj_num = kUnknownFactor;
    int obj_verb = find_in(noun_sg);
    if (obj_verb >= 0) obj_num = kSingular;
    else {
        obj_verb = find_in(noun_pl);
        if (obj_verb >= 0) obj_num = kPlural;
    }
    if (verb < 0) verb = obj_verb;

    // verb style
    int style = kUnknownFactor;
    if (find_in(gerund_tbl) >= 0) style = kGerund;
    else if (find_in(base) >= 0 || find_in(pres3sg) >= 0 || find_in(past) >= 0) style = kInfinitive;

    // sentence type
    int sent = kUnknownFactor;
    if (!tokens.empty() && aux_set.count(tokens.front())) sent = kInterrogative;
    else if (tense != kUnknownFactor) sent = kDeclarative;

    // subject
    int person = kUnknownFactor, subj_num = kUnknownFactor, gender = kUnknownFactor;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& t = tokens[i];
        if (t == "i") { person = kFirst; subj_num = kSingular; break; }
        if (t == "we") { person = kFirst; subj_num = kPlural; break; }
        if (t == "you") {
            person = kSecond;
            subj_num = (i + 1 < tokens.size() && tokens[i + 1] == "all") ? kPlural : kSingular;
            break;
        }
        if (t == "he" || t == "she") {
            person = kThird;
            subj_num = kSingular;
            gender = t == "she" ? kFemale : kMale;
            break;
        }
        if (t == "they") { person = kThird; subj_num = kPlural; break; }
    }

    std::vector<int> out(g.factors.size(), kUnknownFactor);
    for (std::size_t i = 0; i < g.factors.size(); ++i) {
        const std::string& name = g.factors[i].name;
        if (name == "tense") out[i] = tense;
        else if (name == "negation") out[i] = negation;
        else if (name == "subject_number") out[i] = subj_num;
        else if (name == "person") out[i] = person;
        else if (name == "verb_obj") out[i] = verb;
        else if (name == "gender") out[i] = gender;
        else if (name == "object_number") out[i] = obj_num;
        else if (name == "sentence_type") out[i] = sent;
        else if (name == "verb_style") out[i] = style;
    }
    return out;
}

}  // namespace dctc
