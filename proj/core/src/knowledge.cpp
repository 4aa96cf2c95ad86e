#include "protonesy/knowledge.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace protonesy {

ConceptSpace::ConceptSpace(std::vector<int> group_sizes) : sizes(std::move(group_sizes)) {
    if (sizes.empty()) throw std::invalid_argument("ConceptSpace: k must be >= 1");
    for (int h : sizes) {
        if (h < 2) throw std::invalid_argument("ConceptSpace: every group size must be >= 2");
    }
}

int ConceptSpace::num_atoms() const {
    int n = 0;
    for (int h : sizes) n += h;
    return n;
}

int ConceptSpace::atom_index(int group, int cls) const {
    if (group < 0 || group >= num_groups()) throw std::out_of_range("atom group out of range");
    if (cls < 0 || cls >= sizes[static_cast<std::size_t>(group)])
        throw std::out_of_range("atom class out of range");
    int base = 0;
    for (int i = 0; i < group; ++i) base += sizes[static_cast<std::size_t>(i)];
    return base + cls;
}

std::pair<int, int> ConceptSpace::atom_of(int index) const {
    int remaining = index;
    for (int i = 0; i < num_groups(); ++i) {
        const int h = sizes[static_cast<std::size_t>(i)];
        if (remaining < h) return {i, remaining};
        remaining -= h;
    }
    throw std::out_of_range("atom index out of range");
}

Formula Formula::make_true(const ConceptSpace& space) {
    return Formula(Node{Kind::True, {}, {}}, space);
}

Formula Formula::make_false(const ConceptSpace& space) {
    return Formula(Node{Kind::False, {}, {}}, space);
}

Formula Formula::make_atom(const ConceptSpace& space, Atom atom) {
    space.atom_index(atom.group, atom.cls);  // range check
    return Formula(Node{Kind::Atom, atom, {}}, space);
}

namespace {

bool nodes_equal(const Formula::Node& a, const Formula::Node& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == Formula::Kind::Atom && !(a.atom == b.atom)) return false;
    if (a.children.size() != b.children.size()) return false;
    for (std::size_t i = 0; i < a.children.size(); ++i) {
        if (!nodes_equal(a.children[i], b.children[i])) return false;
    }
    return true;
}

// Higher value binds tighter.
int precedence(Formula::Kind k) {
    switch (k) {
        case Formula::Kind::Iff: return 1;
        case Formula::Kind::Implies: return 2;
        case Formula::Kind::Or: return 3;
        case Formula::Kind::And: return 4;
        case Formula::Kind::Not: return 5;
        default: return 6;  // atoms and constants
    }
}

void print_node(const Formula::Node& n, std::ostringstream& out, int parent_prec, bool tie_needs_parens) {
    const int prec = precedence(n.kind);
    const bool parens = prec < parent_prec || (prec == parent_prec && tie_needs_parens);
    if (parens) out << '(';
    switch (n.kind) {
        case Formula::Kind::True: out << "true"; break;
        case Formula::Kind::False: out << "false"; break;
        case Formula::Kind::Atom:
            out << "c[" << n.atom.group << "]=" << n.atom.cls;
            break;
        case Formula::Kind::Not:
            out << '~';
            print_node(n.children[0], out, prec, false);
            break;
        case Formula::Kind::And:
        case Formula::Kind::Or: {
            const char* op = n.kind == Formula::Kind::And ? " & " : " | ";
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                if (i > 0) out << op;
                // Same-kind children are parenthesized so the parser's chain
                // flattening cannot merge them (exact structural round-trip).
                print_node(n.children[i], out, prec, true);
            }
            break;
        }
        case Formula::Kind::Implies:
        case Formula::Kind::Iff: {
            const char* op = n.kind == Formula::Kind::Implies ? " -> " : " <-> ";
            print_node(n.children[0], out, prec, true);   // right-assoc: left operand at same level needs parens
            out << op;
            print_node(n.children[1], out, prec, false);
            break;
        }
    }
    if (parens) out << ')';
}

class Parser {
public:
    Parser(const std::string& text, const ConceptSpace& space) : text_(text), space_(space) {}

    Formula::Node parse() {
        skip_ws();
        Formula::Node n = parse_iff();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return n;
    }

private:
    const std::string& text_;
    const ConceptSpace& space_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

    void skip_ws() {
        while (pos_ < text_.size()) {
            const char c = text_[pos_];
            if (c == '#') {
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    bool try_consume(const char* token) {
        skip_ws();
        const std::size_t len = std::string(token).size();
        if (text_.compare(pos_, len, token) == 0) {
            pos_ += len;
            return true;
        }
        return false;
    }

    bool peek(const char* token) {
        skip_ws();
        return text_.compare(pos_, std::string(token).size(), token) == 0;
    }

    int parse_uint() {
        skip_ws();
        if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_])))
            fail("expected a number");
        long value = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            value = value * 10 + (text_[pos_] - '0');
            if (value > 1000000) fail("number too large");
            ++pos_;
        }
        return static_cast<int>(value);
    }

    Formula::Node parse_iff() {
        Formula::Node lhs = parse_implies();
        if (try_consume("<->")) {
            Formula::Node rhs = parse_iff();
            Formula::Node n{Formula::Kind::Iff, {}, {}};
            n.children.push_back(std::move(lhs));
            n.children.push_back(std::move(rhs));
            return n;
        }
        return lhs;
    }

    Formula::Node parse_implies() {
        Formula::Node lhs = parse_or();
        // '->' must not swallow the '-' of a future token; grammar has no other '-'.
        if (peek("->")) {
            try_consume("->");
            Formula::Node rhs = parse_implies();
            Formula::Node n{Formula::Kind::Implies, {}, {}};
            n.children.push_back(std::move(lhs));
            n.children.push_back(std::move(rhs));
            return n;
        }
        return lhs;
    }

    Formula::Node parse_or() {
        Formula::Node first = parse_and();
        if (!peek("|")) return first;
        Formula::Node n{Formula::Kind::Or, {}, {}};
        n.children.push_back(std::move(first));
        while (try_consume("|")) n.children.push_back(parse_and());
        return n;
    }

    Formula::Node parse_and() {
        Formula::Node first = parse_unary();
        if (!peek("&")) return first;
        Formula::Node n{Formula::Kind::And, {}, {}};
        n.children.push_back(std::move(first));
        while (try_consume("&")) n.children.push_back(parse_unary());
        return n;
    }

    Formula::Node parse_unary() {
        if (try_consume("~")) {
            Formula::Node n{Formula::Kind::Not, {}, {}};
            n.children.push_back(parse_unary());
            return n;
        }
        return parse_primary();
    }

    Formula::Node parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        if (try_consume("(")) {
            Formula::Node n = parse_iff();
            if (!try_consume(")")) fail("expected ')'");
            return n;
        }
        if (try_consume("true")) return Formula::Node{Formula::Kind::True, {}, {}};
        if (try_consume("false")) return Formula::Node{Formula::Kind::False, {}, {}};
        if (try_consume("c[")) {
            const int group = parse_uint();
            if (!try_consume("]")) fail("expected ']'");
            if (!try_consume("=")) fail("expected '='");
            const int cls = parse_uint();
            if (group < 0 || group >= space_.num_groups()) fail("unknown atom: group out of range");
            if (cls < 0 || cls >= space_.group_size(group)) fail("unknown atom: class out of range");
            return Formula::Node{Formula::Kind::Atom, Atom{group, cls}, {}};
        }
        fail("expected a formula");
    }
};

bool eval_node(const Formula::Node& n, const ConceptSpace& space, const Assignment& nu) {
    switch (n.kind) {
        case Formula::Kind::True: return true;
        case Formula::Kind::False: return false;
        case Formula::Kind::Atom:
            return nu[static_cast<std::size_t>(space.atom_index(n.atom.group, n.atom.cls))] != 0;
        case Formula::Kind::Not: return !eval_node(n.children[0], space, nu);
        case Formula::Kind::And:
            for (const auto& c : n.children)
                if (!eval_node(c, space, nu)) return false;
            return true;
        case Formula::Kind::Or:
            for (const auto& c : n.children)
                if (eval_node(c, space, nu)) return true;
            return false;
        case Formula::Kind::Implies:
            return !eval_node(n.children[0], space, nu) || eval_node(n.children[1], space, nu);
        case Formula::Kind::Iff:
            return eval_node(n.children[0], space, nu) == eval_node(n.children[1], space, nu);
    }
    return false;
}

}  // namespace

bool Formula::structurally_equal(const Formula& other) const {
    return space_ == other.space_ && nodes_equal(root_, other.root_);
}

std::string Formula::to_string() const { return print_formula(*this); }

Formula parse_formula(const std::string& text, const ConceptSpace& space) {
    Parser p(text, space);
    return Formula(p.parse(), space);
}

std::string print_formula(const Formula& f) {
    std::ostringstream out;
    print_node(f.root(), out, 0, false);
    return out.str();
}

bool evaluate(const Formula& f, const Assignment& nu) {
    if (static_cast<int>(nu.size()) != f.space().num_atoms())
        throw std::invalid_argument("evaluate: assignment does not cover the concept space");
    return eval_node(f.root(), f.space(), nu);
}

ModelSet enumerate_models(const Formula& f, EnumerationMode mode) {
    const ConceptSpace& space = f.space();
    const int n = space.num_atoms();
    ModelSet out;
    out.mode = mode;
    out.num_atoms = n;

    if (mode == EnumerationMode::Free) {
        if (n > 24) throw std::invalid_argument("enumerate_models: free mode limited to 24 atoms");
        Assignment nu(static_cast<std::size_t>(n), 0);
        const std::uint64_t total = 1ULL << n;
        for (std::uint64_t code = 0; code < total; ++code) {
            for (int a = 0; a < n; ++a)
                nu[static_cast<std::size_t>(a)] =
                    static_cast<std::uint8_t>((code >> (n - 1 - a)) & 1ULL);  // atom 0 most significant
            if (evaluate(f, nu)) out.models.push_back(nu);
        }
        return out;
    }

    double combos = 1.0;
    for (int h : space.sizes) combos *= h;
    if (combos > 1e7) throw std::invalid_argument("enumerate_models: one_hot mode limited to 1e7 tuples");

    const int k = space.num_groups();
    std::vector<int> tuple(static_cast<std::size_t>(k), 0);
    Assignment nu(static_cast<std::size_t>(n), 0);
    while (true) {
        std::fill(nu.begin(), nu.end(), 0);
        for (int i = 0; i < k; ++i)
            nu[static_cast<std::size_t>(space.atom_index(i, tuple[static_cast<std::size_t>(i)]))] = 1;
        if (evaluate(f, nu)) out.models.push_back(nu);
        int i = k - 1;
        while (i >= 0 && ++tuple[static_cast<std::size_t>(i)] == space.group_size(i)) {
            tuple[static_cast<std::size_t>(i)] = 0;
            --i;
        }
        if (i < 0) break;
    }
    return out;
}

Formula sum_knowledge(int y, const ConceptSpace& space) {
    if (space.num_groups() != 2 || space.sizes != std::vector<int>{10, 10})
        throw std::invalid_argument("sum_knowledge: requires k=2, h=[10,10]");
    if (y < 0 || y > 18) throw std::out_of_range("sum_knowledge: y must be in [0, 18]");

    Formula::Node disjunction{Formula::Kind::Or, {}, {}};
    for (int c1 = 0; c1 <= 9; ++c1) {
        const int c2 = y - c1;
        if (c2 < 0 || c2 > 9) continue;
        Formula::Node conjunct{Formula::Kind::And, {}, {}};
        for (int group = 0; group < 2; ++group) {
            const int on = group == 0 ? c1 : c2;
            for (int cls = 0; cls <= 9; ++cls) {
                Formula::Node atom{Formula::Kind::Atom, Atom{group, cls}, {}};
                if (cls == on) {
                    conjunct.children.push_back(std::move(atom));
                } else {
                    Formula::Node neg{Formula::Kind::Not, {}, {}};
                    neg.children.push_back(std::move(atom));
                    conjunct.children.push_back(std::move(neg));
                }
            }
        }
        disjunction.children.push_back(std::move(conjunct));
    }
    if (disjunction.children.size() == 1)
        return Formula(std::move(disjunction.children[0]), space);
    return Formula(std::move(disjunction), space);
}

}  // namespace protonesy
