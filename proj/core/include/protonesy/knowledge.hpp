#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace protonesy {

// Factorized concept space C = [h_1] x ... x [h_k]. Atoms are the
// one-hot indicator variables (group i, class c), flattened group by group.
struct ConceptSpace {
    std::vector<int> sizes;  // h_1 ... h_k, each >= 2

    ConceptSpace() = default;
    explicit ConceptSpace(std::vector<int> group_sizes);

    int num_groups() const { return static_cast<int>(sizes.size()); }
    int group_size(int group) const { return sizes[static_cast<std::size_t>(group)]; }
    int num_atoms() const;
    int atom_index(int group, int cls) const;
    // Inverse of atom_index.
    std::pair<int, int> atom_of(int index) const;

    bool operator==(const ConceptSpace& other) const { return sizes == other.sizes; }
};

struct Atom {
    int group = 0;
    int cls = 0;
    bool operator==(const Atom& other) const { return group == other.group && cls == other.cls; }
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t byte_offset)
        : std::runtime_error(message + " (at offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::size_t offset;
};

// Propositional formula over the atoms of one ConceptSpace.
// And/Or are n-ary; Implies/Iff binary; Not unary.
class Formula {
public:
    enum class Kind { True, False, Atom, Not, And, Or, Implies, Iff };

    struct Node {
        Kind kind = Kind::True;
        protonesy::Atom atom;          // valid when kind == Atom
        std::vector<Node> children;    // arity per kind
    };

    Formula() = default;
    Formula(Node root, ConceptSpace space) : root_(std::move(root)), space_(std::move(space)) {}

    static Formula make_true(const ConceptSpace& space);
    static Formula make_false(const ConceptSpace& space);
    static Formula make_atom(const ConceptSpace& space, Atom atom);

    const Node& root() const { return root_; }
    const ConceptSpace& space() const { return space_; }

    bool structurally_equal(const Formula& other) const;
    std::string to_string() const;

private:
    Node root_;
    ConceptSpace space_;
};

// One boolean per atom, flattened over all groups.
using Assignment = std::vector<std::uint8_t>;

enum class EnumerationMode { Free, OneHot };

// All satisfying assignments of a formula, deterministically ordered:
// Free mode ascends in vector-lexicographic order (atom 0 most significant);
// OneHot mode ascends in class-tuple lexicographic order.
struct ModelSet {
    std::vector<Assignment> models;
    EnumerationMode mode = EnumerationMode::Free;
    int num_atoms = 0;

    bool empty() const { return models.empty(); }
    std::size_t size() const { return models.size(); }
};

// Grammar (UTF-8, '#' starts a line comment, one formula per file/string):
//   iff     := implies ('<->' iff)?              right-associative
//   implies := or ('->' implies)?                right-associative
//   or      := and ('|' and)*                    n-ary
//   and     := unary ('&' unary)*                n-ary
//   unary   := '~' unary | primary
//   primary := 'true' | 'false' | atom | '(' iff ')'
//   atom    := 'c[' group ']=' class
Formula parse_formula(const std::string& text, const ConceptSpace& space);

// Round-trips through parse_formula up to whitespace.
std::string print_formula(const Formula& f);

bool evaluate(const Formula& f, const Assignment& nu);

// Free mode requires num_atoms <= 24; OneHot requires prod(h_i) <= 1e7.
ModelSet enumerate_models(const Formula& f, EnumerationMode mode);

// Example 1's MNIST-sum knowledge: a disjunction over all one-hot pairs
// (c1, c2) with c1 + c2 = y, each conjunct pinning every atom of both groups.
Formula sum_knowledge(int y, const ConceptSpace& space);

}  // namespace protonesy
