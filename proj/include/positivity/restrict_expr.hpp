#pragma once

#include <cctype>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "positivity/dataset.hpp"
#include "positivity/errors.hpp"

namespace positivity {

// Restriction predicates over covariate patterns, e.g. "!(V=0&W=0)".
//
//   expr := or
//   or   := and ('|' and)*
//   and  := not ('&' not)*
//   not  := '!' not | '(' or ')' | atom
//   atom := NAME '=' INT | NAME '!=' INT
//
// Names are covariate names; whitespace is ignored.

class RestrictExpr {
 public:
  static RestrictExpr parse(const std::string& text, const std::vector<std::string>& covariate_names) {
    Parser p{text, 0, covariate_names};
    RestrictExpr e;
    e.root_ = p.parse_or();
    p.skip_ws();
    if (p.pos != text.size())
      throw Error(ErrorCode::InvalidArgument,
                  "restriction: unexpected trailing input at position " + std::to_string(p.pos));
    e.text_ = text;
    return e;
  }

  bool operator()(const Pattern& z) const { return eval(*root_, z); }
  const std::string& text() const { return text_; }

  std::function<bool(const Pattern&)> predicate() const {
    auto root = root_;
    return [root](const Pattern& z) { return eval(*root, z); };
  }

 private:
  struct Node {
    enum Kind { And, Or, Not, Eq } kind;
    std::shared_ptr<Node> lhs, rhs;
    int covariate = -1;
    int level = 0;
  };

  static bool eval(const Node& n, const Pattern& z) {
    switch (n.kind) {
      case Node::And: return eval(*n.lhs, z) && eval(*n.rhs, z);
      case Node::Or: return eval(*n.lhs, z) || eval(*n.rhs, z);
      case Node::Not: return !eval(*n.lhs, z);
      case Node::Eq: return z.at(static_cast<std::size_t>(n.covariate)) == n.level;
    }
    return false;
  }

  struct Parser {
    const std::string& s;
    std::size_t pos;
    const std::vector<std::string>& names;

    void skip_ws() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    bool eat(char c) {
      skip_ws();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }

    [[noreturn]] void fail(const std::string& what) {
      throw Error(ErrorCode::InvalidArgument,
                  "restriction: " + what + " at position " + std::to_string(pos));
    }

    std::shared_ptr<Node> parse_or() {
      auto lhs = parse_and();
      while (eat('|')) {
        auto n = std::make_shared<Node>();
        n->kind = Node::Or;
        n->lhs = lhs;
        n->rhs = parse_and();
        lhs = n;
      }
      return lhs;
    }

    std::shared_ptr<Node> parse_and() {
      auto lhs = parse_not();
      while (true) {
        skip_ws();
        // '&' only; "!=" inside atoms is consumed by parse_atom
        if (pos < s.size() && s[pos] == '&') {
          ++pos;
          auto n = std::make_shared<Node>();
          n->kind = Node::And;
          n->lhs = lhs;
          n->rhs = parse_not();
          lhs = n;
        } else {
          return lhs;
        }
      }
    }

    std::shared_ptr<Node> parse_not() {
      skip_ws();
      if (eat('!')) {
        auto n = std::make_shared<Node>();
        n->kind = Node::Not;
        n->lhs = parse_not();
        return n;
      }
      if (eat('(')) {
        auto inner = parse_or();
        if (!eat(')')) fail("expected ')'");
        return inner;
      }
      return parse_atom();
    }

    std::shared_ptr<Node> parse_atom() {
      skip_ws();
      std::size_t start = pos;
      while (pos < s.size() &&
             (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_' || s[pos] == '.'))
        ++pos;
      if (pos == start) fail("expected covariate name");
      std::string name = s.substr(start, pos - start);
      int cov = -1;
      for (std::size_t j = 0; j < names.size(); ++j)
        if (names[j] == name) cov = static_cast<int>(j);
      if (cov < 0) fail("unknown covariate '" + name + "'");

      skip_ws();
      bool negated = false;
      if (pos + 1 < s.size() && s[pos] == '!' && s[pos + 1] == '=') {
        negated = true;
        pos += 2;
      } else if (!eat('=')) {
        fail("expected '=' or '!='");
      }

      skip_ws();
      std::size_t vstart = pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
      if (pos == vstart) fail("expected level code");
      auto n = std::make_shared<Node>();
      n->kind = Node::Eq;
      n->covariate = cov;
      n->level = std::stoi(s.substr(vstart, pos - vstart));
      if (!negated) return n;
      auto outer = std::make_shared<Node>();
      outer->kind = Node::Not;
      outer->lhs = n;
      return outer;
    }
  };

  std::shared_ptr<Node> root_;
  std::string text_;
};

}  // namespace positivity
